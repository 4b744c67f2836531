#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "slowfast/rng.hpp"

namespace slowfast {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class FamilyTag { linear, gradient61, tamd62, custom };

std::string_view to_string(FamilyTag tag);
FamilyTag family_from_string(std::string_view name);

/// Scalar linear slow-fast model
///   b_X = -kappa_x (x - y), sigma_X = sigma_x,
///   b_Y = -kappa_y (y - x), sigma_Y = sigma_y.
struct LinearParams {
  double kappa_x = 1.0;
  double kappa_y = 1.0;
  double sigma_x = 1.0;
  double sigma_y = 1.0;
};

/// One slow-fast system. b_X and sigma_X are the O(1) coefficients: the
/// integrator multiplies them by 1/epsilon and 1/sqrt(epsilon).
struct ModelSpec {
  std::size_t n = 1;
  std::size_t m = 1;
  double epsilon = 1.0;
  std::function<Vec(const Vec& x, const Vec& y)> b_X;
  std::function<Mat(const Vec& x, const Vec& y)> sigma_X;
  std::function<Vec(const Vec& x, const Vec& y)> b_Y;
  std::function<Mat(const Vec& y)> sigma_Y;
  FamilyTag family_tag = FamilyTag::custom;

  /// Drift stiffness scale of b_X (unscaled units). Estimated numerically
  /// when absent.
  std::optional<double> stiffness;

  /// Optional analytic knowledge of mu^y. The sampler maps n standard
  /// normals to a draw from mu^y; the log-density is unnormalized.
  std::function<Vec(const Vec& y, std::span<const double> normals)> mu_sampler;
  std::function<double(const Vec& x, const Vec& y)> mu_log_density;
  std::function<Vec(const Vec& y)> analytic_bbar;

  std::optional<LinearParams> linear;

  Mat a_X(const Vec& x, const Vec& y) const;
  Mat a_Y(const Vec& y) const;

  /// Checks dimensions, epsilon, and that sigma_Y is invertible (smallest
  /// singular value > 1e-10) at the given probe points.
  void validate(std::span<const Vec> y_probes) const;
  void validate() const;
};

struct SimConfig {
  double t_final = 1.0;
  double dt = 0.01;
  /// Fast substeps per slow step; 0 selects ceil(10 dt stiffness / epsilon).
  std::size_t substeps = 0;
  std::uint64_t seed = 0;
  Vec x0;
  Vec y0;
  bool init_fast_from_mu = false;
  std::uint32_t replica = 0;
};

/// Number of slow steps; throws unless round(t_final/dt) covers [0, T].
std::size_t slow_steps(const SimConfig& config);

struct SeedRecord {
  std::uint64_t seed = 0;
  std::vector<StreamId> streams;
};

/// Path on the slow grid. Row k of x_path / y_path is the state at times[k].
struct Trajectory {
  std::vector<double> times;
  Mat x_path;
  Mat y_path;
  SeedRecord seed_record;
};

struct TripleTrajectory {
  std::vector<double> times;
  Mat x_path;
  Mat y_path;
  Mat xtilde_path;
  SeedRecord seed_record;
};

}  // namespace slowfast
