#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slowfast/averaging.hpp"
#include "slowfast/constants.hpp"
#include "slowfast/model.hpp"

namespace slowfast {

/// Points in R^d stored row-major (point i occupies samples[i*dim .. i*dim+dim)).
struct EmpiricalMeasure {
  std::size_t dim = 1;
  std::vector<double> samples;
  /// Optional; empty means uniform.
  std::vector<double> weights;

  std::size_t count() const { return dim == 0 ? 0 : samples.size() / dim; }
  std::span<const double> point(std::size_t i) const { return {samples.data() + i * dim, dim}; }
  Vec point_vector(std::size_t i) const;
  void validate() const;

  static EmpiricalMeasure from_rows(const Mat& rows);
  static EmpiricalMeasure from_values(std::span<const double> values);
};

enum class EntropyMethod { histogram, knn, closed_form };
std::string_view to_string(EntropyMethod method);

struct EntropyEstimate {
  double value = 0.0;
  EntropyMethod method = EntropyMethod::histogram;
  /// Sampling standard error of the plug-in average.
  double se = 0.0;
  std::string note;
  /// Set when the estimate fell below -0.05.
  bool flagged_negative = false;
};

/// H(p | q) for samples p against a normalized density q.
/// histogram: Scott-rule bins (dim <= 2), q averaged over each bin by
/// Gauss-Legendre quadrature. knn: Kozachenko-Leonenko with k = 5 (dim <= 4).
EntropyEstimate relative_entropy(const EmpiricalMeasure& p,
                                 const std::function<double(const Vec& x)>& q_density,
                                 EntropyMethod method);

/// Two-sample k-NN divergence H(p | q) when q is only available through samples (dim <= 4).
EntropyEstimate relative_entropy_two_sample(const EmpiricalMeasure& p, const EmpiricalMeasure& q,
                                            std::size_t k = 5);

struct LipschitzProbe {
  std::function<double(const Vec& x)> f;
  double lipschitz = 1.0;
};

struct T2Check {
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool pass = false;
};

/// |E_mu f - E_rho f|^2 against Lip(f)^2 Lambda_X c_L H(rho | mu);
/// pass if lhs <= rhs + 3 combined SE.
T2Check t2_check(const LipschitzProbe& probe, const EmpiricalMeasure& rho,
                 const EmpiricalMeasure& mu_samples,
                 const std::function<double(const Vec& x)>& mu_density, double c_L,
                 double Lambda_X, EntropyMethod method = EntropyMethod::histogram);

struct LogPartitionCheck {
  double lhs1 = 0.0;
  double rhs1 = 0.0;
  double lhs2 = 0.0;
  double rhs2 = 0.0;
  double tolerance = 0.0;
  /// Finite differences at h and h/2 agree within 10 h^2 scale.
  bool richardson_ok = false;
  bool pass = false;
};

/// d/dy log Z and d^2/dy^2 log Z of Z(y) = int exp(log_mu(x, y)) dx by central
/// differences, against the quadrature averages of d_y log mu and
/// d_y^2 log mu + Var(d_y log mu). Scalar y.
LogPartitionCheck log_partition_identity(
    const std::function<double(const Vec& x, double y)>& log_mu, double y, double h_step,
    const QuadratureGrid& grid);

struct EntropyDecayOptions {
  bool frozen = true;
  /// Frozen mode: the fixed slow value. Coupled mode: Y_0.
  Vec y;
  std::size_t ensemble = 10000;
  /// Must lie on the dt grid, nondecreasing, starting at 0 or later.
  std::vector<double> checkpoints;
  std::uint64_t seed = 0;
  double dt = 0.01;
  std::size_t substeps = 0;
  /// Initial fast state from standard normals; default draws from mu^y.
  std::function<Vec(std::span<const double> normals)> initial;
  EntropyMethod method = EntropyMethod::histogram;
  /// Frozen mode: estimates at or above this level enter the rate fit.
  double fit_floor = 0.05;
};

struct EntropyCurve {
  std::vector<double> times;
  std::vector<EntropyEstimate> estimates;
  /// Frozen mode: -slope of log H on t over the transient. NaN otherwise.
  double fitted_rate = 0.0;
  std::size_t fit_points = 0;
};

/// Evolves an ensemble and estimates H(rho_t | mu^y) at each checkpoint.
/// Coupled mode estimates E H(law(X_t | Y_t) | mu^{Y_t}) from the joint
/// ensemble against (Y_t, X'), X' ~ mu^{Y_t}, with a two-sample k-NN estimate.
EntropyCurve entropy_decay_curve(const ModelSpec& model, const EntropyDecayOptions& options,
                                 int workers = 1);

struct PoincareProbe {
  std::string id;
  std::function<double(const Vec& x)> f;
  /// Central differences when empty.
  std::function<Vec(const Vec& x)> grad;
};

struct PoincareEstimate {
  double c_P_lower = 0.0;
  std::vector<double> ratios;
};

struct PoincareOptions {
  double horizon = 2000.0;
  double burn_in = 20.0;
  double dt = 0.01;
  std::size_t thin = 10;
};

/// max over probes of Var(f) / E|sigma_X^T grad f|^2 under the long-run
/// empirical law of the frozen process at y (unit timescale).
/// Throws DegenerateProbe on zero Dirichlet energy.
PoincareEstimate estimate_poincare(const ModelSpec& model, const Vec& y,
                                   const std::vector<PoincareProbe>& probes, std::uint64_t seed,
                                   const PoincareOptions& options = {});

/// Probes x_j and x_j^2 for every coordinate.
std::vector<PoincareProbe> coordinate_probes(std::size_t n);

}  // namespace slowfast
