#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "slowfast/families.hpp"
#include "slowfast/model.hpp"
#include "slowfast/rng.hpp"

namespace slowfast {

enum class Provenance { analytic, quadrature, ergodic_mc };

std::string_view to_string(Provenance provenance);

struct AveragedDrift {
  std::function<Vec(const Vec& y)> evaluator;
  Provenance provenance = Provenance::analytic;
  /// Per-call standard error; set for ergodic_mc only.
  std::function<Vec(const Vec& y)> error_estimate;
  /// Finite-difference Lipschitz estimate over a probe box (0 until set).
  double lip_estimate = 0.0;

  Vec operator()(const Vec& y) const { return evaluator(y); }
};

struct DriftEstimate {
  Vec value;
  Vec stderr_;
};

struct ErgodicOptions {
  /// Frozen-process step; 0 picks 0.01 / stiffness.
  double dt = 0.0;
  std::size_t batches = 20;
  /// Throw NonConvergence when any SE component exceeds this (0 disables).
  double tolerance = 0.0;
};

/// Time average of b_Y(X^y_t, y) over [burn_in, burn_in + horizon] with a
/// batch-means standard error.
DriftEstimate averaged_drift_ergodic(const ModelSpec& model, const Vec& y, double burn_in,
                                     double horizon, std::uint64_t seed,
                                     const ErgodicOptions& options = {});

/// Ergodic evaluator with the documented defaults (burn-in 10/kappa_X,
/// horizon 100/kappa_X). Each y gets its own stream derived from `seed`
/// and the bits of y, so the evaluator is deterministic.
AveragedDrift make_ergodic_drift(const ModelSpec& model, std::uint64_t seed,
                                 const ErgodicOptions& options = {});

AveragedDrift make_analytic_drift(const ModelSpec& model);

/// Tensor-product trapezoidal grid with `cells` cells per axis on [lo, hi].
struct QuadratureGrid {
  Vec lo;
  Vec hi;
  std::size_t cells = 256;
  /// Largest tolerated share of mass in the boundary cells.
  double tail_tolerance = 1e-8;
};

/// Normalized node weights of exp(log_density) under the trapezoidal rule.
struct DensityQuadrature {
  std::vector<Vec> nodes;
  std::vector<double> weights;
  /// log of the unnormalized mass.
  double log_mass = 0.0;
  double boundary_fraction = 0.0;
};

/// Throws DimensionTooHigh (n > 2), DegenerateDensity or TailMassTooLarge.
DensityQuadrature density_quadrature(const std::function<double(const Vec& x)>& log_density,
                                     const QuadratureGrid& grid);

/// Normalized trapezoidal quadrature of b_Y(., y) against an unnormalized
/// x-density given by its logarithm (n <= 2).
Vec averaged_drift_quadrature(const std::function<Vec(const Vec& x, const Vec& y)>& b_Y,
                              const std::function<double(const Vec& x)>& log_density,
                              const QuadratureGrid& grid, const Vec& y);

AveragedDrift make_quadrature_drift(const ModelSpec& model, const QuadratureGrid& grid);

/// Closed form for the Gaussian gradient model with h = 0 and b_Y affine in x:
/// b_Y evaluated at the mean g(y). Throws NotAffine if the probe fails.
Vec gaussian61_averaged_drift(const GradientModelParams& params,
                              const std::function<Vec(const Vec& x, const Vec& y)>& b_Y,
                              const Vec& y);

/// Samples of theta(X), X ~ Z0^{-1} e^{-V}, stored coordinate-major.
struct ThetaMuSamples {
  std::size_t dim = 1;
  std::size_t count = 0;
  std::vector<double> coords;

  double at(std::size_t i, std::size_t j) const { return coords[j * count + i]; }
};

ThetaMuSamples sample_theta_mu(const TamdModelParams& params, std::size_t count,
                               std::uint64_t seed);

/// Normalized mixture weights w_i(y) proportional to exp(-kappa/2 |z_i - y|^2).
std::vector<double> tamd_mixture_weights(const ThetaMuSamples& samples, const Vec& y,
                                         double kappa);

/// Smoothed-score averaged drift gamma_bar^{-1} sum_i kappa (z_i - y) w_i(y)
/// with a delta-method standard error. Throws AllWeightsUnderflow when the
/// nearest sample is so far away that every raw weight underflows.
DriftEstimate tamd_averaged_drift(const TamdModelParams& params, const ThetaMuSamples& samples,
                                  const Vec& y);

AveragedDrift make_tamd_drift(const TamdModelParams& params, ThetaMuSamples samples);

/// Integrates dYbar = bbar(Ybar) dt + sigma_Y(Ybar) dB^Y with the given slow
/// noise. The returned trajectory has an empty x_path.
Trajectory simulate_averaged(const AveragedDrift& bbar,
                             const std::function<Mat(const Vec& y)>& sigma_Y,
                             const SimConfig& config, const NoisePath& by_stream);

/// Largest |f(y1) - f(y2)| / |y1 - y2| over `pairs` random pairs in [lo, hi].
/// Pair i always uses the same draws, so more pairs never lower the result.
double estimate_lipschitz(const std::function<Vec(const Vec& y)>& f, const Vec& lo,
                          const Vec& hi, std::size_t pairs, std::uint64_t seed);

}  // namespace slowfast
