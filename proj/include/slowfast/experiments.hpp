#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "slowfast/averaging.hpp"
#include "slowfast/families.hpp"
#include "slowfast/model.hpp"

namespace slowfast {

struct StrongErrorResult {
  double epsilon = 0.0;
  std::size_t replicas = 0;
  double mean_sup_error = 0.0;
  double stderr_ = 0.0;
  double dt = 0.0;
  std::size_t substeps = 0;
  std::uint64_t seed = 0;
  /// Mean sup error at dt over mean at dt/2 on the refinement subsample (1 if both vanish).
  double dt_refinement_ratio = 1.0;
  double dt_refinement_se = 0.0;
  bool dt_accepted = true;
  /// Per-replica sup errors in replica order.
  std::vector<double> sup_errors;
  /// Mean of tau ^ T (T when no stopping domain is given).
  /// Per-replica tau ^ T (T when no stopping domain is given).
  std::vector<double> exit_times;
  double mean_exit_time = 0.0;
  double exit_fraction = 0.0;
};

/// Box D = [lo, hi]. With `symmetric` both processes freeze at the first exit
/// of either; otherwise each freezes at its own exit.
struct StoppingDomain {
  Vec lo;
  Vec hi;
  bool symmetric = true;
  bool contains(const Vec& y) const;
};

struct StrongErrorOptions {
  double t_final = 1.0;
  double dt = 0.01;
  std::size_t substeps = 0;
  std::size_t replicas = 256;
  std::uint64_t seed = 0;
  Vec y0;
  /// Used only when init_fast_from_mu is false.
  Vec x0;
  bool init_fast_from_mu = true;
  std::optional<StoppingDomain> stopping;
  /// Share of replicas rerun at dt/2 for the bias check; 0 disables it.
  double refinement_fraction = 0.1;
  /// Throw DtBiasTooLarge instead of only flagging.
  bool enforce_dt = true;
  int workers = 1;
};

/// E sup_k |Y_k - Ybar_k| with Y and Ybar driven by the same BY stream.
StrongErrorResult strong_error(const ModelSpec& model, const AveragedDrift& bbar,
                               const StrongErrorOptions& options);

struct ConvergenceReport {
  std::vector<StrongErrorResult> results;
  double slope = 0.0;
  double slope_lo = 0.0;
  double slope_hi = 0.0;
  double intercept = 0.0;
  /// Set when some mean is zero; slope fields are then NaN.
  bool degenerate = false;
};

/// Weighted least squares of log mean on log epsilon (weights (mean/se)^2,
/// unit weights if any se is zero) with a 200-resample replicate bootstrap CI.
/// Results must be ordered by strictly decreasing epsilon.
ConvergenceReport fit_convergence(std::vector<StrongErrorResult> results, std::uint64_t seed,
                                  std::size_t resamples = 200);

struct ConvergenceOptions {
  std::vector<double> eps_grid;
  double t_final = 1.0;
  std::size_t replicas = 256;
  std::uint64_t seed = 0;
  /// dt as a function of epsilon; default min(0.01, eps / (10 kappa_unit)).
  std::function<double(double eps)> dt_rule;
  double kappa_unit = 1.0;
  std::size_t substeps = 0;
  Vec y0;
  std::optional<StoppingDomain> stopping;
  bool enforce_dt = true;
  int workers = 1;
};

struct FamilyInstance {
  ModelSpec model;
  AveragedDrift bbar;
};

ConvergenceReport convergence_study(const std::function<FamilyInstance(double eps)>& family,
                                    const ConvergenceOptions& options);

struct LinearOracleResult {
  /// Sup over the coarse dt grid.
  double mean_sup_error_ref = 0.0;
  double se_ref = 0.0;
  /// Sup over the fine grid.
  double mean_sup_error_fine = 0.0;
  double se_fine = 0.0;
  std::size_t replicas = 0;
};

/// Exact sampling of Y - Ybar = kappa_y int_0^t (X - Y) ds for the linear
/// model with X_0 ~ mu^{y_0}, on a grid of dt / fine_factor.
LinearOracleResult linear_oracle(const LinearParams& params, double epsilon, double t_final,
                                 double dt, std::size_t replicas, std::uint64_t seed,
                                 std::size_t fine_factor = 16, int workers = 1);

struct StoppedErrorOptions {
  double t_final = 1.0;
  double dt = 0.01;
  std::size_t substeps = 0;
  std::size_t replicas = 128;
  std::uint64_t seed = 0;
  Vec y0;
  /// theta#mu samples for the averaged drift; drawn when `samples` is empty.
  std::size_t drift_samples = 20000;
  std::optional<ThetaMuSamples> samples;
  bool symmetric = true;
  double refinement_fraction = 0.1;
  bool enforce_dt = true;
  int workers = 1;
};

/// strong_error on the TAMD model with stopping at the exit of params' domain.
/// Throws ImmediateExit if more than half the replicas exit within 10 steps.
StrongErrorResult stopped_strong_error(const TamdModelParams& params, double epsilon,
                                       const StoppedErrorOptions& options);

}  // namespace slowfast
