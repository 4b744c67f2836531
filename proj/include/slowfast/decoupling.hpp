#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slowfast/constants.hpp"
#include "slowfast/model.hpp"
#include "slowfast/rng.hpp"

namespace slowfast {

/// Running Girsanov martingale M, its quadratic variation and E(M) = exp(M - QV/2)
/// on the slow grid.
struct GirsanovPath {
  std::vector<double> times;
  std::vector<double> M;
  std::vector<double> QV;
  std::vector<double> stoch_exp;
};

/// Left-point sums M_{k+1} = M_k + u_k . dB^Y_k, QV_{k+1} = QV_k + |u_k|^2 dt with
/// u_k = sigma_Y(Y_k)^{-1} (b_Y(X~_k, Y_k) - b_Y(X_k, Y_k)).
GirsanovPath girsanov_weight_path(const TripleTrajectory& triple, const ModelSpec& model,
                                  const NoisePath& by_stream);

/// Largest |E(M)_k - exp(M_k - QV_k/2)| relative to E(M)_k.
double stoch_exp_consistency(const GirsanovPath& path);

struct ExpMomentCheck {
  double empirical = 0.0;
  double se = 0.0;
  double bound = 0.0;
  bool pass = false;
};

/// Monte Carlo E exp(beta <M>_T) over `replicas` triples against the
/// exponential-moment bound; pass if empirical <= bound (1 + 2 relative SE).
/// `base` supplies the time grid and initial conditions; replicas use
/// stream indices 0..replicas-1.
ExpMomentCheck check_exponential_moment(const ModelSpec& model, const CoefficientBounds& bounds,
                                        double beta, const SimConfig& base, std::size_t replicas,
                                        std::uint64_t seed, int workers = 1);

struct PathFunctional {
  std::string id;
  std::function<double(const std::vector<double>& times, const Mat& x_path, const Mat& y_path)> f;
};

/// y_final, sup|Y| clipped at 10, y_final^2, time average of X, 1{Y_T > 0}
/// (first coordinates).
std::vector<PathFunctional> standard_functionals();
PathFunctional constant_functional();

struct LawEquivalenceRow {
  std::string functional_id;
  double lhs = 0.0;
  double rhs = 0.0;
  /// sqrt(se_lhs^2 + se_rhs^2).
  double pooled_se = 0.0;
  /// SE of the per-replica difference F(X,Y) - E(M)_T F(X~,Y); used for pass.
  double paired_se = 0.0;
  bool pass = false;
};

struct LawEquivalenceReport {
  std::vector<LawEquivalenceRow> rows;
  double mean_weight = 0.0;
  double mean_weight_se = 0.0;
  std::size_t weight_underflows = 0;
};

/// Compares E_P[F(X, Y)] with E_P[E(M)_T F(X~, Y)] for each functional.
/// When `gamma` is given it must exceed 2 (NovikovViolation otherwise).
LawEquivalenceReport check_law_equivalence(const ModelSpec& model, const SimConfig& base,
                                           const std::vector<PathFunctional>& functionals,
                                           std::size_t replicas, std::uint64_t seed,
                                           std::optional<double> gamma = std::nullopt,
                                           int workers = 1);

}  // namespace slowfast
