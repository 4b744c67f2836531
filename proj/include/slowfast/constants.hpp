#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "slowfast/families.hpp"
#include "slowfast/model.hpp"

namespace slowfast {

/// Structural bounds on the coefficients plus the functional-inequality
/// constants. All constants refer to the epsilon-scaled coefficients.
/// lambda_bar_X bounds the eigenvalues of A_X so that Tr A_X <= n lambda_bar_X.
struct CoefficientBounds {
  double kappa_X = 0.0;
  double alpha = 0.0;
  double kappa_Y = 0.0;
  double lambda_X = 0.0;
  double Lambda_X = 0.0;
  double lambda_bar_X = 0.0;
  double lambda_Y = 0.0;
  double Lambda_Y = 0.0;
  double c_P = 0.0;
  double c_L = 0.0;
  double c_V = 0.0;
  double lip_bbar = 0.0;
  std::size_t n = 1;
  std::size_t m = 1;

  void validate() const;
};

struct TheoremConstants {
  double gamma = 0.0;
  double p = 1.0;
  double p_prime = 0.0;
  double p_minus = 0.0;
  double p_plus = 0.0;
  double q_minus = 0.0;
  double q_plus = 0.0;
  double r_minus = 0.0;
  double r_plus = 0.0;
  double bdg_C2 = 4.0;
};

/// gamma = kappa_X^2 lambda_Y / (Lambda_X kappa_Y^2).
double timescale_gamma(const CoefficientBounds& bounds);

struct AdmissibleP {
  double gamma = 0.0;
  double p_max = 0.0;
  bool theorem_applicable = false;  // p_max >= 1
  bool novikov_ok = false;          // gamma > 2
};

/// p_max = 2/(1 + 2/gamma + 2 sqrt(2/gamma)) clamped to [0, 2].
AdmissibleP admissible_p(double gamma);

/// p' = 1/(1 - (p/2)(1 + sqrt(2/gamma))); DomainError when not positive.
double p_prime(double p, double gamma);

/// Smallest gamma with p_max(gamma) >= 1, found by bisection on p_max.
double theorem1_gamma_threshold();

/// lambda(p, q) = q/(2(p-1)^2) (p + 1/(q-1)) for p, q > 1.
double lambda_pq(double p, double q);

struct QRoots {
  double p_minus = 0.0;
  double p_plus = 0.0;
  double q_minus = 0.0;
  double q_plus = 0.0;
};

/// p_+- = 1 + 2/gamma +- 2 sqrt(2/gamma) and the roots q_+- of
/// lambda(p, q) = gamma/4. q_+- are NaN when complex.
QRoots q_roots(double p, double gamma);

/// gamma, p', p_+-, q_+- and (for the exponential moment at level beta) r_+-.
TheoremConstants theorem_constants(const CoefficientBounds& bounds, double p, double beta);

struct ExpMomentBound {
  double bound = 1.0;
  double r_minus = 0.0;
  double r_plus = 0.0;
};

/// E exp(beta <M>_t) <= exp(2 beta kappa_X (alpha + n lambda_bar_X) t / (Lambda_X gamma))
/// for beta <= gamma/4; r_+- = kappa_X/(2 Lambda_X) (1 +- sqrt(1 - 4 beta/gamma)).
ExpMomentBound exp_moment_bound(const CoefficientBounds& bounds, double beta, double t);

/// Phi = 1/2 |b_Y|^2 + 1/2 sum a_Y^2 + sum a_Y Cov(d_y V).
double phi(const CoefficientBounds& bounds, const Vec& b_Y_at, const Mat& a_Y_at,
           const Mat& cov_V);

/// Psi = 3 m kappa_Y^2 (alpha + n lambda_bar_X)/(2 kappa_X) + 3/2 |bbar|^2
///       + 1/2 sum a_Y^2 + sum a_Y Cov(d_y V).
double psi(const CoefficientBounds& bounds, const Vec& bbar_at, const Mat& a_Y_at,
           const Mat& cov_V);

/// Upper bound on (E sup |Y - Ybar|^p)^{2/p}.
double theorem1_bound(const CoefficientBounds& bounds, double T, double p, double psi_integral,
                      double bdg_C2 = 4.0);

/// Long-time level of the entropy source balance, Psi / r with
/// r = 2/c_L - Lambda_X c_L (m kappa_Y^2 + 3 c_V^2)/2.
double entropy_plateau(const CoefficientBounds& bounds, double psi_value);

struct AveragingAppConstants {
  double kappa_X = 0.0;
  double alpha = 0.0;
  double lambda_X = 0.0;
  double Lambda_X = 0.0;
  double lambda_bar_X = 0.0;
  double kappa_Y = 0.0;
  double lambda_Y = 0.0;
  double Lambda_Y = 0.0;
  double gamma = 0.0;
  double c_L = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double C3 = 0.0;
  bool C2_le_one = false;
  /// Closed-form threshold 2 lambda_Q e^{-beta_X osc} beta_X / (|grad b_Y|^2 + 3 c_V^2).
  double epsilon_threshold_C2 = 0.0;
  /// Threshold solving C2 <= 1 exactly: 2 lambda_Q^2 e^{-2 beta_X osc} beta_X / (m kappa_Y^2 + 3 c_V^2).
  double epsilon_threshold_C2_exact = 0.0;
  /// Upper bound on Psi(y) as a function of |bbar(y)|^2.
  std::function<double(double bbar_sq)> psi_bound;

  CoefficientBounds bounds(double c_P, double c_V, double lip_bbar) const;
};

AveragingAppConstants averaging_app_constants(const GradientModelParams& params, double epsilon,
                                              double sup_grad_bY, double sup_grad_h, double c_V,
                                              std::size_t m);

struct TamdConstants {
  double kappa_X = 0.0;
  double alpha = 0.0;
  double kappa_Y_sq = 0.0;
  double c_V_sq = 0.0;
  double Lambda_X = 0.0;
  double lambda_Y = 0.0;
  double gamma_lower = 0.0;
  /// Closed-form threshold 16 (sqrt3 - sqrt2)^2 Lambda_theta gamma_bar beta^{-1} / (kappa_theta^2 b1),
  /// with b1 the caller-supplied value of the undefined symbol.
  double epsilon_threshold_formula = 0.0;
  /// Largest epsilon with gamma_lower >= theorem1_gamma_threshold().
  double epsilon_threshold_derived = 0.0;
  /// kappa / lambda_theta: bbar^2 <= (kappa/lambda_theta) int G dmu^y.
  double bbar_sq_factor = 0.0;
};

TamdConstants tamd_constants(const TamdModelParams& params, double epsilon, double bbar1 = 1.0);

struct OneSidedLipschitzFit {
  double kappa_hat = 0.0;
  double alpha_hat = 0.0;
  bool dissipative = false;
};

/// Fits (kappa, alpha) in (x1-x2)^T (b(x1,y)-b(x2,y)) <= -kappa |x1-x2|^2 + alpha
/// from random pairs in [lo, hi]: kappa_hat is the largest value on a log grid
/// keeping alpha_hat <= alpha_cap. Sampling can only under-estimate the sup,
/// so this is an estimate, not a certificate.
OneSidedLipschitzFit estimate_one_sided_lipschitz(
    const std::function<Vec(const Vec& x, const Vec& y)>& b_X, const Vec& lo, const Vec& hi,
    std::span<const Vec> y_probes, std::size_t pairs, std::uint64_t seed, double alpha_cap = 1e-9);

/// Bounds for the linear model at scale epsilon (Poincare and log-Sobolev
/// constants exact, with respect to Gamma^X).
CoefficientBounds linear_model_bounds(const LinearParams& params, double epsilon);

/// Psi for the linear model (constant in y since bbar = 0).
double linear_model_psi(const LinearParams& params, double epsilon);

}  // namespace slowfast
