#include "slowfast/constants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "slowfast/error.hpp"
#include "slowfast/rng.hpp"

namespace slowfast {

void CoefficientBounds::validate() const {
  const double all[] = {kappa_X, alpha,     kappa_Y, lambda_X, Lambda_X, lambda_bar_X,
                        lambda_Y, Lambda_Y, c_P,     c_L,      c_V,      lip_bbar};
  for (double v : all) {
    require(std::isfinite(v) && v >= 0.0, ErrorKind::InvalidArgument,
            "coefficient bounds must be finite and nonnegative");
  }
  require(kappa_X > 0.0, ErrorKind::InvalidArgument, "kappa_X must be positive");
  require(lambda_X > 0.0 && lambda_X <= Lambda_X, ErrorKind::InvalidArgument,
          "need 0 < lambda_X <= Lambda_X");
  require(n >= 1 && m >= 1, ErrorKind::InvalidArgument, "dimensions must be at least 1");
}

double timescale_gamma(const CoefficientBounds& b) {
  require(b.Lambda_X > 0.0 && b.kappa_Y > 0.0, ErrorKind::DomainError,
          "gamma needs Lambda_X > 0 and kappa_Y > 0");
  return b.kappa_X * b.kappa_X * b.lambda_Y / (b.Lambda_X * b.kappa_Y * b.kappa_Y);
}

AdmissibleP admissible_p(double gamma) {
  require(gamma > 0.0, ErrorKind::DomainError, "gamma must be positive");
  AdmissibleP out;
  out.gamma = gamma;
  const double s = std::sqrt(2.0 / gamma);
  out.p_max = std::clamp(2.0 / (1.0 + 2.0 / gamma + 2.0 * s), 0.0, 2.0);
  out.theorem_applicable = out.p_max >= 1.0;
  out.novikov_ok = gamma > 2.0;
  return out;
}

double p_prime(double p, double gamma) {
  require(gamma > 0.0, ErrorKind::DomainError, "gamma must be positive");
  const double denom = 1.0 - 0.5 * p * (1.0 + std::sqrt(2.0 / gamma));
  require(denom > 0.0, ErrorKind::DomainError, "p' is undefined: 1 - (p/2)(1 + sqrt(2/gamma)) <= 0");
  return 1.0 / denom;
}

double theorem1_gamma_threshold() {
  // p_max is increasing in gamma; bracket and bisect p_max(gamma) = 1.
  double lo = 2.0, hi = 1e3;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (admissible_p(mid).p_max >= 1.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

double lambda_pq(double p, double q) {
  require(p > 1.0 && q > 1.0, ErrorKind::DomainError, "lambda(p, q) needs p > 1 and q > 1");
  return q / (2.0 * (p - 1.0) * (p - 1.0)) * (p + 1.0 / (q - 1.0));
}

QRoots q_roots(double p, double gamma) {
  require(gamma > 0.0 && p > 0.0, ErrorKind::DomainError, "q roots need p > 0 and gamma > 0");
  QRoots r;
  const double s = std::sqrt(2.0 / gamma);
  r.p_minus = 1.0 + 2.0 / gamma - 2.0 * s;
  r.p_plus = 1.0 + 2.0 / gamma + 2.0 * s;
  const double disc = (p - r.p_minus) * (p - r.p_plus);
  if (disc < 0.0) {
    r.q_minus = r.q_plus = std::numeric_limits<double>::quiet_NaN();
    return r;
  }
  const double pre = gamma * (p - 1.0) / (4.0 * p);
  const double centre = p - 1.0 + 2.0 / gamma;
  r.q_minus = pre * (centre - std::sqrt(disc));
  r.q_plus = pre * (centre + std::sqrt(disc));
  return r;
}

TheoremConstants theorem_constants(const CoefficientBounds& bounds, double p, double beta) {
  TheoremConstants t;
  t.gamma = timescale_gamma(bounds);
  t.p = p;
  const double denom = 1.0 - 0.5 * p * (1.0 + std::sqrt(2.0 / t.gamma));
  t.p_prime = denom > 0.0 ? 1.0 / denom : std::numeric_limits<double>::quiet_NaN();
  const QRoots q = q_roots(p, t.gamma);
  t.p_minus = q.p_minus;
  t.p_plus = q.p_plus;
  t.q_minus = q.q_minus;
  t.q_plus = q.q_plus;
  if (beta <= t.gamma / 4.0) {
    const ExpMomentBound e = exp_moment_bound(bounds, beta, 0.0);
    t.r_minus = e.r_minus;
    t.r_plus = e.r_plus;
  } else {
    t.r_minus = t.r_plus = std::numeric_limits<double>::quiet_NaN();
  }
  return t;
}

ExpMomentBound exp_moment_bound(const CoefficientBounds& b, double beta, double t) {
  const double gamma = timescale_gamma(b);
  require(beta >= 0.0, ErrorKind::DomainError, "beta must be nonnegative");
  if (beta > gamma / 4.0) {
    fail(ErrorKind::BetaTooLarge, "beta = " + std::to_string(beta) + " exceeds gamma/4 = " +
                                      std::to_string(gamma / 4.0));
  }
  require(t >= 0.0, ErrorKind::DomainError, "t must be nonnegative");
  ExpMomentBound out;
  const double rate = b.kappa_X / (2.0 * b.Lambda_X);
  const double root = std::sqrt(std::max(0.0, 1.0 - 4.0 * beta / gamma));
  out.r_minus = rate * (1.0 - root);
  out.r_plus = rate * (1.0 + root);
  const double nd = static_cast<double>(b.n);
  out.bound = std::exp(2.0 * beta * b.kappa_X * (b.alpha + nd * b.lambda_bar_X) * t /
                       (b.Lambda_X * gamma));
  return out;
}

namespace {

void check_covariance(const Mat& a_Y, const Mat& cov, std::size_t m) {
  const auto mm = static_cast<Eigen::Index>(m);
  require(a_Y.rows() == mm && a_Y.cols() == mm && cov.rows() == mm && cov.cols() == mm,
          ErrorKind::InvalidArgument, "a_Y and Cov must be m x m");
  const double scale = 1.0 + cov.cwiseAbs().maxCoeff();
  require((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * scale,
          ErrorKind::AsymmetricCovariance, "covariance matrix is not symmetric");
  const Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (cov + cov.transpose()));
  require(eig.eigenvalues().minCoeff() >= -1e-8 * scale, ErrorKind::AsymmetricCovariance,
          "covariance matrix is not positive semidefinite");
}

// The diffusion and covariance terms shared by Phi and Psi.
double diffusion_terms(const Mat& a_Y, const Mat& cov) {
  return 0.5 * a_Y.array().square().sum() + (a_Y.array() * cov.array()).sum();
}

}  // namespace

double phi(const CoefficientBounds& bounds, const Vec& b_Y_at, const Mat& a_Y_at,
           const Mat& cov_V) {
  check_covariance(a_Y_at, cov_V, bounds.m);
  return 0.5 * b_Y_at.squaredNorm() + diffusion_terms(a_Y_at, cov_V);
}

double psi(const CoefficientBounds& b, const Vec& bbar_at, const Mat& a_Y_at, const Mat& cov_V) {
  check_covariance(a_Y_at, cov_V, b.m);
  require(b.kappa_X > 0.0, ErrorKind::DomainError, "kappa_X must be positive");
  const double md = static_cast<double>(b.m);
  const double nd = static_cast<double>(b.n);
  return 3.0 * md * b.kappa_Y * b.kappa_Y * (b.alpha + nd * b.lambda_bar_X) / (2.0 * b.kappa_X) +
         1.5 * bbar_at.squaredNorm() + diffusion_terms(a_Y_at, cov_V);
}

double theorem1_bound(const CoefficientBounds& b, double T, double p, double psi_integral,
                      double bdg_C2) {
  require(T >= 0.0 && psi_integral >= 0.0, ErrorKind::InvalidArgument,
          "T and the Psi integral must be nonnegative");
  const double gamma = timescale_gamma(b);
  const AdmissibleP adm = admissible_p(gamma);
  if (!(p >= 1.0 && p <= adm.p_max)) {
    fail(ErrorKind::PNotAdmissible, "p = " + std::to_string(p) + " is outside [1, p_max = " +
                                        std::to_string(adm.p_max) + "] at gamma = " +
                                        std::to_string(gamma));
  }
  const double md = static_cast<double>(b.m);
  const double nd = static_cast<double>(b.n);
  const double mk2 = md * b.kappa_Y * b.kappa_Y;
  const double denom = 4.0 - b.c_L * b.c_L * b.Lambda_X * (mk2 + 3.0 * b.c_V * b.c_V);
  if (!(denom > 0.0)) {
    fail(ErrorKind::DenominatorNonpositive,
         "4 - c_L^2 Lambda_X (m kappa_Y^2 + 3 c_V^2) = " + std::to_string(denom) +
             " is not positive; epsilon or the coefficients are outside the theorem's regime");
  }
  const double pp = p_prime(p, gamma);
  // 3^{p-1}(2 C_2 + 1) with the L^2 BDG constant, assembled at p = 2:
  // 3 (2 C_2 + 1) = 27 for C_2 = 4.
  const double bdg_factor = 3.0 * (2.0 * bdg_C2 + 1.0);
  const double pre = mk2 * b.Lambda_X *
                     (bdg_factor * b.c_P * b.c_P * T + 2.0 * b.c_L * b.c_L / denom * psi_integral);
  const double expo = 2.0 * pp * b.kappa_X * (b.alpha + nd * b.lambda_bar_X) * T /
                          (p * gamma * b.Lambda_X) +
                      2.0 * b.lip_bbar * T;
  return pre * std::exp(expo);
}

double entropy_plateau(const CoefficientBounds& b, double psi_value) {
  const double md = static_cast<double>(b.m);
  require(b.c_L > 0.0, ErrorKind::DomainError, "c_L must be positive");
  const double r = 2.0 / b.c_L -
                   b.Lambda_X * b.c_L * (md * b.kappa_Y * b.kappa_Y + 3.0 * b.c_V * b.c_V) / 2.0;
  if (!(r > 0.0)) {
    fail(ErrorKind::DenominatorNonpositive, "entropy dissipation rate is not positive");
  }
  return psi_value / r;
}

CoefficientBounds AveragingAppConstants::bounds(double c_P, double c_V, double lip_bbar) const {
  CoefficientBounds b;
  b.kappa_X = kappa_X;
  b.alpha = alpha;
  b.kappa_Y = kappa_Y;
  b.lambda_X = lambda_X;
  b.Lambda_X = Lambda_X;
  b.lambda_bar_X = lambda_bar_X;
  b.lambda_Y = lambda_Y;
  b.Lambda_Y = Lambda_Y;
  b.c_P = c_P;
  b.c_L = c_L;
  b.c_V = c_V;
  b.lip_bbar = lip_bbar;
  return b;
}

AveragingAppConstants averaging_app_constants(const GradientModelParams& params, double epsilon,
                                              double sup_grad_bY, double sup_grad_h, double c_V,
                                              std::size_t m) {
  params.validate();
  require(epsilon > 0.0, ErrorKind::InvalidArgument, "epsilon must be positive");
  const double lq = params.lambda_Q();
  const double bx = params.beta_X;
  const double by = params.beta_Y;
  const double inv_eps = 1.0 / epsilon;
  const double nd = static_cast<double>(params.Q.rows());
  const double md = static_cast<double>(m);
  const double e_osc = std::exp(bx * params.osc_h);

  AveragingAppConstants c;
  c.kappa_X = inv_eps * lq;
  c.alpha = inv_eps * (sup_grad_h / (4.0 * lq));
  c.lambda_X = c.Lambda_X = c.lambda_bar_X = inv_eps * (1.0 / bx);
  c.kappa_Y = sup_grad_bY;
  c.lambda_Y = c.Lambda_Y = 1.0 / by;
  c.c_L = epsilon * (1.0 / lq) * e_osc;
  CoefficientBounds b = c.bounds(0.0, c_V, 0.0);
  b.n = static_cast<std::size_t>(params.Q.rows());
  b.m = m;
  c.gamma = sup_grad_bY > 0.0 ? timescale_gamma(b) : std::numeric_limits<double>::infinity();
  const double mk2 = md * c.kappa_Y * c.kappa_Y;
  // epsilon^{-1} m kappa_Y^2 Lambda_X c_L^2: every epsilon factor scales
  // exactly for powers of two, so C1 is bitwise epsilon-independent there.
  c.C1 = inv_eps * mk2 * c.Lambda_X * (c.c_L * c.c_L);
  const double k_sum = mk2 + 3.0 * c_V * c_V;
  c.C2 = 2.0 / (4.0 - c.c_L * c.c_L * c.Lambda_X * k_sum);
  c.C2_le_one = c.C2 > 0.0 && c.C2 <= 1.0;
  c.epsilon_threshold_C2 = 2.0 * lq * std::exp(-bx * params.osc_h) * bx /
                           (sup_grad_bY * sup_grad_bY + 3.0 * c_V * c_V);
  c.epsilon_threshold_C2_exact =
      2.0 * lq * lq * std::exp(-2.0 * bx * params.osc_h) * bx / k_sum;
  c.C3 = std::isfinite(c.gamma) ? c.kappa_X * (c.alpha + nd * c.lambda_bar_X) / (c.gamma * c.Lambda_X)
                                : 0.0;
  const double first = 3.0 * sup_grad_bY * sup_grad_bY * (sup_grad_h / (4.0 * lq) + nd / bx) /
                       (2.0 * lq);
  const double second = 0.5 * md / (by * by);
  // sum_i Lip(d_{y_i} V)^2 <= c_V^2.
  const double third = bx / (by * lq) * e_osc * c_V * c_V;
  c.psi_bound = [first, second, third](double bbar_sq) {
    return first + second + third + 1.5 * bbar_sq;
  };
  return c;
}

TamdConstants tamd_constants(const TamdModelParams& params, double epsilon, double bbar1) {
  params.validate();
  require(epsilon > 0.0, ErrorKind::InvalidArgument, "epsilon must be positive");
  require(params.kappa_theta > 0.0, ErrorKind::InvalidArgument, "kappa_theta must be positive");
  const double inv_eps = 1.0 / epsilon;
  const double kk = params.kappa * params.kappa_theta;
  const double md = static_cast<double>(params.m);
  TamdConstants c;
  c.kappa_X = inv_eps * kk / 4.0;
  c.alpha = 4.0 * inv_eps * params.sup_grad_V / kk + inv_eps * params.alpha_theta;
  c.kappa_Y_sq = params.kappa * params.kappa * params.Lambda_theta;
  c.c_V_sq = md * params.kappa * params.kappa * params.Lambda_theta;
  c.Lambda_X = inv_eps / params.beta;
  c.lambda_Y = 1.0 / (params.beta_bar * params.gamma_bar);
  const double kt2 = params.kappa_theta * params.kappa_theta;
  c.gamma_lower = inv_eps * kt2 * c.lambda_Y / (16.0 * params.Lambda_theta / params.beta);
  const double s3s2 = std::sqrt(3.0) - std::sqrt(2.0);
  c.epsilon_threshold_formula = bbar1 > 0.0
                                  ? 16.0 * s3s2 * s3s2 * params.Lambda_theta * params.gamma_bar /
                                        params.beta / (kt2 * bbar1)
                                  : std::numeric_limits<double>::quiet_NaN();
  c.epsilon_threshold_derived =
      kt2 * c.lambda_Y / (16.0 * params.Lambda_theta / params.beta * theorem1_gamma_threshold());
  c.bbar_sq_factor = params.kappa / params.lambda_theta;
  return c;
}

OneSidedLipschitzFit estimate_one_sided_lipschitz(
    const std::function<Vec(const Vec& x, const Vec& y)>& b_X, const Vec& lo, const Vec& hi,
    std::span<const Vec> y_probes, std::size_t pairs, std::uint64_t seed, double alpha_cap) {
  require(pairs >= 100, ErrorKind::InvalidArgument, "need at least 100 probe pairs");
  require(!y_probes.empty(), ErrorKind::InvalidArgument, "need at least one y probe");
  const auto n = static_cast<std::size_t>(lo.size());
  std::vector<double> u(2 * n * pairs);
  fill_uniforms(seed, {0, Channel::Aux}, 0, u);
  std::vector<double> inner, dist2;
  inner.reserve(pairs * y_probes.size());
  dist2.reserve(pairs * y_probes.size());
  for (std::size_t p = 0; p < pairs; ++p) {
    Vec x1(lo.size()), x2(lo.size());
    for (std::size_t j = 0; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      x1(jj) = lo(jj) + (hi(jj) - lo(jj)) * u[2 * n * p + j];
      x2(jj) = lo(jj) + (hi(jj) - lo(jj)) * u[2 * n * p + n + j];
    }
    for (const Vec& y : y_probes) {
      inner.push_back((x1 - x2).dot(b_X(x1, y) - b_X(x2, y)));
      dist2.push_back((x1 - x2).squaredNorm());
    }
  }
  auto alpha_at = [&](double kappa) {
    double a = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < inner.size(); ++i) a = std::max(a, inner[i] + kappa * dist2[i]);
    return a;
  };
  // Log grid 1e-3 .. 1e3 with 200 points per decade.
  constexpr int kPerDecade = 200;
  OneSidedLipschitzFit fit;
  fit.kappa_hat = 1e-3;
  fit.alpha_hat = std::max(0.0, alpha_at(fit.kappa_hat));
  fit.dissipative = alpha_at(fit.kappa_hat) <= alpha_cap;
  if (!fit.dissipative) return fit;
  for (int i = 6 * kPerDecade; i >= 0; --i) {
    const double kappa = std::pow(10.0, -3.0 + static_cast<double>(i) / kPerDecade);
    const double a = alpha_at(kappa);
    if (a <= alpha_cap) {
      fit.kappa_hat = kappa;
      fit.alpha_hat = std::max(0.0, a);
      break;
    }
  }
  return fit;
}

CoefficientBounds linear_model_bounds(const LinearParams& p, double epsilon) {
  require(epsilon > 0.0 && p.kappa_x > 0.0 && p.sigma_x > 0.0, ErrorKind::InvalidArgument,
          "linear bounds need positive epsilon, kappa_x and sigma_x");
  CoefficientBounds b;
  b.kappa_X = p.kappa_x / epsilon;
  b.alpha = 0.0;
  b.kappa_Y = std::abs(p.kappa_y);
  b.lambda_X = b.Lambda_X = b.lambda_bar_X = p.sigma_x * p.sigma_x / (2.0 * epsilon);
  b.lambda_Y = b.Lambda_Y = p.sigma_y * p.sigma_y / 2.0;
  // mu^y = N(y, s^2) with s^2 = sigma_x^2/(2 kappa_x) and Gamma^X = (sigma_x^2/(2 eps)) |d/dx|^2:
  // Poincare and log-Sobolev constants are both s^2 (2 eps/sigma_x^2) = eps/kappa_x.
  b.c_P = epsilon / p.kappa_x;
  b.c_L = epsilon / p.kappa_x;
  // V = -log mu^y = kappa_x (x - y)^2/sigma_x^2 + const: d_y V is Lipschitz in x
  // with constant 2 kappa_x/sigma_x^2 and d_yy V is constant.
  b.c_V = 2.0 * p.kappa_x / (p.sigma_x * p.sigma_x);
  b.lip_bbar = 0.0;
  b.n = b.m = 1;
  return b;
}

double linear_model_psi(const LinearParams& p, double epsilon) {
  const CoefficientBounds b = linear_model_bounds(p, epsilon);
  const Mat a_Y = Mat::Constant(1, 1, p.sigma_y * p.sigma_y / 2.0);
  // Var_{mu^y}(d_y V) = (2 kappa_x/sigma_x^2)^2 sigma_x^2/(2 kappa_x) = 2 kappa_x/sigma_x^2.
  const Mat cov = Mat::Constant(1, 1, 2.0 * p.kappa_x / (p.sigma_x * p.sigma_x));
  return psi(b, Vec::Zero(1), a_Y, cov);
}

}  // namespace slowfast
