#include "slowfast/families.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "slowfast/error.hpp"

namespace slowfast {
namespace {

Mat scalar_matrix(double v) { return Mat::Constant(1, 1, v); }

double smallest_eigenvalue(const Mat& q) {
  const Eigen::SelfAdjointEigenSolver<Mat> eig(q);
  return eig.eigenvalues().minCoeff();
}

double largest_eigenvalue(const Mat& q) {
  const Eigen::SelfAdjointEigenSolver<Mat> eig(q);
  return eig.eigenvalues().maxCoeff();
}

}  // namespace

ModelSpec linear_model(const LinearParams& p, double epsilon) {
  require(p.kappa_x > 0.0, ErrorKind::InvalidArgument, "kappa_x must be positive");
  require(p.sigma_y > 0.0, ErrorKind::InvalidArgument, "sigma_y must be positive");
  ModelSpec model;
  model.n = 1;
  model.m = 1;
  model.epsilon = epsilon;
  model.family_tag = FamilyTag::linear;
  model.linear = p;
  model.stiffness = p.kappa_x;
  model.b_X = [p](const Vec& x, const Vec& y) -> Vec { return -p.kappa_x * (x - y); };
  model.sigma_X = [p](const Vec&, const Vec&) -> Mat { return scalar_matrix(p.sigma_x); };
  model.b_Y = [p](const Vec& x, const Vec& y) -> Vec { return -p.kappa_y * (y - x); };
  model.sigma_Y = [p](const Vec&) -> Mat { return scalar_matrix(p.sigma_y); };
  const double sd = p.sigma_x / std::sqrt(2.0 * p.kappa_x);
  model.mu_sampler = [sd](const Vec& y, std::span<const double> z) -> Vec {
    Vec x(1);
    x(0) = y(0) + sd * z[0];
    return x;
  };
  model.mu_log_density = [p](const Vec& x, const Vec& y) {
    if (p.sigma_x == 0.0) return x(0) == y(0) ? 0.0 : -std::numeric_limits<double>::infinity();
    const double d = x(0) - y(0);
    return -p.kappa_x * d * d / (p.sigma_x * p.sigma_x);
  };
  model.analytic_bbar = [](const Vec& y) -> Vec { return Vec::Zero(y.size()); };
  return model;
}

ModelSpec slow_decoupled_model(const LinearParams& p, double epsilon) {
  ModelSpec model = linear_model(p, epsilon);
  model.family_tag = FamilyTag::custom;
  model.linear.reset();
  const double ky = p.kappa_y;
  auto drift = [ky](const Vec& y) -> Vec { return -ky * y; };
  model.b_Y = [drift](const Vec&, const Vec& y) -> Vec { return drift(y); };
  model.analytic_bbar = drift;
  return model;
}

double GradientModelParams::lambda_Q() const { return smallest_eigenvalue(Q); }

double GradientModelParams::V(const Vec& x, const Vec& y) const {
  const Vec d = x - g(y);
  double v = 0.5 * d.dot(Q * d);
  if (h) v += h(x, y);
  return v;
}

Vec GradientModelParams::grad_x_V(const Vec& x, const Vec& y) const {
  Vec grad = Q * (x - g(y));
  if (grad_x_h) grad += grad_x_h(x, y);
  return grad;
}

void GradientModelParams::validate() const {
  require(Q.rows() >= 1 && Q.rows() == Q.cols(), ErrorKind::InvalidArgument,
          "Q must be a square matrix");
  require((Q - Q.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + Q.cwiseAbs().maxCoeff()),
          ErrorKind::InvalidArgument, "Q must be symmetric");
  require(lambda_Q() > 0.0, ErrorKind::InvalidArgument, "Q must be positive definite");
  require(static_cast<bool>(g), ErrorKind::InvalidArgument, "g(y) is not set");
  require(static_cast<bool>(h) == static_cast<bool>(grad_x_h), ErrorKind::InvalidArgument,
          "h and its gradient must be given together");
  require(beta_X > 0.0 && beta_Y > 0.0, ErrorKind::InvalidArgument,
          "inverse temperatures must be positive");
  require(std::isfinite(osc_h) && osc_h >= 0.0, ErrorKind::InvalidArgument,
          "osc(h) must be finite");
}

void set_cosine_perturbation(GradientModelParams& params, std::size_t n, double amplitude,
                             double frequency) {
  if (amplitude == 0.0) {
    params.h = nullptr;
    params.grad_x_h = nullptr;
    params.osc_h = params.sup_grad_h = params.hessian_bound_h = 0.0;
    return;
  }
  const double a = amplitude;
  const double w = frequency;
  params.h = [a, w](const Vec& x, const Vec&) { return a * (w * x.array()).cos().sum(); };
  params.grad_x_h = [a, w](const Vec& x, const Vec&) -> Vec {
    return (-a * w * (w * x.array()).sin()).matrix();
  };
  const double dn = static_cast<double>(n);
  params.osc_h = 2.0 * std::abs(a) * dn;
  params.sup_grad_h = std::abs(a * w) * std::sqrt(dn);
  params.hessian_bound_h = std::abs(a) * w * w;
}

ModelSpec gradient61_model(const GradientModelParams& params,
                           std::function<Vec(const Vec& x, const Vec& y)> b_Y, std::size_t m,
                           double epsilon) {
  params.validate();
  require(static_cast<bool>(b_Y), ErrorKind::InvalidArgument, "b_Y is not set");
  const auto p = std::make_shared<const GradientModelParams>(params);
  const auto n = static_cast<std::size_t>(params.Q.rows());
  ModelSpec model;
  model.n = n;
  model.m = m;
  model.epsilon = epsilon;
  model.family_tag = FamilyTag::gradient61;
  model.stiffness = largest_eigenvalue(params.Q) + params.hessian_bound_h;
  model.b_X = [p](const Vec& x, const Vec& y) -> Vec { return -p->grad_x_V(x, y); };
  const double sx = std::sqrt(2.0 / params.beta_X);
  const double sy = std::sqrt(2.0 / params.beta_Y);
  model.sigma_X = [sx, n](const Vec&, const Vec&) -> Mat {
    return sx * Mat::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  };
  model.b_Y = std::move(b_Y);
  model.sigma_Y = [sy, m](const Vec&) -> Mat {
    return sy * Mat::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
  };
  model.mu_log_density = [p](const Vec& x, const Vec& y) { return -p->beta_X * p->V(x, y); };
  if (!params.h) {
    // mu^y = N(g(y), (beta_X Q)^{-1}); sample through the Cholesky factor of
    // the covariance.
    const Mat cov = (params.beta_X * params.Q).inverse();
    const Mat chol = Eigen::LLT<Mat>(cov).matrixL();
    model.mu_sampler = [p, chol](const Vec& y, std::span<const double> z) -> Vec {
      const Eigen::Map<const Vec> zv(z.data(), static_cast<Eigen::Index>(z.size()));
      return p->g(y) + chol * zv;
    };
  }
  return model;
}

std::string_view to_string(TamdPotential potential) {
  switch (potential) {
    case TamdPotential::harmonic: return "harmonic";
    case TamdPotential::soft_abs: return "soft_abs";
  }
  return "harmonic";
}

TamdPotential tamd_potential_from_string(std::string_view name) {
  if (name == "harmonic") return TamdPotential::harmonic;
  if (name == "soft_abs") return TamdPotential::soft_abs;
  fail(ErrorKind::InvalidArgument, "unknown TAMD potential '" + std::string(name) + "'");
}

double TamdModelParams::U(const Vec& x, const Vec& y) const {
  const Vec d = y - theta(x);
  return V(x) + 0.5 * kappa * d.squaredNorm();
}

Vec TamdModelParams::grad_x_U(const Vec& x, const Vec& y) const {
  return grad_V(x) - kappa * jac_theta(x).transpose() * (y - theta(x));
}

bool TamdModelParams::in_domain(const Vec& y) const {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(y(i) >= domain_lo(i) && y(i) <= domain_hi(i))) return false;
  }
  return true;
}

void TamdModelParams::validate() const {
  require(n >= 1 && m >= 1, ErrorKind::InvalidArgument, "TAMD dimensions must be at least 1");
  require(V && grad_V && theta && jac_theta, ErrorKind::InvalidArgument,
          "TAMD potential or collective variable is not set");
  require(kappa > 0.0 && beta > 0.0 && beta_bar > 0.0 && gamma_bar > 0.0,
          ErrorKind::InvalidArgument, "TAMD kappa, beta, beta_bar, gamma_bar must be positive");
  require(lambda_theta > 0.0 && kappa_theta > 0.0, ErrorKind::InvalidArgument,
          "lambda_theta and kappa_theta must be positive");
  require(lambda_theta * kappa > Lambda_theta / beta, ErrorKind::DomainError,
          "TAMD standing condition lambda_theta kappa > Lambda_theta / beta fails");
  require(static_cast<std::size_t>(domain_lo.size()) == m &&
              static_cast<std::size_t>(domain_hi.size()) == m,
          ErrorKind::InvalidArgument, "domain box has the wrong dimension");
  require((domain_lo.array() < domain_hi.array()).all(), ErrorKind::InvalidArgument,
          "domain box is empty");
}

TamdModelParams tamd_identity(std::size_t dim, TamdPotential potential, double potential_scale,
                              double kappa, double beta, double beta_bar, double gamma_bar,
                              double domain_lo, double domain_hi) {
  TamdModelParams p;
  p.n = p.m = dim;
  p.potential = potential;
  p.potential_scale = potential_scale;
  const double k = potential_scale;
  const double dn = static_cast<double>(dim);
  switch (potential) {
    case TamdPotential::harmonic:
      p.V = [k](const Vec& x) { return 0.5 * k * x.squaredNorm(); };
      p.grad_V = [k](const Vec& x) -> Vec { return k * x; };
      p.sup_grad_V = 0.0;
      p.hessian_bound_V = k;
      break;
    case TamdPotential::soft_abs:
      p.V = [k](const Vec& x) { return k * (1.0 + x.array().square()).sqrt().sum(); };
      p.grad_V = [k](const Vec& x) -> Vec {
        return (k * x.array() / (1.0 + x.array().square()).sqrt()).matrix();
      };
      p.sup_grad_V = k * std::sqrt(dn);
      p.hessian_bound_V = k;
      break;
  }
  const auto id = static_cast<Eigen::Index>(dim);
  p.theta = [](const Vec& x) -> Vec { return x; };
  p.jac_theta = [id](const Vec&) -> Mat { return Mat::Identity(id, id); };
  // theta(x) = x: D theta D theta^T = Id, and grad_x |x - y|^2 = 2 (x - y)
  // gives kappa_theta = 2 with no perturbation.
  p.lambda_theta = 1.0;
  p.Lambda_theta = 1.0;
  p.kappa_theta = 2.0;
  p.alpha_theta = 0.0;
  p.kappa = kappa;
  p.beta = beta;
  p.beta_bar = beta_bar;
  p.gamma_bar = gamma_bar;
  p.domain_lo = Vec::Constant(id, domain_lo);
  p.domain_hi = Vec::Constant(id, domain_hi);
  return p;
}

ModelSpec tamd62_model(const TamdModelParams& params, double epsilon) {
  params.validate();
  const auto p = std::make_shared<const TamdModelParams>(params);
  const auto n = static_cast<Eigen::Index>(params.n);
  const auto m = static_cast<Eigen::Index>(params.m);
  ModelSpec model;
  model.n = params.n;
  model.m = params.m;
  model.epsilon = epsilon;
  model.family_tag = FamilyTag::tamd62;
  model.stiffness = params.hessian_bound_V + params.kappa * params.kappa_theta;
  model.b_X = [p](const Vec& x, const Vec& y) -> Vec { return -p->grad_x_U(x, y); };
  const double sx = std::sqrt(2.0 / params.beta);
  model.sigma_X = [sx, n](const Vec&, const Vec&) -> Mat { return sx * Mat::Identity(n, n); };
  const double rate = params.kappa / params.gamma_bar;
  model.b_Y = [p, rate](const Vec& x, const Vec& y) -> Vec { return -rate * (y - p->theta(x)); };
  const double sy = std::sqrt(2.0 / (params.beta_bar * params.gamma_bar));
  model.sigma_Y = [sy, m](const Vec&) -> Mat { return sy * Mat::Identity(m, m); };
  model.mu_log_density = [p](const Vec& x, const Vec& y) { return -p->beta * p->U(x, y); };
  if (params.potential == TamdPotential::harmonic && params.n == params.m) {
    // U = k|x|^2/2 + kappa/2 |y - x|^2: mu^y = N(kappa y/(k + kappa), 1/(beta (k + kappa))).
    const double k = params.potential_scale;
    const double kap = params.kappa;
    const double sd = 1.0 / std::sqrt(params.beta * (k + kap));
    model.mu_sampler = [k, kap, sd](const Vec& y, std::span<const double> z) -> Vec {
      const Eigen::Map<const Vec> zv(z.data(), static_cast<Eigen::Index>(z.size()));
      return (kap / (k + kap)) * y + sd * zv;
    };
    const double gb = params.gamma_bar;
    model.analytic_bbar = [k, kap, gb](const Vec& y) -> Vec {
      return (-kap / gb * (1.0 - kap / (k + kap))) * y;
    };
  }
  return model;
}

}  // namespace slowfast
