#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

#include "slowfast/model.hpp"

namespace slowfast {

/// Linear slow-fast model (see LinearParams). mu^y = N(y, sigma_x^2/(2 kappa_x))
/// and the averaged drift is identically zero.
ModelSpec linear_model(const LinearParams& params, double epsilon);

/// Linear fast process with a slow drift that ignores x:
/// b_Y(x, y) = -kappa_y y. The analytic averaged drift is the same function.
ModelSpec slow_decoupled_model(const LinearParams& params, double epsilon);

/// Potential V(x, y) = 1/2 (x - g(y))^T Q (x - g(y)) + h(x, y) with
///   dX = -eps^{-1} grad_x V dt + eps^{-1/2} sqrt(2/beta_X) dB^X,
///   dY = b_Y dt + sqrt(2/beta_Y) dB^Y.
struct GradientModelParams {
  Mat Q;
  std::function<Vec(const Vec& y)> g;
  /// Bounded perturbation; leave empty for h = 0.
  std::function<double(const Vec& x, const Vec& y)> h;
  std::function<Vec(const Vec& x, const Vec& y)> grad_x_h;
  double osc_h = 0.0;
  double sup_grad_h = 0.0;
  /// Bound on the spectral norm of the x-Hessian of h (stiffness only).
  double hessian_bound_h = 0.0;
  double beta_X = 1.0;
  double beta_Y = 1.0;

  double lambda_Q() const;
  double V(const Vec& x, const Vec& y) const;
  Vec grad_x_V(const Vec& x, const Vec& y) const;
  void validate() const;
};

/// h(x, y) = a sum_i cos(omega x_i), with its oscillation and gradient bounds.
void set_cosine_perturbation(GradientModelParams& params, std::size_t n, double amplitude,
                             double frequency);

ModelSpec gradient61_model(const GradientModelParams& params,
                           std::function<Vec(const Vec& x, const Vec& y)> b_Y, std::size_t m,
                           double epsilon);

enum class TamdPotential { harmonic, soft_abs };

std::string_view to_string(TamdPotential potential);
TamdPotential tamd_potential_from_string(std::string_view name);

/// TAMD extended system with U(x, y) = V(x) + kappa/2 |y - theta(x)|^2:
///   dX = -eps^{-1} grad_x U dt + sqrt(2/(beta eps)) dB^X,
///   dY = -kappa/gamma_bar (y - theta(x)) dt + sqrt(2/(beta_bar gamma_bar)) dB^Y.
struct TamdModelParams {
  std::size_t n = 1;
  std::size_t m = 1;
  TamdPotential potential = TamdPotential::harmonic;
  /// Strength k of V: k |x|^2/2 or k sum_i sqrt(1 + x_i^2).
  double potential_scale = 1.0;
  std::function<double(const Vec& x)> V;
  std::function<Vec(const Vec& x)> grad_V;
  /// sup |grad V| when finite. For a convex V with unbounded gradient this
  /// is 0: the V term then only adds dissipation.
  double sup_grad_V = 0.0;
  /// Curvature bound of V for the fast stiffness scale.
  double hessian_bound_V = 0.0;
  std::function<Vec(const Vec& x)> theta;
  std::function<Mat(const Vec& x)> jac_theta;
  double lambda_theta = 1.0;
  double Lambda_theta = 1.0;
  double kappa_theta = 2.0;
  double alpha_theta = 0.0;
  double kappa = 1.0;
  double beta = 1.0;
  double beta_bar = 1.0;
  double gamma_bar = 1.0;
  Vec domain_lo;
  Vec domain_hi;

  double U(const Vec& x, const Vec& y) const;
  Vec grad_x_U(const Vec& x, const Vec& y) const;
  bool in_domain(const Vec& y) const;
  /// Throws unless lambda_theta kappa > Lambda_theta / beta and D is nonempty.
  void validate() const;
};

/// theta(x) = x with the given potential (n = m = dim) and domain box
/// [lo, hi]^dim.
TamdModelParams tamd_identity(std::size_t dim, TamdPotential potential, double potential_scale,
                              double kappa, double beta, double beta_bar, double gamma_bar,
                              double domain_lo, double domain_hi);

ModelSpec tamd62_model(const TamdModelParams& params, double epsilon);

}  // namespace slowfast
