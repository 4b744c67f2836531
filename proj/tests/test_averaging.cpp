#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "slowfast/averaging.hpp"
#include "slowfast/error.hpp"
#include "slowfast/families.hpp"
#include "slowfast/integrator.hpp"
#include "slowfast/rng.hpp"

using namespace slowfast;

namespace {

Vec vec1(double v) { return Vec::Constant(1, v); }

QuadratureGrid grid1(double lo, double hi, std::size_t cells) {
  QuadratureGrid g;
  g.lo = vec1(lo);
  g.hi = vec1(hi);
  g.cells = cells;
  return g;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidArgument;
}

GradientModelParams gaussian_params(double beta_x) {
  GradientModelParams p;
  p.Q = Mat::Identity(1, 1) * 2.0;
  p.g = [](const Vec& y) -> Vec { return y; };
  p.beta_X = beta_x;
  return p;
}

TamdModelParams unit_tamd(double gamma_bar) {
  return tamd_identity(1, TamdPotential::harmonic, 1.0, 1.0, 1.0, 1.0, gamma_bar, -3.0, 3.0);
}

}  // namespace

TEST_SUITE("averaging") {

TEST_CASE("ergodic average of the linear slow drift vanishes") {
  const ModelSpec m = linear_model({}, 0.1);
  const DriftEstimate d = averaged_drift_ergodic(m, vec1(0.8), 10.0, 400.0, 7);
  CHECK(std::abs(d.value(0)) <= 3.0 * d.stderr_(0));
  CHECK(d.stderr_(0) > 0.0);
}

TEST_CASE("ergodic average of a constant drift is exact") {
  ModelSpec m = linear_model({}, 0.1);
  m.b_Y = [](const Vec&, const Vec&) -> Vec { return vec1(1.25); };
  const DriftEstimate d = averaged_drift_ergodic(m, vec1(0.3), 1.0, 10.0, 7);
  CHECK(d.value(0) == doctest::Approx(1.25).epsilon(1e-14));
  CHECK(d.stderr_(0) < 1e-12);
}

TEST_CASE("ergodic tolerance triggers NonConvergence") {
  const ModelSpec m = linear_model({}, 0.1);
  ErgodicOptions opt;
  opt.tolerance = 1e-6;
  CHECK(kind_of([&] { averaged_drift_ergodic(m, vec1(0.0), 1.0, 5.0, 3, opt); }) ==
        ErrorKind::NonConvergence);
}

TEST_CASE("ergodic and quadrature agree on the Gaussian gradient model") {
  GradientModelParams p = gaussian_params(1.0);
  auto b_Y = [](const Vec& x, const Vec& y) -> Vec { return 0.5 * x - y; };
  const ModelSpec m = gradient61_model(p, b_Y, 1, 0.1);
  const Vec y = vec1(0.6);
  const DriftEstimate erg = averaged_drift_ergodic(m, y, 10.0, 2000.0, 19);
  const Vec quad = averaged_drift_quadrature(
      m.b_Y, [&](const Vec& x) { return m.mu_log_density(x, y); }, grid1(-8.0, 9.0, 1024), y);
  CHECK(std::abs(erg.value(0) - quad(0)) <= 3.0 * erg.stderr_(0) + 1e-6);
  CHECK(quad(0) == doctest::Approx(-0.3).epsilon(1e-8));
}

TEST_CASE("quadrature of an odd integrand about the mean vanishes") {
  const ModelSpec m = linear_model({}, 0.1);
  const Vec y = vec1(0.4);
  const Vec v = averaged_drift_quadrature(
      m.b_Y, [&](const Vec& x) { return m.mu_log_density(x, y); }, grid1(-7.6, 8.4, 512), y);
  CHECK(std::abs(v(0)) < 1e-6);
}

TEST_CASE("quadrature recovers a Gaussian mean") {
  auto b_Y = [](const Vec& x, const Vec&) -> Vec { return x; };
  auto log_density = [](const Vec& x) { return -0.5 * (x(0) - 2.0) * (x(0) - 2.0); };
  const Vec v = averaged_drift_quadrature(b_Y, log_density, grid1(-6.0, 10.0, 2048), vec1(0.0));
  CHECK(v(0) == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("quadrature error falls at second order") {
  // E[cos x] under the uniform density on [0, 1] is sin(1); the integrand
  // is smooth and not periodic on the box, so trapezoid error is O(h^2).
  auto b_Y = [](const Vec& x, const Vec&) -> Vec { return vec1(std::cos(3.0 * x(0))); };
  auto flat = [](const Vec&) { return 0.0; };
  const double exact = std::sin(3.0) / 3.0;
  QuadratureGrid coarse = grid1(0.0, 1.0, 16);
  coarse.tail_tolerance = 1.0;
  QuadratureGrid fine = coarse;
  fine.cells = 32;
  const double e1 = std::abs(averaged_drift_quadrature(b_Y, flat, coarse, vec1(0.0))(0) - exact);
  const double e2 = std::abs(averaged_drift_quadrature(b_Y, flat, fine, vec1(0.0))(0) - exact);
  CHECK(e1 / e2 >= 3.9);
}

TEST_CASE("quadrature rejects heavy tails, zero densities and high dimension") {
  auto b_Y = [](const Vec& x, const Vec&) -> Vec { return x; };
  auto wide = [](const Vec& x) { return -0.5 * x(0) * x(0); };
  CHECK(kind_of([&] { averaged_drift_quadrature(b_Y, wide, grid1(-2.0, 2.0, 64), vec1(0.0)); }) ==
        ErrorKind::TailMassTooLarge);
  auto zero = [](const Vec&) { return -std::numeric_limits<double>::infinity(); };
  CHECK(kind_of([&] { averaged_drift_quadrature(b_Y, zero, grid1(-2.0, 2.0, 64), vec1(0.0)); }) ==
        ErrorKind::DegenerateDensity);
  QuadratureGrid g3;
  g3.lo = Vec::Constant(3, -1.0);
  g3.hi = Vec::Constant(3, 1.0);
  g3.cells = 8;
  CHECK(kind_of([&] { density_quadrature([](const Vec&) { return 0.0; }, g3); }) ==
        ErrorKind::DimensionTooHigh);
}

TEST_CASE("two-dimensional quadrature matches a correlated Gaussian mean") {
  QuadratureGrid g;
  g.lo = Vec::Constant(2, -8.0);
  g.hi = Vec::Constant(2, 8.0);
  g.cells = 160;
  auto log_density = [](const Vec& x) {
    const double a = x(0) - 1.0, b = x(1) + 0.5;
    return -0.5 * (a * a - a * b + b * b);
  };
  auto b_Y = [](const Vec& x, const Vec&) -> Vec { return x; };
  const Vec v = averaged_drift_quadrature(b_Y, log_density, g, vec1(0.0));
  CHECK(v(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(v(1) == doctest::Approx(-0.5).epsilon(1e-6));
}

TEST_CASE("Gaussian closed form applies affine drifts to the mean") {
  const GradientModelParams p = gaussian_params(1.0);
  auto zero_drift = [](const Vec& x, const Vec& y) -> Vec { return -(y - x); };
  CHECK(gaussian61_averaged_drift(p, zero_drift, vec1(1.3))(0) == doctest::Approx(0.0));
  auto affine = [](const Vec& x, const Vec&) -> Vec { return 3.0 * x + vec1(0.5); };
  CHECK(gaussian61_averaged_drift(p, affine, vec1(1.3))(0) == doctest::Approx(4.4));
  const GradientModelParams hot = gaussian_params(2.0);
  CHECK(gaussian61_averaged_drift(hot, affine, vec1(1.3))(0) ==
        gaussian61_averaged_drift(p, affine, vec1(1.3))(0));
  auto curved = [](const Vec& x, const Vec&) -> Vec { return x.array().square().matrix(); };
  CHECK(kind_of([&] { gaussian61_averaged_drift(p, curved, vec1(0.0)); }) ==
        ErrorKind::NotAffine);
}

TEST_CASE("TAMD mixture drift matches the Gaussian convolution") {
  const TamdModelParams p = unit_tamd(1.0);
  const ThetaMuSamples s = sample_theta_mu(p, 100000, 2024);
  const Vec y = vec1(0.5);
  const DriftEstimate d = tamd_averaged_drift(p, s, y);
  const double exact = -0.5 / (1.0 + 1.0 / p.kappa) / p.gamma_bar;
  CHECK(std::abs(d.value(0) - exact) <= 3.0 * d.stderr_(0));
}

TEST_CASE("TAMD mixture drift vanishes at the centre of a symmetric cloud") {
  const TamdModelParams p = unit_tamd(1.0);
  ThetaMuSamples s = sample_theta_mu(p, 5000, 3);
  const std::size_t half = s.count;
  s.coords.resize(2 * half);
  for (std::size_t i = 0; i < half; ++i) s.coords[half + i] = -s.coords[i];
  s.count = 2 * half;
  const DriftEstimate d = tamd_averaged_drift(p, s, vec1(0.0));
  CHECK(std::abs(d.value(0)) <= 3.0 * d.stderr_(0) + 1e-12);
}

TEST_CASE("doubling the friction halves the TAMD drift exactly") {
  const TamdModelParams p1 = unit_tamd(1.0);
  const TamdModelParams p2 = unit_tamd(2.0);
  const ThetaMuSamples s = sample_theta_mu(p1, 4000, 5);
  const Vec y = vec1(-0.7);
  CHECK(tamd_averaged_drift(p2, s, y).value(0) == 0.5 * tamd_averaged_drift(p1, s, y).value(0));
}

TEST_CASE("TAMD weights normalize and far points underflow") {
  const TamdModelParams p = unit_tamd(1.0);
  const ThetaMuSamples s = sample_theta_mu(p, 3000, 9);
  const std::vector<double> w = tamd_mixture_weights(s, vec1(1.1), p.kappa);
  CHECK(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-12);
  CHECK(kind_of([&] { tamd_averaged_drift(p, s, vec1(200.0)); }) ==
        ErrorKind::AllWeightsUnderflow);
}

TEST_CASE("soft-abs samples have the right symmetry") {
  const TamdModelParams p =
      tamd_identity(1, TamdPotential::soft_abs, 1.0, 1.0, 1.0, 1.0, 1.0, -3.0, 3.0);
  const ThetaMuSamples s = sample_theta_mu(p, 20000, 12);
  double sum = 0.0;
  for (double v : s.coords) sum += v;
  CHECK(std::abs(sum / 20000.0) < 0.06);
}

TEST_CASE("averaged process with zero drift is pure noise") {
  AveragedDrift zero;
  zero.evaluator = [](const Vec& y) -> Vec { return Vec::Zero(y.size()); };
  SimConfig c;
  c.t_final = 1.0;
  c.dt = 0.1;
  c.y0 = vec1(0.2);
  const NoisePath by = generate_noise(4, {0, Channel::BY}, 10, 0.1, 1);
  const Trajectory t =
      simulate_averaged(zero, [](const Vec&) -> Mat { return Mat::Identity(1, 1) * 0.5; }, c, by);
  double y = 0.2;
  for (std::size_t k = 0; k < 10; ++k) {
    y += 0.5 * by.row(k)[0];
    CHECK(t.y_path(static_cast<Eigen::Index>(k + 1), 0) == doctest::Approx(y).epsilon(1e-15));
  }
}

TEST_CASE("averaged and coupled paths coincide for an x-independent slow drift") {
  const ModelSpec m = slow_decoupled_model({}, 0.05);
  SimConfig c;
  c.t_final = 1.0;
  c.dt = 0.01;
  c.seed = 77;
  c.x0 = vec1(0.0);
  c.y0 = vec1(0.9);
  const Trajectory coupled = simulate_coupled(m, c);
  const Trajectory avg =
      simulate_averaged(make_analytic_drift(m), m.sigma_Y, c, slow_noise(m, c));
  CHECK(avg.y_path == coupled.y_path);
}

TEST_CASE("averaged ODE error halves with dt") {
  AveragedDrift lin;
  lin.evaluator = [](const Vec& y) -> Vec { return -1.5 * y; };
  auto no_noise = [](const Vec&) -> Mat { return Mat::Zero(1, 1); };
  double errs[3];
  for (int level = 0; level < 3; ++level) {
    SimConfig c;
    c.t_final = 1.0;
    c.dt = 0.1 / std::pow(2.0, level);
    c.y0 = vec1(1.0);
    const std::size_t steps = slow_steps(c);
    const NoisePath by = generate_noise(1, {0, Channel::BY}, steps, c.dt, 1);
    const Trajectory t = simulate_averaged(lin, no_noise, c, by);
    errs[level] = std::abs(t.y_path(t.y_path.rows() - 1, 0) - std::exp(-1.5));
  }
  CHECK(errs[0] / errs[1] == doctest::Approx(2.0).epsilon(0.1));
  CHECK(errs[1] / errs[2] == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("cross-method agreement on a probe grid") {
  const ModelSpec m = linear_model({1.0, 2.0, 1.0, 1.0}, 0.1);
  const AveragedDrift analytic = make_analytic_drift(m);
  const AveragedDrift quad = make_quadrature_drift(m, grid1(-10.0, 10.0, 1024));
  const AveragedDrift erg = make_ergodic_drift(m, 31);
  for (int i = 0; i < 10; ++i) {
    const Vec y = vec1(-1.8 + 0.4 * i);
    CHECK(std::abs(analytic(y)(0) - quad(y)(0)) < 1e-6);
    CHECK(std::abs(erg(y)(0) - analytic(y)(0)) <= 3.0 * erg.error_estimate(y)(0) + 1e-6);
  }
}

TEST_CASE("ergodic evaluator is deterministic") {
  const ModelSpec m = linear_model({}, 0.1);
  const AveragedDrift erg = make_ergodic_drift(m, 8);
  CHECK(erg(vec1(0.25))(0) == erg(vec1(0.25))(0));
}

TEST_CASE("Lipschitz estimate never decreases with more pairs") {
  auto f = [](const Vec& y) -> Vec { return vec1(std::sin(2.0 * y(0))); };
  double previous = 0.0;
  for (std::size_t pairs : {10, 100, 1000}) {
    const double est = estimate_lipschitz(f, vec1(-2.0), vec1(2.0), pairs, 6);
    CHECK(est >= previous);
    CHECK(est <= 2.0 + 1e-12);
    previous = est;
  }
  CHECK(previous > 1.9);
}

}  // TEST_SUITE
