#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "slowfast/error.hpp"
#include "slowfast/families.hpp"
#include "slowfast/integrator.hpp"
#include "slowfast/rng.hpp"
#include "slowfast/stats.hpp"

using namespace slowfast;

namespace {

Vec vec1(double v) { return Vec::Constant(1, v); }

SimConfig base_config(double t_final, double dt, std::size_t substeps, std::uint64_t seed) {
  SimConfig c;
  c.t_final = t_final;
  c.dt = dt;
  c.substeps = substeps;
  c.seed = seed;
  c.x0 = vec1(0.5);
  c.y0 = vec1(-0.25);
  return c;
}

ModelSpec zero_model() {
  ModelSpec m;
  m.b_X = [](const Vec& x, const Vec&) -> Vec { return Vec::Zero(x.size()); };
  m.sigma_X = [](const Vec&, const Vec&) -> Mat { return Mat::Zero(1, 1); };
  m.b_Y = [](const Vec&, const Vec& y) -> Vec { return Vec::Zero(y.size()); };
  m.sigma_Y = [](const Vec&) -> Mat { return Mat::Zero(1, 1); };
  m.stiffness = 1.0;
  return m;
}

}  // namespace

TEST_SUITE("integrator") {

TEST_CASE("em_step leaves a state with zero dynamics unchanged") {
  const ModelSpec m = zero_model();
  const State s{vec1(0.3), vec1(-1.7)};
  const State out = em_step(s, m, 0.1, vec1(0.4), vec1(-0.2));
  CHECK(out.x(0) == 0.3);
  CHECK(out.y(0) == -1.7);
}

TEST_CASE("em_step matches the hand-evaluated linear update") {
  LinearParams p;
  p.sigma_x = 0.0;
  ModelSpec m = linear_model(p, 1.0);
  m.sigma_Y = [](const Vec&) -> Mat { return Mat::Zero(1, 1); };
  const State out = em_step({vec1(1.0), vec1(0.0)}, m, 0.1, vec1(0.0), vec1(0.0));
  CHECK(out.x(0) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(out.y(0) == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("em_step scales fast noise by epsilon^-1/2") {
  ModelSpec m = zero_model();
  m.sigma_X = [](const Vec&, const Vec&) -> Mat { return Mat::Identity(1, 1); };
  m.epsilon = 0.25;
  const State out = em_step({vec1(0.0), vec1(0.0)}, m, 0.1, vec1(0.3), vec1(0.0));
  CHECK(out.x(0) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("em_step reports non-finite output") {
  ModelSpec m = zero_model();
  m.b_Y = [](const Vec&, const Vec& y) -> Vec { return y.array().square().matrix() * 1e300; };
  CHECK_THROWS_AS(em_step({vec1(0.0), vec1(1e10)}, m, 1.0, vec1(0.0), vec1(0.0)),
                  NumericalBlowup);
}

TEST_CASE("coupled simulation is deterministic and records its streams") {
  const ModelSpec m = linear_model({}, 0.1);
  const SimConfig c = base_config(1.0, 0.01, 0, 99);
  const Trajectory a = simulate_coupled(m, c);
  const Trajectory b = simulate_coupled(m, c);
  CHECK(a.x_path == b.x_path);
  CHECK(a.y_path == b.y_path);
  REQUIRE(a.times.size() == 101);
  CHECK(a.times.back() == doctest::Approx(1.0));
  REQUIRE(a.seed_record.streams.size() == 2);
  CHECK(a.seed_record.streams[0].channel == Channel::BX);
  CHECK(a.seed_record.streams[1].channel == Channel::BY);
  CHECK(a.seed_record.seed == 99);
}

TEST_CASE("default substeps follow ceil(10 dt stiffness / epsilon)") {
  const ModelSpec m = linear_model({2.0, 1.0, 1.0, 1.0}, 0.1);
  const SimConfig c = base_config(1.0, 0.01, 0, 1);
  CHECK(resolve_substeps(m, c) == 2);
  SimConfig fixed = c;
  fixed.substeps = 7;
  CHECK(resolve_substeps(m, fixed) == 7);
}

TEST_CASE("stability guard rejects coarse fast steps") {
  const ModelSpec m = linear_model({}, 0.01);
  const SimConfig c = base_config(1.0, 0.1, 1, 1);
  CHECK_THROWS_AS(simulate_coupled(m, c), Error);
  try {
    simulate_coupled(m, c);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StabilityViolation);
  }
  SimConfig ok = c;
  ok.substeps = 20;
  CHECK_NOTHROW(simulate_coupled(m, ok));
}

TEST_CASE("t_final must be a multiple of dt") {
  SimConfig c = base_config(1.0, 0.3, 1, 1);
  CHECK_THROWS_AS(slow_steps(c), Error);
  c.dt = 0.25;
  CHECK(slow_steps(c) == 4);
}

TEST_CASE("x-independent slow drift gives the same y path as the slow equation alone") {
  const ModelSpec m = slow_decoupled_model({}, 0.05);
  const SimConfig c = base_config(2.0, 0.02, 0, 3);
  const Trajectory t = simulate_coupled(m, c);
  const NoisePath by = slow_noise(m, c);
  double y = c.y0(0);
  for (std::size_t k = 0; k < by.steps(); ++k) {
    y = y + c.dt * (-y) + 1.0 * by.row(k)[0];
    CHECK(t.y_path(static_cast<Eigen::Index>(k + 1), 0) == y);
  }
}

TEST_CASE("noise-free linear recursion matches five hand steps") {
  LinearParams p{1.0, 0.5, 0.0, 1.0};
  ModelSpec m = linear_model(p, 1.0);
  m.sigma_Y = [](const Vec&) -> Mat { return Mat::Zero(1, 1); };
  SimConfig c = base_config(0.5, 0.1, 1, 5);
  const Trajectory t = simulate_coupled(m, c);
  double x = 0.5, y = -0.25;
  for (int k = 1; k <= 5; ++k) {
    const double xn = x - 0.1 * (x - y);
    const double yn = y - 0.1 * 0.5 * (y - x);
    x = xn;
    y = yn;
    CHECK(t.x_path(k, 0) == doctest::Approx(x).epsilon(1e-14));
    CHECK(t.y_path(k, 0) == doctest::Approx(y).epsilon(1e-14));
  }
}

TEST_CASE("dt halving against a fine reference shows first-order error") {
  const ModelSpec m = linear_model({}, 1.0);
  const double dt0 = 0.1;
  const std::size_t fine_factor = 32;
  const double dt_ref = dt0 / static_cast<double>(fine_factor);
  const std::size_t steps_ref = static_cast<std::size_t>(std::lround(1.0 / dt_ref));
  const std::size_t replicas = 200;
  std::vector<double> err[3];
  for (std::uint32_t r = 0; r < replicas; ++r) {
    const NoisePath bx = generate_noise(11, {r, Channel::BX}, steps_ref, dt_ref, 1);
    const NoisePath by = generate_noise(11, {r, Channel::BY}, steps_ref, dt_ref, 1);
    SimConfig c = base_config(1.0, dt_ref, 1, 11);
    const Trajectory ref = simulate_coupled(m, c, bx, by);
    for (int level = 0; level < 3; ++level) {
      const std::size_t f = fine_factor >> level;
      c.dt = dt_ref * static_cast<double>(f);
      const Trajectory t = simulate_coupled(m, c, bx.coarsen(f), by.coarsen(f));
      // Compare on the dt0 grid shared by every level.
      const std::size_t stride = std::size_t{1} << level;
      double worst = 0.0;
      for (std::size_t k = 0; k * stride < t.times.size(); ++k) {
        const auto kc = static_cast<Eigen::Index>(k * stride);
        const auto kr = static_cast<Eigen::Index>(k * fine_factor);
        worst = std::max(worst, std::abs(t.y_path(kc, 0) - ref.y_path(kr, 0)));
      }
      err[level].push_back(worst);
    }
  }
  const double e0 = mean_se(err[0]).mean;
  const double e1 = mean_se(err[1]).mean;
  const double e2 = mean_se(err[2]).mean;
  CHECK(e0 / e1 == doctest::Approx(2.0).epsilon(0.25));
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.25));
}

TEST_CASE("frozen linear process reaches the OU stationary law") {
  const LinearParams p{2.0, 1.0, 1.5, 1.0};
  const ModelSpec m = linear_model(p, 0.01);
  SimConfig c = base_config(4000.0, 0.01, 1, 17);
  c.x0 = vec1(0.7);
  const Vec y = vec1(0.7);
  const Trajectory t = simulate_frozen(m, y, c);
  std::vector<double> xs;
  for (Eigen::Index k = 2000; k < t.x_path.rows(); ++k) xs.push_back(t.x_path(k, 0));
  const MeanSe mean = batch_means(xs, 40);
  CHECK(std::abs(mean.mean - 0.7) <= 3.0 * mean.se);
  std::vector<double> sq;
  for (double v : xs) sq.push_back((v - 0.7) * (v - 0.7));
  const MeanSe var = batch_means(sq, 40);
  // Euler-Maruyama stationary variance sigma^2 h / (2 kappa h - kappa^2 h^2).
  const double h = 0.01;
  const double em_var = p.sigma_x * p.sigma_x / (2.0 * p.kappa_x - p.kappa_x * p.kappa_x * h);
  CHECK(std::abs(var.mean - em_var) <= 3.0 * var.se);
  CHECK(std::abs(em_var - p.sigma_x * p.sigma_x / (2.0 * p.kappa_x)) < 0.01);
}

TEST_CASE("noise-free frozen process contracts geometrically to y") {
  const ModelSpec m = linear_model({1.0, 1.0, 0.0, 1.0}, 0.1);
  SimConfig c = base_config(5.0, 0.1, 1, 1);
  c.x0 = vec1(3.0);
  const Trajectory t = simulate_frozen(m, vec1(1.0), c);
  for (Eigen::Index k = 0; k < t.x_path.rows(); ++k) {
    CHECK(t.x_path(k, 0) - 1.0 == doctest::Approx(2.0 * std::pow(0.9, k)).epsilon(1e-12));
  }
}

TEST_CASE("frozen linear paths are translation equivariant in y") {
  const ModelSpec m = linear_model({}, 0.1);
  SimConfig c = base_config(1.0, 0.01, 2, 8);
  c.x0 = vec1(0.0);
  const Trajectory a = simulate_frozen(m, vec1(0.0), c);
  c.x0 = vec1(2.0);
  const Trajectory b = simulate_frozen(m, vec1(2.0), c);
  for (Eigen::Index k = 0; k < a.x_path.rows(); ++k) {
    CHECK(b.x_path(k, 0) - a.x_path(k, 0) == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("triple shares y with the coupled run and x with the hook") {
  const ModelSpec m = linear_model({}, 0.1);
  const SimConfig c = base_config(1.0, 0.01, 0, 21);
  const Trajectory coupled = simulate_coupled(m, c);
  const TripleTrajectory triple = simulate_triple(m, c);
  CHECK(triple.y_path == coupled.y_path);
  CHECK(triple.x_path == coupled.x_path);
  CHECK(triple.xtilde_path != triple.x_path);
  const TripleTrajectory shared = simulate_triple(m, c, {true});
  CHECK(shared.xtilde_path == shared.x_path);
}

TEST_CASE("independent fast copies stay within the dissipation bound") {
  // Linear model: kappa_X = kappa_x, alpha = 0, lambda_bar = sigma_x^2 / 2.
  const LinearParams p;
  const ModelSpec m = linear_model(p, 0.05);
  const double bound = 2.0 * (0.5 * p.sigma_x * p.sigma_x) / p.kappa_x;
  std::vector<double> gaps;
  for (std::uint32_t r = 0; r < 400; ++r) {
    SimConfig c = base_config(1.0, 0.01, 0, 31);
    c.replica = r;
    const TripleTrajectory t = simulate_triple(m, c);
    const double d = t.x_path(t.x_path.rows() - 1, 0) - t.xtilde_path(t.x_path.rows() - 1, 0);
    gaps.push_back(d * d);
  }
  const MeanSe g = mean_se(gaps);
  CHECK(g.mean <= bound + 3.0 * g.se);
  CHECK(g.mean > 0.5);
}

TEST_CASE("fast initial state is drawn from mu when requested") {
  const ModelSpec m = linear_model({}, 0.1);
  SimConfig c = base_config(1.0, 0.01, 0, 4);
  CHECK(initial_fast_state(m, c)(0) == 0.5);
  c.init_fast_from_mu = true;
  std::vector<double> draws;
  for (std::uint32_t r = 0; r < 4000; ++r) {
    c.replica = r;
    draws.push_back(initial_fast_state(m, c)(0));
  }
  const MeanSe s = mean_se(draws);
  CHECK(std::abs(s.mean - c.y0(0)) <= 3.0 * s.se);
  CHECK(sample_variance(draws) == doctest::Approx(0.5).epsilon(0.08));
}

TEST_CASE("runtime blow-up reports step and component") {
  ModelSpec m = zero_model();
  m.b_Y = [](const Vec&, const Vec& y) -> Vec { return y.array().square().matrix(); };
  SimConfig c = base_config(5.0, 0.5, 1, 1);
  c.y0 = vec1(10.0);
  try {
    simulate_coupled(m, c);
    FAIL("expected NumericalBlowup");
  } catch (const NumericalBlowup& e) {
    CHECK(e.component() == 1);
    CHECK(e.step() >= 1);
    CHECK(e.step() <= 10);
  }
}

TEST_CASE("stiffness estimate recovers the linear rate") {
  const ModelSpec m = linear_model({3.0, 1.0, 1.0, 1.0}, 0.1);
  CHECK(estimate_stiffness(m, vec1(0.0), vec1(0.0), 2.0, 50, 5) ==
        doctest::Approx(3.0).epsilon(1e-9));
}

}  // TEST_SUITE
