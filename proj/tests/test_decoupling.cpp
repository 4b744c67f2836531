#include <doctest.h>

#include <cmath>
#include <vector>

#include "slowfast/constants.hpp"
#include "slowfast/decoupling.hpp"
#include "slowfast/error.hpp"
#include "slowfast/families.hpp"
#include "slowfast/integrator.hpp"

using namespace slowfast;

namespace {

Vec vec1(double v) { return Vec::Constant(1, v); }

SimConfig triple_config(double eps, std::uint64_t seed) {
  SimConfig c;
  c.t_final = 1.0;
  c.dt = eps / 10.0;
  c.substeps = 2;
  c.seed = seed;
  c.x0 = vec1(0.0);
  c.y0 = vec1(0.5);
  c.init_fast_from_mu = true;
  return c;
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

}  // namespace

TEST_SUITE("decoupling") {

TEST_CASE("x-independent slow drift gives a trivial weight") {
  const ModelSpec m = slow_decoupled_model({}, 1.0 / 16.0);
  const SimConfig c = triple_config(1.0 / 16.0, 3);
  const TripleTrajectory t = simulate_triple(m, c);
  const GirsanovPath g = girsanov_weight_path(t, m, slow_noise(m, c));
  for (std::size_t k = 0; k < g.M.size(); ++k) {
    CHECK(g.M[k] == 0.0);
    CHECK(g.QV[k] == 0.0);
    CHECK(g.stoch_exp[k] == 1.0);
  }
}

TEST_CASE("shared fast noise gives a trivial weight") {
  const ModelSpec m = linear_model({}, 1.0 / 16.0);
  const SimConfig c = triple_config(1.0 / 16.0, 4);
  const TripleTrajectory t = simulate_triple(m, c, {true});
  const GirsanovPath g = girsanov_weight_path(t, m, slow_noise(m, c));
  for (double v : g.M) CHECK(v == 0.0);
}

TEST_CASE("weight path invariants") {
  const ModelSpec m = linear_model({}, 1.0 / 32.0);
  for (std::uint32_t r = 0; r < 20; ++r) {
    SimConfig c = triple_config(1.0 / 32.0, 5);
    c.replica = r;
    const TripleTrajectory t = simulate_triple(m, c);
    const GirsanovPath g = girsanov_weight_path(t, m, slow_noise(m, c));
    REQUIRE(g.times.size() == t.times.size());
    CHECK(stoch_exp_consistency(g) <= 1e-12);
    for (std::size_t k = 1; k < g.QV.size(); ++k) CHECK(g.QV[k] >= g.QV[k - 1]);
    for (double e : g.stoch_exp) CHECK(e > 0.0);
  }
}

TEST_CASE("singular slow diffusion is rejected") {
  ModelSpec m = linear_model({}, 1.0 / 16.0);
  const SimConfig c = triple_config(1.0 / 16.0, 6);
  const TripleTrajectory t = simulate_triple(m, c);
  const NoisePath by = slow_noise(m, c);
  m.sigma_Y = [](const Vec&) -> Mat { return Mat::Zero(1, 1); };
  CHECK(kind_of([&] { girsanov_weight_path(t, m, by); }) == ErrorKind::SingularSigmaY);
}

TEST_CASE("stochastic exponential has unit mean on two models") {
  SUBCASE("linear") {
    const ModelSpec m = linear_model({}, 1.0 / 32.0);
    const LawEquivalenceReport r = check_law_equivalence(
        m, triple_config(1.0 / 32.0, 7), {constant_functional()}, 4000, 7, 32.0, 4);
    CHECK(std::abs(r.mean_weight - 1.0) <= 3.0 * r.mean_weight_se);
    CHECK(r.rows[0].lhs == 1.0);
    CHECK(r.rows[0].pass);
  }
  SUBCASE("gradient") {
    GradientModelParams p;
    p.Q = Mat::Identity(1, 1) * 2.0;
    p.g = [](const Vec& y) -> Vec { return 0.5 * y; };
    auto b_Y = [](const Vec& x, const Vec& y) -> Vec { return x - y; };
    const double eps = 1.0 / 32.0;
    const ModelSpec m = gradient61_model(p, b_Y, 1, eps);
    // gamma = eps^-1 lambda_Q^2 beta_Y^-1 / (|grad b_Y|^2 beta_X^-1) = 128.
    const LawEquivalenceReport r = check_law_equivalence(
        m, triple_config(eps, 8), {constant_functional()}, 4000, 8, 128.0, 4);
    CHECK(std::abs(r.mean_weight - 1.0) <= 3.0 * r.mean_weight_se);
  }
}

TEST_CASE("law equivalence holds for the standard functionals") {
  const ModelSpec m = linear_model({}, 1.0 / 32.0);
  const LawEquivalenceReport r =
      check_law_equivalence(m, triple_config(1.0 / 32.0, 9), standard_functionals(), 4000, 9,
                            32.0, 4);
  REQUIRE(r.rows.size() == 5);
  for (const LawEquivalenceRow& row : r.rows) {
    INFO(row.functional_id);
    CHECK(row.pass);
    CHECK(row.paired_se > 0.0);
    CHECK(row.pooled_se > 0.0);
  }
  CHECK(r.weight_underflows == 0);
}

TEST_CASE("law equivalence refuses the non-Novikov regime") {
  const ModelSpec m = linear_model({}, 2.0 / 3.0);
  CHECK(kind_of([&] {
          check_law_equivalence(m, triple_config(2.0 / 3.0, 1), standard_functionals(), 10, 1,
                                1.5);
        }) == ErrorKind::NovikovViolation);
}

TEST_CASE("law equivalence does not depend on the worker count") {
  const ModelSpec m = linear_model({}, 1.0 / 16.0);
  const SimConfig c = triple_config(1.0 / 16.0, 10);
  const LawEquivalenceReport a = check_law_equivalence(m, c, standard_functionals(), 64, 10, 16.0, 1);
  const LawEquivalenceReport b = check_law_equivalence(m, c, standard_functionals(), 64, 10, 16.0, 4);
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].lhs == b.rows[i].lhs);
    CHECK(a.rows[i].rhs == b.rows[i].rhs);
  }
  CHECK(a.mean_weight == b.mean_weight);
}

TEST_CASE("exponential moment check") {
  const double eps = 1.0 / 32.0;
  const ModelSpec m = linear_model({}, eps);
  const CoefficientBounds bounds = linear_model_bounds({}, eps);
  const SimConfig c = triple_config(eps, 11);
  SUBCASE("beta zero") {
    const ExpMomentCheck e = check_exponential_moment(m, bounds, 0.0, c, 50, 11, 2);
    CHECK(e.empirical == 1.0);
    CHECK(e.bound == 1.0);
    CHECK(e.pass);
  }
  SUBCASE("x-independent slow drift") {
    const ModelSpec d = slow_decoupled_model({}, eps);
    const ExpMomentCheck e = check_exponential_moment(d, bounds, 1.0, c, 50, 11, 2);
    CHECK(e.empirical == 1.0);
    CHECK(e.pass);
  }
  SUBCASE("beta = gamma / 8") {
    const ExpMomentCheck e = check_exponential_moment(m, bounds, 4.0, c, 1000, 11, 4);
    CHECK(e.pass);
    CHECK(e.empirical > 1.0);
  }
  SUBCASE("beta above gamma / 4") {
    CHECK(kind_of([&] { check_exponential_moment(m, bounds, 9.0, c, 10, 11); }) ==
          ErrorKind::BetaTooLarge);
  }
}

}  // TEST_SUITE
