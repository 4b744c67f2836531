#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "slowfast/averaging.hpp"
#include "slowfast/constants.hpp"
#include "slowfast/diagnostics.hpp"
#include "slowfast/error.hpp"
#include "slowfast/families.hpp"
#include "slowfast/rng.hpp"

using namespace slowfast;

namespace {

Vec vec1(double v) { return Vec::Constant(1, v); }

EmpiricalMeasure gaussian_samples(std::size_t count, double mean, double sd, std::uint64_t seed,
                                  std::size_t dim = 1) {
  std::vector<double> z(count * dim);
  fill_normals(seed, {0, Channel::Aux}, 0, z);
  for (double& v : z) v = mean + sd * v;
  EmpiricalMeasure m;
  m.dim = dim;
  m.samples = std::move(z);
  return m;
}

double std_normal_density(const Vec& x) {
  return std::exp(-0.5 * x.squaredNorm()) /
         std::pow(2.0 * std::numbers::pi, 0.5 * static_cast<double>(x.size()));
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

QuadratureGrid grid1(double lo, double hi, std::size_t cells) {
  QuadratureGrid g;
  g.lo = vec1(lo);
  g.hi = vec1(hi);
  g.cells = cells;
  return g;
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("entropy of a density against itself is small") {
  const EmpiricalMeasure p = gaussian_samples(100000, 0.0, 1.0, 1);
  for (EntropyMethod method : {EntropyMethod::histogram, EntropyMethod::knn}) {
    const EntropyEstimate h = relative_entropy(p, std_normal_density, method);
    INFO(to_string(method));
    CHECK(std::abs(h.value) <= 0.02);
  }
}

TEST_CASE("Gaussian KL closed forms") {
  const EmpiricalMeasure shifted = gaussian_samples(100000, 0.5, 1.0, 2);
  const EmpiricalMeasure wide = gaussian_samples(100000, 0.0, 1.2, 3);
  const double kl_wide = 0.5 * (1.44 - 1.0 - 2.0 * std::log(1.2));
  CHECK(kl_wide == doctest::Approx(0.0377).epsilon(0.01));
  for (EntropyMethod method : {EntropyMethod::histogram, EntropyMethod::knn}) {
    INFO(to_string(method));
    CHECK(relative_entropy(shifted, std_normal_density, method).value ==
          doctest::Approx(0.125).epsilon(0.16));
    CHECK(std::abs(relative_entropy(wide, std_normal_density, method).value - kl_wide) <= 0.02);
  }
}

TEST_CASE("two-dimensional entropy estimates") {
  const EmpiricalMeasure p = gaussian_samples(50000, 0.5, 1.0, 4, 2);
  // KL of N((.5,.5), I) from N(0, I) is 0.25.
  CHECK(std::abs(relative_entropy(p, std_normal_density, EntropyMethod::histogram).value - 0.25) <=
        0.03);
  CHECK(std::abs(relative_entropy(p, std_normal_density, EntropyMethod::knn).value - 0.25) <= 0.03);
}

TEST_CASE("two-sample estimate matches the density-based one") {
  const EmpiricalMeasure p = gaussian_samples(20000, 0.5, 1.0, 5);
  const EmpiricalMeasure q = gaussian_samples(20000, 0.0, 1.0, 6);
  CHECK(std::abs(relative_entropy_two_sample(p, q).value - 0.125) <= 0.03);
}

TEST_CASE("entropy estimator errors") {
  const EmpiricalMeasure p3 = gaussian_samples(1000, 0.0, 1.0, 7, 3);
  CHECK(kind_of([&] { relative_entropy(p3, std_normal_density, EntropyMethod::histogram); }) ==
        ErrorKind::DimensionTooHigh);
  const EmpiricalMeasure p5 = gaussian_samples(1000, 0.0, 1.0, 7, 5);
  CHECK(kind_of([&] { relative_entropy(p5, std_normal_density, EntropyMethod::knn); }) ==
        ErrorKind::DimensionTooHigh);
  const EmpiricalMeasure p = gaussian_samples(1000, 0.0, 1.0, 8);
  auto half_line = [](const Vec& x) { return x(0) > 0.0 ? 2.0 * std_normal_density(x) : 0.0; };
  CHECK(kind_of([&] { relative_entropy(p, half_line, EntropyMethod::histogram); }) ==
        ErrorKind::ZeroDensityCell);
}

TEST_CASE("T2 check against Gaussian pairs") {
  const EmpiricalMeasure mu = gaussian_samples(100000, 0.0, 1.0, 9);
  const EmpiricalMeasure rho = gaussian_samples(100000, 0.5, 1.0, 10);
  LipschitzProbe id{[](const Vec& x) { return x(0); }, 1.0};

  const T2Check same = t2_check(id, mu, gaussian_samples(100000, 0.0, 1.0, 11), std_normal_density,
                                1.0, 1.0);
  CHECK(same.lhs < 1e-3);
  CHECK(same.pass);

  const T2Check too_small = t2_check(id, rho, mu, std_normal_density, 1.0, 1.0);
  CHECK(too_small.lhs == doctest::Approx(0.25).epsilon(0.05));
  CHECK(too_small.rhs == doctest::Approx(0.125).epsilon(0.16));
  CHECK_FALSE(too_small.pass);

  const T2Check generous = t2_check(id, rho, mu, std_normal_density, 4.0, 1.0);
  CHECK(generous.pass);

  LipschitzProbe tripled{[](const Vec& x) { return 3.0 * x(0); }, 3.0};
  const T2Check scaled = t2_check(tripled, rho, mu, std_normal_density, 1.0, 1.0);
  CHECK(scaled.lhs == doctest::Approx(9.0 * too_small.lhs));
  CHECK(scaled.rhs == doctest::Approx(9.0 * too_small.rhs));
  CHECK(scaled.pass == too_small.pass);
}

TEST_CASE("log-partition identities on three families") {
  const QuadratureGrid g = grid1(-12.0, 12.0, 2048);
  SUBCASE("translation") {
    auto log_mu = [](const Vec& x, double y) { return -0.5 * (x(0) - y) * (x(0) - y); };
    const LogPartitionCheck c = log_partition_identity(log_mu, 0.7, 1e-3, g);
    CHECK(std::abs(c.lhs1) < 1e-6);
    CHECK(std::abs(c.rhs1) < 1e-6);
    CHECK(std::abs(c.lhs2) < 1e-4);
    CHECK(std::abs(c.rhs2) < 1e-6);
    CHECK(c.pass);
  }
  SUBCASE("tilted") {
    auto log_mu = [](const Vec& x, double y) { return -0.5 * x(0) * x(0) + x(0) * y; };
    const LogPartitionCheck c = log_partition_identity(log_mu, 0.7, 1e-3, g);
    CHECK(c.lhs1 == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(c.rhs1 == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(c.rhs2 == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(c.pass);
    CHECK(c.richardson_ok);
  }
  SUBCASE("variance") {
    // log Z = log sqrt(2 pi / y): first derivative -1/(2y), second 1/(2y^2).
    auto log_mu = [](const Vec& x, double y) { return -0.5 * y * x(0) * x(0); };
    const LogPartitionCheck c = log_partition_identity(log_mu, 1.5, 1e-3, g);
    CHECK(c.lhs1 == doctest::Approx(-1.0 / 3.0).epsilon(1e-6));
    CHECK(c.rhs1 == doctest::Approx(-1.0 / 3.0).epsilon(1e-6));
    CHECK(c.rhs2 == doctest::Approx(0.5 / 2.25).epsilon(1e-6));
    CHECK(c.pass);
  }
}

TEST_CASE("frozen entropy stays small from the stationary law") {
  // kappa_x = 1, sigma_x = sqrt 2: mu^y = N(y, 1).
  const ModelSpec m = linear_model({1.0, 1.0, std::sqrt(2.0), 1.0}, 0.1);
  EntropyDecayOptions o;
  o.y = vec1(0.3);
  o.ensemble = 10000;
  o.checkpoints = {0.0, 0.5, 1.0, 2.0};
  o.seed = 12;
  const EntropyCurve c = entropy_decay_curve(m, o);
  REQUIRE(c.estimates.size() == 4);
  for (const EntropyEstimate& e : c.estimates) CHECK(std::abs(e.value) <= 0.02);
}

TEST_CASE("frozen entropy decays at rate two") {
  const ModelSpec m = linear_model({1.0, 1.0, std::sqrt(2.0), 1.0}, 0.1);
  EntropyDecayOptions o;
  o.y = vec1(0.0);
  o.ensemble = 10000;
  o.checkpoints = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25};
  o.seed = 13;
  o.initial = [](std::span<const double> z) -> Vec { return vec1(1.0 + z[0]); };
  const EntropyCurve c = entropy_decay_curve(m, o);
  CHECK(c.estimates[0].value == doctest::Approx(0.5).epsilon(0.1));
  CHECK(c.fit_points >= 3);
  CHECK(c.fitted_rate >= 1.6);
  CHECK(c.fitted_rate <= 2.4);
}

TEST_CASE("coupled entropy stays below its source plateau") {
  const double eps = 1.0 / 32.0;
  const LinearParams p;
  const ModelSpec m = linear_model(p, eps);
  EntropyDecayOptions o;
  o.frozen = false;
  o.y = vec1(0.0);
  o.ensemble = 4000;
  o.checkpoints = {0.0, 0.25, 0.5};
  o.seed = 14;
  o.dt = eps / 10.0;
  const EntropyCurve c = entropy_decay_curve(m, o);
  const double plateau =
      entropy_plateau(linear_model_bounds(p, eps), linear_model_psi(p, eps));
  const double h0 = c.estimates[0].value;
  for (const EntropyEstimate& e : c.estimates) {
    CHECK(e.value <= h0 + plateau + 3.0 * e.se + 0.05);
  }
  CHECK(std::isnan(c.fitted_rate));
}

TEST_CASE("Poincare estimate for the OU process") {
  const ModelSpec m = linear_model({1.0, 1.0, std::sqrt(2.0), 1.0}, 0.1);
  const std::vector<PoincareProbe> one{coordinate_probes(1)[0]};
  const PoincareEstimate a = estimate_poincare(m, vec1(0.2), one, 15);
  CHECK(a.c_P_lower == doctest::Approx(0.5).epsilon(0.1));
  const PoincareEstimate b = estimate_poincare(m, vec1(0.2), coordinate_probes(1), 15);
  CHECK(b.c_P_lower >= a.c_P_lower);
  CHECK(b.c_P_lower > 0.0);
  const std::vector<PoincareProbe> flat{{"const", [](const Vec&) { return 1.0; }, {}}};
  CHECK(kind_of([&] { estimate_poincare(m, vec1(0.2), flat, 15); }) ==
        ErrorKind::DegenerateProbe);
}

}  // TEST_SUITE
