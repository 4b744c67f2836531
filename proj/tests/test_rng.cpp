#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

#include "slowfast/error.hpp"
#include "slowfast/parallel.hpp"
#include "slowfast/rng.hpp"
#include "slowfast/stats.hpp"

using namespace slowfast;

TEST_SUITE("rng") {

TEST_CASE("normal streams are reproducible and offset-consistent") {
  std::vector<double> a(1000), b(1000), tail(400);
  fill_normals(42, {3, Channel::BX}, 0, a);
  fill_normals(42, {3, Channel::BX}, 0, b);
  CHECK(a == b);
  fill_normals(42, {3, Channel::BX}, 600, tail);
  CHECK(std::equal(tail.begin(), tail.end(), a.begin() + 600));
  // Odd offsets fall in the middle of a Box-Muller pair.
  std::vector<double> odd(5);
  fill_normals(42, {3, Channel::BX}, 7, odd);
  CHECK(std::equal(odd.begin(), odd.end(), a.begin() + 7));
}

TEST_CASE("streams differ by seed, replica and channel") {
  std::vector<double> base(16), other(16);
  fill_normals(1, {0, Channel::BX}, 0, base);
  fill_normals(2, {0, Channel::BX}, 0, other);
  CHECK(base != other);
  fill_normals(1, {1, Channel::BX}, 0, other);
  CHECK(base != other);
  fill_normals(1, {0, Channel::BY}, 0, other);
  CHECK(base != other);
  fill_normals(1, {0, Channel::BXtilde}, 0, other);
  CHECK(base != other);
}

TEST_CASE("normal moments") {
  std::vector<double> z(200000);
  fill_normals(7, {0, Channel::Aux}, 0, z);
  const MeanSe ms = mean_se(z);
  CHECK(std::abs(ms.mean) < 4.0 * ms.se);
  const double var = sample_variance(z);
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / 200000.0));
  double m4 = 0.0;
  for (double v : z) m4 += v * v * v * v;
  CHECK(std::abs(m4 / 200000.0 - 3.0) < 0.1);
}

TEST_CASE("uniforms lie strictly inside (0, 1)") {
  std::vector<double> u(100000);
  fill_uniforms(9, {0, Channel::Aux}, 0, u);
  CHECK(*std::min_element(u.begin(), u.end()) > 0.0);
  CHECK(*std::max_element(u.begin(), u.end()) < 1.0);
  CHECK(std::abs(mean_se(u).mean - 0.5) < 0.005);
}

TEST_CASE("derive_seed separates indices") {
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(5, 9) == derive_seed(5, 9));
}

TEST_CASE("noise paths scale with the step and coarsen by summing rows") {
  const NoisePath p = generate_noise(11, {0, Channel::BY}, 8, 0.25, 2);
  CHECK(p.steps() == 8);
  CHECK(p.dim() == 2);
  std::vector<double> z(16);
  fill_normals(11, {0, Channel::BY}, 0, z);
  CHECK(p.row(3)[1] == doctest::Approx(0.5 * z[7]).epsilon(1e-15));
  const NoisePath c = p.coarsen(2);
  CHECK(c.steps() == 4);
  CHECK(c.step() == 0.5);
  CHECK(c.stream_id() == p.stream_id());
  CHECK(c.row(1)[0] == p.row(2)[0] + p.row(3)[0]);
  CHECK_THROWS_AS(p.coarsen(3), Error);
}

TEST_CASE("parallel_for is independent of the worker count") {
  for (int workers : {1, 2, 7}) {
    std::vector<double> out(1000);
    parallel_for(out.size(), workers, [&](std::size_t i) {
      std::vector<double> z(3);
      fill_normals(3, {static_cast<std::uint32_t>(i), Channel::BX}, 0, z);
      out[i] = z[0] + z[1] * z[2];
    });
    std::vector<double> ref(1000);
    for (std::size_t i = 0; i < ref.size(); ++i) {
      std::vector<double> z(3);
      fill_normals(3, {static_cast<std::uint32_t>(i), Channel::BX}, 0, z);
      ref[i] = z[0] + z[1] * z[2];
    }
    CHECK(out == ref);
  }
}

TEST_CASE("parallel_for rethrows the failure with the smallest index") {
  for (int workers : {1, 4}) {
    try {
      parallel_for(100, workers, [](std::size_t i) {
        if (i == 17 || i == 63) throw std::runtime_error(std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "17");
    }
  }
}

TEST_CASE("worker count resolution") {
  CHECK(resolve_workers(3) == 3);
  ::setenv("SLOWFAST_WORKERS", "5", 1);
  CHECK(resolve_workers(0) == 5);
  ::unsetenv("SLOWFAST_WORKERS");
  CHECK(resolve_workers(0) == 1);
}

}  // TEST_SUITE
