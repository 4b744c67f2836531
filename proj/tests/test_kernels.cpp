#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "slowfast/kernels.hpp"

namespace k = slowfast::kernels;

TEST_SUITE("kernels") {

TEST_CASE("philox4x32-10 known answers") {
  // Reference vectors from the Random123 distribution (kat_vectors).
  CHECK(k::philox4x32({0, 0, 0, 0}, {0, 0}) ==
        k::PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(k::philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        k::PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(k::philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        k::PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("philox_fill advances the 64-bit block counter") {
  std::vector<std::uint32_t> out(4 * 3);
  const k::PhiloxCounter base{0xfffffffe, 0, 7, 2};
  k::scalar::philox_fill(out, base, {1, 2});
  const auto b2 = k::philox4x32({0x00000000, 1, 7, 2}, {1, 2});
  CHECK(out[8] == b2[0]);
  CHECK(out[11] == b2[3]);
}

#if defined(SLOWFAST_HAVE_AVX2)
TEST_CASE("avx2 philox matches scalar bit for bit") {
  if (!k::avx2_available()) return;
  for (std::size_t blocks : {1u, 3u, 4u, 5u, 64u, 1027u}) {
    std::vector<std::uint32_t> a(4 * blocks), b(4 * blocks);
    const k::PhiloxCounter base{0xfffffff0u, 0x12u, 99u, 4u};
    k::scalar::philox_fill(a, base, {0xdeadbeef, 0x1234});
    k::avx2::philox_fill(b, base, {0xdeadbeef, 0x1234});
    CHECK(a == b);
  }
}

TEST_CASE("avx2 compensated sum agrees with scalar") {
  if (!k::avx2_available()) return;
  std::vector<double> v;
  for (int i = 0; i < 1001; ++i) v.push_back(std::sin(i) * std::pow(10.0, (i % 17) - 8));
  v.push_back(1e16);
  v.push_back(1.0);
  v.push_back(-1e16);
  const double s = k::scalar::compensated_sum(v);
  const double a = k::avx2::compensated_sum(v);
  CHECK(a == doctest::Approx(s).epsilon(1e-15));
}

TEST_CASE("avx2 mixture sums agree with scalar") {
  if (!k::avx2_available()) return;
  for (std::size_t dim : {1u, 2u, 3u}) {
    const std::size_t count = 1000 + dim;
    std::vector<double> coords(dim * count);
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = std::sin(0.37 * i) * 3.0;
    std::vector<double> y(dim, 0.4);
    std::vector<double> a1(dim), a2(dim), a3(dim), b1(dim), b2(dim), b3(dim);
    const auto s = k::scalar::mixture_sums(coords, count, y, 1.7, a1, a2, a3);
    const auto v = k::avx2::mixture_sums(coords, count, y, 1.7, b1, b2, b3);
    CHECK(v.min_sq_dist == s.min_sq_dist);
    CHECK(v.sum_w == doctest::Approx(s.sum_w).epsilon(1e-12));
    CHECK(v.sum_w2 == doctest::Approx(s.sum_w2).epsilon(1e-12));
    for (std::size_t j = 0; j < dim; ++j) {
      CHECK(b1[j] == doctest::Approx(a1[j]).epsilon(1e-11));
      CHECK(b2[j] == doctest::Approx(a2[j]).epsilon(1e-11));
      CHECK(b3[j] == doctest::Approx(a3[j]).epsilon(1e-11));
    }
  }
}

TEST_CASE("avx2 ensemble step is bit-identical to scalar") {
  if (!k::avx2_available()) return;
  std::vector<double> x1(37), x2(37), dw(37);
  for (std::size_t i = 0; i < 37; ++i) {
    x1[i] = x2[i] = std::cos(i);
    dw[i] = std::sin(3.0 * i) * 0.1;
  }
  k::scalar::ou_ensemble_step(x1, dw, 1.3, 0.2, 1.41, 0.01);
  k::avx2::ou_ensemble_step(x2, dw, 1.3, 0.2, 1.41, 0.01);
  CHECK(x1 == x2);
}
#endif

TEST_CASE("compensated sum recovers cancelled terms") {
  const std::vector<double> v{1.0, 1e100, 1.0, -1e100};
  CHECK(k::compensated_sum(v) == 2.0);
}

}
