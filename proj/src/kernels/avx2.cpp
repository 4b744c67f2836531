#include <immintrin.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "philox_round.hpp"
#include "slowfast/kernels.hpp"

namespace slowfast::kernels::avx2 {
namespace {

// exp(x) for x <= 0. Cody-Waite reduction to |r| <= ln2/2 and a degree-13
// Taylor polynomial; relative error is a few ulp. Returns 0 below -708.
inline __m256d exp_nonpositive(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d lower = _mm256_set1_pd(-708.0);

  const __m256d underflow = _mm256_cmp_pd(x, lower, _CMP_LT_OQ);
  x = _mm256_max_pd(x, lower);
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_sub_pd(x, _mm256_mul_pd(n, ln2_hi));
  r = _mm256_sub_pd(r, _mm256_mul_pd(n, ln2_lo));

  static constexpr std::array<double, 14> kCoeff = {
      1.0,
      1.0,
      1.0 / 2.0,
      1.0 / 6.0,
      1.0 / 24.0,
      1.0 / 120.0,
      1.0 / 720.0,
      1.0 / 5040.0,
      1.0 / 40320.0,
      1.0 / 362880.0,
      1.0 / 3628800.0,
      1.0 / 39916800.0,
      1.0 / 479001600.0,
      1.0 / 6227020800.0,
  };
  __m256d p = _mm256_set1_pd(kCoeff[13]);
  for (int k = 12; k >= 0; --k) {
    p = _mm256_add_pd(_mm256_mul_pd(p, r), _mm256_set1_pd(kCoeff[static_cast<std::size_t>(k)]));
  }

  // 2^n through the exponent field; n is integral and in [-1022, 0].
  const __m256d shifted = _mm256_add_pd(n, _mm256_set1_pd(6755399441055744.0));
  const __m256i bits = _mm256_sub_epi64(_mm256_castpd_si256(shifted),
                                        _mm256_set1_epi64x(0x4338000000000000LL - 1023));
  const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(bits, 52));
  return _mm256_andnot_pd(underflow, _mm256_mul_pd(p, scale));
}

inline double hsum(__m256d v) {
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, v);
  return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

}  // namespace

void philox_fill(std::span<std::uint32_t> out, PhiloxCounter base, PhiloxKey key) {
  using namespace detail;
  const std::uint64_t start = (std::uint64_t{base[1]} << 32) | base[0];
  const std::size_t blocks = out.size() / 4;
  const std::size_t vec_blocks = blocks - blocks % 4;
  const __m256i mask32 = _mm256_set1_epi64x(0xffffffffLL);
  const __m256i m0 = _mm256_set1_epi64x(kPhiloxM0);
  const __m256i m1 = _mm256_set1_epi64x(kPhiloxM1);

  for (std::size_t b = 0; b < vec_blocks; b += 4) {
    alignas(32) std::array<long long, 4> lo{};
    alignas(32) std::array<long long, 4> hi{};
    for (std::size_t l = 0; l < 4; ++l) {
      const std::uint64_t idx = start + b + l;
      lo[l] = static_cast<long long>(idx & 0xffffffffULL);
      hi[l] = static_cast<long long>(idx >> 32);
    }
    __m256i c0 = _mm256_load_si256(reinterpret_cast<const __m256i*>(lo.data()));
    __m256i c1 = _mm256_load_si256(reinterpret_cast<const __m256i*>(hi.data()));
    __m256i c2 = _mm256_set1_epi64x(base[2]);
    __m256i c3 = _mm256_set1_epi64x(base[3]);
    std::uint32_t k0 = key[0];
    std::uint32_t k1 = key[1];
    for (int round = 0; round < kPhiloxRounds; ++round) {
      if (round > 0) {
        k0 += kPhiloxW0;
        k1 += kPhiloxW1;
      }
      const __m256i p0 = _mm256_mul_epu32(m0, c0);
      const __m256i p1 = _mm256_mul_epu32(m1, c2);
      const __m256i hi0 = _mm256_srli_epi64(p0, 32);
      const __m256i lo0 = _mm256_and_si256(p0, mask32);
      const __m256i hi1 = _mm256_srli_epi64(p1, 32);
      const __m256i lo1 = _mm256_and_si256(p1, mask32);
      const __m256i nc0 = _mm256_xor_si256(_mm256_xor_si256(hi1, c1), _mm256_set1_epi64x(k0));
      const __m256i nc2 = _mm256_xor_si256(_mm256_xor_si256(hi0, c3), _mm256_set1_epi64x(k1));
      c0 = nc0;
      c1 = lo1;
      c2 = nc2;
      c3 = lo0;
    }
    alignas(32) std::array<std::array<std::uint64_t, 4>, 4> words{};
    _mm256_store_si256(reinterpret_cast<__m256i*>(words[0].data()), c0);
    _mm256_store_si256(reinterpret_cast<__m256i*>(words[1].data()), c1);
    _mm256_store_si256(reinterpret_cast<__m256i*>(words[2].data()), c2);
    _mm256_store_si256(reinterpret_cast<__m256i*>(words[3].data()), c3);
    for (std::size_t l = 0; l < 4; ++l) {
      for (std::size_t w = 0; w < 4; ++w) {
        out[4 * (b + l) + w] = static_cast<std::uint32_t>(words[w][l]);
      }
    }
  }
  if (vec_blocks < blocks) {
    const std::uint64_t rest = start + vec_blocks;
    scalar::philox_fill(out.subspan(4 * vec_blocks),
                        {static_cast<std::uint32_t>(rest), static_cast<std::uint32_t>(rest >> 32),
                         base[2], base[3]},
                        key);
  }
}

double compensated_sum(std::span<const double> values) {
  const std::size_t n = values.size();
  const std::size_t vec_n = n - n % 4;
  if (vec_n == 0) return scalar::compensated_sum(values);

  const __m256d sign_mask = _mm256_set1_pd(-0.0);
  __m256d sum = _mm256_setzero_pd();
  __m256d comp = _mm256_setzero_pd();
  for (std::size_t i = 0; i < vec_n; i += 4) {
    const __m256d v = _mm256_loadu_pd(values.data() + i);
    const __m256d t = _mm256_add_pd(sum, v);
    const __m256d big_sum =
        _mm256_cmp_pd(_mm256_andnot_pd(sign_mask, sum), _mm256_andnot_pd(sign_mask, v), _CMP_GE_OQ);
    const __m256d if_sum = _mm256_add_pd(_mm256_sub_pd(sum, t), v);
    const __m256d if_v = _mm256_add_pd(_mm256_sub_pd(v, t), sum);
    comp = _mm256_add_pd(comp, _mm256_blendv_pd(if_v, if_sum, big_sum));
    sum = t;
  }
  alignas(32) std::array<double, 8> partial{};
  _mm256_store_pd(partial.data(), sum);
  _mm256_store_pd(partial.data() + 4, comp);

  // Merge lanes and the tail with the scalar compensated loop.
  std::array<double, 11> rest{};
  std::size_t k = 0;
  for (double p : partial) rest[k++] = p;
  for (std::size_t i = vec_n; i < n; ++i) rest[k++] = values[i];
  return scalar::compensated_sum(std::span<const double>(rest.data(), k));
}

MixtureSums mixture_sums(std::span<const double> coords, std::size_t count,
                         std::span<const double> y, double kappa, std::span<double> sum_wv,
                         std::span<double> sum_w2v, std::span<double> sum_w2v2) {
  constexpr std::size_t kMaxDim = 8;
  const std::size_t dim = y.size();
  if (dim > kMaxDim || count < 4) {
    return scalar::mixture_sums(coords, count, y, kappa, sum_wv, sum_w2v, sum_w2v2);
  }
  const std::size_t vec_n = count - count % 4;

  auto sq_dist_vec = [&](std::size_t i) {
    __m256d d = _mm256_setzero_pd();
    for (std::size_t j = 0; j < dim; ++j) {
      const __m256d v =
          _mm256_sub_pd(_mm256_loadu_pd(coords.data() + j * count + i), _mm256_set1_pd(y[j]));
      d = _mm256_add_pd(d, _mm256_mul_pd(v, v));
    }
    return d;
  };
  auto sq_dist = [&](std::size_t i) {
    double d = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = coords[j * count + i] - y[j];
      d += v * v;
    }
    return d;
  };

  __m256d dmin_v = _mm256_set1_pd(std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < vec_n; i += 4) dmin_v = _mm256_min_pd(dmin_v, sq_dist_vec(i));
  alignas(32) std::array<double, 4> lanes{};
  _mm256_store_pd(lanes.data(), dmin_v);
  double dmin = std::min(std::min(lanes[0], lanes[1]), std::min(lanes[2], lanes[3]));
  for (std::size_t i = vec_n; i < count; ++i) dmin = std::min(dmin, sq_dist(i));

  const __m256d neg_half_kappa = _mm256_set1_pd(-0.5 * kappa);
  const __m256d dmin_b = _mm256_set1_pd(dmin);
  __m256d acc_w = _mm256_setzero_pd();
  __m256d acc_w2 = _mm256_setzero_pd();
  __m256d acc_wv[kMaxDim];
  __m256d acc_w2v[kMaxDim];
  __m256d acc_w2v2[kMaxDim];
  for (std::size_t j = 0; j < dim; ++j) {
    acc_wv[j] = _mm256_setzero_pd();
    acc_w2v[j] = _mm256_setzero_pd();
    acc_w2v2[j] = _mm256_setzero_pd();
  }
  for (std::size_t i = 0; i < vec_n; i += 4) {
    const __m256d w =
        exp_nonpositive(_mm256_mul_pd(neg_half_kappa, _mm256_sub_pd(sq_dist_vec(i), dmin_b)));
    const __m256d w2 = _mm256_mul_pd(w, w);
    acc_w = _mm256_add_pd(acc_w, w);
    acc_w2 = _mm256_add_pd(acc_w2, w2);
    for (std::size_t j = 0; j < dim; ++j) {
      const __m256d v =
          _mm256_sub_pd(_mm256_loadu_pd(coords.data() + j * count + i), _mm256_set1_pd(y[j]));
      const __m256d w2v = _mm256_mul_pd(w2, v);
      acc_wv[j] = _mm256_add_pd(acc_wv[j], _mm256_mul_pd(w, v));
      acc_w2v[j] = _mm256_add_pd(acc_w2v[j], w2v);
      acc_w2v2[j] = _mm256_add_pd(acc_w2v2[j], _mm256_mul_pd(w2v, v));
    }
  }

  MixtureSums out;
  out.min_sq_dist = dmin;
  out.sum_w = hsum(acc_w);
  out.sum_w2 = hsum(acc_w2);
  for (std::size_t j = 0; j < dim; ++j) {
    sum_wv[j] = hsum(acc_wv[j]);
    sum_w2v[j] = hsum(acc_w2v[j]);
    sum_w2v2[j] = hsum(acc_w2v2[j]);
  }
  for (std::size_t i = vec_n; i < count; ++i) {
    const double w = std::exp(-0.5 * kappa * (sq_dist(i) - dmin));
    const double w2 = w * w;
    out.sum_w += w;
    out.sum_w2 += w2;
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = coords[j * count + i] - y[j];
      sum_wv[j] += w * v;
      sum_w2v[j] += w2 * v;
      sum_w2v2[j] += w2 * v * v;
    }
  }
  return out;
}

void ou_ensemble_step(std::span<double> x, std::span<const double> dw, double rate, double center,
                      double sigma, double h) {
  const std::size_t n = x.size();
  const std::size_t vec_n = n - n % 4;
  const __m256d decay = _mm256_set1_pd(rate * h);
  const __m256d c = _mm256_set1_pd(center);
  const __m256d s = _mm256_set1_pd(sigma);
  for (std::size_t i = 0; i < vec_n; i += 4) {
    const __m256d xi = _mm256_loadu_pd(x.data() + i);
    const __m256d drift = _mm256_mul_pd(decay, _mm256_sub_pd(xi, c));
    const __m256d noise = _mm256_mul_pd(s, _mm256_loadu_pd(dw.data() + i));
    _mm256_storeu_pd(x.data() + i, _mm256_add_pd(_mm256_sub_pd(xi, drift), noise));
  }
  scalar::ou_ensemble_step(x.subspan(vec_n), dw.subspan(vec_n), rate, center, sigma, h);
}

}  // namespace slowfast::kernels::avx2
