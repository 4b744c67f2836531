#include "slowfast/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "philox_round.hpp"

namespace slowfast::kernels {

PhiloxCounter philox4x32(PhiloxCounter c, PhiloxKey k) {
  using namespace detail;
  for (int round = 0; round < kPhiloxRounds; ++round) {
    if (round > 0) {
      k[0] += kPhiloxW0;
      k[1] += kPhiloxW1;
    }
    const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

namespace scalar {

void philox_fill(std::span<std::uint32_t> out, PhiloxCounter base, PhiloxKey key) {
  const std::uint64_t start = (std::uint64_t{base[1]} << 32) | base[0];
  const std::size_t blocks = out.size() / 4;
  for (std::size_t i = 0; i < blocks; ++i) {
    const std::uint64_t idx = start + i;
    const PhiloxCounter block = philox4x32(
        {static_cast<std::uint32_t>(idx), static_cast<std::uint32_t>(idx >> 32), base[2], base[3]},
        key);
    std::copy(block.begin(), block.end(), out.begin() + static_cast<std::ptrdiff_t>(4 * i));
  }
}

double compensated_sum(std::span<const double> values) {
  double sum = 0.0;
  double comp = 0.0;
  for (double v : values) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

MixtureSums mixture_sums(std::span<const double> coords, std::size_t count,
                         std::span<const double> y, double kappa, std::span<double> sum_wv,
                         std::span<double> sum_w2v, std::span<double> sum_w2v2) {
  const std::size_t dim = y.size();
  MixtureSums out;
  std::fill(sum_wv.begin(), sum_wv.end(), 0.0);
  std::fill(sum_w2v.begin(), sum_w2v.end(), 0.0);
  std::fill(sum_w2v2.begin(), sum_w2v2.end(), 0.0);
  if (count == 0) return out;

  auto sq_dist = [&](std::size_t i) {
    double d = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = coords[j * count + i] - y[j];
      d += v * v;
    }
    return d;
  };

  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < count; ++i) dmin = std::min(dmin, sq_dist(i));
  out.min_sq_dist = dmin;

  const double half_kappa = 0.5 * kappa;
  for (std::size_t i = 0; i < count; ++i) {
    const double w = std::exp(-half_kappa * (sq_dist(i) - dmin));
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
  const double decay = rate * h;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = x[i] - decay * (x[i] - center) + sigma * dw[i];
  }
}

}  // namespace scalar
}  // namespace slowfast::kernels
