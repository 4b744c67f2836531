#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference
// implementation and, on x86-64, an AVX2 variant; the public entry points
// dispatch once per process on the detected instruction set. The variants
// are exposed in `scalar::` / `avx2::` so tests can check them against each
// other.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace slowfast::kernels {

enum class Isa { scalar, avx2 };

/// Instruction set used by the dispatching entry points. Detected at first
/// use; SLOWFAST_ISA=scalar in the environment forces the reference path.
Isa active_isa();
std::string_view to_string(Isa isa);
bool avx2_available();

using PhiloxKey = std::array<std::uint32_t, 2>;
using PhiloxCounter = std::array<std::uint32_t, 4>;

/// Single Philox4x32-10 block.
PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key);

/// Fills `out` (size multiple of 4) with consecutive Philox4x32-10 blocks.
/// Block i uses counter `base` with its low 64 bits (words 0,1) advanced by i.
void philox_fill(std::span<std::uint32_t> out, PhiloxCounter base, PhiloxKey key);

/// Neumaier-compensated sum.
double compensated_sum(std::span<const double> values);

/// Weighted moments of a Gaussian mixture score. Samples are stored
/// coordinate-major: coords[j * count + i] is coordinate j of sample i.
/// Weights are w_i = exp(-(kappa/2) (|z_i - y|^2 - d_min)), so the largest
/// weight is 1. For each coordinate j with v_ij = z_ij - y_j:
///   sum_wv[j] = sum w v,  sum_w2v[j] = sum w^2 v,  sum_w2v2[j] = sum w^2 v^2.
struct MixtureSums {
  double sum_w = 0.0;
  double sum_w2 = 0.0;
  double min_sq_dist = 0.0;
};

MixtureSums mixture_sums(std::span<const double> coords, std::size_t count,
                         std::span<const double> y, double kappa, std::span<double> sum_wv,
                         std::span<double> sum_w2v, std::span<double> sum_w2v2);

/// One explicit Euler-Maruyama step of an Ornstein-Uhlenbeck ensemble:
///   x_i <- x_i - rate (x_i - center) h + sigma dw_i.
void ou_ensemble_step(std::span<double> x, std::span<const double> dw, double rate, double center,
                      double sigma, double h);

namespace scalar {
void philox_fill(std::span<std::uint32_t> out, PhiloxCounter base, PhiloxKey key);
double compensated_sum(std::span<const double> values);
MixtureSums mixture_sums(std::span<const double> coords, std::size_t count,
                         std::span<const double> y, double kappa, std::span<double> sum_wv,
                         std::span<double> sum_w2v, std::span<double> sum_w2v2);
void ou_ensemble_step(std::span<double> x, std::span<const double> dw, double rate, double center,
                      double sigma, double h);
}  // namespace scalar

#if defined(SLOWFAST_HAVE_AVX2)
namespace avx2 {
void philox_fill(std::span<std::uint32_t> out, PhiloxCounter base, PhiloxKey key);
double compensated_sum(std::span<const double> values);
MixtureSums mixture_sums(std::span<const double> coords, std::size_t count,
                         std::span<const double> y, double kappa, std::span<double> sum_wv,
                         std::span<double> sum_w2v, std::span<double> sum_w2v2);
void ou_ensemble_step(std::span<double> x, std::span<const double> dw, double rate, double center,
                      double sigma, double h);
}  // namespace avx2
#endif

}  // namespace slowfast::kernels
