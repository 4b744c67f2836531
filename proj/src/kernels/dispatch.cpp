#include <cstdlib>
#include <string>

#include "slowfast/kernels.hpp"

namespace slowfast::kernels {

bool avx2_available() {
#if defined(SLOWFAST_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() {
  static const Isa isa = [] {
    if (const char* forced = std::getenv("SLOWFAST_ISA"); forced && std::string(forced) == "scalar") {
      return Isa::scalar;
    }
    return avx2_available() ? Isa::avx2 : Isa::scalar;
  }();
  return isa;
}

std::string_view to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

#if defined(SLOWFAST_HAVE_AVX2)
#define SLOWFAST_DISPATCH(fn, ...) \
  (active_isa() == Isa::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define SLOWFAST_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void philox_fill(std::span<std::uint32_t> out, PhiloxCounter base, PhiloxKey key) {
  SLOWFAST_DISPATCH(philox_fill, out, base, key);
}

double compensated_sum(std::span<const double> values) {
  return SLOWFAST_DISPATCH(compensated_sum, values);
}

MixtureSums mixture_sums(std::span<const double> coords, std::size_t count,
                         std::span<const double> y, double kappa, std::span<double> sum_wv,
                         std::span<double> sum_w2v, std::span<double> sum_w2v2) {
  return SLOWFAST_DISPATCH(mixture_sums, coords, count, y, kappa, sum_wv, sum_w2v, sum_w2v2);
}

void ou_ensemble_step(std::span<double> x, std::span<const double> dw, double rate, double center,
                      double sigma, double h) {
  SLOWFAST_DISPATCH(ou_ensemble_step, x, dw, rate, center, sigma, h);
}

#undef SLOWFAST_DISPATCH

}  // namespace slowfast::kernels
