#include "slowfast/rng.hpp"

#include <cmath>
#include <numbers>

#include "slowfast/error.hpp"
#include "slowfast/kernels.hpp"

namespace slowfast {
namespace {

constexpr double kTwoPow53Inv = 1.0 / 9007199254740992.0;

kernels::PhiloxKey key_of(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

kernels::PhiloxCounter counter_of(StreamId id, std::uint64_t block) {
  return {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), id.replica,
          static_cast<std::uint32_t>(id.channel)};
}

// Maps 64 random bits to the open interval (0, 1).
inline double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (std::uint64_t{hi} << 32) | lo;
  return (static_cast<double>(bits >> 11) + 0.5) * kTwoPow53Inv;
}

// Each block yields two uniforms; `emit(index_in_stream, u)`.
template <typename Emit>
void for_each_uniform_pair(std::uint64_t seed, StreamId id, std::uint64_t first_block,
                           std::size_t blocks, Emit&& emit) {
  constexpr std::size_t kChunk = 1024;
  std::vector<std::uint32_t> words(4 * kChunk);
  std::size_t done = 0;
  while (done < blocks) {
    const std::size_t n = std::min(kChunk, blocks - done);
    std::span<std::uint32_t> out(words.data(), 4 * n);
    kernels::philox_fill(out, counter_of(id, first_block + done), key_of(seed));
    for (std::size_t b = 0; b < n; ++b) {
      const double u1 = to_unit(out[4 * b], out[4 * b + 1]);
      const double u2 = to_unit(out[4 * b + 2], out[4 * b + 3]);
      emit(first_block + done + b, u1, u2);
    }
    done += n;
  }
}

}  // namespace

std::string_view to_string(Channel channel) {
  switch (channel) {
    case Channel::BX: return "BX";
    case Channel::BY: return "BY";
    case Channel::BXtilde: return "BXtilde";
    case Channel::Init: return "Init";
    case Channel::Aux: return "Aux";
  }
  return "?";
}

void fill_normals(std::uint64_t seed, StreamId id, std::uint64_t offset, std::span<double> out) {
  if (out.empty()) return;
  const std::uint64_t first = offset / 2;
  const std::uint64_t last = (offset + out.size() - 1) / 2;
  for_each_uniform_pair(seed, id, first, static_cast<std::size_t>(last - first + 1),
                        [&](std::uint64_t block, double u1, double u2) {
                          const double r = std::sqrt(-2.0 * std::log(u1));
                          const double angle = 2.0 * std::numbers::pi * u2;
                          const double z[2] = {r * std::cos(angle), r * std::sin(angle)};
                          for (std::uint64_t k = 0; k < 2; ++k) {
                            const std::uint64_t idx = 2 * block + k;
                            if (idx >= offset && idx < offset + out.size()) out[idx - offset] = z[k];
                          }
                        });
}

void fill_uniforms(std::uint64_t seed, StreamId id, std::uint64_t offset, std::span<double> out) {
  if (out.empty()) return;
  const std::uint64_t first = offset / 2;
  const std::uint64_t last = (offset + out.size() - 1) / 2;
  for_each_uniform_pair(seed, id, first, static_cast<std::size_t>(last - first + 1),
                        [&](std::uint64_t block, double u1, double u2) {
                          const double u[2] = {u1, u2};
                          for (std::uint64_t k = 0; k < 2; ++k) {
                            const std::uint64_t idx = 2 * block + k;
                            if (idx >= offset && idx < offset + out.size()) out[idx - offset] = u[k];
                          }
                        });
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

NoisePath::NoisePath(StreamId id, std::size_t steps, std::size_t dim, double step,
                     std::vector<double> increments)
    : id_(id), steps_(steps), dim_(dim), step_(step), increments_(std::move(increments)) {
  require(increments_.size() == steps_ * dim_, ErrorKind::InvalidArgument,
          "noise path size does not match steps x dim");
}

NoisePath NoisePath::coarsen(std::size_t factor) const {
  require(factor >= 1 && steps_ % factor == 0, ErrorKind::InvalidArgument,
          "coarsening factor must divide the number of steps");
  const std::size_t coarse_steps = steps_ / factor;
  std::vector<double> out(coarse_steps * dim_, 0.0);
  for (std::size_t k = 0; k < coarse_steps; ++k) {
    for (std::size_t f = 0; f < factor; ++f) {
      const auto fine = row(k * factor + f);
      for (std::size_t j = 0; j < dim_; ++j) out[k * dim_ + j] += fine[j];
    }
  }
  return NoisePath(id_, coarse_steps, dim_, step_ * static_cast<double>(factor), std::move(out));
}

NoisePath generate_noise(std::uint64_t seed, StreamId id, std::size_t steps, double step,
                         std::size_t dim) {
  std::vector<double> increments(steps * dim);
  fill_normals(seed, id, 0, increments);
  const double scale = std::sqrt(step);
  for (double& v : increments) v *= scale;
  return NoisePath(id, steps, dim, step, std::move(increments));
}

}  // namespace slowfast
