#pragma once

// Counter-based random streams. Every stream is addressed by
// (master seed, replica, channel) and every draw by its index inside the
// stream, so the values a replica sees do not depend on which worker runs it
// or in which order.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace slowfast {

enum class Channel : std::uint32_t {
  BX = 0,       // fast noise B^X
  BY = 1,       // slow noise B^Y
  BXtilde = 2,  // auxiliary fast noise for the decoupled copy
  Init = 3,     // initial-condition draws
  Aux = 4,      // probes, resampling and other bookkeeping draws
};

std::string_view to_string(Channel channel);

struct StreamId {
  std::uint32_t replica = 0;
  Channel channel = Channel::BX;

  friend bool operator==(const StreamId&, const StreamId&) = default;
};

/// Standard normals number [offset, offset + out.size()) of a stream.
void fill_normals(std::uint64_t seed, StreamId id, std::uint64_t offset, std::span<double> out);

/// Uniforms on the open interval (0, 1), two per Philox block half.
void fill_uniforms(std::uint64_t seed, StreamId id, std::uint64_t offset, std::span<double> out);

/// Derives a child seed from a parent seed and an index (splitmix64 mix).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Brownian increments on a uniform grid: `steps` rows of `dim` values,
/// each N(0, step). Row k is the increment over [k*step, (k+1)*step].
class NoisePath {
 public:
  NoisePath() = default;
  NoisePath(StreamId id, std::size_t steps, std::size_t dim, double step,
            std::vector<double> increments);

  const StreamId& stream_id() const { return id_; }
  std::size_t steps() const { return steps_; }
  std::size_t dim() const { return dim_; }
  double step() const { return step_; }

  std::span<const double> row(std::size_t k) const {
    return {increments_.data() + k * dim_, dim_};
  }
  Eigen::Map<const Eigen::VectorXd> row_vector(std::size_t k) const {
    return {increments_.data() + k * dim_, static_cast<Eigen::Index>(dim_)};
  }
  const std::vector<double>& increments() const { return increments_; }

  /// Sums groups of `factor` consecutive rows: the same Brownian path seen
  /// on a grid `factor` times coarser.
  NoisePath coarsen(std::size_t factor) const;

 private:
  StreamId id_{};
  std::size_t steps_ = 0;
  std::size_t dim_ = 0;
  double step_ = 0.0;
  std::vector<double> increments_;
};

NoisePath generate_noise(std::uint64_t seed, StreamId id, std::size_t steps, double step,
                         std::size_t dim);

}  // namespace slowfast
