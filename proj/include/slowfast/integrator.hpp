#pragma once

#include <cstddef>
#include <span>

#include "slowfast/model.hpp"
#include "slowfast/rng.hpp"

namespace slowfast {

struct State {
  Vec x;
  Vec y;
};

/// x + rate_scale h b_X(x, y) + noise_scale sigma_X(x, y) dW. The coupled
/// system uses rate_scale = 1/epsilon and noise_scale = 1/sqrt(epsilon); the
/// frozen process uses 1 and 1.
Vec fast_update(const ModelSpec& model, const Vec& x, const Vec& y, double h,
                std::span<const double> dW, double rate_scale, double noise_scale);

/// y + dt drift + sigma dW, evaluated component by component in that order.
/// The coupled and the averaged recursions both go through this function,
/// which is what makes their paths comparable bit for bit.
Vec slow_update(const Vec& y, const Vec& drift, const Mat& sigma, double dt,
                std::span<const double> dW);

/// One explicit Euler-Maruyama step of the coupled system.
State em_step(const State& state, const ModelSpec& model, double dt, const Vec& dWx,
              const Vec& dWy);

/// Largest observed |b_X(x1,y) - b_X(x2,y)| / |x1 - x2| over random pairs in
/// a box of the given radius around `center`.
double estimate_stiffness(const ModelSpec& model, const Vec& center, const Vec& y, double radius,
                          std::size_t pairs, std::uint64_t seed);

/// model.stiffness if set, else a numerical estimate around (x0, y0).
double resolve_stiffness(const ModelSpec& model, const SimConfig& config);

/// Substeps to use for the coupled system (config.substeps, or the default
/// ceil(10 dt stiffness / epsilon) when it is 0).
std::size_t resolve_substeps(const ModelSpec& model, const SimConfig& config);

/// Throws StabilityViolation unless (dt/substeps) stiffness / epsilon <= 0.5.
void check_stability(const ModelSpec& model, const SimConfig& config, std::size_t substeps,
                     double epsilon_scale);

/// x0, or a draw from mu^{y0} (Init stream) when requested and available.
Vec initial_fast_state(const ModelSpec& model, const SimConfig& config);

NoisePath fast_noise(const ModelSpec& model, const SimConfig& config, std::size_t substeps,
                     Channel channel = Channel::BX);
NoisePath slow_noise(const ModelSpec& model, const SimConfig& config);

Trajectory simulate_coupled(const ModelSpec& model, const SimConfig& config);
/// Same recursion with caller-supplied noise. `bx` has substeps rows per slow
/// step; `by` has one row per slow step.
Trajectory simulate_coupled(const ModelSpec& model, const SimConfig& config, const NoisePath& bx,
                            const NoisePath& by);

/// The frozen process X^y at unit timescale. y_path repeats y.
Trajectory simulate_frozen(const ModelSpec& model, const Vec& y, const SimConfig& config);
Trajectory simulate_frozen(const ModelSpec& model, const Vec& y, const SimConfig& config,
                           const NoisePath& bx);

struct TripleOptions {
  /// Test hook: drive X~ with the BX stream instead of BXtilde.
  bool share_fast_noise = false;
};

TripleTrajectory simulate_triple(const ModelSpec& model, const SimConfig& config,
                                 TripleOptions options = {});
TripleTrajectory simulate_triple(const ModelSpec& model, const SimConfig& config,
                                 const NoisePath& bx, const NoisePath& by,
                                 const NoisePath& bxtilde);

}  // namespace slowfast
