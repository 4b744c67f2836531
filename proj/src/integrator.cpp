#include "slowfast/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "slowfast/error.hpp"

namespace slowfast {
namespace {

Eigen::Map<const Vec> as_vec(std::span<const double> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

// Component index of the first non-finite entry, or -1.
Eigen::Index first_nonfinite(const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v(i))) return i;
  }
  return -1;
}

void check_finite(const Vec& x, const Vec& y, std::size_t step, const char* where) {
  if (const auto i = first_nonfinite(x); i >= 0) {
    throw NumericalBlowup(step, static_cast<std::size_t>(i), where);
  }
  if (const auto j = first_nonfinite(y); j >= 0) {
    throw NumericalBlowup(step, static_cast<std::size_t>(x.size() + j), where);
  }
}

std::vector<double> grid_times(std::size_t steps, double dt) {
  std::vector<double> t(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k) t[k] = static_cast<double>(k) * dt;
  return t;
}

void check_initial(const ModelSpec& model, const Vec& x0, const Vec& y0) {
  require(static_cast<std::size_t>(x0.size()) == model.n, ErrorKind::InvalidArgument,
          "x0 has the wrong dimension");
  require(static_cast<std::size_t>(y0.size()) == model.m, ErrorKind::InvalidArgument,
          "y0 has the wrong dimension");
  check_finite(x0, y0, 0, "initial state");
}

std::size_t substeps_of(const NoisePath& bx, std::size_t steps) {
  require(bx.steps() % steps == 0 && bx.steps() >= steps, ErrorKind::InvalidArgument,
          "fast noise rows are not a multiple of the slow steps");
  return bx.steps() / steps;
}

}  // namespace

Vec fast_update(const ModelSpec& model, const Vec& x, const Vec& y, double h,
                std::span<const double> dW, double rate_scale, double noise_scale) {
  const Vec drift = model.b_X(x, y);
  const Vec noise = model.sigma_X(x, y) * as_vec(dW);
  const double step = rate_scale * h;
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out(i) = x(i) + step * drift(i) + noise_scale * noise(i);
  }
  return out;
}

Vec slow_update(const Vec& y, const Vec& drift, const Mat& sigma, double dt,
                std::span<const double> dW) {
  const Vec noise = sigma * as_vec(dW);
  Vec out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = y(i) + dt * drift(i) + noise(i);
  return out;
}

State em_step(const State& state, const ModelSpec& model, double dt, const Vec& dWx,
              const Vec& dWy) {
  require(dt > 0.0, ErrorKind::InvalidArgument, "dt must be positive");
  State next;
  next.x = fast_update(model, state.x, state.y, dt, {dWx.data(), static_cast<std::size_t>(dWx.size())},
                       1.0 / model.epsilon, 1.0 / std::sqrt(model.epsilon));
  next.y = slow_update(state.y, model.b_Y(state.x, state.y), model.sigma_Y(state.y), dt,
                       {dWy.data(), static_cast<std::size_t>(dWy.size())});
  check_finite(next.x, next.y, 1, "em_step");
  return next;
}

double estimate_stiffness(const ModelSpec& model, const Vec& center, const Vec& y, double radius,
                          std::size_t pairs, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(center.size());
  std::vector<double> u(2 * n * pairs);
  fill_uniforms(seed, {0, Channel::Aux}, 0, u);
  double best = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    Vec x1(center.size()), x2(center.size());
    for (std::size_t j = 0; j < n; ++j) {
      x1(j) = center(j) + radius * (2.0 * u[2 * n * p + j] - 1.0);
      x2(j) = center(j) + radius * (2.0 * u[2 * n * p + n + j] - 1.0);
    }
    const double dist = (x1 - x2).norm();
    if (dist <= 0.0) continue;
    best = std::max(best, (model.b_X(x1, y) - model.b_X(x2, y)).norm() / dist);
  }
  return best;
}

double resolve_stiffness(const ModelSpec& model, const SimConfig& config) {
  if (model.stiffness) return *model.stiffness;
  const Vec center = config.x0.size() == static_cast<Eigen::Index>(model.n)
                         ? config.x0
                         : Vec::Zero(static_cast<Eigen::Index>(model.n));
  const Vec y = config.y0.size() == static_cast<Eigen::Index>(model.m)
                    ? config.y0
                    : Vec::Zero(static_cast<Eigen::Index>(model.m));
  const double k = estimate_stiffness(model, center, y, 3.0, 256, 0x5eedULL);
  return std::max(k, 1e-12);
}

std::size_t resolve_substeps(const ModelSpec& model, const SimConfig& config) {
  if (config.substeps > 0) return config.substeps;
  const double k = resolve_stiffness(model, config);
  const double s = std::ceil(10.0 * config.dt * k / model.epsilon);
  return static_cast<std::size_t>(std::max(1.0, s));
}

void check_stability(const ModelSpec& model, const SimConfig& config, std::size_t substeps,
                     double epsilon_scale) {
  const double k = resolve_stiffness(model, config);
  const double h = config.dt / static_cast<double>(substeps);
  const double ratio = h * k / epsilon_scale;
  if (ratio > 0.5) {
    fail(ErrorKind::StabilityViolation,
         "fast step too large: (dt/substeps) * stiffness / epsilon = " + std::to_string(ratio) +
             " exceeds 0.5; increase substeps or reduce dt");
  }
}

Vec initial_fast_state(const ModelSpec& model, const SimConfig& config) {
  if (config.init_fast_from_mu) {
    require(static_cast<bool>(model.mu_sampler), ErrorKind::InvalidArgument,
            "init_fast_from_mu requested but the model has no analytic mu sampler");
    std::vector<double> z(model.n);
    fill_normals(config.seed, {config.replica, Channel::Init}, 0, z);
    return model.mu_sampler(config.y0, z);
  }
  return config.x0;
}

NoisePath fast_noise(const ModelSpec& model, const SimConfig& config, std::size_t substeps,
                     Channel channel) {
  const std::size_t steps = slow_steps(config);
  return generate_noise(config.seed, {config.replica, channel}, steps * substeps,
                        config.dt / static_cast<double>(substeps), model.n);
}

NoisePath slow_noise(const ModelSpec& model, const SimConfig& config) {
  return generate_noise(config.seed, {config.replica, Channel::BY}, slow_steps(config), config.dt,
                        model.m);
}

Trajectory simulate_coupled(const ModelSpec& model, const SimConfig& config) {
  const std::size_t substeps = resolve_substeps(model, config);
  check_stability(model, config, substeps, model.epsilon);
  return simulate_coupled(model, config, fast_noise(model, config, substeps),
                          slow_noise(model, config));
}

Trajectory simulate_coupled(const ModelSpec& model, const SimConfig& config, const NoisePath& bx,
                            const NoisePath& by) {
  const std::size_t steps = slow_steps(config);
  require(by.steps() == steps && by.dim() == model.m, ErrorKind::InvalidArgument,
          "slow noise does not match the slow grid");
  require(bx.dim() == model.n, ErrorKind::InvalidArgument, "fast noise has the wrong dimension");
  const std::size_t substeps = substeps_of(bx, steps);
  const double h = config.dt / static_cast<double>(substeps);
  const double rate = 1.0 / model.epsilon;
  const double noise_scale = 1.0 / std::sqrt(model.epsilon);

  Vec x = initial_fast_state(model, config);
  Vec y = config.y0;
  check_initial(model, x, y);

  Trajectory traj;
  traj.times = grid_times(steps, config.dt);
  traj.x_path.resize(static_cast<Eigen::Index>(steps + 1), static_cast<Eigen::Index>(model.n));
  traj.y_path.resize(static_cast<Eigen::Index>(steps + 1), static_cast<Eigen::Index>(model.m));
  traj.x_path.row(0) = x.transpose();
  traj.y_path.row(0) = y.transpose();
  traj.seed_record = {config.seed, {bx.stream_id(), by.stream_id()}};

  for (std::size_t k = 0; k < steps; ++k) {
    // Y moves once per slow step from the pre-step state; X takes its
    // substeps with Y frozen at y_k.
    const Vec y_next = slow_update(y, model.b_Y(x, y), model.sigma_Y(y), config.dt, by.row(k));
    for (std::size_t s = 0; s < substeps; ++s) {
      x = fast_update(model, x, y, h, bx.row(k * substeps + s), rate, noise_scale);
    }
    y = y_next;
    check_finite(x, y, k + 1, "simulate_coupled");
    traj.x_path.row(static_cast<Eigen::Index>(k + 1)) = x.transpose();
    traj.y_path.row(static_cast<Eigen::Index>(k + 1)) = y.transpose();
  }
  return traj;
}

Trajectory simulate_frozen(const ModelSpec& model, const Vec& y, const SimConfig& config) {
  SimConfig frozen = config;
  if (frozen.substeps == 0) {
    const double k = resolve_stiffness(model, config);
    frozen.substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(10.0 * config.dt * k)));
  }
  check_stability(model, frozen, frozen.substeps, 1.0);
  return simulate_frozen(model, y, frozen, fast_noise(model, frozen, frozen.substeps));
}

Trajectory simulate_frozen(const ModelSpec& model, const Vec& y, const SimConfig& config,
                           const NoisePath& bx) {
  const std::size_t steps = slow_steps(config);
  require(bx.dim() == model.n, ErrorKind::InvalidArgument, "fast noise has the wrong dimension");
  const std::size_t substeps = substeps_of(bx, steps);
  const double h = config.dt / static_cast<double>(substeps);

  SimConfig at_y = config;
  at_y.y0 = y;
  Vec x = initial_fast_state(model, at_y);
  check_initial(model, x, y);

  Trajectory traj;
  traj.times = grid_times(steps, config.dt);
  traj.x_path.resize(static_cast<Eigen::Index>(steps + 1), static_cast<Eigen::Index>(model.n));
  traj.y_path = y.transpose().replicate(static_cast<Eigen::Index>(steps + 1), 1);
  traj.x_path.row(0) = x.transpose();
  traj.seed_record = {config.seed, {bx.stream_id()}};

  for (std::size_t k = 0; k < steps; ++k) {
    for (std::size_t s = 0; s < substeps; ++s) {
      x = fast_update(model, x, y, h, bx.row(k * substeps + s), 1.0, 1.0);
    }
    check_finite(x, y, k + 1, "simulate_frozen");
    traj.x_path.row(static_cast<Eigen::Index>(k + 1)) = x.transpose();
  }
  return traj;
}

TripleTrajectory simulate_triple(const ModelSpec& model, const SimConfig& config,
                                 TripleOptions options) {
  const std::size_t substeps = resolve_substeps(model, config);
  check_stability(model, config, substeps, model.epsilon);
  const NoisePath bx = fast_noise(model, config, substeps, Channel::BX);
  const NoisePath bxt =
      options.share_fast_noise ? bx : fast_noise(model, config, substeps, Channel::BXtilde);
  return simulate_triple(model, config, bx, slow_noise(model, config), bxt);
}

TripleTrajectory simulate_triple(const ModelSpec& model, const SimConfig& config,
                                 const NoisePath& bx, const NoisePath& by,
                                 const NoisePath& bxtilde) {
  const std::size_t steps = slow_steps(config);
  require(by.steps() == steps && by.dim() == model.m, ErrorKind::InvalidArgument,
          "slow noise does not match the slow grid");
  require(bx.dim() == model.n && bxtilde.dim() == model.n && bx.steps() == bxtilde.steps(),
          ErrorKind::InvalidArgument, "fast noise paths do not match");
  const std::size_t substeps = substeps_of(bx, steps);
  const double h = config.dt / static_cast<double>(substeps);
  const double rate = 1.0 / model.epsilon;
  const double noise_scale = 1.0 / std::sqrt(model.epsilon);

  Vec x = initial_fast_state(model, config);
  Vec xt = x;
  Vec y = config.y0;
  check_initial(model, x, y);

  TripleTrajectory traj;
  traj.times = grid_times(steps, config.dt);
  const auto rows = static_cast<Eigen::Index>(steps + 1);
  traj.x_path.resize(rows, static_cast<Eigen::Index>(model.n));
  traj.xtilde_path.resize(rows, static_cast<Eigen::Index>(model.n));
  traj.y_path.resize(rows, static_cast<Eigen::Index>(model.m));
  traj.x_path.row(0) = x.transpose();
  traj.xtilde_path.row(0) = xt.transpose();
  traj.y_path.row(0) = y.transpose();
  traj.seed_record = {config.seed, {bx.stream_id(), by.stream_id(), bxtilde.stream_id()}};

  for (std::size_t k = 0; k < steps; ++k) {
    const Vec y_next = slow_update(y, model.b_Y(x, y), model.sigma_Y(y), config.dt, by.row(k));
    for (std::size_t s = 0; s < substeps; ++s) {
      x = fast_update(model, x, y, h, bx.row(k * substeps + s), rate, noise_scale);
      xt = fast_update(model, xt, y, h, bxtilde.row(k * substeps + s), rate, noise_scale);
    }
    y = y_next;
    check_finite(x, y, k + 1, "simulate_triple");
    check_finite(xt, y, k + 1, "simulate_triple (auxiliary)");
    traj.x_path.row(static_cast<Eigen::Index>(k + 1)) = x.transpose();
    traj.xtilde_path.row(static_cast<Eigen::Index>(k + 1)) = xt.transpose();
    traj.y_path.row(static_cast<Eigen::Index>(k + 1)) = y.transpose();
  }
  return traj;
}

}  // namespace slowfast
