#include "slowfast/averaging.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

#include "slowfast/error.hpp"
#include "slowfast/integrator.hpp"
#include "slowfast/kernels.hpp"
#include "slowfast/stats.hpp"

namespace slowfast {
namespace {

std::uint64_t hash_vector(const Vec& y) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(y(i));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

// exp(-z) for z >= 0 is the raw mixture weight scale; below this the
// unshifted weights are all zero in double precision.
constexpr double kUnderflowExponent = 708.0;

}  // namespace

std::string_view to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::analytic: return "analytic";
    case Provenance::quadrature: return "quadrature";
    case Provenance::ergodic_mc: return "ergodic_mc";
  }
  return "analytic";
}

DriftEstimate averaged_drift_ergodic(const ModelSpec& model, const Vec& y, double burn_in,
                                     double horizon, std::uint64_t seed,
                                     const ErgodicOptions& options) {
  require(burn_in >= 0.0 && horizon > 0.0, ErrorKind::InvalidArgument,
          "burn-in must be nonnegative and horizon positive");
  require(options.batches >= 2, ErrorKind::InvalidArgument, "need at least two batches");
  SimConfig config;
  config.x0 = Vec::Zero(static_cast<Eigen::Index>(model.n));
  config.y0 = y;
  const double stiffness = resolve_stiffness(model, config);
  const double dt = options.dt > 0.0 ? options.dt : 0.01 / stiffness;
  const auto burn_steps = static_cast<std::size_t>(std::ceil(burn_in / dt));
  const auto avg_steps =
      std::max(options.batches, static_cast<std::size_t>(std::ceil(horizon / dt)));
  config.dt = dt;
  config.t_final = static_cast<double>(burn_steps + avg_steps) * dt;
  config.substeps = 1;
  config.seed = seed;

  const Trajectory traj = simulate_frozen(model, y, config);
  const auto m = static_cast<Eigen::Index>(model.m);
  std::vector<std::vector<double>> samples(model.m, std::vector<double>(avg_steps));
  for (std::size_t k = 0; k < avg_steps; ++k) {
    const Vec x = traj.x_path.row(static_cast<Eigen::Index>(burn_steps + 1 + k)).transpose();
    const Vec b = model.b_Y(x, y);
    for (Eigen::Index j = 0; j < m; ++j) samples[static_cast<std::size_t>(j)][k] = b(j);
  }
  DriftEstimate out{Vec(m), Vec(m)};
  for (Eigen::Index j = 0; j < m; ++j) {
    const MeanSe ms = batch_means(samples[static_cast<std::size_t>(j)], options.batches);
    out.value(j) = ms.mean;
    out.stderr_(j) = ms.se;
    if (options.tolerance > 0.0 && ms.se > options.tolerance) {
      fail(ErrorKind::NonConvergence, "ergodic average standard error " + std::to_string(ms.se) +
                                          " exceeds tolerance " +
                                          std::to_string(options.tolerance));
    }
  }
  return out;
}

AveragedDrift make_ergodic_drift(const ModelSpec& model, std::uint64_t seed,
                                 const ErgodicOptions& options) {
  SimConfig probe;
  probe.x0 = Vec::Zero(static_cast<Eigen::Index>(model.n));
  probe.y0 = Vec::Zero(static_cast<Eigen::Index>(model.m));
  const double kappa = resolve_stiffness(model, probe);
  const double burn_in = 10.0 / kappa;
  const double horizon = 100.0 / kappa;
  auto shared = std::make_shared<const ModelSpec>(model);
  AveragedDrift drift;
  drift.provenance = Provenance::ergodic_mc;
  drift.evaluator = [shared, seed, options, burn_in, horizon](const Vec& y) {
    return averaged_drift_ergodic(*shared, y, burn_in, horizon,
                                  derive_seed(seed, hash_vector(y)), options)
        .value;
  };
  drift.error_estimate = [shared, seed, options, burn_in, horizon](const Vec& y) {
    return averaged_drift_ergodic(*shared, y, burn_in, horizon,
                                  derive_seed(seed, hash_vector(y)), options)
        .stderr_;
  };
  return drift;
}

AveragedDrift make_analytic_drift(const ModelSpec& model) {
  require(static_cast<bool>(model.analytic_bbar), ErrorKind::InvalidArgument,
          "model has no analytic averaged drift");
  AveragedDrift drift;
  drift.provenance = Provenance::analytic;
  drift.evaluator = model.analytic_bbar;
  return drift;
}

DensityQuadrature density_quadrature(const std::function<double(const Vec& x)>& log_density,
                                     const QuadratureGrid& grid) {
  const auto n = static_cast<std::size_t>(grid.lo.size());
  require(n >= 1 && n <= 2, ErrorKind::DimensionTooHigh, "quadrature supports n <= 2 only");
  require(grid.hi.size() == grid.lo.size() && (grid.lo.array() < grid.hi.array()).all(),
          ErrorKind::InvalidArgument, "quadrature box is empty");
  require(grid.cells >= 2, ErrorKind::InvalidArgument, "quadrature needs at least two cells");
  const std::size_t nodes_per_axis = grid.cells + 1;
  const std::size_t total_nodes = n == 1 ? nodes_per_axis : nodes_per_axis * nodes_per_axis;
  const Vec h = (grid.hi - grid.lo) / static_cast<double>(grid.cells);

  DensityQuadrature q;
  q.nodes.resize(total_nodes);
  for (std::size_t idx = 0; idx < total_nodes; ++idx) {
    Vec x(static_cast<Eigen::Index>(n));
    std::size_t rest = idx;
    for (std::size_t d = 0; d < n; ++d) {
      const auto dd = static_cast<Eigen::Index>(d);
      x(dd) = grid.lo(dd) + static_cast<double>(rest % nodes_per_axis) * h(dd);
      rest /= nodes_per_axis;
    }
    q.nodes[idx] = std::move(x);
  }

  std::vector<double> logd(total_nodes);
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < total_nodes; ++i) {
    logd[i] = log_density(q.nodes[i]);
    max_log = std::max(max_log, logd[i]);
  }
  require(std::isfinite(max_log), ErrorKind::DegenerateDensity,
          "density is zero everywhere on the quadrature grid");
  std::vector<double> dens(total_nodes);
  for (std::size_t i = 0; i < total_nodes; ++i) dens[i] = std::exp(logd[i] - max_log);

  // Each cell contributes its volume times the mean of its corner values,
  // which is the tensor trapezoidal rule.
  const std::size_t cells_total = n == 1 ? grid.cells : grid.cells * grid.cells;
  const std::size_t corners = std::size_t{1} << n;
  const double share = h.prod() / static_cast<double>(corners);
  std::vector<double> node_weight(total_nodes, 0.0);
  CompensatedSum mass, boundary;
  for (std::size_t c = 0; c < cells_total; ++c) {
    const std::size_t ci[2] = {c % grid.cells, n == 2 ? c / grid.cells : 0};
    bool on_boundary = false;
    for (std::size_t d = 0; d < n; ++d) on_boundary |= ci[d] == 0 || ci[d] == grid.cells - 1;
    double cell_mass = 0.0;
    for (std::size_t corner = 0; corner < corners; ++corner) {
      std::size_t idx = 0, stride = 1;
      for (std::size_t d = 0; d < n; ++d) {
        idx += (ci[d] + ((corner >> d) & 1U)) * stride;
        stride *= nodes_per_axis;
      }
      node_weight[idx] += share;
      cell_mass += share * dens[idx];
    }
    mass.add(cell_mass);
    if (on_boundary) boundary.add(cell_mass);
  }
  const double total = mass.value();
  require(total > 0.0, ErrorKind::DegenerateDensity,
          "density integrates to zero on the quadrature grid");
  q.boundary_fraction = boundary.value() / total;
  if (q.boundary_fraction > grid.tail_tolerance) {
    fail(ErrorKind::TailMassTooLarge, "boundary cells hold " + std::to_string(q.boundary_fraction) +
                                          " of the mass; widen the quadrature box");
  }
  q.log_mass = max_log + std::log(total);
  q.weights.resize(total_nodes);
  for (std::size_t i = 0; i < total_nodes; ++i) q.weights[i] = node_weight[i] * dens[i] / total;
  return q;
}

Vec averaged_drift_quadrature(const std::function<Vec(const Vec& x, const Vec& y)>& b_Y,
                              const std::function<double(const Vec& x)>& log_density,
                              const QuadratureGrid& grid, const Vec& y) {
  const DensityQuadrature q = density_quadrature(log_density, grid);
  std::vector<CompensatedSum> acc;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    if (q.weights[i] <= 0.0) continue;
    const Vec v = b_Y(q.nodes[i], y);
    if (acc.empty()) acc.resize(static_cast<std::size_t>(v.size()));
    for (std::size_t j = 0; j < acc.size(); ++j) {
      acc[j].add(q.weights[i] * v(static_cast<Eigen::Index>(j)));
    }
  }
  Vec integral(static_cast<Eigen::Index>(acc.size()));
  for (std::size_t j = 0; j < acc.size(); ++j) {
    integral(static_cast<Eigen::Index>(j)) = acc[j].value();
  }
  return integral;
}

AveragedDrift make_quadrature_drift(const ModelSpec& model, const QuadratureGrid& grid) {
  require(static_cast<bool>(model.mu_log_density), ErrorKind::InvalidArgument,
          "model has no mu log-density for quadrature");
  auto shared = std::make_shared<const ModelSpec>(model);
  AveragedDrift drift;
  drift.provenance = Provenance::quadrature;
  drift.evaluator = [shared, grid](const Vec& y) {
    return averaged_drift_quadrature(
        shared->b_Y, [&](const Vec& x) { return shared->mu_log_density(x, y); }, grid, y);
  };
  return drift;
}

Vec gaussian61_averaged_drift(const GradientModelParams& params,
                              const std::function<Vec(const Vec& x, const Vec& y)>& b_Y,
                              const Vec& y) {
  params.validate();
  require(!params.h, ErrorKind::InvalidArgument,
          "the Gaussian closed form requires h identically zero");
  const Vec mean = params.g(y);
  const Vec centre = b_Y(mean, y);
  for (Eigen::Index i = 0; i < mean.size(); ++i) {
    for (double step : {1.0, 2.5}) {
      Vec plus = mean, minus = mean;
      plus(i) += step;
      minus(i) -= step;
      const Vec second = b_Y(plus, y) + b_Y(minus, y) - 2.0 * centre;
      const double scale = 1.0 + centre.cwiseAbs().maxCoeff() + b_Y(plus, y).cwiseAbs().maxCoeff();
      if (second.cwiseAbs().maxCoeff() > 1e-9 * scale) {
        fail(ErrorKind::NotAffine, "b_Y is not affine in x (coordinate " + std::to_string(i) + ")");
      }
    }
  }
  return centre;
}

ThetaMuSamples sample_theta_mu(const TamdModelParams& params, std::size_t count,
                               std::uint64_t seed) {
  // The standing condition constrains the dynamics, not the image measure,
  // so only the pieces used here are checked.
  require(params.n >= 1 && params.m >= 1 && params.theta, ErrorKind::InvalidArgument,
          "TAMD collective variable is not set");
  require(count >= 1, ErrorKind::InvalidArgument, "need at least one sample");
  const std::size_t n = params.n;
  const double k = params.potential_scale;
  require(k > 0.0, ErrorKind::InvalidArgument, "potential scale must be positive");
  std::vector<double> x_all(n * count);
  switch (params.potential) {
    case TamdPotential::harmonic: {
      fill_normals(seed, {0, Channel::Aux}, 0, x_all);
      const double sd = 1.0 / std::sqrt(k);
      for (double& v : x_all) v *= sd;
      break;
    }
    case TamdPotential::soft_abs: {
      // Each coordinate has density proportional to exp(-k sqrt(1 + x^2)).
      // Propose from the Laplace density exp(-k|x|) and accept with
      // probability exp(-k (sqrt(1 + x^2) - |x|)) >= exp(-k).
      std::uint64_t offset = 0;
      std::vector<double> u(3 * 1024);
      std::size_t filled = 0;
      while (filled < x_all.size()) {
        fill_uniforms(seed, {0, Channel::Aux}, offset, u);
        offset += u.size();
        for (std::size_t i = 0; i + 2 < u.size() && filled < x_all.size(); i += 3) {
          const double r = -std::log(u[i]) / k;
          const double x = u[i + 1] < 0.5 ? -r : r;
          if (u[i + 2] < std::exp(-k * (std::sqrt(1.0 + x * x) - r))) x_all[filled++] = x;
        }
      }
      break;
    }
  }
  ThetaMuSamples out;
  out.dim = params.m;
  out.count = count;
  out.coords.resize(params.m * count);
  for (std::size_t i = 0; i < count; ++i) {
    const Vec x = Eigen::Map<const Vec>(x_all.data() + i * n, static_cast<Eigen::Index>(n));
    const Vec z = params.theta(x);
    for (std::size_t j = 0; j < params.m; ++j) out.coords[j * count + i] = z(static_cast<Eigen::Index>(j));
  }
  return out;
}

std::vector<double> tamd_mixture_weights(const ThetaMuSamples& samples, const Vec& y,
                                         double kappa) {
  require(static_cast<std::size_t>(y.size()) == samples.dim, ErrorKind::InvalidArgument,
          "y has the wrong dimension for the samples");
  std::vector<double> d2(samples.count, 0.0);
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.count; ++i) {
    for (std::size_t j = 0; j < samples.dim; ++j) {
      const double v = samples.at(i, j) - y(static_cast<Eigen::Index>(j));
      d2[i] += v * v;
    }
    dmin = std::min(dmin, d2[i]);
  }
  std::vector<double> w(samples.count);
  for (std::size_t i = 0; i < samples.count; ++i) w[i] = std::exp(-0.5 * kappa * (d2[i] - dmin));
  const double total = kernels::compensated_sum(w);
  for (double& v : w) v /= total;
  return w;
}

DriftEstimate tamd_averaged_drift(const TamdModelParams& params, const ThetaMuSamples& samples,
                                  const Vec& y) {
  require(params.kappa > 0.0, ErrorKind::InvalidArgument, "kappa must be positive");
  require(samples.count >= 1000, ErrorKind::InvalidArgument,
          "the mixture score needs at least 1000 samples");
  require(static_cast<std::size_t>(y.size()) == samples.dim, ErrorKind::InvalidArgument,
          "y has the wrong dimension for the samples");
  const std::size_t m = samples.dim;
  std::vector<double> yv(y.data(), y.data() + m);
  std::vector<double> swv(m), sw2v(m), sw2v2(m);
  const kernels::MixtureSums s =
      kernels::mixture_sums(samples.coords, samples.count, yv, params.kappa, swv, sw2v, sw2v2);
  if (0.5 * params.kappa * s.min_sq_dist > kUnderflowExponent) {
    fail(ErrorKind::AllWeightsUnderflow,
         "every mixture weight underflows at this y; it lies outside the trusted region");
  }
  const double scale = params.kappa / params.gamma_bar;
  DriftEstimate out{Vec(static_cast<Eigen::Index>(m)), Vec(static_cast<Eigen::Index>(m))};
  for (std::size_t j = 0; j < m; ++j) {
    const double r = swv[j] / s.sum_w;
    const double var = sw2v2[j] - 2.0 * r * sw2v[j] + r * r * s.sum_w2;
    out.value(static_cast<Eigen::Index>(j)) = scale * r;
    out.stderr_(static_cast<Eigen::Index>(j)) = scale * std::sqrt(std::max(var, 0.0)) / s.sum_w;
  }
  return out;
}

AveragedDrift make_tamd_drift(const TamdModelParams& params, ThetaMuSamples samples) {
  auto p = std::make_shared<const TamdModelParams>(params);
  auto s = std::make_shared<const ThetaMuSamples>(std::move(samples));
  AveragedDrift drift;
  drift.provenance = Provenance::ergodic_mc;
  drift.evaluator = [p, s](const Vec& y) { return tamd_averaged_drift(*p, *s, y).value; };
  drift.error_estimate = [p, s](const Vec& y) { return tamd_averaged_drift(*p, *s, y).stderr_; };
  return drift;
}

Trajectory simulate_averaged(const AveragedDrift& bbar,
                             const std::function<Mat(const Vec& y)>& sigma_Y,
                             const SimConfig& config, const NoisePath& by_stream) {
  const std::size_t steps = slow_steps(config);
  require(by_stream.steps() == steps && by_stream.dim() == static_cast<std::size_t>(config.y0.size()),
          ErrorKind::InvalidArgument, "slow noise does not match the slow grid");
  Vec y = config.y0;
  Trajectory traj;
  traj.times.resize(steps + 1);
  traj.y_path.resize(static_cast<Eigen::Index>(steps + 1), y.size());
  traj.y_path.row(0) = y.transpose();
  traj.times[0] = 0.0;
  traj.seed_record = {config.seed, {by_stream.stream_id()}};
  for (std::size_t k = 0; k < steps; ++k) {
    y = slow_update(y, bbar(y), sigma_Y(y), config.dt, by_stream.row(k));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (!std::isfinite(y(i))) throw NumericalBlowup(k + 1, static_cast<std::size_t>(i), "simulate_averaged");
    }
    traj.times[k + 1] = static_cast<double>(k + 1) * config.dt;
    traj.y_path.row(static_cast<Eigen::Index>(k + 1)) = y.transpose();
  }
  return traj;
}

double estimate_lipschitz(const std::function<Vec(const Vec& y)>& f, const Vec& lo,
                          const Vec& hi, std::size_t pairs, std::uint64_t seed) {
  const auto m = static_cast<std::size_t>(lo.size());
  std::vector<double> u(2 * m * pairs);
  fill_uniforms(seed, {0, Channel::Aux}, 0, u);
  double best = 0.0;
  for (std::size_t p = 0; p < pairs; ++p) {
    Vec y1(lo.size()), y2(lo.size());
    for (std::size_t j = 0; j < m; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      y1(jj) = lo(jj) + (hi(jj) - lo(jj)) * u[2 * m * p + j];
      y2(jj) = lo(jj) + (hi(jj) - lo(jj)) * u[2 * m * p + m + j];
    }
    const double dist = (y1 - y2).norm();
    if (dist <= 0.0) continue;
    best = std::max(best, (f(y1) - f(y2)).norm() / dist);
  }
  return best;
}

}  // namespace slowfast
