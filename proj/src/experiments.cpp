#include "slowfast/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "slowfast/error.hpp"
#include "slowfast/integrator.hpp"
#include "slowfast/parallel.hpp"
#include "slowfast/rng.hpp"
#include "slowfast/stats.hpp"

namespace slowfast {

bool StoppingDomain::contains(const Vec& y) const {
  return (y.array() >= lo.array()).all() && (y.array() <= hi.array()).all();
}

namespace {

struct ReplicaError {
  double sup = 0.0;
  double exit_time = 0.0;
  bool exited = false;
};

ReplicaError replica_error(const ModelSpec& model, const AveragedDrift& bbar,
                           const SimConfig& config, const NoisePath& bx, const NoisePath& by,
                           const std::optional<StoppingDomain>& stopping) {
  const Trajectory coupled = simulate_coupled(model, config, bx, by);
  const Trajectory averaged = simulate_averaged(bbar, model.sigma_Y, config, by);
  const auto& cs = coupled.seed_record.streams;
  require(std::find(cs.begin(), cs.end(), by.stream_id()) != cs.end() &&
              averaged.seed_record.streams.front() == by.stream_id(),
          ErrorKind::InvalidArgument, "coupled and averaged runs must share the BY stream");

  const Eigen::Index rows = coupled.y_path.rows();
  ReplicaError out;
  out.exit_time = config.t_final;
  if (!stopping) {
    for (Eigen::Index k = 0; k < rows; ++k) {
      out.sup = std::max(out.sup, (coupled.y_path.row(k) - averaged.y_path.row(k)).norm());
    }
    return out;
  }
  auto first_exit = [&](const Mat& path) {
    for (Eigen::Index k = 0; k < rows; ++k) {
      if (!stopping->contains(path.row(k).transpose())) return k;
    }
    return rows;
  };
  const Eigen::Index tau_y = first_exit(coupled.y_path);
  const Eigen::Index tau_bar = first_exit(averaged.y_path);
  const Eigen::Index last = rows - 1;
  if (stopping->symmetric) {
    const Eigen::Index tau = std::min(tau_y, tau_bar);
    const Eigen::Index stop = std::min(tau, last);
    for (Eigen::Index k = 0; k <= stop; ++k) {
      out.sup = std::max(out.sup, (coupled.y_path.row(k) - averaged.y_path.row(k)).norm());
    }
    out.exited = tau < rows;
    if (out.exited) out.exit_time = coupled.times[static_cast<std::size_t>(tau)];
  } else {
    const Eigen::Index sy = std::min(tau_y, last), sb = std::min(tau_bar, last);
    for (Eigen::Index k = 0; k < rows; ++k) {
      out.sup = std::max(out.sup, (coupled.y_path.row(std::min(k, sy)) -
                                   averaged.y_path.row(std::min(k, sb)))
                                      .norm());
    }
    out.exited = tau_y < rows;
    if (out.exited) out.exit_time = coupled.times[static_cast<std::size_t>(tau_y)];
  }
  return out;
}

MeanSe summarize(std::span<const double> values) {
  return values.size() > 64 ? batch_means(values, 64) : mean_se(values);
}

}  // namespace

StrongErrorResult strong_error(const ModelSpec& model, const AveragedDrift& bbar,
                               const StrongErrorOptions& options) {
  require(options.replicas >= 2, ErrorKind::InvalidArgument, "need at least two replicas");
  require(options.y0.size() == static_cast<Eigen::Index>(model.m), ErrorKind::InvalidArgument,
          "y0 has the wrong dimension");
  SimConfig config;
  config.t_final = options.t_final;
  config.dt = options.dt;
  config.substeps = options.substeps;
  config.seed = options.seed;
  config.y0 = options.y0;
  config.x0 = options.init_fast_from_mu ? Vec::Zero(static_cast<Eigen::Index>(model.n))
                                        : options.x0;
  config.init_fast_from_mu = options.init_fast_from_mu;
  if (options.stopping) {
    require(options.stopping->contains(options.y0), ErrorKind::InvalidArgument,
            "y0 must lie inside the stopping domain");
  }
  const std::size_t substeps = resolve_substeps(model, config);
  config.substeps = substeps;
  check_stability(model, config, substeps, model.epsilon);

  std::vector<ReplicaError> errors(options.replicas);
  parallel_for(options.replicas, options.workers, [&](std::size_t r) {
    SimConfig c = config;
    c.replica = static_cast<std::uint32_t>(r);
    errors[r] = replica_error(model, bbar, c, fast_noise(model, c, substeps, Channel::BX),
                              slow_noise(model, c), options.stopping);
  });

  StrongErrorResult res;
  res.epsilon = model.epsilon;
  res.replicas = options.replicas;
  res.dt = options.dt;
  res.substeps = substeps;
  res.seed = options.seed;
  res.sup_errors.resize(options.replicas);
  res.exit_times.resize(options.replicas);
  std::size_t exits = 0;
  for (std::size_t r = 0; r < options.replicas; ++r) {
    res.sup_errors[r] = errors[r].sup;
    res.exit_times[r] = errors[r].exit_time;
    exits += errors[r].exited ? 1 : 0;
  }
  const MeanSe ms = summarize(res.sup_errors);
  res.mean_sup_error = ms.mean;
  res.stderr_ = ms.se;
  res.mean_exit_time = mean_se(res.exit_times).mean;
  res.exit_fraction = static_cast<double>(exits) / static_cast<double>(options.replicas);

  if (options.refinement_fraction > 0.0) {
    const auto sub = std::min(
        options.replicas,
        std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(
                                     options.refinement_fraction *
                                     static_cast<double>(options.replicas)))));
    SimConfig fine = config;
    fine.dt = 0.5 * config.dt;
    std::vector<double> coarse_err(sub), fine_err(sub);
    parallel_for(sub, options.workers, [&](std::size_t r) {
      SimConfig f = fine, c = config;
      f.replica = c.replica = static_cast<std::uint32_t>(r);
      const NoisePath bx = fast_noise(model, f, substeps, Channel::BX);
      const NoisePath by = slow_noise(model, f);
      fine_err[r] = replica_error(model, bbar, f, bx, by, options.stopping).sup;
      coarse_err[r] =
          replica_error(model, bbar, c, bx.coarsen(2), by.coarsen(2), options.stopping).sup;
    });
    const MeanSe mc = mean_se(coarse_err), mf = mean_se(fine_err);
    if (mc.mean == 0.0 && mf.mean == 0.0) {
      res.dt_refinement_ratio = 1.0;
      res.dt_refinement_se = 0.0;
      res.dt_accepted = true;
    } else if (mf.mean == 0.0) {
      res.dt_refinement_ratio = std::numeric_limits<double>::infinity();
      res.dt_accepted = false;
    } else {
      res.dt_refinement_ratio = mc.mean / mf.mean;
      const double rel_c = mc.mean > 0.0 ? mc.se / mc.mean : 0.0;
      res.dt_refinement_se = res.dt_refinement_ratio * std::hypot(rel_c, mf.se / mf.mean);
      res.dt_accepted = std::abs(res.dt_refinement_ratio - 1.0) <= 3.0 * res.dt_refinement_se;
    }
    if (!res.dt_accepted && options.enforce_dt) {
      fail(ErrorKind::DtBiasTooLarge,
           "dt = " + std::to_string(options.dt) + " fails the refinement check: ratio " +
               std::to_string(res.dt_refinement_ratio) + " with SE " +
               std::to_string(res.dt_refinement_se));
    }
  }
  return res;
}

namespace {

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
};

SlopeFit fit_means(std::span<const double> eps, std::span<const double> means,
                   std::span<const double> ses) {
  std::vector<double> x(eps.size()), y(eps.size()), w(eps.size(), 1.0);
  const bool weighted = std::all_of(ses.begin(), ses.end(), [](double s) { return s > 0.0; });
  for (std::size_t i = 0; i < eps.size(); ++i) {
    x[i] = std::log(eps[i]);
    y[i] = std::log(means[i]);
    if (weighted) w[i] = (means[i] / ses[i]) * (means[i] / ses[i]);
  }
  const LineFit fit = weighted_line_fit(x, y, w);
  return {fit.slope, fit.intercept};
}

}  // namespace

ConvergenceReport fit_convergence(std::vector<StrongErrorResult> results, std::uint64_t seed,
                                  std::size_t resamples) {
  require(results.size() >= 4, ErrorKind::InvalidArgument,
          "a slope needs at least 4 epsilon values");
  for (std::size_t i = 1; i < results.size(); ++i) {
    require(results[i].epsilon < results[i - 1].epsilon, ErrorKind::InvalidArgument,
            "epsilon values must be strictly decreasing");
  }
  require(results.front().epsilon / results.back().epsilon >= 8.0 * (1.0 - 1e-12),
          ErrorKind::InvalidArgument, "epsilon grid must span at least a factor 8");
  ConvergenceReport report;
  report.results = std::move(results);
  const auto& rs = report.results;
  const std::size_t n = rs.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (std::any_of(rs.begin(), rs.end(), [](const auto& r) { return r.mean_sup_error == 0.0; })) {
    report.degenerate = true;
    report.slope = report.slope_lo = report.slope_hi = report.intercept = nan;
    return report;
  }
  std::vector<double> eps(n), means(n), ses(n);
  for (std::size_t i = 0; i < n; ++i) {
    eps[i] = rs[i].epsilon;
    means[i] = rs[i].mean_sup_error;
    ses[i] = rs[i].stderr_;
  }
  const SlopeFit point = fit_means(eps, means, ses);
  report.slope = point.slope;
  report.intercept = point.intercept;

  const bool have_replicas =
      std::all_of(rs.begin(), rs.end(), [](const auto& r) { return r.sup_errors.size() >= 2; });
  if (!have_replicas || resamples < 2) {
    report.slope_lo = report.slope_hi = report.slope;
    return report;
  }
  std::vector<double> slopes;
  slopes.reserve(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    std::vector<double> bm(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& errs = rs[i].sup_errors;
      std::vector<double> u(errs.size()), pick(errs.size());
      fill_uniforms(derive_seed(seed, i), {static_cast<std::uint32_t>(b), Channel::Aux}, 0, u);
      for (std::size_t j = 0; j < errs.size(); ++j) {
        pick[j] = errs[std::min(errs.size() - 1,
                                static_cast<std::size_t>(u[j] * static_cast<double>(errs.size())))];
      }
      bm[i] = mean_se(pick).mean;
    }
    if (std::any_of(bm.begin(), bm.end(), [](double v) { return !(v > 0.0); })) continue;
    slopes.push_back(fit_means(eps, bm, ses).slope);
  }
  require(slopes.size() >= 2, ErrorKind::DegenerateErrors, "bootstrap resamples degenerate");
  report.slope_lo = quantile(slopes, 0.025);
  report.slope_hi = quantile(slopes, 0.975);
  return report;
}

ConvergenceReport convergence_study(const std::function<FamilyInstance(double eps)>& family,
                                    const ConvergenceOptions& options) {
  std::vector<StrongErrorResult> results;
  for (const double eps : options.eps_grid) {
    require(eps > 0.0, ErrorKind::InvalidArgument, "epsilon must be positive");
    const FamilyInstance inst = family(eps);
    StrongErrorOptions so;
    so.t_final = options.t_final;
    so.dt = options.dt_rule ? options.dt_rule(eps)
                            : std::min(0.01, eps / (10.0 * options.kappa_unit));
    so.substeps = options.substeps;
    so.replicas = options.replicas;
    so.seed = options.seed;
    so.y0 = options.y0;
    so.stopping = options.stopping;
    so.enforce_dt = options.enforce_dt;
    so.workers = options.workers;
    so.init_fast_from_mu = static_cast<bool>(inst.model.mu_sampler);
    if (!so.init_fast_from_mu) so.x0 = Vec::Zero(static_cast<Eigen::Index>(inst.model.n));
    results.push_back(strong_error(inst.model, inst.bbar, so));
  }
  return fit_convergence(std::move(results), options.seed);
}

namespace {

// (1 - 2(1 - e^-u)/u + (1 - e^-2u)/(2u)), which cancels badly for small u.
double integral_variance_factor(double u) {
  if (u < 1e-3) return u * u * (1.0 / 3.0 - u * (0.25 - u * (7.0 / 60.0 - u / 24.0)));
  return 1.0 + 2.0 * std::expm1(-u) / u - std::expm1(-2.0 * u) / (2.0 * u);
}

}  // namespace

LinearOracleResult linear_oracle(const LinearParams& params, double epsilon, double t_final,
                                 double dt, std::size_t replicas, std::uint64_t seed,
                                 std::size_t fine_factor, int workers) {
  require(epsilon > 0.0 && params.kappa_x > 0.0 && params.kappa_y > 0.0 &&
              params.sigma_x >= 0.0 && params.sigma_y >= 0.0,
          ErrorKind::InvalidArgument, "linear oracle needs kappa > 0, sigma >= 0, epsilon > 0");
  require(replicas >= 2 && fine_factor >= 1 && dt > 0.0, ErrorKind::InvalidArgument,
          "invalid oracle grid");
  const double coarse = std::round(t_final / dt);
  require(coarse >= 1.0 && std::abs(coarse * dt - t_final) <= 1e-9 * t_final,
          ErrorKind::InvalidArgument, "T must be a multiple of dt");
  const auto steps = static_cast<std::size_t>(coarse) * fine_factor;
  const double h = dt / static_cast<double>(fine_factor);

  // D = X - Y is OU with rate a and noise intensity q; I = int D.
  const double a = params.kappa_x / epsilon + params.kappa_y;
  const double q = params.sigma_x * params.sigma_x / epsilon + params.sigma_y * params.sigma_y;
  const double u = a * h;
  const double phi = std::exp(-u);
  const double one_minus_phi = -std::expm1(-u);
  const double v1 = q * (-std::expm1(-2.0 * u)) / (2.0 * a);
  const double v2 = q * h / (a * a) * integral_variance_factor(u);
  const double c12 = q * one_minus_phi * one_minus_phi / (2.0 * a * a);
  const double l11 = std::sqrt(v1);
  const double l21 = l11 > 0.0 ? c12 / l11 : 0.0;
  const double l22 = std::sqrt(std::max(0.0, v2 - l21 * l21));
  const double sd0 = params.sigma_x / std::sqrt(2.0 * params.kappa_x);

  std::vector<double> sup_coarse(replicas), sup_fine(replicas);
  parallel_for(replicas, workers, [&](std::size_t r) {
    std::vector<double> z(1 + 2 * steps);
    fill_normals(seed, {static_cast<std::uint32_t>(r), Channel::Aux}, 0, z);
    double d = sd0 * z[0], integral = 0.0, sc = 0.0, sf = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
      const double z1 = z[1 + 2 * k], z2 = z[2 + 2 * k];
      const double d_next = phi * d + l11 * z1;
      integral += d * one_minus_phi / a + l21 * z1 + l22 * z2;
      d = d_next;
      const double err = std::abs(params.kappa_y * integral);
      sf = std::max(sf, err);
      if ((k + 1) % fine_factor == 0) sc = std::max(sc, err);
    }
    sup_coarse[r] = sc;
    sup_fine[r] = sf;
  });
  const MeanSe c = mean_se(sup_coarse), f = mean_se(sup_fine);
  return {c.mean, c.se, f.mean, f.se, replicas};
}

StrongErrorResult stopped_strong_error(const TamdModelParams& params, double epsilon,
                                       const StoppedErrorOptions& options) {
  params.validate();
  const ModelSpec model = tamd62_model(params, epsilon);
  ThetaMuSamples samples =
      options.samples ? *options.samples
                      : sample_theta_mu(params, options.drift_samples,
                                        derive_seed(options.seed, 0x7a3dULL));
  const AveragedDrift bbar = make_tamd_drift(params, std::move(samples));
  StrongErrorOptions so;
  so.t_final = options.t_final;
  so.dt = options.dt;
  so.substeps = options.substeps;
  so.replicas = options.replicas;
  so.seed = options.seed;
  so.y0 = options.y0;
  so.init_fast_from_mu = static_cast<bool>(model.mu_sampler);
  if (!so.init_fast_from_mu) {
    // theta is the identity on the shipped instances, so start X at the slow value.
    so.x0 = Vec::Zero(static_cast<Eigen::Index>(params.n));
    so.x0.head(std::min(params.n, params.m)) = options.y0.head(std::min(params.n, params.m));
  }
  so.stopping = StoppingDomain{params.domain_lo, params.domain_hi, options.symmetric};
  so.refinement_fraction = options.refinement_fraction;
  so.enforce_dt = options.enforce_dt;
  so.workers = options.workers;
  StrongErrorResult res = strong_error(model, bbar, so);
  const double early = 10.0 * options.dt * (1.0 + 1e-12);
  const auto quick = static_cast<std::size_t>(
      std::count_if(res.exit_times.begin(), res.exit_times.end(),
                    [&](double t) { return t <= early && t < options.t_final; }));
  if (2 * quick > res.replicas) {
    fail(ErrorKind::ImmediateExit, std::to_string(quick) + " of " +
                                       std::to_string(res.replicas) +
                                       " replicas leave the domain within 10 steps");
  }
  return res;
}

}  // namespace slowfast
