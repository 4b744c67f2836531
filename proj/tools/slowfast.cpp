// Command-line driver: slowfast <subcommand> --config run.json [--workers k] [--out dir] [--format f]...

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slowfast/averaging.hpp"
#include "slowfast/config.hpp"
#include "slowfast/constants.hpp"
#include "slowfast/decoupling.hpp"
#include "slowfast/diagnostics.hpp"
#include "slowfast/error.hpp"
#include "slowfast/experiments.hpp"
#include "slowfast/integrator.hpp"
#include "slowfast/io.hpp"
#include "slowfast/parallel.hpp"

namespace fs = std::filesystem;
using namespace slowfast;

namespace {

struct Context {
  RunConfig cfg;
  int workers = 1;
  RunArtifacts* artifacts = nullptr;

  bool wants(const std::string& format) const {
    for (const auto& f : cfg.output.formats) {
      if (f == format) return true;
    }
    return false;
  }
};

Vec to_vec(const std::vector<double>& v, std::size_t dim) {
  if (v.empty()) return Vec::Zero(static_cast<Eigen::Index>(dim));
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

SimConfig sim_config(const Context& ctx, const ModelSpec& model) {
  const auto& s = ctx.cfg.sim;
  SimConfig c;
  c.t_final = s.t_final;
  c.dt = s.dt;
  c.substeps = s.substeps;
  c.seed = s.seed;
  c.y0 = to_vec(s.y0, model.m);
  c.x0 = to_vec(s.x0, model.n);
  c.init_fast_from_mu = s.init_fast_from_mu && static_cast<bool>(model.mu_sampler);
  return c;
}

AveragedDrift make_drift(const Context& ctx, const ModelSpec& model) {
  const auto& e = ctx.cfg.experiment;
  const auto& mc = ctx.cfg.model;
  if (e.drift == "ergodic") return make_ergodic_drift(model, derive_seed(ctx.cfg.sim.seed, 0xe7));
  if (e.drift == "quadrature") {
    QuadratureGrid grid;
    grid.lo = Vec::Constant(static_cast<Eigen::Index>(model.n), -e.quadrature_halfwidth);
    grid.hi = Vec::Constant(static_cast<Eigen::Index>(model.n), e.quadrature_halfwidth);
    grid.cells = e.quadrature_cells;
    return make_quadrature_drift(model, grid);
  }
  if (model.analytic_bbar) return make_analytic_drift(model);
  if (mc.family == FamilyTag::gradient61) {
    const auto params = gradient61_params(mc.gradient61);
    const auto b_Y = gradient61_slow_drift(mc.gradient61);
    AveragedDrift d;
    d.provenance = Provenance::analytic;
    d.evaluator = [params, b_Y](const Vec& y) { return gaussian61_averaged_drift(params, b_Y, y); };
    return d;
  }
  if (mc.family == FamilyTag::tamd62) {
    const auto params = tamd_params(mc.tamd);
    return make_tamd_drift(params, sample_theta_mu(params, e.drift_samples,
                                                   derive_seed(ctx.cfg.sim.seed, 0x7a3dULL)));
  }
  fail(ErrorKind::ConfigError, "experiment.drift: no analytic averaged drift for this family");
}

void emit(Context& ctx, const std::string& stem, const std::string& csv, const std::string& json) {
  if (ctx.wants("csv")) ctx.artifacts->add(stem + ".csv", csv);
  if (ctx.wants("json")) ctx.artifacts->add(stem + ".json", json);
}

void emit_convergence(Context& ctx, const std::string& stem, const ConvergenceReport& report) {
  emit(ctx, stem, convergence_csv(report), convergence_json(report));
  if (ctx.wants("svg-plotdata")) {
    ctx.artifacts->add(stem + ".dat", convergence_plotdata(report));
    ctx.artifacts->add(stem + ".svg", convergence_svg(report));
  }
}

int run_simulate(Context& ctx) {
  const ModelSpec model = build_model(ctx.cfg.model);
  const Trajectory traj = simulate_coupled(model, sim_config(ctx, model));
  emit(ctx, "trajectory", trajectory_csv(traj), trajectory_json(traj));
  return 0;
}

int run_average(Context& ctx) {
  const ModelSpec model = build_model(ctx.cfg.model);
  SimConfig c = sim_config(ctx, model);
  const AveragedDrift drift = make_drift(ctx, model);
  const NoisePath by = slow_noise(model, c);
  const Trajectory avg = simulate_averaged(drift, model.sigma_Y, c, by);
  emit(ctx, "averaged", trajectory_csv(avg), trajectory_json(avg));
  return 0;
}

KeyValues bounds_report(const CoefficientBounds& b, double p, double T, double psi_value) {
  KeyValues kv;
  const double gamma = timescale_gamma(b);
  const AdmissibleP adm = admissible_p(gamma);
  kv.emplace_back("gamma", gamma);
  kv.emplace_back("p_max", adm.p_max);
  kv.emplace_back("theorem_applicable", adm.theorem_applicable ? 1.0 : 0.0);
  kv.emplace_back("novikov_ok", adm.novikov_ok ? 1.0 : 0.0);
  kv.emplace_back("gamma_threshold", theorem1_gamma_threshold());
  kv.emplace_back("kappa_X", b.kappa_X);
  kv.emplace_back("Lambda_X", b.Lambda_X);
  kv.emplace_back("kappa_Y", b.kappa_Y);
  kv.emplace_back("lambda_Y", b.lambda_Y);
  kv.emplace_back("c_P", b.c_P);
  kv.emplace_back("c_L", b.c_L);
  kv.emplace_back("c_V", b.c_V);
  if (p <= adm.p_max) {
    kv.emplace_back("p", p);
    kv.emplace_back("p_prime", p_prime(p, gamma));
    kv.emplace_back("theorem1_bound", theorem1_bound(b, T, p, psi_value * T));
  }
  return kv;
}

int run_constants(Context& ctx) {
  const auto& mc = ctx.cfg.model;
  const double eps = mc.epsilon;
  const double p = ctx.cfg.experiment.p;
  const double T = ctx.cfg.sim.t_final;
  KeyValues kv;
  if (mc.family == FamilyTag::linear) {
    kv = bounds_report(linear_model_bounds(mc.linear, eps), p, T, linear_model_psi(mc.linear, eps));
  } else if (mc.family == FamilyTag::gradient61) {
    const auto& g = mc.gradient61;
    const GradientModelParams params = gradient61_params(g);
    // b_Y = -r (y - x_{1..m}) has |grad b_Y| = r sqrt(2) in operator norm at most.
    const double sup_grad_bY = g.pull_rate * std::sqrt(2.0);
    const double c_V = params.beta_X * params.lambda_Q();
    const AveragingAppConstants a =
        averaging_app_constants(params, eps, sup_grad_bY, params.sup_grad_h, c_V, g.m);
    const AdmissibleP adm = admissible_p(a.gamma);
    kv = {{"gamma", a.gamma},
          {"p_max", adm.p_max},
          {"theorem_applicable", adm.theorem_applicable ? 1.0 : 0.0},
          {"novikov_ok", adm.novikov_ok ? 1.0 : 0.0},
          {"C1", a.C1},
          {"C2", a.C2},
          {"C3", a.C3},
          {"C2_le_one", a.C2_le_one ? 1.0 : 0.0},
          {"epsilon_threshold_C2", a.epsilon_threshold_C2},
          {"epsilon_threshold_C2_exact", a.epsilon_threshold_C2_exact},
          {"kappa_X", a.kappa_X},
          {"Lambda_X", a.Lambda_X},
          {"kappa_Y", a.kappa_Y},
          {"lambda_Y", a.lambda_Y},
          {"c_L", a.c_L}};
  } else {
    const TamdConstants t = tamd_constants(tamd_params(mc.tamd), eps);
    const AdmissibleP adm = admissible_p(t.gamma_lower);
    kv = {{"gamma", t.gamma_lower},
          {"p_max", adm.p_max},
          {"theorem_applicable", adm.theorem_applicable ? 1.0 : 0.0},
          {"novikov_ok", adm.novikov_ok ? 1.0 : 0.0},
          {"kappa_X", t.kappa_X},
          {"alpha", t.alpha},
          {"kappa_Y_sq", t.kappa_Y_sq},
          {"c_V_sq", t.c_V_sq},
          {"Lambda_X", t.Lambda_X},
          {"lambda_Y", t.lambda_Y},
          {"epsilon_threshold_formula", t.epsilon_threshold_formula},
          {"epsilon_threshold_derived", t.epsilon_threshold_derived}};
  }
  emit(ctx, "constants", key_values_csv(kv), key_values_json(kv));
  return 0;
}

std::vector<double> require_grid(const Context& ctx) {
  const auto& grid = ctx.cfg.experiment.eps_grid;
  require(grid.size() >= 4, ErrorKind::ConfigError,
          "experiment.eps_grid: needs at least 4 values for a slope");
  return grid;
}

std::function<double(double)> dt_rule(const Context& ctx) {
  const double factor = ctx.cfg.experiment.dt_factor, cap = ctx.cfg.experiment.dt_max;
  return [factor, cap](double eps) { return std::min(cap, factor * eps); };
}

int run_converge(Context& ctx) {
  const auto& e = ctx.cfg.experiment;
  ConvergenceOptions opts;
  opts.eps_grid = require_grid(ctx);
  opts.t_final = ctx.cfg.sim.t_final;
  opts.replicas = e.replicas;
  opts.seed = ctx.cfg.sim.seed;
  opts.dt_rule = dt_rule(ctx);
  opts.substeps = ctx.cfg.sim.substeps;
  opts.y0 = to_vec(ctx.cfg.sim.y0, slow_dim(ctx.cfg.model));
  opts.enforce_dt = e.enforce_dt;
  opts.workers = ctx.workers;
  const ConvergenceReport report = convergence_study(
      [&](double eps) {
        FamilyInstance inst{build_model(ctx.cfg.model, eps), {}};
        inst.bbar = make_drift(ctx, inst.model);
        return inst;
      },
      opts);
  emit_convergence(ctx, "convergence", report);
  if (e.oracle && ctx.cfg.model.family == FamilyTag::linear) {
    KeyValues kv;
    for (double eps : opts.eps_grid) {
      const auto o = linear_oracle(ctx.cfg.model.linear, eps, opts.t_final, opts.dt_rule(eps),
                                   std::max<std::size_t>(e.replicas, 10000),
                                   derive_seed(opts.seed, 0x0a), 16, ctx.workers);
      kv.emplace_back("oracle_mean_" + format_double(eps), o.mean_sup_error_ref);
      kv.emplace_back("oracle_se_" + format_double(eps), o.se_ref);
    }
    emit(ctx, "oracle", key_values_csv(kv), key_values_json(kv));
  }
  if (report.degenerate) {
    std::cerr << "warning: some mean sup error is zero; slope not fitted\n";
    return exit_code_for(ErrorKind::DegenerateErrors);
  }
  return 0;
}

int run_tamd(Context& ctx) {
  require(ctx.cfg.model.family == FamilyTag::tamd62, ErrorKind::ConfigError,
          "model.family: tamd requires tamd62");
  const auto& e = ctx.cfg.experiment;
  const TamdModelParams params = tamd_params(ctx.cfg.model.tamd);
  StoppedErrorOptions so;
  so.t_final = ctx.cfg.sim.t_final;
  so.substeps = ctx.cfg.sim.substeps;
  so.replicas = e.replicas;
  so.seed = ctx.cfg.sim.seed;
  so.y0 = to_vec(ctx.cfg.sim.y0, params.m);
  so.drift_samples = e.drift_samples;
  so.symmetric = e.symmetric_stopping;
  so.refinement_fraction = e.refinement_fraction;
  so.enforce_dt = e.enforce_dt;
  so.workers = ctx.workers;
  if (!e.theta_mu_file.empty()) {
    so.samples = parse_theta_mu(read_file(e.theta_mu_file));
  } else {
    so.samples = sample_theta_mu(params, e.drift_samples, derive_seed(so.seed, 0x7a3dULL));
  }
  ctx.artifacts->add("theta_mu_samples.txt", theta_mu_text(*so.samples));
  std::vector<double> grid = e.eps_grid.empty() ? std::vector<double>{ctx.cfg.model.epsilon}
                                                : e.eps_grid;
  std::vector<StrongErrorResult> results;
  for (double eps : grid) {
    so.dt = dt_rule(ctx)(eps);
    results.push_back(stopped_strong_error(params, eps, so));
  }
  if (results.size() >= 4) {
    emit_convergence(ctx, "tamd_convergence", fit_convergence(results, so.seed));
  } else {
    for (std::size_t i = 0; i < results.size(); ++i) {
      emit(ctx, "tamd_strong_error_" + std::to_string(i), strong_error_csv(results[i]),
           strong_error_json(results[i]));
    }
  }
  return 0;
}

int run_decouple_check(Context& ctx) {
  const auto& mc = ctx.cfg.model;
  const auto& e = ctx.cfg.experiment;
  const ModelSpec model = build_model(mc);
  double gamma = 0.0;
  std::optional<CoefficientBounds> bounds;
  if (mc.family == FamilyTag::linear) {
    bounds = linear_model_bounds(mc.linear, mc.epsilon);
    gamma = timescale_gamma(*bounds);
  } else if (mc.family == FamilyTag::gradient61) {
    const GradientModelParams params = gradient61_params(mc.gradient61);
    gamma = averaging_app_constants(params, mc.epsilon, mc.gradient61.pull_rate * std::sqrt(2.0),
                                    params.sup_grad_h, params.beta_X * params.lambda_Q(),
                                    mc.gradient61.m)
                .gamma;
  } else {
    gamma = tamd_constants(tamd_params(mc.tamd), mc.epsilon).gamma_lower;
  }
  SimConfig base = sim_config(ctx, model);
  auto functionals = standard_functionals();
  functionals.insert(functionals.begin(), constant_functional());
  const LawEquivalenceReport law =
      check_law_equivalence(model, base, functionals, e.replicas, base.seed, gamma, ctx.workers);
  emit(ctx, "law_equivalence", law_equivalence_csv(law), law_equivalence_json(law));
  KeyValues kv = {{"gamma", gamma}, {"mean_weight", law.mean_weight},
                  {"mean_weight_se", law.mean_weight_se},
                  {"weight_underflows", static_cast<double>(law.weight_underflows)}};
  if (bounds) {
    const double beta = e.beta.value_or(gamma / 8.0);
    const ExpMomentCheck em = check_exponential_moment(model, *bounds, beta, base, e.replicas,
                                                       derive_seed(base.seed, 0xe5), ctx.workers);
    kv.insert(kv.end(), {{"beta", beta},
                         {"exp_moment_empirical", em.empirical},
                         {"exp_moment_se", em.se},
                         {"exp_moment_bound", em.bound},
                         {"exp_moment_pass", em.pass ? 1.0 : 0.0}});
  }
  emit(ctx, "decoupling", key_values_csv(kv), key_values_json(kv));
  return 0;
}

int run_entropy(Context& ctx) {
  const auto& e = ctx.cfg.experiment;
  const ModelSpec model = build_model(ctx.cfg.model);
  EntropyDecayOptions opts;
  opts.frozen = e.frozen;
  opts.y = to_vec(ctx.cfg.sim.y0, model.m);
  opts.ensemble = e.ensemble;
  opts.checkpoints = e.checkpoints;
  if (opts.checkpoints.empty()) {
    for (int i = 0; i <= 10; ++i) opts.checkpoints.push_back(0.1 * i * ctx.cfg.sim.t_final);
  }
  opts.seed = ctx.cfg.sim.seed;
  opts.dt = ctx.cfg.sim.dt;
  opts.substeps = ctx.cfg.sim.substeps;
  opts.method = e.entropy_method == "knn" ? EntropyMethod::knn : EntropyMethod::histogram;
  if (e.initial_shift != 0.0) {
    const double shift = e.initial_shift;
    const Vec y = opts.y;
    const auto sampler = model.mu_sampler;
    require(static_cast<bool>(sampler), ErrorKind::ConfigError,
            "experiment.initial_shift: family has no mu^y sampler");
    opts.initial = [sampler, y, shift](std::span<const double> z) {
      return Vec(sampler(y, z).array() + shift);
    };
  }
  const EntropyCurve curve = entropy_decay_curve(model, opts, ctx.workers);
  emit(ctx, "entropy", entropy_curve_csv(curve), entropy_curve_json(curve));
  if (ctx.wants("svg-plotdata")) ctx.artifacts->add("entropy.dat", entropy_curve_plotdata(curve));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slow-fast SDE averaging toolkit"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::vector<std::string> formats;
  int workers = 0;

  struct Sub {
    const char* name;
    const char* help;
    int (*run)(Context&);
  };
  const std::vector<Sub> subs = {
      {"simulate", "Simulate one coupled trajectory", run_simulate},
      {"average", "Simulate the averaged slow process", run_average},
      {"constants", "Report theorem constants for the configured model", run_constants},
      {"converge", "Strong-error convergence study over experiment.eps_grid", run_converge},
      {"tamd", "Stopped TAMD strong-error sweep", run_tamd},
      {"decouple-check", "Girsanov weight and law-equivalence checks", run_decouple_check},
      {"entropy", "Relative entropy decay curve", run_entropy},
  };
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--workers", workers, "Worker threads (default $SLOWFAST_WORKERS or 1)");
    sub->add_option("--out", out_dir, "Output directory (overrides output.directory)");
    sub->add_option("--format", formats, "csv, json or svg-plotdata; repeatable")
        ->check(CLI::IsMember({"csv", "json", "svg-plotdata"}));
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    Context ctx;
    ctx.cfg = parse_config(read_file(config_path));
    if (!out_dir.empty()) ctx.cfg.output.directory = out_dir;
    if (!formats.empty()) ctx.cfg.output.formats = formats;
    ctx.workers = resolve_workers(workers);
    RunArtifacts artifacts(fs::absolute(ctx.cfg.output.directory));
    ctx.artifacts = &artifacts;
    std::string name;
    int code = 0;
    for (const auto& s : subs) {
      if (app.got_subcommand(s.name)) {
        name = s.name;
        code = s.run(ctx);
      }
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    artifacts.commit({name, ctx.cfg.canonical, ctx.cfg.sim.seed, ctx.workers, wall});
    return code;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
