#include "slowfast/config.hpp"

#include <cmath>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "slowfast/error.hpp"

namespace slowfast {

namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& root, const std::string& name, std::vector<std::string>& errors)
      : path_(name), errors_(errors) {
    if (!root.contains(name)) return;
    const json& v = root.at(name);
    if (!v.is_object()) {
      error("", "must be an object");
      return;
    }
    obj_ = &v;
  }

  bool has(const std::string& key) const { return obj_ && obj_->contains(key); }

  void number(const std::string& key, double& out,
              const std::function<bool(double)>& ok = nullptr, const char* reason = "") {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number()) return error(key, "must be a number");
    const double d = v->get<double>();
    if (!std::isfinite(d)) return error(key, "must be finite");
    if (ok && !ok(d)) return error(key, reason);
    out = d;
  }

  void positive(const std::string& key, double& out) {
    number(key, out, [](double d) { return d > 0.0; }, "must be > 0");
  }

  void count(const std::string& key, std::size_t& out, std::size_t min_value = 0) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
      return error(key, "must be a nonnegative integer");
    }
    const auto n = v->get<std::uint64_t>();
    if (n < min_value) return error(key, "must be >= " + std::to_string(min_value));
    out = static_cast<std::size_t>(n);
  }

  bool seed(const std::string& key, std::uint64_t& out) {
    const json* v = take(key);
    if (!v) return false;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
      error(key, "must be a nonnegative integer");
      return true;
    }
    out = v->get<std::uint64_t>();
    return true;
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_boolean()) return error(key, "must be true or false");
    out = v->get<bool>();
  }

  void choice(const std::string& key, std::string& out, const std::set<std::string>& allowed) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_string() || !allowed.contains(v->get<std::string>())) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      return error(key, "must be one of {" + list + "}");
    }
    out = v->get<std::string>();
  }

  void text(const std::string& key, std::string& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_string()) return error(key, "must be a string");
    out = v->get<std::string>();
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_array()) return error(key, "must be a list of numbers");
    std::vector<double> values;
    for (const auto& e : *v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) {
        return error(key, "must be a list of finite numbers");
      }
      values.push_back(e.get<double>());
    }
    out = std::move(values);
  }

  void strings(const std::string& key, std::vector<std::string>& out,
               const std::set<std::string>& allowed) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_array() || v->empty()) return error(key, "must be a nonempty list of strings");
    std::vector<std::string> values;
    for (const auto& e : *v) {
      if (!e.is_string() || !allowed.contains(e.get<std::string>())) {
        return error(key, "contains an unsupported entry");
      }
      values.push_back(e.get<std::string>());
    }
    out = std::move(values);
  }

  void error(const std::string& key, const std::string& reason) {
    errors_.push_back((key.empty() ? path_ : path_ + "." + key) + ": " + reason);
  }

  void reject_unknown() {
    if (!obj_) return;
    for (const auto& [key, value] : obj_->items()) {
      if (!seen_.contains(key)) error(key, "unknown key");
    }
  }

 private:
  const json* take(const std::string& key) {
    seen_.insert(key);
    if (!obj_ || !obj_->contains(key)) return nullptr;
    return &obj_->at(key);
  }

  const json* obj_ = nullptr;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

void parse_model(Section& s, ModelConfig& m) {
  std::string family = "linear";
  s.choice("family", family, {"linear", "gradient61", "tamd62"});
  m.family = family_from_string(family);
  s.positive("epsilon", m.epsilon);
  // Family keys are accepted only for the selected family.
  if (m.family == FamilyTag::linear) {
    s.positive("kappa_x", m.linear.kappa_x);
    s.positive("kappa_y", m.linear.kappa_y);
    s.number("sigma_x", m.linear.sigma_x, [](double d) { return d >= 0.0; }, "must be >= 0");
    s.positive("sigma_y", m.linear.sigma_y);
  } else if (m.family == FamilyTag::gradient61) {
    auto& g = m.gradient61;
    s.count("n", g.n, 1);
    s.count("m", g.m, 1);
    s.positive("q", g.q);
    s.number("g_scale", g.g_scale);
    s.number("cos_amplitude", g.cos_amplitude);
    s.number("cos_frequency", g.cos_frequency);
    s.positive("beta_X", g.beta_X);
    s.positive("beta_Y", g.beta_Y);
    s.positive("pull_rate", g.pull_rate);
    if (g.m > g.n) s.error("m", "must not exceed n");
  } else {
    auto& t = m.tamd;
    s.count("dim", t.dim, 1);
    std::string potential = std::string(to_string(t.potential));
    s.choice("potential", potential, {"harmonic", "soft_abs"});
    t.potential = tamd_potential_from_string(potential);
    s.positive("potential_scale", t.potential_scale);
    s.positive("kappa", t.kappa);
    s.positive("beta", t.beta);
    s.positive("beta_bar", t.beta_bar);
    s.positive("gamma_bar", t.gamma_bar);
    s.number("domain_lo", t.domain_lo);
    s.number("domain_hi", t.domain_hi);
    if (!(t.domain_lo < t.domain_hi)) s.error("domain_hi", "must exceed domain_lo");
  }
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigError, std::string("<document>: not valid JSON: ") + e.what());
  }
  std::vector<std::string> errors;
  if (!root.is_object()) fail(ErrorKind::ConfigError, "<document>: must be a JSON object");
  for (const auto& [key, value] : root.items()) {
    if (key != "model" && key != "sim" && key != "experiment" && key != "output") {
      errors.push_back(key + ": unknown key");
    }
  }

  RunConfig cfg;
  Section model(root, "model", errors);
  parse_model(model, cfg.model);
  model.reject_unknown();

  Section sim(root, "sim", errors);
  auto& s = cfg.sim;
  sim.positive("T", s.t_final);
  sim.positive("dt", s.dt);
  sim.count("substeps", s.substeps);
  if (!sim.seed("seed", s.seed)) errors.push_back("sim.seed: required");
  sim.numbers("x0", s.x0);
  sim.numbers("y0", s.y0);
  sim.boolean("init_fast_from_mu", s.init_fast_from_mu);
  sim.reject_unknown();
  if (s.dt > s.t_final) errors.push_back("sim.dt: must not exceed sim.T");
  const std::size_t n = fast_dim(cfg.model), m = slow_dim(cfg.model);
  if (!s.x0.empty() && s.x0.size() != n) errors.push_back("sim.x0: needs " + std::to_string(n) + " entries");
  if (!s.y0.empty() && s.y0.size() != m) errors.push_back("sim.y0: needs " + std::to_string(m) + " entries");

  Section exp(root, "experiment", errors);
  auto& e = cfg.experiment;
  exp.numbers("eps_grid", e.eps_grid);
  for (double v : e.eps_grid) {
    if (!(v > 0.0)) {
      exp.error("eps_grid", "entries must be > 0");
      break;
    }
  }
  exp.count("replicas", e.replicas, 2);
  exp.positive("dt_factor", e.dt_factor);
  exp.positive("dt_max", e.dt_max);
  exp.choice("drift", e.drift, {"analytic", "quadrature", "ergodic"});
  exp.count("quadrature_cells", e.quadrature_cells, 2);
  exp.positive("quadrature_halfwidth", e.quadrature_halfwidth);
  exp.count("drift_samples", e.drift_samples, 1000);
  exp.boolean("symmetric_stopping", e.symmetric_stopping);
  exp.number("refinement_fraction", e.refinement_fraction,
             [](double d) { return d >= 0.0 && d <= 1.0; }, "must lie in [0, 1]");
  exp.boolean("enforce_dt", e.enforce_dt);
  exp.boolean("oracle", e.oracle);
  if (exp.has("beta")) {
    double beta = 0.0;
    exp.number("beta", beta, [](double d) { return d >= 0.0; }, "must be >= 0");
    e.beta = beta;
  }
  exp.number("p", e.p, [](double d) { return d >= 1.0; }, "must be >= 1");
  exp.count("lipschitz_pairs", e.lipschitz_pairs, 1);
  exp.count("ensemble", e.ensemble, 16);
  exp.numbers("checkpoints", e.checkpoints);
  exp.boolean("frozen", e.frozen);
  exp.number("initial_shift", e.initial_shift);
  exp.choice("entropy_method", e.entropy_method, {"histogram", "knn"});
  exp.text("theta_mu_file", e.theta_mu_file);
  exp.reject_unknown();

  Section out(root, "output", errors);
  out.text("directory", cfg.output.directory);
  out.strings("formats", cfg.output.formats, {"csv", "json", "svg-plotdata"});
  out.reject_unknown();
  if (cfg.output.directory.empty()) errors.push_back("output.directory: must not be empty");

  if (!errors.empty()) {
    std::ostringstream msg;
    msg << errors.size() << " configuration error(s):";
    for (const auto& err : errors) msg << "\n  " << err;
    fail(ErrorKind::ConfigError, msg.str());
  }
  cfg.canonical = root.dump();
  return cfg;
}

std::size_t fast_dim(const ModelConfig& config) {
  switch (config.family) {
    case FamilyTag::gradient61: return config.gradient61.n;
    case FamilyTag::tamd62: return config.tamd.dim;
    default: return 1;
  }
}

std::size_t slow_dim(const ModelConfig& config) {
  switch (config.family) {
    case FamilyTag::gradient61: return config.gradient61.m;
    case FamilyTag::tamd62: return config.tamd.dim;
    default: return 1;
  }
}

GradientModelParams gradient61_params(const Gradient61Config& c) {
  GradientModelParams p;
  const auto n = static_cast<Eigen::Index>(c.n);
  const auto m = static_cast<Eigen::Index>(c.m);
  p.Q = c.q * Mat::Identity(n, n);
  const double scale = c.g_scale;
  p.g = [n, m, scale](const Vec& y) {
    Vec g = Vec::Zero(n);
    g.head(std::min(n, m)) = scale * y.head(std::min(n, m));
    return g;
  };
  p.beta_X = c.beta_X;
  p.beta_Y = c.beta_Y;
  if (c.cos_amplitude != 0.0) set_cosine_perturbation(p, c.n, c.cos_amplitude, c.cos_frequency);
  return p;
}

std::function<Vec(const Vec& x, const Vec& y)> gradient61_slow_drift(const Gradient61Config& c) {
  const double rate = c.pull_rate;
  const auto m = static_cast<Eigen::Index>(c.m);
  return [rate, m](const Vec& x, const Vec& y) -> Vec { return -rate * (y - x.head(m)); };
}

TamdModelParams tamd_params(const TamdConfig& c) {
  return tamd_identity(c.dim, c.potential, c.potential_scale, c.kappa, c.beta, c.beta_bar,
                       c.gamma_bar, c.domain_lo, c.domain_hi);
}

ModelSpec build_model(const ModelConfig& config, double epsilon) {
  switch (config.family) {
    case FamilyTag::linear: return linear_model(config.linear, epsilon);
    case FamilyTag::gradient61:
      return gradient61_model(gradient61_params(config.gradient61),
                              gradient61_slow_drift(config.gradient61), config.gradient61.m,
                              epsilon);
    case FamilyTag::tamd62: return tamd62_model(tamd_params(config.tamd), epsilon);
    case FamilyTag::custom: break;
  }
  fail(ErrorKind::ConfigError, "model.family: custom models cannot be built from a config");
}

ModelSpec build_model(const ModelConfig& config) { return build_model(config, config.epsilon); }

}  // namespace slowfast
