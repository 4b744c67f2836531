// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "slowfast/averaging.hpp"
#include "slowfast/constants.hpp"
#include "slowfast/decoupling.hpp"
#include "slowfast/diagnostics.hpp"
#include "slowfast/experiments.hpp"
#include "slowfast/families.hpp"
#include "slowfast/rng.hpp"

using namespace slowfast;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

Vec vec1(double v) { return Vec::Constant(1, v); }

EmpiricalMeasure gaussian_samples(std::size_t count, double mean, std::uint64_t seed) {
  std::vector<double> z(count);
  fill_normals(seed, {0, Channel::Aux}, 0, z);
  for (double& v : z) v += mean;
  EmpiricalMeasure m;
  m.dim = 1;
  m.samples = std::move(z);
  return m;
}

double std_normal_density(const Vec& x) {
  return std::exp(-0.5 * x.squaredNorm()) / std::sqrt(2.0 * M_PI);
}

Outcome rate_verification() {
  ConvergenceOptions o;
  for (int k = 3; k <= 8; ++k) o.eps_grid.push_back(std::ldexp(1.0, -k));
  o.replicas = 256;
  o.seed = 101;
  o.dt_rule = [](double eps) { return eps / 10.0; };
  o.y0 = vec1(0.0);
  const ConvergenceReport r = convergence_study(
      [](double eps) {
        const ModelSpec m = linear_model({}, eps);
        return FamilyInstance{m, make_analytic_drift(m)};
      },
      o);
  const bool pass = !r.degenerate && r.slope >= 0.4 && r.slope <= 0.6 && r.slope_lo <= 0.5 &&
                    r.slope_hi >= 0.5;
  return {pass, fmt("slope %.4f, bootstrap CI [%.4f, %.4f]; need slope in [0.4, 0.6] and 0.5 in CI",
                    r.slope, r.slope_lo, r.slope_hi)};
}

Outcome oracle_equivalence() {
  const double eps = 1.0 / 32.0;
  const ModelSpec m = linear_model({}, eps);
  StrongErrorOptions o;
  o.dt = eps / 10.0;
  o.replicas = 1024;
  o.seed = 202;
  o.y0 = vec1(0.0);
  const StrongErrorResult r = strong_error(m, make_analytic_drift(m), o);
  const LinearOracleResult ref = linear_oracle({}, eps, 1.0, eps / 10.0, 20000, 203, 1);
  const double pooled = std::sqrt(r.stderr_ * r.stderr_ + ref.se_ref * ref.se_ref);
  const double diff = std::abs(r.mean_sup_error - ref.mean_sup_error_ref);
  return {diff <= 3.0 * pooled,
          fmt("strong_error %.5f +- %.5f, oracle %.5f +- %.5f, |diff| = %.2f pooled SE",
              r.mean_sup_error, r.stderr_, ref.mean_sup_error_ref, ref.se_ref, diff / pooled)};
}

Outcome exact_zero() {
  const double eps = 1.0 / 16.0;
  const ModelSpec m = slow_decoupled_model({}, eps);
  StrongErrorOptions o;
  o.dt = eps / 10.0;
  o.replicas = 256;
  o.seed = 303;
  o.y0 = vec1(0.0);
  const StrongErrorResult r = strong_error(m, make_analytic_drift(m), o);
  return {r.mean_sup_error == 0.0, fmt("mean_sup_error = %g", r.mean_sup_error)};
}

Outcome girsanov_suite() {
  const double eps = 1.0 / 32.0;
  const ModelSpec m = linear_model({}, eps);
  const CoefficientBounds bounds = linear_model_bounds({}, eps);
  const double gamma = timescale_gamma(bounds);
  SimConfig c;
  c.t_final = 1.0;
  c.dt = eps / 10.0;
  c.substeps = 2;
  c.seed = 404;
  c.x0 = vec1(0.0);
  c.y0 = vec1(0.5);
  c.init_fast_from_mu = true;
  const std::size_t replicas = 10000;
  const LawEquivalenceReport law =
      check_law_equivalence(m, c, standard_functionals(), replicas, 404, gamma);
  const bool a = std::abs(law.mean_weight - 1.0) <= 3.0 * law.mean_weight_se;
  const ExpMomentCheck e = check_exponential_moment(m, bounds, gamma / 8.0, c, replicas, 405);
  std::size_t passed = 0;
  for (const LawEquivalenceRow& row : law.rows) passed += row.pass ? 1 : 0;
  const bool lawpass = passed == law.rows.size() && law.rows.size() == 5;
  return {gamma >= 32.0 && a && e.pass && lawpass,
          fmt("gamma %.1f; (a) E[weight] = %.4f +- %.4f; (b) E exp = %.4f +- %.4f vs bound %.4f; "
              "(c) %zu/%zu functionals",
              gamma, law.mean_weight, law.mean_weight_se, e.empirical, e.se, e.bound, passed,
              law.rows.size())};
}

Outcome constants_golden() {
  const double threshold = theorem1_gamma_threshold();
  const bool a = std::abs(threshold - 9.899) <= 1e-3;

  bool b = true;
  for (double gamma = threshold * (1.0 + 1e-9); gamma < 1e6; gamma *= 1.1) {
    const double pp = p_prime(1.0, gamma);
    b = b && pp > 2.0 && pp < 3.633;
  }

  std::vector<double> u(200);
  fill_uniforms(505, {0, Channel::Aux}, 0, u);
  double worst = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const double gamma = threshold + 500.0 * u[2 * i];
    const double p_plus = q_roots(1.0, gamma).p_plus;
    const double p = p_plus + (2.0 - p_plus) * u[2 * i + 1] + 1e-9;
    const QRoots r = q_roots(p, gamma);
    const double err = std::isfinite(r.q_plus) ? std::abs(lambda_pq(p, r.q_plus) - gamma / 4.0) / gamma
                                               : INFINITY;
    worst = std::max(worst, err);
  }
  const bool c = worst <= 1e-12;
  return {a && b && c,
          fmt("threshold %.6f vs 9.899 %s; p' in (2, 3.633) %s; lambda identity max rel err %.1e %s",
              threshold, a ? "ok" : "MISMATCH", b ? "ok" : "violated", worst, c ? "ok" : "too large")};
}

Outcome entropy_suite() {
  const EmpiricalMeasure self = gaussian_samples(100000, 0.0, 601);
  const double h_self = relative_entropy(self, std_normal_density, EntropyMethod::histogram).value;
  const bool a = std::abs(h_self) <= 0.02;

  const ModelSpec ou = linear_model({1.0, 1.0, std::sqrt(2.0), 1.0}, 0.1);
  EntropyDecayOptions o;
  o.y = vec1(0.0);
  o.ensemble = 10000;
  o.checkpoints = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25};
  o.seed = 602;
  o.initial = [](std::span<const double> z) -> Vec { return vec1(1.0 + z[0]); };
  const EntropyCurve curve = entropy_decay_curve(ou, o);
  const bool b = curve.fitted_rate >= 1.6 && curve.fitted_rate <= 2.4;

  QuadratureGrid g;
  g.lo = vec1(-12.0);
  g.hi = vec1(12.0);
  g.cells = 2048;
  const std::vector<std::function<double(const Vec&, double)>> families = {
      [](const Vec& x, double y) { return -0.5 * (x(0) - y) * (x(0) - y); },
      [](const Vec& x, double y) { return -0.5 * x(0) * x(0) + x(0) * y; },
      [](const Vec& x, double y) { return -0.5 * y * x(0) * x(0); },
  };
  int lp_passed = 0;
  for (const auto& f : families) lp_passed += log_partition_identity(f, 1.5, 1e-3, g).pass ? 1 : 0;
  const bool c = lp_passed == 3;

  const EmpiricalMeasure mu = gaussian_samples(100000, 0.0, 603);
  const EmpiricalMeasure rho = gaussian_samples(100000, 0.5, 604);
  const T2Check t2 = t2_check({[](const Vec& x) { return x(0); }, 1.0}, rho, mu,
                              std_normal_density, 2.0, 1.0);
  const bool d = std::abs(t2.lhs / t2.rhs - 1.0) <= 0.1;

  return {a && b && c && d,
          fmt("(a) H(q|q) = %.4f; (b) rate %.3f; (c) %d/3 families; (d) T2 lhs %.4f rhs %.4f", h_self,
              curve.fitted_rate, lp_passed, t2.lhs, t2.rhs)};
}

Outcome bound_direction() {
  const double eps = 1.0 / 32.0;
  const double T = 1.0;
  const LinearParams params;
  const ModelSpec m = linear_model(params, eps);
  const AveragedDrift bbar = make_analytic_drift(m);

  // The Poincare ratio is measured at unit timescale against |sigma^T grad f|^2;
  // the carre du champ of the eps-scaled generator is half that over eps.
  const PoincareEstimate pe = estimate_poincare(m, vec1(0.0), coordinate_probes(1), 701);
  CoefficientBounds b = linear_model_bounds(params, eps);
  b.c_P = 2.0 * eps * pe.c_P_lower;
  b.c_L = b.c_P;
  b.lip_bbar = estimate_lipschitz(bbar.evaluator, vec1(-3.0), vec1(3.0), 200, 702);

  StrongErrorOptions o;
  o.t_final = T;
  o.dt = eps / 10.0;
  o.replicas = 256;
  o.seed = 703;
  o.y0 = vec1(0.0);
  const StrongErrorResult r = strong_error(m, bbar, o);
  const double lhs = r.mean_sup_error * r.mean_sup_error;
  const double bound = theorem1_bound(b, T, 1.0, linear_model_psi(params, eps) * T);
  return {std::isfinite(bound) && bound > 0.0 && lhs <= bound,
          fmt("(E sup)^2 = %.5f <= bound %.4f (c_P = c_L = %.5f, Lip(bbar) = %.3g)", lhs, bound,
              b.c_P, b.lip_bbar)};
}

Outcome tamd_desk_scale() {
  const TamdModelParams p =
      tamd_identity(1, TamdPotential::harmonic, 1.0, 2.0, 1.0, 1.0, 1.0, -3.0, 3.0);
  const ThetaMuSamples samples = sample_theta_mu(p, 20000, 801);
  std::vector<StrongErrorResult> results;
  for (int k = 3; k <= 6; ++k) {
    const double eps = std::ldexp(1.0, -k);
    StoppedErrorOptions so;
    so.dt = eps / 10.0;
    so.replicas = 128;
    so.seed = 802;
    so.y0 = vec1(0.0);
    so.samples = samples;
    results.push_back(stopped_strong_error(p, eps, so));
  }
  const ConvergenceReport rep = fit_convergence(results, 803);
  const bool slope_ok = !rep.degenerate && rep.slope >= 0.35 && rep.slope <= 0.65;

  const ThetaMuSamples big = sample_theta_mu(p, 100000, 804);
  const double y = 0.5;
  const DriftEstimate d = tamd_averaged_drift(p, big, vec1(y));
  const double exact = -y / (1.0 + 1.0 / p.kappa) / p.gamma_bar;
  const bool drift_ok = std::abs(d.value(0) - exact) <= 3.0 * d.stderr_(0);
  return {slope_ok && drift_ok, fmt("slope %.4f; drift %.5f +- %.5f vs closed form %.5f",
                                    rep.slope, d.value(0), d.stderr_(0), exact)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"rate verification", rate_verification},
      {"oracle equivalence", oracle_equivalence},
      {"exact zero coupling", exact_zero},
      {"Girsanov suite", girsanov_suite},
      {"constants golden values", constants_golden},
      {"entropy suite", entropy_suite},
      {"bound direction", bound_direction},
      {"TAMD desk scale", tamd_desk_scale},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome out;
    try {
      out = run();
    } catch (const std::exception& e) {
      out = {false, std::string("threw ") + e.what()};
    }
    failures += out.pass ? 0 : 1;
    std::printf("criterion %d %-24s %s  %s\n", index, name, out.pass ? "PASS" : "FAIL",
                out.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", index - failures, index);
  return failures == 0 ? 0 : 1;
}
