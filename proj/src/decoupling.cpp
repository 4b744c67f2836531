#include "slowfast/decoupling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slowfast/error.hpp"
#include "slowfast/integrator.hpp"
#include "slowfast/parallel.hpp"
#include "slowfast/stats.hpp"

namespace slowfast {

GirsanovPath girsanov_weight_path(const TripleTrajectory& triple, const ModelSpec& model,
                                  const NoisePath& by_stream) {
  const std::size_t steps = triple.times.size() - 1;
  require(by_stream.steps() == steps && by_stream.dim() == model.m, ErrorKind::InvalidArgument,
          "slow noise does not match the triple trajectory");
  require(std::find(triple.seed_record.streams.begin(), triple.seed_record.streams.end(),
                    by_stream.stream_id()) != triple.seed_record.streams.end(),
          ErrorKind::InvalidArgument, "slow noise is not the stream that drove this triple");
  const double dt = by_stream.step();
  GirsanovPath g;
  g.times = triple.times;
  g.M.assign(steps + 1, 0.0);
  g.QV.assign(steps + 1, 0.0);
  g.stoch_exp.assign(steps + 1, 1.0);
  for (std::size_t k = 0; k < steps; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const Vec x = triple.x_path.row(kk).transpose();
    const Vec xt = triple.xtilde_path.row(kk).transpose();
    const Vec y = triple.y_path.row(kk).transpose();
    const Mat s = model.sigma_Y(y);
    const Eigen::JacobiSVD<Mat> svd(s, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 1e-10)) {
      fail(ErrorKind::SingularSigmaY,
           "sigma_Y is numerically singular at step " + std::to_string(k));
    }
    const Vec u = svd.solve(Vec(model.b_Y(xt, y) - model.b_Y(x, y)));
    const auto dB = by_stream.row_vector(k);
    g.M[k + 1] = g.M[k] + u.dot(dB);
    g.QV[k + 1] = g.QV[k] + u.squaredNorm() * dt;
    g.stoch_exp[k + 1] = std::exp(g.M[k + 1] - 0.5 * g.QV[k + 1]);
    if (!std::isfinite(g.stoch_exp[k + 1])) {
      throw NumericalBlowup(k + 1, 0, "girsanov_weight_path: stochastic exponential overflow");
    }
  }
  return g;
}

double stoch_exp_consistency(const GirsanovPath& path) {
  double worst = 0.0;
  for (std::size_t k = 0; k < path.M.size(); ++k) {
    const double ref = std::exp(path.M[k] - 0.5 * path.QV[k]);
    if (ref > 0.0) worst = std::max(worst, std::abs(path.stoch_exp[k] - ref) / ref);
  }
  return worst;
}

namespace {

struct ReplicaTriple {
  TripleTrajectory triple;
  GirsanovPath girsanov;
};

ReplicaTriple run_replica(const ModelSpec& model, const SimConfig& base, std::uint64_t seed,
                          std::uint32_t replica, std::size_t substeps) {
  SimConfig config = base;
  config.seed = seed;
  config.replica = replica;
  config.substeps = substeps;
  const NoisePath bx = fast_noise(model, config, substeps, Channel::BX);
  const NoisePath bxt = fast_noise(model, config, substeps, Channel::BXtilde);
  const NoisePath by = slow_noise(model, config);
  ReplicaTriple r;
  r.triple = simulate_triple(model, config, bx, by, bxt);
  r.girsanov = girsanov_weight_path(r.triple, model, by);
  return r;
}

std::size_t checked_substeps(const ModelSpec& model, const SimConfig& base) {
  const std::size_t substeps = resolve_substeps(model, base);
  check_stability(model, base, substeps, model.epsilon);
  return substeps;
}

}  // namespace

ExpMomentCheck check_exponential_moment(const ModelSpec& model, const CoefficientBounds& bounds,
                                        double beta, const SimConfig& base, std::size_t replicas,
                                        std::uint64_t seed, int workers) {
  require(replicas >= 2, ErrorKind::InvalidArgument, "need at least two replicas");
  const ExpMomentBound formula = exp_moment_bound(bounds, beta, base.t_final);
  const std::size_t substeps = checked_substeps(model, base);
  std::vector<double> values(replicas);
  parallel_for(replicas, workers, [&](std::size_t r) {
    const ReplicaTriple rt = run_replica(model, base, seed, static_cast<std::uint32_t>(r), substeps);
    values[r] = std::exp(beta * rt.girsanov.QV.back());
  });
  const MeanSe ms = mean_se(values);
  ExpMomentCheck out;
  out.empirical = ms.mean;
  out.se = ms.se;
  out.bound = formula.bound;
  const double rel_se = ms.mean > 0.0 ? ms.se / ms.mean : 0.0;
  out.pass = out.empirical <= out.bound * (1.0 + 2.0 * rel_se);
  return out;
}

std::vector<PathFunctional> standard_functionals() {
  std::vector<PathFunctional> fs;
  fs.push_back({"y_final", [](const std::vector<double>&, const Mat&, const Mat& y) {
                  return y(y.rows() - 1, 0);
                }});
  fs.push_back({"sup_abs_y_clip10", [](const std::vector<double>&, const Mat&, const Mat& y) {
                  return std::min(10.0, y.col(0).cwiseAbs().maxCoeff());
                }});
  fs.push_back({"y_final_sq", [](const std::vector<double>&, const Mat&, const Mat& y) {
                  const double v = y(y.rows() - 1, 0);
                  return v * v;
                }});
  fs.push_back({"time_avg_x", [](const std::vector<double>&, const Mat& x, const Mat&) {
                  // Left-point average over the slow grid.
                  const auto k = x.rows() - 1;
                  return x.col(0).head(k).mean();
                }});
  fs.push_back({"indicator_y_final_pos", [](const std::vector<double>&, const Mat&, const Mat& y) {
                  return y(y.rows() - 1, 0) > 0.0 ? 1.0 : 0.0;
                }});
  return fs;
}

PathFunctional constant_functional() {
  return {"one", [](const std::vector<double>&, const Mat&, const Mat&) { return 1.0; }};
}

LawEquivalenceReport check_law_equivalence(const ModelSpec& model, const SimConfig& base,
                                           const std::vector<PathFunctional>& functionals,
                                           std::size_t replicas, std::uint64_t seed,
                                           std::optional<double> gamma, int workers) {
  if (gamma && !(*gamma > 2.0)) {
    fail(ErrorKind::NovikovViolation,
         "gamma = " + std::to_string(*gamma) +
             " does not exceed 2; the stochastic exponential is not known to be a true "
             "martingale (Novikov criterion needs gamma > 2)");
  }
  require(replicas >= 2, ErrorKind::InvalidArgument, "need at least two replicas");
  const std::size_t substeps = checked_substeps(model, base);
  const std::size_t nf = functionals.size();
  std::vector<double> lhs(replicas * nf), rhs(replicas * nf), weights(replicas);
  parallel_for(replicas, workers, [&](std::size_t r) {
    const ReplicaTriple rt = run_replica(model, base, seed, static_cast<std::uint32_t>(r), substeps);
    const double w = rt.girsanov.stoch_exp.back();
    weights[r] = w;
    for (std::size_t f = 0; f < nf; ++f) {
      const auto& fn = functionals[f].f;
      lhs[f * replicas + r] = fn(rt.triple.times, rt.triple.x_path, rt.triple.y_path);
      rhs[f * replicas + r] = w * fn(rt.triple.times, rt.triple.xtilde_path, rt.triple.y_path);
    }
  });
  LawEquivalenceReport report;
  const MeanSe wm = mean_se(weights);
  report.mean_weight = wm.mean;
  report.mean_weight_se = wm.se;
  report.weight_underflows =
      static_cast<std::size_t>(std::count(weights.begin(), weights.end(), 0.0));
  for (std::size_t f = 0; f < nf; ++f) {
    const std::span<const double> l(lhs.data() + f * replicas, replicas);
    const std::span<const double> q(rhs.data() + f * replicas, replicas);
    std::vector<double> diff(replicas);
    for (std::size_t r = 0; r < replicas; ++r) diff[r] = l[r] - q[r];
    const MeanSe ml = mean_se(l), mr = mean_se(q), md = mean_se(diff);
    LawEquivalenceRow row;
    row.functional_id = functionals[f].id;
    row.lhs = ml.mean;
    row.rhs = mr.mean;
    row.pooled_se = std::sqrt(ml.se * ml.se + mr.se * mr.se);
    row.paired_se = md.se;
    row.pass = std::abs(row.lhs - row.rhs) <= 3.0 * row.paired_se;
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace slowfast
