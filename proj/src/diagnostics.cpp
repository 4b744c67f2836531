#include "slowfast/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <queue>

#include "slowfast/error.hpp"
#include "slowfast/integrator.hpp"
#include "slowfast/kernels.hpp"
#include "slowfast/parallel.hpp"
#include "slowfast/stats.hpp"

namespace slowfast {

Vec EmpiricalMeasure::point_vector(std::size_t i) const {
  const auto p = point(i);
  return Eigen::Map<const Vec>(p.data(), static_cast<Eigen::Index>(p.size()));
}

void EmpiricalMeasure::validate() const {
  require(dim >= 1 && samples.size() % dim == 0, ErrorKind::InvalidArgument,
          "sample buffer does not match the dimension");
  require(count() >= 2, ErrorKind::InvalidArgument, "an empirical measure needs >= 2 samples");
  if (!weights.empty()) {
    require(weights.size() == count(), ErrorKind::InvalidArgument, "one weight per sample");
    CompensatedSum total;
    for (double w : weights) {
      require(w >= 0.0, ErrorKind::InvalidArgument, "weights must be nonnegative");
      total.add(w);
    }
    require(std::abs(total.value() - 1.0) <= 1e-12, ErrorKind::InvalidArgument,
            "weights must sum to 1");
  }
}

EmpiricalMeasure EmpiricalMeasure::from_rows(const Mat& rows) {
  EmpiricalMeasure m;
  m.dim = static_cast<std::size_t>(rows.cols());
  m.samples.resize(static_cast<std::size_t>(rows.size()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      m.samples[static_cast<std::size_t>(i * rows.cols() + j)] = rows(i, j);
    }
  }
  return m;
}

EmpiricalMeasure EmpiricalMeasure::from_values(std::span<const double> values) {
  EmpiricalMeasure m;
  m.dim = 1;
  m.samples.assign(values.begin(), values.end());
  return m;
}

std::string_view to_string(EntropyMethod method) {
  switch (method) {
    case EntropyMethod::histogram: return "histogram";
    case EntropyMethod::knn: return "knn";
    case EntropyMethod::closed_form: return "closed_form";
  }
  return "unknown";
}

namespace {

constexpr std::size_t kKnn = 5;

// Sorted on the first coordinate; queries scan outwards until the gap in that
// coordinate exceeds the current k-th distance.
class KnnIndex {
 public:
  explicit KnnIndex(const EmpiricalMeasure& m) : m_(m), order_(m.count()) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return m_.point(a)[0] < m_.point(b)[0] || (m_.point(a)[0] == m_.point(b)[0] && a < b);
    });
    keys_.resize(order_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) keys_[i] = m_.point(order_[i])[0];
  }

  // Distance to the k-th nearest point, skipping index `exclude`.
  double kth_distance(std::span<const double> x, std::size_t k, std::size_t exclude) const {
    std::priority_queue<double> best;  // squared distances, max on top
    auto consider = [&](std::size_t pos) {
      const std::size_t idx = order_[pos];
      if (idx == exclude) return;
      const auto p = m_.point(idx);
      double d2 = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) d2 += (p[j] - x[j]) * (p[j] - x[j]);
      if (best.size() < k) {
        best.push(d2);
      } else if (d2 < best.top()) {
        best.pop();
        best.push(d2);
      }
    };
    const auto start = static_cast<std::size_t>(
        std::lower_bound(keys_.begin(), keys_.end(), x[0]) - keys_.begin());
    std::size_t lo = start, hi = start;
    bool left_open = lo > 0, right_open = hi < keys_.size();
    while (left_open || right_open) {
      const double bound = best.size() < k ? std::numeric_limits<double>::infinity() : best.top();
      if (right_open) {
        const double g = keys_[hi] - x[0];
        if (g * g > bound) {
          right_open = false;
        } else {
          consider(hi++);
          right_open = hi < keys_.size();
        }
      }
      if (left_open) {
        const double g = x[0] - keys_[lo - 1];
        if (g * g > bound) {
          left_open = false;
        } else {
          consider(--lo);
          left_open = lo > 0;
        }
      }
    }
    require(best.size() == k, ErrorKind::InvalidArgument, "not enough samples for k-NN");
    return std::sqrt(best.top());
  }

 private:
  const EmpiricalMeasure& m_;
  std::vector<std::size_t> order_;
  std::vector<double> keys_;
};

double digamma_int(std::size_t n) {
  double h = 0.0;
  for (std::size_t i = 1; i < n; ++i) h += 1.0 / static_cast<double>(i);
  return h - std::numbers::egamma;
}

double log_unit_ball(std::size_t d) {
  const double dd = static_cast<double>(d);
  return 0.5 * dd * std::log(std::numbers::pi) - std::lgamma(1.0 + 0.5 * dd);
}

EntropyEstimate finish(double value, double se, EntropyMethod method, std::string note) {
  EntropyEstimate e;
  e.value = value;
  e.se = se;
  e.method = method;
  e.note = std::move(note);
  e.flagged_negative = value < -0.05;
  return e;
}

MeanSe weighted_terms(std::span<const double> terms, std::span<const double> weights) {
  if (weights.empty()) return mean_se(terms);
  CompensatedSum mean;
  double w2 = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    mean.add(weights[i] * terms[i]);
    w2 += weights[i] * weights[i];
  }
  const double m = mean.value();
  CompensatedSum var;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    var.add(weights[i] * (terms[i] - m) * (terms[i] - m));
  }
  return {m, std::sqrt(var.value() * w2), terms.size()};
}

EntropyEstimate histogram_entropy(const EmpiricalMeasure& p,
                                  const std::function<double(const Vec& x)>& q_density) {
  const std::size_t d = p.dim, N = p.count();
  require(d <= 2, ErrorKind::DimensionTooHigh, "histogram entropy supports dim <= 2");
  std::vector<double> w(N, 1.0 / static_cast<double>(N));
  if (!p.weights.empty()) w = p.weights;

  std::vector<double> lo(d), width(d);
  std::vector<std::size_t> bins(d);
  for (std::size_t j = 0; j < d; ++j) {
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    CompensatedSum mean;
    for (std::size_t i = 0; i < N; ++i) {
      const double v = p.point(i)[j];
      mn = std::min(mn, v);
      mx = std::max(mx, v);
      mean.add(w[i] * v);
    }
    CompensatedSum var;
    for (std::size_t i = 0; i < N; ++i) {
      const double c = p.point(i)[j] - mean.value();
      var.add(w[i] * c * c);
    }
    require(mx > mn, ErrorKind::DegenerateDensity, "samples are constant along an axis");
    const double scott = 3.49 * std::sqrt(var.value()) *
                         std::pow(static_cast<double>(N), -1.0 / static_cast<double>(d + 2));
    bins[j] = static_cast<std::size_t>(std::max(1.0, std::ceil((mx - mn) / scott)));
    lo[j] = mn;
    width[j] = (mx - mn) / static_cast<double>(bins[j]);
  }
  const std::size_t total_bins = d == 1 ? bins[0] : bins[0] * bins[1];
  std::vector<std::size_t> cell_of(N);
  std::vector<double> p_mass(total_bins, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    std::size_t cell = 0, stride = 1;
    for (std::size_t j = 0; j < d; ++j) {
      const auto b = static_cast<std::size_t>(std::min<double>(
          static_cast<double>(bins[j] - 1), std::floor((p.point(i)[j] - lo[j]) / width[j])));
      cell += b * stride;
      stride *= bins[j];
    }
    cell_of[i] = cell;
    p_mass[cell] += w[i];
  }

  // 5-point Gauss-Legendre on [-1, 1].
  static constexpr double gx[5] = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                   0.5384693101056831, 0.9061798459386640};
  static constexpr double gw[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889,
                                   0.4786286704993665, 0.2369268850561891};
  std::vector<double> q_mass(total_bins, 0.0);
  Vec x(static_cast<Eigen::Index>(d));
  for (std::size_t cell = 0; cell < total_bins; ++cell) {
    if (p_mass[cell] <= 0.0) continue;
    const std::size_t b0 = cell % bins[0];
    const std::size_t b1 = d == 2 ? cell / bins[0] : 0;
    double acc = 0.0;
    const std::size_t n1 = d == 2 ? 5 : 1;
    for (std::size_t a = 0; a < 5; ++a) {
      x(0) = lo[0] + width[0] * (static_cast<double>(b0) + 0.5 * (gx[a] + 1.0));
      for (std::size_t b = 0; b < n1; ++b) {
        double wt = gw[a] * 0.5;
        if (d == 2) {
          x(1) = lo[1] + width[1] * (static_cast<double>(b1) + 0.5 * (gx[b] + 1.0));
          wt *= gw[b] * 0.5;
        }
        acc += wt * q_density(x);
      }
    }
    double volume = 1.0;
    for (std::size_t j = 0; j < d; ++j) volume *= width[j];
    q_mass[cell] = acc * volume;
    if (!(q_mass[cell] > 0.0)) {
      fail(ErrorKind::ZeroDensityCell,
           "reference density vanishes on an occupied histogram cell " + std::to_string(cell));
    }
  }
  std::vector<double> terms(N);
  for (std::size_t i = 0; i < N; ++i) {
    terms[i] = std::log(p_mass[cell_of[i]] / q_mass[cell_of[i]]);
  }
  const MeanSe ms = weighted_terms(terms, p.weights.empty() ? std::span<const double>{} : w);
  return finish(ms.mean, ms.se, EntropyMethod::histogram,
                "Scott bins=" + std::to_string(total_bins) + " plug-in bias ~ (bins-1)/(2N)");
}

EntropyEstimate knn_entropy(const EmpiricalMeasure& p,
                            const std::function<double(const Vec& x)>& q_density) {
  const std::size_t d = p.dim, N = p.count();
  require(d <= 4, ErrorKind::DimensionTooHigh, "k-NN entropy supports dim <= 4");
  require(p.weights.empty(), ErrorKind::InvalidArgument, "k-NN entropy needs unweighted samples");
  require(N > kKnn, ErrorKind::InvalidArgument, "k-NN entropy needs more than k samples");
  const KnnIndex index(p);
  std::vector<double> terms(N);
  const double dd = static_cast<double>(d);
  for (std::size_t i = 0; i < N; ++i) {
    const double r = index.kth_distance(p.point(i), kKnn, i);
    require(r > 0.0, ErrorKind::DegenerateDensity, "duplicate samples break the k-NN estimate");
    const double q = q_density(p.point_vector(i));
    if (!(q > 0.0)) fail(ErrorKind::ZeroDensityCell, "reference density vanishes at a sample");
    // H(p|q) = -H(p) - E log q, with the Kozachenko-Leonenko H(p).
    terms[i] = -dd * std::log(r) - std::log(q);
  }
  const MeanSe ms = mean_se(terms);
  const double offset = -(digamma_int(N) - digamma_int(kKnn) + log_unit_ball(d));
  return finish(ms.mean + offset, ms.se, EntropyMethod::knn, "Kozachenko-Leonenko k=5");
}

}  // namespace

EntropyEstimate relative_entropy(const EmpiricalMeasure& p,
                                 const std::function<double(const Vec& x)>& q_density,
                                 EntropyMethod method) {
  p.validate();
  switch (method) {
    case EntropyMethod::histogram: return histogram_entropy(p, q_density);
    case EntropyMethod::knn: return knn_entropy(p, q_density);
    case EntropyMethod::closed_form: break;
  }
  fail(ErrorKind::InvalidArgument, "closed_form entropy is not a sample estimator");
}

EntropyEstimate relative_entropy_two_sample(const EmpiricalMeasure& p, const EmpiricalMeasure& q,
                                            std::size_t k) {
  p.validate();
  q.validate();
  require(p.dim == q.dim, ErrorKind::InvalidArgument, "sample dimensions differ");
  require(p.dim <= 4, ErrorKind::DimensionTooHigh, "k-NN divergence supports dim <= 4");
  require(p.weights.empty() && q.weights.empty(), ErrorKind::InvalidArgument,
          "k-NN divergence needs unweighted samples");
  const std::size_t N = p.count(), M = q.count();
  require(N > k && M >= k, ErrorKind::InvalidArgument, "not enough samples for k-NN");
  const KnnIndex own(p), other(q);
  const double dd = static_cast<double>(p.dim);
  std::vector<double> terms(N);
  for (std::size_t i = 0; i < N; ++i) {
    const double rho = own.kth_distance(p.point(i), k, i);
    const double nu = other.kth_distance(p.point(i), k, std::numeric_limits<std::size_t>::max());
    require(rho > 0.0 && nu > 0.0, ErrorKind::DegenerateDensity,
            "duplicate samples break the k-NN estimate");
    terms[i] = dd * std::log(nu / rho);
  }
  const MeanSe ms = mean_se(terms);
  return finish(ms.mean + std::log(static_cast<double>(M) / static_cast<double>(N - 1)), ms.se,
                EntropyMethod::knn, "two-sample k-NN k=" + std::to_string(k));
}

T2Check t2_check(const LipschitzProbe& probe, const EmpiricalMeasure& rho,
                 const EmpiricalMeasure& mu_samples,
                 const std::function<double(const Vec& x)>& mu_density, double c_L,
                 double Lambda_X, EntropyMethod method) {
  require(probe.lipschitz >= 0.0 && c_L > 0.0 && Lambda_X > 0.0, ErrorKind::InvalidArgument,
          "Lip(f), c_L and Lambda_X must be positive");
  auto evaluate = [&](const EmpiricalMeasure& m) {
    m.validate();
    std::vector<double> v(m.count());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = probe.f(m.point_vector(i));
    return weighted_terms(v, m.weights);
  };
  const MeanSe fr = evaluate(rho), fm = evaluate(mu_samples);
  const double gap = fm.mean - fr.mean;
  const double gap_var = fr.se * fr.se + fm.se * fm.se;
  const EntropyEstimate h = relative_entropy(rho, mu_density, method);
  const double scale = probe.lipschitz * probe.lipschitz * Lambda_X * c_L;
  T2Check out;
  out.lhs = gap * gap;
  out.rhs = scale * std::max(0.0, h.value);
  const double se_lhs = 2.0 * std::abs(gap) * std::sqrt(gap_var) + gap_var;
  const double se_rhs = scale * h.se;
  out.slack = 3.0 * std::sqrt(se_lhs * se_lhs + se_rhs * se_rhs);
  out.pass = out.lhs <= out.rhs + out.slack;
  return out;
}

LogPartitionCheck log_partition_identity(
    const std::function<double(const Vec& x, double y)>& log_mu, double y, double h_step,
    const QuadratureGrid& grid) {
  require(h_step > 0.0, ErrorKind::InvalidArgument, "h_step must be positive");
  auto log_z = [&](double at) {
    return density_quadrature([&](const Vec& x) { return log_mu(x, at); }, grid).log_mass;
  };
  const double z0 = log_z(y);
  auto lhs_at = [&](double h) {
    const double zp = log_z(y + h), zm = log_z(y - h);
    return std::pair{(zp - zm) / (2.0 * h), (zp - 2.0 * z0 + zm) / (h * h)};
  };
  const auto [l1, l2] = lhs_at(h_step);
  const auto [l1_half, l2_half] = lhs_at(0.5 * h_step);

  const DensityQuadrature q = density_quadrature([&](const Vec& x) { return log_mu(x, y); }, grid);
  std::vector<double> d1(q.nodes.size()), d2(q.nodes.size());
  CompensatedSum m1, m2;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    if (q.weights[i] <= 0.0) continue;
    const double c = log_mu(q.nodes[i], y);
    const double p = log_mu(q.nodes[i], y + h_step), m = log_mu(q.nodes[i], y - h_step);
    d1[i] = (p - m) / (2.0 * h_step);
    d2[i] = (p - 2.0 * c + m) / (h_step * h_step);
    m1.add(q.weights[i] * d1[i]);
    m2.add(q.weights[i] * d2[i]);
  }
  CompensatedSum var;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    if (q.weights[i] > 0.0) var.add(q.weights[i] * (d1[i] - m1.value()) * (d1[i] - m1.value()));
  }

  LogPartitionCheck out;
  out.lhs1 = l1;
  out.lhs2 = l2;
  out.rhs1 = m1.value();
  out.rhs2 = m2.value() + var.value();
  const double scale = std::max({1.0, std::abs(l1), std::abs(l2), std::abs(out.rhs1),
                                 std::abs(out.rhs2)});
  const double richardson = 10.0 * h_step * h_step * scale;
  out.tolerance = std::max(1e-4, richardson);
  out.richardson_ok =
      std::abs(l1 - l1_half) <= richardson && std::abs(l2 - l2_half) <= richardson;
  out.pass = out.richardson_ok && std::abs(out.lhs1 - out.rhs1) <= out.tolerance &&
             std::abs(out.lhs2 - out.rhs2) <= out.tolerance;
  return out;
}

namespace {

std::vector<std::size_t> checkpoint_indices(const std::vector<double>& checkpoints, double dt) {
  require(!checkpoints.empty(), ErrorKind::InvalidArgument, "no checkpoints");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    const double t = checkpoints[i];
    require(t >= 0.0 && (i == 0 || t >= checkpoints[i - 1]), ErrorKind::InvalidArgument,
            "checkpoints must be nonnegative and nondecreasing");
    const double k = std::round(t / dt);
    require(std::abs(k * dt - t) <= 1e-9 * std::max(1.0, t), ErrorKind::InvalidArgument,
            "checkpoint " + std::to_string(t) + " is not on the dt grid");
    idx.push_back(static_cast<std::size_t>(k));
  }
  return idx;
}

}  // namespace

EntropyCurve entropy_decay_curve(const ModelSpec& model, const EntropyDecayOptions& options,
                                 int workers) {
  require(options.ensemble >= 16, ErrorKind::InvalidArgument, "ensemble too small");
  require(options.y.size() == static_cast<Eigen::Index>(model.m), ErrorKind::InvalidArgument,
          "y has the wrong dimension");
  require(static_cast<bool>(model.mu_sampler), ErrorKind::InvalidArgument,
          "entropy_decay_curve needs a mu^y sampler");
  if (options.frozen) {
    require(static_cast<bool>(model.mu_log_density), ErrorKind::InvalidArgument,
            "frozen mode needs a mu^y log-density");
  }
  const std::vector<std::size_t> idx = checkpoint_indices(options.checkpoints, options.dt);
  const std::size_t N = options.ensemble, n = model.n, m = model.m;
  const std::size_t steps = idx.back();

  auto draw_initial = [&](std::size_t particle) {
    std::vector<double> z(n);
    fill_normals(options.seed, {static_cast<std::uint32_t>(particle), Channel::Init}, 0, z);
    return options.initial ? options.initial(z) : model.mu_sampler(options.y, z);
  };

  SimConfig base;
  base.dt = options.dt;
  base.t_final = static_cast<double>(std::max<std::size_t>(steps, 1)) * options.dt;
  base.seed = options.seed;
  base.y0 = options.y;
  base.substeps = options.substeps;

  // Per checkpoint, rows of (X) in frozen mode and (X, Y) in coupled mode.
  const std::size_t width = options.frozen ? n : n + m;
  std::vector<Mat> snapshots(idx.size(), Mat(static_cast<Eigen::Index>(N),
                                              static_cast<Eigen::Index>(width)));

  const bool ou_fast_path = options.frozen && model.linear && n == 1;
  if (ou_fast_path) {
    const LinearParams& lp = *model.linear;
    std::size_t substeps = options.substeps;
    if (substeps == 0) {
      substeps = static_cast<std::size_t>(std::max(1.0, std::ceil(10.0 * options.dt * lp.kappa_x)));
    }
    check_stability(model, base, substeps, 1.0);
    const double h = options.dt / static_cast<double>(substeps);
    std::vector<double> x(N), dw(N);
    for (std::size_t i = 0; i < N; ++i) x[i] = draw_initial(i)(0);
    std::size_t next = 0;
    auto record = [&](std::size_t k) {
      while (next < idx.size() && idx[next] == k) {
        for (std::size_t i = 0; i < N; ++i) snapshots[next](static_cast<Eigen::Index>(i), 0) = x[i];
        ++next;
      }
    };
    record(0);
    const double sqrt_h = std::sqrt(h);
    for (std::size_t k = 0; k < steps; ++k) {
      for (std::size_t s = 0; s < substeps; ++s) {
        fill_normals(options.seed, {0, Channel::BX}, (k * substeps + s) * N, dw);
        for (double& v : dw) v *= sqrt_h;
        kernels::ou_ensemble_step(x, dw, lp.kappa_x, options.y(0), lp.sigma_x, h);
      }
      record(k + 1);
    }
  } else {
    parallel_for(N, workers, [&](std::size_t i) {
      SimConfig config = base;
      config.replica = static_cast<std::uint32_t>(i);
      config.x0 = draw_initial(i);
      const Trajectory traj = options.frozen ? simulate_frozen(model, options.y, config)
                                             : simulate_coupled(model, config);
      for (std::size_t c = 0; c < idx.size(); ++c) {
        const auto row = static_cast<Eigen::Index>(idx[c]);
        auto dst = snapshots[c].row(static_cast<Eigen::Index>(i));
        dst.head(static_cast<Eigen::Index>(n)) = traj.x_path.row(row);
        if (!options.frozen) dst.tail(static_cast<Eigen::Index>(m)) = traj.y_path.row(row);
      }
    });
  }

  EntropyCurve curve;
  curve.times = options.checkpoints;
  const Vec y = options.y;
  // mu_log_density is unnormalized: fix its mass by quadrature on a box
  // sized from sampler draws.
  double log_mass = 0.0;
  if (options.frozen) {
    require(n <= 2, ErrorKind::DimensionTooHigh,
            "frozen-mode entropy needs the mu^y normalization, available for n <= 2");
    const std::size_t probe = 4000;
    std::vector<double> z(n * probe);
    fill_normals(options.seed, {0, Channel::Aux}, 0, z);
    Vec lo = Vec::Constant(static_cast<Eigen::Index>(n), std::numeric_limits<double>::infinity());
    Vec hi = -lo;
    for (std::size_t i = 0; i < probe; ++i) {
      const Vec x = model.mu_sampler(y, std::span<const double>(z.data() + i * n, n));
      lo = lo.cwiseMin(x);
      hi = hi.cwiseMax(x);
    }
    const Vec mid = 0.5 * (lo + hi);
    const Vec half = 1.5 * (hi - lo).cwiseMax(1e-6);
    QuadratureGrid grid;
    grid.lo = mid - half;
    grid.hi = mid + half;
    grid.cells = n == 1 ? 4096 : 256;
    grid.tail_tolerance = 1e-6;
    log_mass = density_quadrature([&](const Vec& x) { return model.mu_log_density(x, y); }, grid)
                   .log_mass;
  }
  auto density = [&](const Vec& x) { return std::exp(model.mu_log_density(x, y) - log_mass); };
  for (std::size_t c = 0; c < idx.size(); ++c) {
    if (options.frozen) {
      curve.estimates.push_back(
          relative_entropy(EmpiricalMeasure::from_rows(snapshots[c]), density, options.method));
    } else {
      Mat reference = snapshots[c];
      std::vector<double> z(n);
      for (std::size_t i = 0; i < N; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        fill_normals(options.seed, {static_cast<std::uint32_t>(i), Channel::Aux}, c * n, z);
        const Vec yi = snapshots[c].row(ii).tail(static_cast<Eigen::Index>(m)).transpose();
        reference.row(ii).head(static_cast<Eigen::Index>(n)) = model.mu_sampler(yi, z).transpose();
      }
      curve.estimates.push_back(relative_entropy_two_sample(
          EmpiricalMeasure::from_rows(snapshots[c]), EmpiricalMeasure::from_rows(reference)));
    }
  }

  curve.fitted_rate = std::numeric_limits<double>::quiet_NaN();
  if (options.frozen) {
    std::vector<double> t, logh;
    for (std::size_t c = 0; c < idx.size(); ++c) {
      if (curve.estimates[c].value >= options.fit_floor) {
        t.push_back(curve.times[c]);
        logh.push_back(std::log(curve.estimates[c].value));
      }
    }
    curve.fit_points = t.size();
    if (t.size() >= 2) {
      const std::vector<double> w(t.size(), 1.0);
      curve.fitted_rate = -weighted_line_fit(t, logh, w).slope;
    }
  }
  return curve;
}

PoincareEstimate estimate_poincare(const ModelSpec& model, const Vec& y,
                                   const std::vector<PoincareProbe>& probes, std::uint64_t seed,
                                   const PoincareOptions& options) {
  require(!probes.empty(), ErrorKind::InvalidArgument, "no probe functions");
  require(options.horizon > 0.0 && options.burn_in >= 0.0 && options.thin >= 1,
          ErrorKind::InvalidArgument, "invalid Poincare sampling options");
  SimConfig config;
  config.dt = options.dt;
  config.t_final = options.burn_in + options.horizon;
  config.seed = seed;
  config.y0 = y;
  config.init_fast_from_mu = static_cast<bool>(model.mu_sampler);
  config.x0 = Vec::Zero(static_cast<Eigen::Index>(model.n));
  const Trajectory traj = simulate_frozen(model, y, config);
  const auto first = static_cast<Eigen::Index>(std::ceil(options.burn_in / options.dt));
  std::vector<Vec> xs;
  for (Eigen::Index k = first; k < traj.x_path.rows(); k += static_cast<Eigen::Index>(options.thin)) {
    xs.push_back(traj.x_path.row(k).transpose());
  }
  require(xs.size() >= 2, ErrorKind::InvalidArgument, "too few retained samples");

  PoincareEstimate out;
  for (const PoincareProbe& probe : probes) {
    std::vector<double> values(xs.size()), energy(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const Vec& x = xs[i];
      values[i] = probe.f(x);
      Vec g;
      if (probe.grad) {
        g = probe.grad(x);
      } else {
        g.resize(x.size());
        for (Eigen::Index j = 0; j < x.size(); ++j) {
          const double step = 1e-5 * std::max(1.0, std::abs(x(j)));
          Vec xp = x, xm = x;
          xp(j) += step;
          xm(j) -= step;
          g(j) = (probe.f(xp) - probe.f(xm)) / (2.0 * step);
        }
      }
      energy[i] = (model.sigma_X(x, y).transpose() * g).squaredNorm();
    }
    const double dirichlet = mean_se(energy).mean;
    if (!(dirichlet > 1e-14)) {
      fail(ErrorKind::DegenerateProbe, "probe '" + probe.id + "' has zero Dirichlet energy");
    }
    const double ratio = sample_variance(values) / dirichlet;
    out.ratios.push_back(ratio);
    out.c_P_lower = std::max(out.c_P_lower, ratio);
  }
  return out;
}

std::vector<PoincareProbe> coordinate_probes(std::size_t n) {
  std::vector<PoincareProbe> probes;
  for (std::size_t j = 0; j < n; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    probes.push_back({"x" + std::to_string(j), [jj](const Vec& x) { return x(jj); },
                      [jj](const Vec& x) {
                        Vec g = Vec::Zero(x.size());
                        g(jj) = 1.0;
                        return g;
                      }});
    probes.push_back({"x" + std::to_string(j) + "^2", [jj](const Vec& x) { return x(jj) * x(jj); },
                      [jj](const Vec& x) {
                        Vec g = Vec::Zero(x.size());
                        g(jj) = 2.0 * x(jj);
                        return g;
                      }});
  }
  return probes;
}

}  // namespace slowfast
