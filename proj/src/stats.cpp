#include "slowfast/stats.hpp"

#include <algorithm>
#include <cmath>

#include "slowfast/error.hpp"
#include "slowfast/kernels.hpp"

namespace slowfast {

MeanSe mean_se(std::span<const double> values) {
  MeanSe out;
  out.count = values.size();
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = kernels::compensated_sum(values) / n;
  if (values.size() > 1) out.se = std::sqrt(sample_variance(values) / n);
  return out;
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = kernels::compensated_sum(values) / static_cast<double>(values.size());
  CompensatedSum ss;
  for (double v : values) ss.add((v - mean) * (v - mean));
  return ss.value() / static_cast<double>(values.size() - 1);
}

MeanSe batch_means(std::span<const double> values, std::size_t batches) {
  require(batches >= 2, ErrorKind::InvalidArgument, "batch_means needs at least two batches");
  MeanSe out;
  out.count = values.size();
  if (values.empty()) return out;
  out.mean = kernels::compensated_sum(values) / static_cast<double>(values.size());
  const std::size_t size = values.size() / batches;
  if (size == 0) return mean_se(values);
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    means[b] = kernels::compensated_sum(values.subspan(b * size, size)) / static_cast<double>(size);
  }
  out.se = std::sqrt(sample_variance(means) / static_cast<double>(batches));
  return out;
}

double quantile(std::vector<double> values, double q) {
  require(!values.empty(), ErrorKind::InvalidArgument, "quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

LineFit weighted_line_fit(std::span<const double> x, std::span<const double> y,
                          std::span<const double> w) {
  require(x.size() == y.size() && x.size() == w.size() && x.size() >= 2,
          ErrorKind::InvalidArgument, "line fit needs matching inputs with at least two points");
  CompensatedSum sw, sx, sy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(w[i] > 0.0 && std::isfinite(w[i]), ErrorKind::InvalidArgument,
            "line fit weights must be positive");
    sw.add(w[i]);
    sx.add(w[i] * x[i]);
    sy.add(w[i] * y[i]);
  }
  const double xbar = sx.value() / sw.value();
  const double ybar = sy.value() / sw.value();
  CompensatedSum sxx, sxy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx.add(w[i] * (x[i] - xbar) * (x[i] - xbar));
    sxy.add(w[i] * (x[i] - xbar) * (y[i] - ybar));
  }
  require(sxx.value() > 0.0, ErrorKind::InvalidArgument, "line fit needs distinct x values");
  LineFit fit;
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = ybar - fit.slope * xbar;
  // With weights equal to inverse variances the slope variance is 1/Sxx.
  fit.slope_se = std::sqrt(1.0 / sxx.value());
  return fit;
}

}  // namespace slowfast
