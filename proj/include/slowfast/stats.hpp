#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace slowfast {

/// Neumaier running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t count = 0;
};

/// Sample mean and standard error (sample standard deviation / sqrt(n)).
MeanSe mean_se(std::span<const double> values);

/// Standard error of the mean by non-overlapping batch means. Trailing values
/// that do not fill a batch are dropped from the SE but kept in the mean.
MeanSe batch_means(std::span<const double> values, std::size_t batches);

double sample_variance(std::span<const double> values);

/// Linear interpolation quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
};

/// Weighted least squares fit of y = intercept + slope x.
LineFit weighted_line_fit(std::span<const double> x, std::span<const double> y,
                          std::span<const double> w);

}  // namespace slowfast
