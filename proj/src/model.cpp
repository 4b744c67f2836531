#include "slowfast/model.hpp"

#include <cmath>
#include <string>

#include "slowfast/error.hpp"

namespace slowfast {

std::string_view to_string(FamilyTag tag) {
  switch (tag) {
    case FamilyTag::linear: return "linear";
    case FamilyTag::gradient61: return "gradient61";
    case FamilyTag::tamd62: return "tamd62";
    case FamilyTag::custom: return "custom";
  }
  return "custom";
}

FamilyTag family_from_string(std::string_view name) {
  if (name == "linear") return FamilyTag::linear;
  if (name == "gradient61") return FamilyTag::gradient61;
  if (name == "tamd62") return FamilyTag::tamd62;
  if (name == "custom") return FamilyTag::custom;
  fail(ErrorKind::InvalidArgument, "unknown model family '" + std::string(name) + "'");
}

Mat ModelSpec::a_X(const Vec& x, const Vec& y) const {
  const Mat s = sigma_X(x, y);
  return 0.5 * s * s.transpose();
}

Mat ModelSpec::a_Y(const Vec& y) const {
  const Mat s = sigma_Y(y);
  return 0.5 * s * s.transpose();
}

void ModelSpec::validate(std::span<const Vec> y_probes) const {
  require(epsilon > 0.0 && std::isfinite(epsilon), ErrorKind::InvalidArgument,
          "epsilon must be positive");
  require(n >= 1 && m >= 1, ErrorKind::InvalidArgument, "dimensions must be at least 1");
  require(b_X && sigma_X && b_Y && sigma_Y, ErrorKind::InvalidArgument,
          "model coefficients are not all set");
  if (stiffness) {
    require(*stiffness > 0.0, ErrorKind::InvalidArgument, "stiffness must be positive");
  }
  for (const Vec& y : y_probes) {
    require(static_cast<std::size_t>(y.size()) == m, ErrorKind::InvalidArgument,
            "probe point has the wrong slow dimension");
    const Mat s = sigma_Y(y);
    require(static_cast<std::size_t>(s.rows()) == m && static_cast<std::size_t>(s.cols()) == m,
            ErrorKind::InvalidArgument, "sigma_Y has the wrong shape");
    const Eigen::JacobiSVD<Mat> svd(s);
    const double smallest = svd.singularValues()(svd.singularValues().size() - 1);
    require(smallest > 1e-10, ErrorKind::SingularSigmaY,
            "sigma_Y is not invertible at a probe point");
  }
}

void ModelSpec::validate() const {
  std::vector<Vec> probes;
  for (double v : {-1.0, 0.0, 1.0}) probes.push_back(Vec::Constant(static_cast<Eigen::Index>(m), v));
  validate(probes);
}

std::size_t slow_steps(const SimConfig& config) {
  require(config.dt > 0.0 && std::isfinite(config.dt), ErrorKind::InvalidArgument,
          "dt must be positive");
  require(config.t_final >= config.dt, ErrorKind::InvalidArgument, "t_final must be at least dt");
  const double ratio = config.t_final / config.dt;
  const double steps = std::round(ratio);
  require(std::abs(ratio - steps) <= 1e-9 * steps, ErrorKind::InvalidArgument,
          "t_final is not an integer multiple of dt");
  return static_cast<std::size_t>(steps);
}

}  // namespace slowfast
