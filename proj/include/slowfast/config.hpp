#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slowfast/families.hpp"
#include "slowfast/model.hpp"

namespace slowfast {

/// g(y) = g_scale * y (padded with zeros or truncated to n), Q = q I,
/// h = cos_amplitude * sum cos(cos_frequency x_i), b_Y = -pull_rate (y - x_{1..m}).
struct Gradient61Config {
  std::size_t n = 1;
  std::size_t m = 1;
  double q = 1.0;
  double g_scale = 1.0;
  double cos_amplitude = 0.0;
  double cos_frequency = 1.0;
  double beta_X = 1.0;
  double beta_Y = 1.0;
  double pull_rate = 1.0;
};

/// theta(x) = x in dimension `dim`, domain D = [domain_lo, domain_hi]^dim.
struct TamdConfig {
  std::size_t dim = 1;
  TamdPotential potential = TamdPotential::harmonic;
  double potential_scale = 1.0;
  double kappa = 2.0;
  double beta = 1.0;
  double beta_bar = 1.0;
  double gamma_bar = 1.0;
  double domain_lo = -3.0;
  double domain_hi = 3.0;
};

struct ModelConfig {
  FamilyTag family = FamilyTag::linear;
  double epsilon = 0.1;
  LinearParams linear;
  Gradient61Config gradient61;
  TamdConfig tamd;
};

struct SimSection {
  double t_final = 1.0;
  double dt = 0.01;
  std::size_t substeps = 0;
  std::uint64_t seed = 0;
  std::vector<double> x0;
  std::vector<double> y0;
  bool init_fast_from_mu = true;
};

struct ExperimentSection {
  std::vector<double> eps_grid;
  std::size_t replicas = 256;
  /// dt = min(dt_max, dt_factor * epsilon) in sweeps.
  double dt_factor = 0.1;
  double dt_max = 0.01;
  /// analytic, quadrature or ergodic.
  std::string drift = "analytic";
  std::size_t quadrature_cells = 256;
  double quadrature_halfwidth = 8.0;
  std::size_t drift_samples = 20000;
  bool symmetric_stopping = true;
  double refinement_fraction = 0.1;
  bool enforce_dt = true;
  bool oracle = false;
  std::optional<double> beta;
  double p = 1.0;
  std::size_t lipschitz_pairs = 256;
  std::size_t ensemble = 10000;
  std::vector<double> checkpoints;
  bool frozen = true;
  double initial_shift = 0.0;
  std::string entropy_method = "histogram";
  std::string theta_mu_file;
};

struct OutputSection {
  std::string directory = "out";
  std::vector<std::string> formats = {"csv"};
};

struct RunConfig {
  ModelConfig model;
  SimSection sim;
  ExperimentSection experiment;
  OutputSection output;
  /// Canonical JSON of the parsed document, hashed into the manifest.
  std::string canonical;
};

/// Strict parse of a JSON document with sections model, sim, experiment and
/// output. Unknown keys and invalid values are all collected into a single
/// ConfigError whose message lists one "path: reason" per line.
RunConfig parse_config(std::string_view text);

/// Model for the configured family at the given epsilon.
ModelSpec build_model(const ModelConfig& config, double epsilon);
ModelSpec build_model(const ModelConfig& config);

GradientModelParams gradient61_params(const Gradient61Config& config);
std::function<Vec(const Vec& x, const Vec& y)> gradient61_slow_drift(const Gradient61Config& config);
TamdModelParams tamd_params(const TamdConfig& config);

/// Slow and fast dimensions of the configured family.
std::size_t fast_dim(const ModelConfig& config);
std::size_t slow_dim(const ModelConfig& config);

}  // namespace slowfast
