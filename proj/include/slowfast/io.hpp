#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slowfast/averaging.hpp"
#include "slowfast/decoupling.hpp"
#include "slowfast/diagnostics.hpp"
#include "slowfast/experiments.hpp"
#include "slowfast/model.hpp"

namespace slowfast {

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

/// Shortest round-trip decimal form.
std::string format_double(double value);

/// Writes via a temporary file in the same directory and renames it into place.
void write_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Collects output files for one run. Nothing touches the disk until commit(),
/// which writes every file and then manifest.json; on failure the files
/// already written by this commit are removed.
class RunArtifacts {
 public:
  explicit RunArtifacts(std::filesystem::path directory);

  void add(const std::string& name, std::string content);
  const std::vector<std::pair<std::string, std::string>>& files() const { return files_; }

  struct ManifestInfo {
    std::string subcommand;
    std::string config_canonical;
    std::uint64_t seed = 0;
    int workers = 1;
    double wall_time_seconds = 0.0;
  };
  void commit(const ManifestInfo& info) const;

 private:
  std::filesystem::path directory_;
  std::vector<std::pair<std::string, std::string>> files_;
};

using KeyValues = std::vector<std::pair<std::string, double>>;

std::string key_values_csv(const KeyValues& kv);
std::string key_values_json(const KeyValues& kv);

std::string trajectory_csv(const Trajectory& traj);
std::string trajectory_json(const Trajectory& traj);

std::string convergence_csv(const ConvergenceReport& report);
std::string convergence_json(const ConvergenceReport& report);
/// Two columns: log epsilon, log mean sup error.
std::string convergence_plotdata(const ConvergenceReport& report);
/// Log-log error plot with the fitted line.
std::string convergence_svg(const ConvergenceReport& report);

std::string strong_error_csv(const StrongErrorResult& result);
std::string strong_error_json(const StrongErrorResult& result);

std::string law_equivalence_csv(const LawEquivalenceReport& report);
std::string law_equivalence_json(const LawEquivalenceReport& report);

std::string entropy_curve_csv(const EntropyCurve& curve);
std::string entropy_curve_json(const EntropyCurve& curve);
std::string entropy_curve_plotdata(const EntropyCurve& curve);

/// "# theta_mu_samples m=<dim>" followed by one whitespace-separated sample per line.
std::string theta_mu_text(const ThetaMuSamples& samples);
ThetaMuSamples parse_theta_mu(std::string_view text);

}  // namespace slowfast
