#include "slowfast/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include <json.hpp>

#include "slowfast/error.hpp"
#include "slowfast/version.hpp"

namespace slowfast {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_atomic(const fs::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) fail(ErrorKind::IoError, "cannot create " + path.parent_path().string() + ": " + ec.message());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      fail(ErrorKind::IoError, "write to " + tmp.string() + " failed");
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    fail(ErrorKind::IoError, "cannot rename into " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunArtifacts::RunArtifacts(fs::path directory) : directory_(std::move(directory)) {}

void RunArtifacts::add(const std::string& name, std::string content) {
  require(name != "manifest.json", ErrorKind::InvalidArgument, "manifest.json is reserved");
  files_.emplace_back(name, std::move(content));
}

void RunArtifacts::commit(const ManifestInfo& info) const {
  ordered_json manifest;
  manifest["subcommand"] = info.subcommand;
  manifest["config_fnv1a64"] = hex64(fnv1a64(info.config_canonical));
  manifest["seed"] = info.seed;
  manifest["version"] = kVersion;
  manifest["workers"] = info.workers;
  manifest["wall_time_seconds"] = info.wall_time_seconds;
  ordered_json list = ordered_json::array();
  for (const auto& [name, content] : files_) {
    list.push_back({{"name", name}, {"fnv1a64", hex64(fnv1a64(content))},
                    {"bytes", content.size()}});
  }
  manifest["files"] = list;

  std::vector<fs::path> written;
  try {
    for (const auto& [name, content] : files_) {
      write_atomic(directory_ / name, content);
      written.push_back(directory_ / name);
    }
    write_atomic(directory_ / "manifest.json", manifest.dump(2) + "\n");
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

std::string key_values_csv(const KeyValues& kv) {
  std::string out = "key,value\n";
  for (const auto& [k, v] : kv) out += k + "," + format_double(v) + "\n";
  return out;
}

namespace {

ordered_json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

}  // namespace

std::string key_values_json(const KeyValues& kv) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : kv) j[k] = number(v);
  return j.dump(2) + "\n";
}

std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t";
  for (Eigen::Index j = 0; j < traj.x_path.cols(); ++j) out += ",x" + std::to_string(j);
  for (Eigen::Index j = 0; j < traj.y_path.cols(); ++j) out += ",y" + std::to_string(j);
  out += "\n";
  for (std::size_t k = 0; k < traj.times.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    out += format_double(traj.times[k]);
    for (Eigen::Index j = 0; j < traj.x_path.cols(); ++j) out += "," + format_double(traj.x_path(kk, j));
    for (Eigen::Index j = 0; j < traj.y_path.cols(); ++j) out += "," + format_double(traj.y_path(kk, j));
    out += "\n";
  }
  return out;
}

std::string trajectory_json(const Trajectory& traj) {
  ordered_json j;
  j["t"] = traj.times;
  auto matrix = [](const Mat& m) {
    ordered_json rows = ordered_json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      ordered_json r = ordered_json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) r.push_back(number(m(i, c)));
      rows.push_back(r);
    }
    return rows;
  };
  j["x"] = matrix(traj.x_path);
  j["y"] = matrix(traj.y_path);
  j["seed"] = traj.seed_record.seed;
  ordered_json streams = ordered_json::array();
  for (const auto& s : traj.seed_record.streams) {
    streams.push_back({{"replica", s.replica}, {"channel", std::string(to_string(s.channel))}});
  }
  j["streams"] = streams;
  return j.dump(2) + "\n";
}

namespace {

std::string result_row(const StrongErrorResult& r) {
  return format_double(r.epsilon) + "," + std::to_string(r.replicas) + "," +
         format_double(r.mean_sup_error) + "," + format_double(r.stderr_) + "," +
         format_double(r.dt) + "," + std::to_string(r.substeps) + "," + std::to_string(r.seed);
}

ordered_json result_json(const StrongErrorResult& r) {
  return {{"epsilon", number(r.epsilon)},
          {"replicas", r.replicas},
          {"mean_sup_error", number(r.mean_sup_error)},
          {"stderr", number(r.stderr_)},
          {"dt", number(r.dt)},
          {"substeps", r.substeps},
          {"seed", r.seed},
          {"dt_refinement_ratio", number(r.dt_refinement_ratio)},
          {"dt_refinement_se", number(r.dt_refinement_se)},
          {"dt_accepted", r.dt_accepted},
          {"mean_exit_time", number(r.mean_exit_time)},
          {"exit_fraction", number(r.exit_fraction)}};
}

constexpr const char* kResultHeader = "epsilon,replicas,mean_sup_error,stderr,dt,substeps,seed\n";

}  // namespace

std::string convergence_csv(const ConvergenceReport& report) {
  std::string out = kResultHeader;
  for (const auto& r : report.results) out += result_row(r) + "\n";
  out += "slope," + format_double(report.slope) + "\n";
  out += "slope_lo," + format_double(report.slope_lo) + "\n";
  out += "slope_hi," + format_double(report.slope_hi) + "\n";
  out += "intercept," + format_double(report.intercept) + "\n";
  return out;
}

std::string convergence_json(const ConvergenceReport& report) {
  ordered_json j;
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.results) rows.push_back(result_json(r));
  j["results"] = rows;
  j["slope"] = number(report.slope);
  j["slope_lo"] = number(report.slope_lo);
  j["slope_hi"] = number(report.slope_hi);
  j["intercept"] = number(report.intercept);
  j["degenerate"] = report.degenerate;
  return j.dump(2) + "\n";
}

std::string convergence_plotdata(const ConvergenceReport& report) {
  std::string out = "# log_epsilon log_mean_sup_error\n";
  for (const auto& r : report.results) {
    out += format_double(std::log(r.epsilon)) + " " + format_double(std::log(r.mean_sup_error)) + "\n";
  }
  return out;
}

std::string convergence_svg(const ConvergenceReport& report) {
  constexpr double W = 480, H = 360, pad = 50;
  std::vector<double> xs, ys;
  for (const auto& r : report.results) {
    if (r.mean_sup_error > 0.0) {
      xs.push_back(std::log10(r.epsilon));
      ys.push_back(std::log10(r.mean_sup_error));
    }
  }
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (xs.size() >= 2) {
    auto [xmin, xmax] = std::minmax_element(xs.begin(), xs.end());
    auto [ymin, ymax] = std::minmax_element(ys.begin(), ys.end());
    const double x0 = *xmin, x1 = *xmax;
    const double y0 = *ymin - 0.1, y1 = *ymax + 0.1;
    auto px = [&](double x) { return pad + (x - x0) / (x1 - x0) * (W - 2 * pad); };
    auto py = [&](double y) { return H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad); };
    svg << "<line x1=\"" << pad << "\" y1=\"" << H - pad << "\" x2=\"" << W - pad << "\" y2=\""
        << H - pad << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\"" << H - pad
        << "\" stroke=\"black\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      svg << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(ys[i]) << "\" r=\"3\"/>\n";
    }
    if (std::isfinite(report.slope)) {
      // Fitted in natural logs; the slope is base independent.
      const double c = report.intercept / std::log(10.0);
      svg << "<line x1=\"" << px(x0) << "\" y1=\"" << py(c + report.slope * x0) << "\" x2=\""
          << px(x1) << "\" y2=\"" << py(c + report.slope * x1)
          << "\" stroke=\"red\"/>\n";
    }
    svg << "<text x=\"" << pad << "\" y=\"" << pad - 15 << "\" font-size=\"12\">slope "
        << format_double(report.slope) << "</text>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" font-size=\"12\">log10 epsilon</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string strong_error_csv(const StrongErrorResult& result) {
  return std::string(kResultHeader) + result_row(result) + "\n";
}

std::string strong_error_json(const StrongErrorResult& result) {
  return result_json(result).dump(2) + "\n";
}

std::string law_equivalence_csv(const LawEquivalenceReport& report) {
  std::string out = "functional_id,lhs,rhs,pooled_se,pass,paired_se\n";
  for (const auto& r : report.rows) {
    out += r.functional_id + "," + format_double(r.lhs) + "," + format_double(r.rhs) + "," +
           format_double(r.pooled_se) + "," + (r.pass ? "true" : "false") + "," +
           format_double(r.paired_se) + "\n";
  }
  return out;
}

std::string law_equivalence_json(const LawEquivalenceReport& report) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"functional_id", r.functional_id},
                    {"lhs", number(r.lhs)},
                    {"rhs", number(r.rhs)},
                    {"pooled_se", number(r.pooled_se)},
                    {"pass", r.pass},
                    {"paired_se", number(r.paired_se)}});
  }
  ordered_json j;
  j["rows"] = rows;
  j["mean_weight"] = number(report.mean_weight);
  j["mean_weight_se"] = number(report.mean_weight_se);
  j["weight_underflows"] = report.weight_underflows;
  return j.dump(2) + "\n";
}

std::string entropy_curve_csv(const EntropyCurve& curve) {
  std::string out = "t,H_hat,se_note\n";
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    const auto& e = curve.estimates[i];
    out += format_double(curve.times[i]) + "," + format_double(e.value) + ",se=" +
           format_double(e.se) + (e.flagged_negative ? " negative" : "") + "\n";
  }
  return out;
}

std::string entropy_curve_json(const EntropyCurve& curve) {
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    const auto& e = curve.estimates[i];
    rows.push_back({{"t", number(curve.times[i])},
                    {"H_hat", number(e.value)},
                    {"se", number(e.se)},
                    {"method", std::string(to_string(e.method))},
                    {"note", e.note}});
  }
  ordered_json j;
  j["curve"] = rows;
  j["fitted_rate"] = number(curve.fitted_rate);
  j["fit_points"] = curve.fit_points;
  return j.dump(2) + "\n";
}

std::string entropy_curve_plotdata(const EntropyCurve& curve) {
  std::string out = "# t H_hat\n";
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    out += format_double(curve.times[i]) + " " + format_double(curve.estimates[i].value) + "\n";
  }
  return out;
}

std::string theta_mu_text(const ThetaMuSamples& samples) {
  std::string out = "# theta_mu_samples m=" + std::to_string(samples.dim) + "\n";
  for (std::size_t i = 0; i < samples.count; ++i) {
    for (std::size_t j = 0; j < samples.dim; ++j) {
      if (j) out += " ";
      out += format_double(samples.at(i, j));
    }
    out += "\n";
  }
  return out;
}

ThetaMuSamples parse_theta_mu(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string header;
  std::getline(in, header);
  const std::string prefix = "# theta_mu_samples m=";
  require(header.rfind(prefix, 0) == 0, ErrorKind::InvalidArgument,
          "theta#mu file must start with '" + prefix + "<dim>'");
  ThetaMuSamples s;
  try {
    s.dim = std::stoul(header.substr(prefix.size()));
  } catch (const std::exception&) {
    fail(ErrorKind::InvalidArgument, "theta#mu header has no valid dimension");
  }
  require(s.dim >= 1, ErrorKind::InvalidArgument, "theta#mu dimension must be >= 1");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    require(ls.eof() && row.size() == s.dim, ErrorKind::InvalidArgument,
            "theta#mu line " + std::to_string(lineno) + " does not hold " +
                std::to_string(s.dim) + " numbers");
    rows.push_back(std::move(row));
  }
  s.count = rows.size();
  s.coords.resize(s.dim * s.count);
  for (std::size_t i = 0; i < s.count; ++i) {
    for (std::size_t j = 0; j < s.dim; ++j) s.coords[j * s.count + i] = rows[i][j];
  }
  return s;
}

}  // namespace slowfast
