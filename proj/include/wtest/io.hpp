#pragma once

// File formats: numeric CSV samples, TrainConfig JSON, JSON reports with an
// embedded run manifest, and atomic output files.

#include <Eigen/Dense>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "wtest/error.hpp"
#include "wtest/inference.hpp"
#include "wtest/mmd.hpp"
#include "wtest/nn.hpp"
#include "wtest/random.hpp"
#include "wtest/sample.hpp"

namespace wtest {

inline constexpr std::string_view kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Numbers

/// Shortest round-trip text for a double, always with a decimal point or an
/// exponent ("0.0", "1.5", "2e-07").
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline bool parse_double(std::string_view field, double& out) {
  field = trim(field);
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  auto res = std::from_chars(field.data(), field.data() + field.size(), out);
  return res.ec == std::errc() && res.ptr == field.data() + field.size() && std::isfinite(out);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// CSV

/// Parses comma-separated decimal rows. A first row that does not parse as
/// numbers is taken to be a header. Errors carry 1-based line numbers.
inline Sample parse_csv(std::string_view text, const std::string& name = "<csv>") {
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  std::size_t cols = 0;
  std::size_t pos = 0;
  bool header_checked = false;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = detail::trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) {
      if (pos >= text.size()) break;  // trailing newline
      throw InputError(name + ":" + std::to_string(line_no) + ": empty line");
    }
    const auto fields = detail::split_commas(line);
    std::vector<double> values(fields.size());
    bool ok = true;
    for (std::size_t k = 0; k < fields.size() && ok; ++k) ok = detail::parse_double(fields[k], values[k]);
    if (!header_checked) {
      header_checked = true;
      if (!ok) continue;  // header row
    }
    if (!ok) throw InputError(name + ":" + std::to_string(line_no) + ": malformed numeric row");
    if (cols == 0) cols = values.size();
    if (values.size() != cols) {
      throw InputError(name + ":" + std::to_string(line_no) + ": expected " + std::to_string(cols) +
                       " columns, found " + std::to_string(values.size()));
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw InputError(name + ": no data rows");
  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < cols; ++k) {
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
  }
  return Sample(std::move(data));
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Sample read_csv(const std::filesystem::path& path) { return parse_csv(read_file(path), path.string()); }

/// Writes to a temporary sibling, then renames over `path`.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + tmp.string());
    out << contents;
    if (!out.flush()) throw InputError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw InputError("cannot move output into place at " + path.string() + ": " + ec.message());
  }
}

inline std::string to_csv(const Eigen::MatrixXd& data, bool header = false) {
  std::string out;
  if (header) {
    for (Eigen::Index k = 0; k < data.cols(); ++k) {
      if (k) out += ',';
      out += "x" + std::to_string(k);
    }
    out += '\n';
  }
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index k = 0; k < data.cols(); ++k) {
      if (k) out += ',';
      out += format_double(data(i, k));
    }
    out += '\n';
  }
  return out;
}

inline std::string column_csv(const std::vector<double>& values) {
  std::string out;
  for (double v : values) out += format_double(v) + '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Digests

inline std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

inline std::string digest(std::string_view bytes) { return hex64(fnv1a(bytes)); }

// ---------------------------------------------------------------------------
// TrainConfig JSON

inline nlohmann::json config_to_json(const TrainConfig& cfg) {
  nlohmann::json j;
  j["hidden_widths"] = cfg.hidden_widths;
  j["optimizer"] = to_string(cfg.optimizer);
  j["learning_rate"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  if (cfg.batch_size) {
    j["batch_size"] = *cfg.batch_size;
  } else {
    j["batch_size"] = "full";
  }
  j["power_iterations"] = cfg.power_iterations;
  j["seed"] = cfg.seed;
  return j;
}

/// Fields mirror TrainConfig; missing fields keep defaults, unknown fields are
/// rejected.
inline TrainConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  TrainConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "hidden_widths") {
        cfg.hidden_widths = value.get<std::vector<int>>();
      } else if (key == "optimizer") {
        const auto name = value.get<std::string>();
        if (name == "sgd" || name == "SGD") {
          cfg.optimizer = Optimizer::SGD;
        } else if (name == "adam" || name == "Adam" || name == "ADAM") {
          cfg.optimizer = Optimizer::Adam;
        } else {
          throw ConfigError("optimizer must be \"sgd\" or \"adam\"");
        }
      } else if (key == "learning_rate") {
        cfg.learning_rate = value.get<double>();
      } else if (key == "epochs") {
        cfg.epochs = value.get<int>();
      } else if (key == "batch_size") {
        if (value.is_string()) {
          if (value.get<std::string>() != "full") throw ConfigError("batch_size must be an integer or \"full\"");
          cfg.batch_size.reset();
        } else {
          cfg.batch_size = value.get<int>();
        }
      } else if (key == "power_iterations") {
        cfg.power_iterations = value.get<int>();
      } else if (key == "seed") {
        cfg.seed = value.get<std::uint64_t>();
      } else {
        throw ConfigError("unknown config field '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline TrainConfig read_config(const std::filesystem::path& path) {
  try {
    return config_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline std::string config_digest(const TrainConfig& cfg) { return digest(config_to_json(cfg).dump()); }

// ---------------------------------------------------------------------------
// Reports

struct RunManifest {
  std::string command;
  std::string version{kVersion};
  std::uint64_t seed = 0;
  std::string config_digest;
  std::map<std::string, std::string> input_digests;
  double wall_clock_seconds = 0.0;
};

inline nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command},
          {"version", m.version},
          {"seed", m.seed},
          {"config_digest", m.config_digest},
          {"input_digests", m.input_digests},
          {"wall_clock_seconds", m.wall_clock_seconds}};
}

inline nlohmann::json to_json(const TestReport& r) {
  return {{"statistic", r.statistic},
          {"raw_distance", r.raw_distance},
          {"scaling", r.scaling},
          {"quantile", r.quantile},
          {"alpha", r.alpha},
          {"decision", to_string(r.decision)},
          {"n", r.n},
          {"m", r.m},
          {"S", r.S},
          {"T", r.T},
          {"seed", r.seed},
          {"config_digest", r.config_digest},
          {"p_value", r.p_value}};
}

inline nlohmann::json to_json(const TwoSampleQuantile& q) {
  return {{"r_grid", q.r_grid},
          {"per_r_values", q.per_r_values},
          {"q_breve", q.q_breve},
          {"lambda", q.lambda},
          {"rho", q.rho}};
}

inline nlohmann::json to_json(const MmdReport& r) {
  return {{"mmd2_unbiased", r.mmd2_unbiased},
          {"bandwidth", r.bandwidth},
          {"permutations", r.permutations},
          {"p_value", r.p_value},
          {"alpha", r.alpha},
          {"seed", r.seed},
          {"decision", r.reject ? "Reject" : "Accept"}};
}

inline nlohmann::json to_json(const Interval& ci, double alpha) {
  return {{"lo", ci.lo}, {"hi", ci.hi}, {"alpha", alpha}};
}

}  // namespace wtest
