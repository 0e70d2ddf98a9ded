#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "twoport/errors.hpp"
#include "twoport/linalg.hpp"
#include "twoport/model.hpp"

namespace twoport::experiments {

#ifdef TWOPORT_VERSION
inline constexpr std::string_view kVersion = TWOPORT_VERSION;
#else
inline constexpr std::string_view kVersion = "0.1.0";
#endif

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SingularConfiguration : public Error {
 public:
  using Error::Error;
};

class MonteCarloInvalid : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

enum class Experiment { kFimScan, kFimDiag, kMleVsM, kMleVsN, kSingularityScan };

inline constexpr std::array<std::pair<Experiment, std::string_view>, 5> kExperimentNames{{
    {Experiment::kFimScan, "fim-scan"},
    {Experiment::kFimDiag, "fim-diag"},
    {Experiment::kMleVsM, "mle-vs-m"},
    {Experiment::kMleVsN, "mle-vs-n"},
    {Experiment::kSingularityScan, "singularity-scan"},
}};

inline std::string_view to_string(Experiment e) {
  for (const auto& [value, name] : kExperimentNames) {
    if (value == e) return name;
  }
  return "unknown";
}

inline Experiment parse_experiment(std::string_view name) {
  for (const auto& [value, text] : kExperimentNames) {
    if (text == name) return value;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

inline std::vector<double> log_grid(double lo, double hi, int points) {
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) {
    const double t = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
    g[i] = std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)));
  }
  return g;
}

inline std::vector<double> linear_grid(double lo, double hi, int points) {
  std::vector<double> g(points);
  for (int i = 0; i < points; ++i) {
    g[i] = points == 1 ? lo : lo + (hi - lo) * i / (points - 1);
  }
  return g;
}

/// One experiment run. Defaults are sized to finish in seconds on a desktop.
struct ExperimentConfig {
  Experiment experiment = Experiment::kFimScan;
  NetworkParams truth{0.3, 0.8, 0.5, 0.25 * kPi};
  std::vector<TuningConstants> k{{0.5, 0.5, 0.0}};
  double beta = 0.5;
  std::vector<double> n_grid = log_grid(10.0, 1e4, 31);
  std::vector<int> m_grid{10, 20, 50, 100, 200, 500, 1000};
  double n_photons = 10.0;  ///< N of the Monte Carlo sweep over M
  int repetitions = 200;    ///< M of the Monte Carlo sweep over N
  std::vector<std::array<double, 3>> truth_sweep;  ///< (phi0, phi1, phi2) tuples
  std::vector<double> k1_grid = linear_grid(-2.0, 2.0, 41);
  std::vector<double> k2_grid = linear_grid(-2.0, 2.0, 41);
  std::vector<double> k3_grid{0.0, 0.5};
  int trials = 500;
  std::uint64_t master_seed = 20240601;
  std::string output_dir = "out";
  int threads = 1;

  bool operator==(const ExperimentConfig&) const = default;
};

template <typename T>
void require_increasing(const std::vector<T>& grid, const char* name) {
  if (grid.empty()) {
    throw ConfigError(std::string(name) + " must not be empty");
  }
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) {
      throw ConfigError(std::string(name) + " must be strictly increasing");
    }
  }
}

inline void validate(const ExperimentConfig& c) {
  require_increasing(c.n_grid, "n_grid");
  require_increasing(c.m_grid, "m_grid");
  require_increasing(c.k1_grid, "k1_grid");
  require_increasing(c.k2_grid, "k2_grid");
  require_increasing(c.k3_grid, "k3_grid");
  if (!(c.n_grid.front() > 0.0)) throw ConfigError("n_grid entries must be positive");
  if (c.m_grid.front() < 1) throw ConfigError("m_grid entries must be at least 1");
  if (!(c.beta > 0.0 && c.beta < 1.0)) throw ConfigError("beta must lie in (0, 1)");
  if (c.k.empty()) throw ConfigError("at least one (k1, k2, k3) tuple is required");
  if (!(c.n_photons > 0.0)) throw ConfigError("n_photons must be positive");
  if (c.repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (c.trials < 2) throw ConfigError("trials must be at least 2");
  if (c.threads < 1) throw ConfigError("threads must be at least 1");
  const Vec4 t = c.truth.as_vector();
  if (!t.allFinite()) throw ConfigError("truth must be finite");
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment"] = std::string(to_string(c.experiment));
  j["truth"] = {{"phi0", c.truth.phi0}, {"phi1", c.truth.phi1},
                {"phi2", c.truth.phi2}, {"phi3", c.truth.phi3}};
  j["k"] = nlohmann::json::array();
  for (const auto& k : c.k) j["k"].push_back({k.k1, k.k2, k.k3});
  j["beta"] = c.beta;
  j["n_grid"] = c.n_grid;
  j["m_grid"] = c.m_grid;
  j["n_photons"] = c.n_photons;
  j["repetitions"] = c.repetitions;
  j["truth_sweep"] = c.truth_sweep;
  j["k1_grid"] = c.k1_grid;
  j["k2_grid"] = c.k2_grid;
  j["k3_grid"] = c.k3_grid;
  j["trials"] = c.trials;
  j["master_seed"] = c.master_seed;
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  return j;
}

/// Parses a configuration object; absent keys keep their defaults, unknown
/// keys are rejected.
inline ExperimentConfig from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  ExperimentConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "experiment") {
        c.experiment = parse_experiment(value.get<std::string>());
      } else if (key == "truth") {
        for (const auto& [name, v] : value.items()) {
          double* slot = name == "phi0"   ? &c.truth.phi0
                         : name == "phi1" ? &c.truth.phi1
                         : name == "phi2" ? &c.truth.phi2
                         : name == "phi3" ? &c.truth.phi3
                                          : nullptr;
          if (!slot) throw ConfigError("unknown truth component '" + name + "'");
          *slot = v.get<double>();
        }
      } else if (key == "k") {
        c.k.clear();
        for (const auto& t : value) {
          const auto v = t.get<std::vector<double>>();
          if (v.size() != 3) throw ConfigError("each k entry needs exactly three values");
          c.k.push_back({v[0], v[1], v[2]});
        }
      } else if (key == "beta") {
        c.beta = value.get<double>();
      } else if (key == "n_grid") {
        c.n_grid = value.get<std::vector<double>>();
      } else if (key == "m_grid") {
        c.m_grid = value.get<std::vector<int>>();
      } else if (key == "n_photons") {
        c.n_photons = value.get<double>();
      } else if (key == "repetitions") {
        c.repetitions = value.get<int>();
      } else if (key == "truth_sweep") {
        c.truth_sweep = value.get<std::vector<std::array<double, 3>>>();
      } else if (key == "k1_grid") {
        c.k1_grid = value.get<std::vector<double>>();
      } else if (key == "k2_grid") {
        c.k2_grid = value.get<std::vector<double>>();
      } else if (key == "k3_grid") {
        c.k3_grid = value.get<std::vector<double>>();
      } else if (key == "trials") {
        c.trials = value.get<int>();
      } else if (key == "master_seed") {
        c.master_seed = value.get<std::uint64_t>();
      } else if (key == "output_dir") {
        c.output_dir = value.get<std::string>();
      } else if (key == "threads") {
        c.threads = value.get<int>();
      } else {
        throw ConfigError("unknown configuration key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed configuration: ") + e.what());
  }
  validate(c);
  return c;
}

inline ExperimentConfig parse_config(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("configuration is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

inline std::string serialize(const ExperimentConfig& c) { return to_json(c).dump(2); }

/// Configuration fields that determine the numbers in a result table; the
/// output directory and thread count are left out.
inline std::string canonical_text(const ExperimentConfig& c) {
  nlohmann::json j = to_json(c);
  j.erase("output_dir");
  j.erase("threads");
  return j.dump();
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(canonical_text(c))));
  return buf;
}

}  // namespace twoport::experiments
