#pragma once

// Output writers: CSV tables, JSON summaries, run manifests and optimizer
// checkpoints. Numbers are printed with 17 significant digits so reruns are
// byte-identical.

#include "cavityctl/config.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef CAVITYCTL_VERSION
#define CAVITYCTL_VERSION "0.1.0"
#endif

namespace cavityctl {

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Minimal CSV writer: header row, '.' decimals, no quoting needed for our fields.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    row_strings(header);
  }

  void row(const std::vector<double>& values) {
    for (std::size_t k = 0; k < values.size(); ++k) out_ << (k ? "," : "") << format_number(values[k]);
    out_ << '\n';
  }
  void row_strings(const std::vector<std::string>& values) {
    for (std::size_t k = 0; k < values.size(); ++k) out_ << (k ? "," : "") << values[k];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

/// JSON number or null for inf/nan (JSON has no representation for them).
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json number_or_null(const std::optional<double>& v) { return v ? number_or_null(*v) : json(nullptr); }

inline json to_json(const MeritReport& r) {
  return json{{"F", number_or_null(r.F)},
              {"C", number_or_null(r.C)},
              {"jpjm_norm", number_or_null(r.jpjm_norm)},
              {"jpjm_corr_norm", number_or_null(r.jpjm_corr_norm)},
              {"g2", number_or_null(r.g2)},
              {"cooperativity", r.cooperativity && std::isinf(*r.cooperativity) ? json("inf")
                                                                                 : number_or_null(r.cooperativity)},
              {"beyond_semi_classical", r.beyond_semi_classical()}};
}

/// Wall time is left out so the file depends only on the inputs.
inline json to_json(const OptRun& r) {
  return json{{"best_merit", number_or_null(r.best_merit)},
              {"best_params", detail::dump_sequence(r.best_params)},
              {"evaluations", r.evaluations},
              {"iterations_run", r.iterations_run},
              {"stop_reason", r.stop_reason}};
}

inline void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

inline void write_merit_history(const std::filesystem::path& path, const OptRun& r) {
  CsvWriter w(path, {"iteration", "best_merit"});
  for (std::size_t k = 0; k < r.merit_history.size(); ++k) w.row({static_cast<double>(k), r.merit_history[k]});
}

/// Time column first, then the observables, then leakage and trace.
inline void write_trajectory(const std::filesystem::path& path, const Trajectory& tr) {
  std::vector<std::string> header{"g_t"};
  header.insert(header.end(), tr.names.begin(), tr.names.end());
  header.push_back("leakage");
  header.push_back("trace");
  CsvWriter w(path, header);
  for (std::size_t k = 0; k < tr.times.size(); ++k) {
    std::vector<double> row{tr.times[k]};
    row.insert(row.end(), tr.values[k].begin(), tr.values[k].end());
    row.push_back(tr.leakage[k]);
    row.push_back(tr.trace[k]);
    w.row(row);
  }
}

inline void write_growth(const std::filesystem::path& path, const std::vector<std::string>& set_labels,
                         const std::vector<AlgebraGrowth>& growth) {
  CsvWriter w(path, {"generators", "order", "dimension"});
  for (std::size_t s = 0; s < growth.size(); ++s)
    for (std::size_t k = 0; k < growth[s].dims.size(); ++k)
      w.row_strings({set_labels[s], std::to_string(k), std::to_string(growth[s].dims[k])});
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Hash of the canonical config plus the versions that produced the outputs.
inline json make_manifest(const ExperimentConfig& c, const std::vector<std::string>& outputs) {
  const std::string canon = to_json(c).dump();
  json m;
  m["tool"] = "cavityctl";
  m["version"] = CAVITYCTL_VERSION;
  m["workflow"] = to_string(c.workflow);
  m["config_hash"] = "fnv1a64:" + hex64(fnv1a(canon));
  m["seed"] = c.optimize ? json(c.optimize->optimizer.rng_seed) : json(nullptr);
  m["workers"] = c.optimize ? json(c.optimize->optimizer.workers) : json(nullptr);
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  m["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                       "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH);
#if defined(__clang__)
  m["compiler"] = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  m["compiler"] = std::string("gcc ") + __VERSION__;
#else
  m["compiler"] = "unknown";
#endif
  m["outputs"] = outputs;
  m["config"] = to_json(c);
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoints

inline json to_json(const JayaState& st) {
  json j;
  j["iteration"] = st.iteration;
  j["last_improvement"] = st.last_improvement;
  j["improvement_mark"] = number_or_null(st.improvement_mark);
  j["evaluations"] = st.evaluations;
  j["population"] = st.population;
  json fit = json::array();
  for (double f : st.fitness) fit.push_back(number_or_null(f));
  j["fitness"] = fit;
  j["merit_history"] = st.merit_history;
  json rngs = json::array();
  for (std::size_t k = 0; k < st.rngs.size(); ++k) rngs.push_back(st.rng_state(k));
  j["rng_states"] = rngs;
  return j;
}

inline JayaState jaya_state_from_json(const json& j) {
  JayaState st;
  try {
    st.iteration = j.at("iteration").get<int>();
    st.last_improvement = j.at("last_improvement").get<int>();
    const auto& mark = j.at("improvement_mark");
    st.improvement_mark = mark.is_null() ? -std::numeric_limits<double>::infinity() : mark.get<double>();
    st.evaluations = j.at("evaluations").get<std::size_t>();
    st.population = j.at("population").get<std::vector<std::vector<double>>>();
    for (const auto& f : j.at("fitness"))
      st.fitness.push_back(f.is_null() ? -std::numeric_limits<double>::infinity() : f.get<double>());
    st.merit_history = j.at("merit_history").get<std::vector<double>>();
    const auto& rngs = j.at("rng_states");
    st.rngs.resize(rngs.size());
    for (std::size_t k = 0; k < rngs.size(); ++k) st.set_rng_state(k, rngs[k].get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("checkpoint: ") + e.what());
  }
  if (st.fitness.size() != st.population.size() || st.rngs.size() != st.population.size())
    throw std::invalid_argument("checkpoint: population, fitness and rng_states differ in length");
  return st;
}

inline void save_checkpoint(const std::filesystem::path& path, const JayaState& st) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  write_json(tmp, to_json(st));
  std::filesystem::rename(tmp, path);
}

inline JayaState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("checkpoint: cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(std::string("checkpoint: ") + e.what());
  }
  return jaya_state_from_json(j);
}

}  // namespace cavityctl
