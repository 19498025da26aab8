#pragma once

// Global JSON configuration. Every section and key is optional; unknown keys
// are rejected so that typos surface before any work starts.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slurmlens/error.hpp"
#include "slurmlens/feature_ranking.hpp"
#include "slurmlens/graph_export.hpp"
#include "slurmlens/ingest.hpp"
#include "slurmlens/linear_models.hpp"
#include "slurmlens/stay_or_go.hpp"

namespace slurmlens {

struct ModelsConfig {
  std::vector<double> lambda_grid = default_lambda_grid();
  SolverSettings solver;
};

struct EvalConfig {
  std::size_t k = 5;
  double rel_tol = 0.10;
  std::optional<double> abs_floor;  // default: 1 MiB for MaxRSS, 1 otherwise
  std::uint64_t seed = 42;
  std::string label_rule = "auto";  // auto | none
};

struct SimulateConfig {
  double kill_fraction = 0.5;
  double initial_mem_bytes = 4.0 * 1024 * 1024 * 1024;
  double initial_timelimit_s = 3600.0;
  std::uint64_t seed = 42;
  double kill_model_alpha = 1.0;
};

struct Config {
  CleaningConfig cleaning;
  ModelsConfig models;
  EvalConfig eval;
  PricingConfig pricing;
  Policy policy;
  SimilarityConfig graph;
  std::vector<std::string> graph_features;
  SimulateConfig simulate;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& section, const std::string& name,
                           std::initializer_list<const char*> allowed) {
  if (!section.is_object()) throw ConfigError("config section '" + name + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError("unknown config key '" + name + "." + key + "'");
  }
}

template <typename T>
void read(const nlohmann::json& section, const char* key, T& into) {
  if (!section.contains(key)) return;
  try {
    into = section.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad value for config key '") + key + "': " + e.what());
  }
}

}  // namespace detail

inline Config config_from_json(const nlohmann::json& j) {
  using detail::read;
  Config c;
  detail::reject_unknown(j, "<root>", {"cleaning", "models", "eval", "pricing", "policy", "graph", "simulate"});
  if (j.contains("cleaning")) {
    const auto& s = j["cleaning"];
    detail::reject_unknown(s, "cleaning", {"max_missing_fraction", "min_variance"});
    read(s, "max_missing_fraction", c.cleaning.max_missing_fraction);
    read(s, "min_variance", c.cleaning.min_variance);
  }
  if (j.contains("models")) {
    const auto& s = j["models"];
    detail::reject_unknown(s, "models", {"lambda_grid", "tol", "max_iter"});
    read(s, "lambda_grid", c.models.lambda_grid);
    read(s, "tol", c.models.solver.tol);
    read(s, "max_iter", c.models.solver.max_iter);
  }
  if (j.contains("eval")) {
    const auto& s = j["eval"];
    detail::reject_unknown(s, "eval", {"k", "rel_tol", "abs_floor", "seed", "label_rule"});
    read(s, "k", c.eval.k);
    read(s, "rel_tol", c.eval.rel_tol);
    if (s.contains("abs_floor") && !s["abs_floor"].is_null()) {
      double floor = 0.0;
      read(s, "abs_floor", floor);
      if (!(floor >= 0.0)) throw ConfigError("eval.abs_floor must be >= 0");
      c.eval.abs_floor = floor;
    }
    read(s, "seed", c.eval.seed);
    read(s, "label_rule", c.eval.label_rule);
  }
  if (j.contains("pricing")) {
    const auto& s = j["pricing"];
    detail::reject_unknown(s, "pricing", {"local_rate", "local_flat_fee", "cloud_rate", "migration_overhead", "time_value"});
    read(s, "local_rate", c.pricing.local_rate);
    read(s, "local_flat_fee", c.pricing.local_flat_fee);
    read(s, "cloud_rate", c.pricing.cloud_rate);
    read(s, "migration_overhead", c.pricing.migration_overhead);
    read(s, "time_value", c.pricing.time_value);
  }
  if (j.contains("policy")) {
    const auto& s = j["policy"];
    detail::reject_unknown(s, "policy", {"kind", "mem_boost_factor", "time_boost_factor", "max_attempts", "k"});
    if (s.contains("kind")) {
      std::string kind;
      read(s, "kind", kind);
      c.policy.kind = parse_policy_kind(kind);
    }
    read(s, "mem_boost_factor", c.policy.mem_boost_factor);
    read(s, "time_boost_factor", c.policy.time_boost_factor);
    if (s.contains("max_attempts")) {
      const auto& m = s["max_attempts"];
      if (m.is_null() || (m.is_string() && m.get<std::string>() == "unlimited")) {
        c.policy.max_attempts.reset();
      } else if (m.is_number_integer()) {
        c.policy.max_attempts = m.get<int>();
      } else {
        throw ConfigError("policy.max_attempts must be an integer, null or \"unlimited\"");
      }
    }
    read(s, "k", c.policy.k);
  }
  if (j.contains("graph")) {
    const auto& s = j["graph"];
    detail::reject_unknown(s, "graph", {"project", "project_separator", "submit_time", "submit_window_s", "job_name",
                                        "job_name_min_jaccard", "features"});
    read(s, "project", c.graph.project);
    read(s, "project_separator", c.graph.project_separator);
    read(s, "submit_time", c.graph.submit_time);
    read(s, "submit_window_s", c.graph.submit_window_s);
    read(s, "job_name", c.graph.job_name);
    read(s, "job_name_min_jaccard", c.graph.job_name_min_jaccard);
    read(s, "features", c.graph_features);
  }
  if (j.contains("simulate")) {
    const auto& s = j["simulate"];
    detail::reject_unknown(s, "simulate",
                           {"kill_fraction", "initial_mem_bytes", "initial_timelimit_s", "seed", "kill_model_alpha"});
    read(s, "kill_fraction", c.simulate.kill_fraction);
    read(s, "initial_mem_bytes", c.simulate.initial_mem_bytes);
    read(s, "initial_timelimit_s", c.simulate.initial_timelimit_s);
    read(s, "seed", c.simulate.seed);
    read(s, "kill_model_alpha", c.simulate.kill_model_alpha);
  }

  if (c.cleaning.max_missing_fraction < 0.0 || c.cleaning.max_missing_fraction > 1.0) {
    throw ConfigError("cleaning.max_missing_fraction must be in [0, 1]");
  }
  if (c.cleaning.min_variance < 0.0) throw ConfigError("cleaning.min_variance must be >= 0");
  if (c.models.lambda_grid.empty()) throw ConfigError("models.lambda_grid must not be empty");
  for (double l : c.models.lambda_grid) {
    if (!(l >= 0.0)) throw ConfigError("models.lambda_grid values must be >= 0");
  }
  if (!(c.models.solver.tol > 0.0) || c.models.solver.max_iter < 1) throw ConfigError("models.tol/max_iter invalid");
  if (c.eval.k < 2) throw ConfigError("eval.k must be >= 2");
  if (!(c.eval.rel_tol > 0.0)) throw ConfigError("eval.rel_tol must be > 0");
  if (c.eval.label_rule != "auto" && c.eval.label_rule != "none") throw ConfigError("eval.label_rule must be auto|none");
  if (!(c.simulate.kill_fraction >= 0.0 && c.simulate.kill_fraction <= 1.0)) {
    throw ConfigError("simulate.kill_fraction must be in [0, 1]");
  }
  if (!(c.simulate.kill_model_alpha > 0.0)) throw ConfigError("simulate.kill_model_alpha must be > 0");
  c.pricing.validate();
  c.policy.validate();
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace slurmlens
