#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synsql/errors.hpp"
#include "synsql/util.hpp"

namespace synsql {

// ============================================================================
// Modes
// ============================================================================

enum class SelectionMode { Full, NoExpansion, NoEnsembleExpansion, FullSchema, Oracle };

inline const char* selection_mode_name(SelectionMode m) {
  switch (m) {
    case SelectionMode::Full: return "full";
    case SelectionMode::NoExpansion: return "no-expansion";
    case SelectionMode::NoEnsembleExpansion: return "no-ensemble-expansion";
    case SelectionMode::FullSchema: return "full-schema";
    default: return "oracle";
  }
}

inline SelectionMode parse_selection_mode(const std::string& name) {
  std::string n = fold_case(name);
  for (char& c : n)
    if (c == '_') c = '-';
  if (n == "full") return SelectionMode::Full;
  if (n == "no-expansion") return SelectionMode::NoExpansion;
  if (n == "no-ensemble-expansion") return SelectionMode::NoEnsembleExpansion;
  if (n == "full-schema") return SelectionMode::FullSchema;
  if (n == "oracle") return SelectionMode::Oracle;
  throw ConfigError("unknown selection mode: " + name);
}

// ============================================================================
// Run configuration
// ============================================================================

struct RunConfig {
  // Model roles.
  std::string selector_model = "default-model";
  std::string synthesizer_model = "default-model";
  std::string critic_model = "default-model";

  // Temperatures. The ensemble list drives core extraction; expansion and
  // critic stay at 0 for stability, synthesis defaults to 0.7 for variety.
  std::vector<double> ensemble_temperatures = {0.0, 0.3, 0.7};
  double expansion_temperature = 0.0;
  double synthesis_temperature = 0.7;
  double critic_temperature = 0.0;

  // Critic loop.
  double threshold = 8.0;
  int max_iterations = 3;
  int rows_per_table = 8;

  // Pipeline shape. `vanilla` collapses to one full-schema pass, no critic.
  SelectionMode mode = SelectionMode::Full;
  bool vanilla = false;
  std::string dataset = "spider";  // spider | bird | spider2-sqlite

  // Execution limits.
  int timeout_ms = 30000;
  int row_cap = 100000;

  // Paths.
  std::string questions_path;
  std::string tables_path;
  std::string db_dir;
  std::string run_dir = "run";
  std::string fixture_dir;   // non-empty activates the offline fixture backend
  std::string record_dir;    // non-empty records live completions to fixtures
  std::map<std::string, std::string> predictions;  // system name -> path

  // Gateway.
  std::string base_url;
  std::string api_path = "/v1/chat/completions";
  std::string api_key_env = "SYNSQL_API_KEY";
  int concurrency = 4;
  int max_output = 4096;

  // Worker pool.
  int workers = 4;

  void validate() const {
    if (threshold < 1.0 || threshold > 10.0)
      throw ConfigError("threshold must lie in [1,10]");
    if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
    if (rows_per_table < 1) throw ConfigError("rows_per_table must be >= 1");
    if (workers < 1) throw ConfigError("workers must be >= 1");
    if (ensemble_temperatures.empty())
      throw ConfigError("ensemble_temperatures must not be empty");
    if (fixture_dir.empty() && base_url.empty())
      throw ConfigError("either fixture_dir or base_url must be configured");
  }

  /// Canonical serialized form; also the config-hash input, so every field
  /// that changes pipeline behavior must appear here.
  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc;
    doc["selector_model"] = selector_model;
    doc["synthesizer_model"] = synthesizer_model;
    doc["critic_model"] = critic_model;
    doc["ensemble_temperatures"] = ensemble_temperatures;
    doc["expansion_temperature"] = expansion_temperature;
    doc["synthesis_temperature"] = synthesis_temperature;
    doc["critic_temperature"] = critic_temperature;
    doc["threshold"] = threshold;
    doc["max_iterations"] = max_iterations;
    doc["rows_per_table"] = rows_per_table;
    doc["mode"] = selection_mode_name(mode);
    doc["vanilla"] = vanilla;
    doc["dataset"] = dataset;
    doc["timeout_ms"] = timeout_ms;
    doc["row_cap"] = row_cap;
    return doc;
  }

  std::string config_hash() const { return to_hex(fnv1a(to_json().dump())); }
};

// ============================================================================
// Config file parsing
// ============================================================================

namespace detail {

inline void apply_config_value(RunConfig& config, const std::string& key,
                               const nlohmann::json& value) {
  auto as_string = [&]() -> std::string {
    if (value.is_string()) return value.get<std::string>();
    return value.dump();
  };
  auto as_double = [&]() -> double {
    if (value.is_number()) return value.get<double>();
    if (value.is_string())
      if (auto d = parse_real(value.get<std::string>())) return *d;
    throw ConfigError("config key " + key + " expects a number");
  };
  auto as_int = [&]() -> int {
    if (value.is_number_integer()) return value.get<int>();
    if (value.is_string())
      if (auto i = parse_int(value.get<std::string>())) return static_cast<int>(*i);
    throw ConfigError("config key " + key + " expects an integer");
  };
  auto as_bool = [&]() -> bool {
    if (value.is_boolean()) return value.get<bool>();
    if (value.is_string()) {
      std::string v = fold_case(value.get<std::string>());
      if (v == "true" || v == "1" || v == "yes") return true;
      if (v == "false" || v == "0" || v == "no") return false;
    }
    throw ConfigError("config key " + key + " expects a boolean");
  };

  if (key == "selector_model") config.selector_model = as_string();
  else if (key == "synthesizer_model") config.synthesizer_model = as_string();
  else if (key == "critic_model") config.critic_model = as_string();
  else if (key == "model") {
    config.selector_model = config.synthesizer_model = config.critic_model = as_string();
  } else if (key == "ensemble_temperatures") {
    config.ensemble_temperatures.clear();
    if (value.is_array()) {
      for (const auto& t : value) config.ensemble_temperatures.push_back(t.get<double>());
    } else {
      for (const auto& part : split(as_string(), ','))
        if (auto d = parse_real(part)) config.ensemble_temperatures.push_back(*d);
    }
    if (config.ensemble_temperatures.empty())
      throw ConfigError("ensemble_temperatures parsed to an empty list");
  }
  else if (key == "expansion_temperature") config.expansion_temperature = as_double();
  else if (key == "synthesis_temperature") config.synthesis_temperature = as_double();
  else if (key == "critic_temperature") config.critic_temperature = as_double();
  else if (key == "threshold") config.threshold = as_double();
  else if (key == "max_iterations") config.max_iterations = as_int();
  else if (key == "rows_per_table") config.rows_per_table = as_int();
  else if (key == "mode") config.mode = parse_selection_mode(as_string());
  else if (key == "vanilla") config.vanilla = as_bool();
  else if (key == "dataset") config.dataset = fold_case(as_string());
  else if (key == "timeout_ms") config.timeout_ms = as_int();
  else if (key == "row_cap") config.row_cap = as_int();
  else if (key == "questions" || key == "questions_path") config.questions_path = as_string();
  else if (key == "tables" || key == "tables_path") config.tables_path = as_string();
  else if (key == "db_dir") config.db_dir = as_string();
  else if (key == "run_dir") config.run_dir = as_string();
  else if (key == "fixture_dir") config.fixture_dir = as_string();
  else if (key == "record_dir") config.record_dir = as_string();
  else if (key == "base_url") config.base_url = as_string();
  else if (key == "api_path") config.api_path = as_string();
  else if (key == "api_key_env") config.api_key_env = as_string();
  else if (key == "concurrency") config.concurrency = as_int();
  else if (key == "max_output") config.max_output = as_int();
  else if (key == "workers") config.workers = as_int();
  else if (key.rfind("predictions.", 0) == 0) {
    config.predictions[key.substr(std::string("predictions.").size())] = as_string();
  }
  else throw ConfigError("unknown config key: " + key);
}

inline nlohmann::json parse_toml_scalar(const std::string& raw) {
  std::string v = trim(raw);
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') ||
                        (v.front() == '\'' && v.back() == '\'')))
    return v.substr(1, v.size() - 2);
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& part : split(v.substr(1, v.size() - 2), ','))
      if (!trim(part).empty()) arr.push_back(parse_toml_scalar(part));
    return arr;
  }
  if (auto i = parse_int(v)) return *i;
  if (auto d = parse_real(v)) return *d;
  return v;  // bare string
}

}  // namespace detail

/// Apply one key/value pair (CLI overrides use this too).
inline void apply_config_override(RunConfig& config, const std::string& key,
                                  const std::string& value) {
  detail::apply_config_value(config, key, detail::parse_toml_scalar(value));
}

/// Load a config document: TOML-style `key = value` lines with optional
/// [section] headers (flattened as "section.key"), or a JSON object.
inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());

  RunConfig config;
  auto doc = nlohmann::json::parse(content, nullptr, /*allow_exceptions=*/false);
  if (doc.is_object()) {
    for (auto& [key, value] : doc.items()) {
      if (key == "predictions" && value.is_object()) {
        for (auto& [system, p] : value.items())
          config.predictions[system] = p.get<std::string>();
      } else {
        detail::apply_config_value(config, key, value);
      }
    }
    return config;
  }

  std::string section;
  for (const auto& raw_line : split(content, '\n')) {
    std::string line = trim(raw_line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line is not key = value: " + line);
    std::string key = trim(line.substr(0, eq));
    if (!section.empty()) key = section + "." + key;
    detail::apply_config_value(config, key, detail::parse_toml_scalar(line.substr(eq + 1)));
  }
  return config;
}

}  // namespace synsql
