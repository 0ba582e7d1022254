#pragma once

#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "synsql/config.hpp"
#include "synsql/corpus.hpp"
#include "synsql/errors.hpp"
#include "synsql/gateway.hpp"
#include "synsql/json_extract.hpp"
#include "synsql/schema.hpp"

namespace synsql {

// ============================================================================
// Selection trace
// ============================================================================

struct SelectionTrace {
  SelectionMode mode = SelectionMode::Full;
  std::vector<std::pair<double, std::vector<ColumnRef>>> per_temperature_cores;
  std::vector<ColumnRef> core_union;
  std::vector<ColumnRef> expansion;
  std::vector<std::string> rejected;  // model spellings that matched no column
  ReducedSchema final;
  bool used_fallback = false;         // empty selection degraded to full schema

  nlohmann::ordered_json to_json() const {
    auto refs_to_json = [](const std::vector<ColumnRef>& refs) {
      std::vector<std::string> names;
      for (const auto& r : refs) names.push_back(r.display());
      std::sort(names.begin(), names.end());
      return names;
    };
    nlohmann::ordered_json doc;
    doc["mode"] = selection_mode_name(mode);
    doc["used_fallback"] = used_fallback;
    doc["per_temperature_cores"] = nlohmann::ordered_json::array();
    for (const auto& [temp, refs] : per_temperature_cores) {
      nlohmann::ordered_json slot;
      slot["temperature"] = temp;
      slot["columns"] = refs_to_json(refs);
      doc["per_temperature_cores"].push_back(std::move(slot));
    }
    doc["core_union"] = refs_to_json(core_union);
    doc["expansion"] = refs_to_json(expansion);
    doc["rejected"] = rejected;
    doc["final"] = nlohmann::ordered_json::array();
    for (const auto& [key, ref] : final.selected) {
      nlohmann::ordered_json col;
      col["column"] = ref.display();
      col["provenance"] = provenance_name(final.provenance.at(key));
      doc["final"].push_back(std::move(col));
    }
    return doc;
  }
};

// ============================================================================
// Prompts
// ============================================================================

inline ModelRequest build_selection_request(const Question& question, const Schema& schema,
                                            const std::string& model_id, double temperature) {
  ModelRequest req;
  req.model_id = model_id;
  req.temperature = temperature;
  req.system_text =
      "You are a database schema analyst for a text-to-SQL system. Given a "
      "database schema and a question, identify every column needed to answer "
      "the question: columns that are selected, filtered, joined, grouped, or "
      "ordered on.";
  std::string user;
  user += "Database schema:\n\n" + ddl_for(schema) + "\n";
  user += "Question: " + question.question_text + "\n";
  if (question.has_evidence()) user += "Hint: " + question.evidence + "\n";
  user +=
      "\nRespond with a JSON object mapping each relevant table name to the "
      "list of its relevant column names, for example "
      "{\"orders\": [\"id\", \"total\"]}. Use only tables and columns that "
      "appear in the schema. No commentary.";
  req.user_text = user;
  return req;
}

inline ModelRequest build_expansion_request(const Question& question, const Schema& schema,
                                            const std::vector<ColumnRef>& core,
                                            const std::string& model_id, double temperature) {
  ModelRequest req;
  req.model_id = model_id;
  req.temperature = temperature;
  req.system_text =
      "You are a database schema analyst for a text-to-SQL system. You review "
      "a column selection for a question and propose additional columns that "
      "are semantically or functionally related, so the database stays "
      "realistic and join paths stay intact.";
  std::vector<std::string> names;
  for (const auto& ref : core) names.push_back(ref.display());
  std::sort(names.begin(), names.end());
  std::string user;
  user += "Database schema:\n\n" + ddl_for(schema) + "\n";
  user += "Question: " + question.question_text + "\n";
  if (question.has_evidence()) user += "Hint: " + question.evidence + "\n";
  user += "\nAlready selected columns:\n";
  for (const auto& name : names) user += "- " + name + "\n";
  user +=
      "\nPropose additional related columns from the schema, in the same JSON "
      "object format {\"table\": [\"column\"]}. Respond with {} if nothing "
      "should be added.";
  req.user_text = user;
  return req;
}

// ============================================================================
// Selector
// ============================================================================

class SchemaSelector {
 public:
  SchemaSelector(Gateway& gateway, const RunConfig& config)
      : gateway_(gateway), config_(config) {}

  struct CoreResult {
    std::vector<std::pair<double, std::vector<ColumnRef>>> per_temperature;
    std::vector<ColumnRef> union_set;
    std::vector<std::string> rejected;
  };

  /// Ensemble core extraction: one completion per temperature, each parsed
  /// and schema-filtered, then unioned. Slots that errored contribute
  /// nothing; the gateway already raised if every slot failed.
  CoreResult select_core(const Question& question, const Schema& schema) const {
    if (schema.tables.empty()) throw SchemaIntegrityError("cannot select from an empty schema");
    ModelRequest base =
        build_selection_request(question, schema, config_.selector_model, 0.0);
    auto slots = gateway_.complete_ensemble(base, config_.ensemble_temperatures);

    CoreResult out;
    std::set<std::string> seen;
    for (const auto& slot : slots) {
      std::vector<ColumnRef> core;
      if (slot.response) {
        auto parsed = parse_selection(slot.response->text, schema);
        core = std::move(parsed.accepted);
        for (auto& r : parsed.rejected) out.rejected.push_back(std::move(r));
      }
      for (const auto& ref : core)
        if (seen.insert(ref.key()).second) out.union_set.push_back(ref);
      out.per_temperature.emplace_back(slot.temperature, std::move(core));
    }
    if (out.union_set.empty())
      throw EmptySelection("ensemble produced no usable columns for question " +
                           question.question_id);
    return out;
  }

  /// Semantic expansion at temperature 0: related columns not already in the
  /// core. May open tables the core never touched; closure restores keys.
  std::vector<ColumnRef> expand(const Question& question, const Schema& schema,
                                const std::vector<ColumnRef>& core) const {
    ModelRequest req = build_expansion_request(question, schema, core,
                                               config_.selector_model,
                                               config_.expansion_temperature);
    ModelResponse response = gateway_.complete(req);
    auto parsed = parse_selection(response.text, schema);
    std::set<std::string> in_core;
    for (const auto& ref : core) in_core.insert(ref.key());
    std::vector<ColumnRef> out;
    for (const auto& ref : parsed.accepted)
      if (!in_core.count(ref.key())) out.push_back(ref);
    return out;
  }

  /// Full selection pipeline for one question. Oracle mode takes an external
  /// column set; when none is supplied it falls back to the columns the gold
  /// query mentions. No other mode reads the gold query.
  SelectionTrace select(const Question& question, const Schema& schema, SelectionMode mode,
                        const std::vector<ColumnRef>& oracle_columns = {}) const {
    SelectionTrace trace;
    trace.mode = mode;
    try {
      switch (mode) {
        case SelectionMode::FullSchema:
          trace.final = full_selection(schema);
          return trace;
        case SelectionMode::Oracle: {
          std::vector<ColumnRef> cols = oracle_columns;
          if (cols.empty()) {
            try {
              cols = extract_query_columns(question.gold_sql, schema);
            } catch (const AnalysisError&) {
              // Gold query references nothing recognizable; fall through.
            }
          }
          if (cols.empty()) throw EmptySelection("oracle column set is empty");
          trace.core_union = cols;
          trace.final = close_relationally(schema, cols, Provenance::Core);
          return trace;
        }
        case SelectionMode::NoEnsembleExpansion: {
          ModelRequest req =
              build_selection_request(question, schema, config_.selector_model, 0.0);
          ModelResponse response = gateway_.complete(req);
          auto parsed = parse_selection(response.text, schema);
          trace.per_temperature_cores.emplace_back(0.0, parsed.accepted);
          trace.core_union = parsed.accepted;
          trace.rejected = std::move(parsed.rejected);
          if (trace.core_union.empty())
            throw EmptySelection("temperature-0 core is empty for question " +
                                 question.question_id);
          trace.final = close_relationally(schema, trace.core_union, Provenance::Core);
          return trace;
        }
        case SelectionMode::NoExpansion:
        case SelectionMode::Full: {
          CoreResult core = select_core(question, schema);
          trace.per_temperature_cores = std::move(core.per_temperature);
          trace.core_union = core.union_set;
          trace.rejected = std::move(core.rejected);
          std::map<std::string, ColumnRef> selected;
          std::map<std::string, Provenance> provenance;
          for (const auto& ref : trace.core_union) {
            selected[ref.key()] = ref;
            provenance[ref.key()] = Provenance::Core;
          }
          if (mode == SelectionMode::Full) {
            trace.expansion = expand(question, schema, trace.core_union);
            for (const auto& ref : trace.expansion) {
              selected[ref.key()] = ref;
              provenance[ref.key()] = Provenance::Expansion;
            }
          }
          trace.final = close_relationally(schema, selected, provenance);
          return trace;
        }
      }
      throw ConfigError("unhandled selection mode");
    } catch (const EmptySelection&) {
      trace.used_fallback = true;
      trace.final = full_selection(schema);
      return trace;
    }
  }

 private:
  Gateway& gateway_;
  const RunConfig& config_;
};

}  // namespace synsql
