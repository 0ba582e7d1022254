#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "synsql/config.hpp"
#include "synsql/corpus.hpp"
#include "synsql/gateway.hpp"
#include "synsql/instance.hpp"
#include "synsql/json_extract.hpp"
#include "synsql/structure.hpp"
#include "synsql/synthesizer.hpp"

namespace synsql {

// ============================================================================
// Critique report
// ============================================================================

/// Scored dimensions, in serialization order. hint_alignment participates
/// only when the question carries evidence.
inline const std::vector<std::string>& critic_dimensions() {
  static const std::vector<std::string> dims = {
      "hint_alignment",  "key_integrity", "schema_coverage",
      "data_complexity", "data_variety",  "relevance"};
  return dims;
}

struct CritiqueReport {
  std::map<std::string, int> scores;  // dimension -> 1..10
  std::string feedback;
  double average = 0.0;   // mean of present scores, 2 decimals
  bool accepted = false;  // average >= threshold and no hard key violations

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc;
    doc["scores"] = nlohmann::ordered_json::object();
    for (const auto& dim : critic_dimensions()) {
      auto it = scores.find(dim);
      if (it != scores.end()) doc["scores"][dim] = it->second;
    }
    doc["average"] = average;
    doc["accepted"] = accepted;
    doc["feedback"] = feedback;
    return doc;
  }
};

inline double rounded_mean(const std::map<std::string, int>& scores) {
  if (scores.empty()) return 0.0;
  double sum = 0;
  for (const auto& [dim, score] : scores) sum += score;
  return std::round(sum / scores.size() * 100.0) / 100.0;
}

// ============================================================================
// Critic prompt
// ============================================================================

inline ModelRequest build_critique_request(const Question& question,
                                           const SyntheticDatabase& db,
                                           const ReducedSchema& reduced,
                                           const StructuralReport& structural,
                                           const std::string& model_id, double temperature) {
  ModelRequest req;
  req.model_id = model_id;
  req.temperature = temperature;
  req.system_text =
      "You are a data-quality judge for a text-to-SQL benchmark. You score a "
      "synthetic database instance on fixed dimensions and give concrete, "
      "actionable feedback for regenerating it.";

  std::string user;
  user += "Question: " + question.question_text + "\n";
  if (question.has_evidence()) user += "Hint: " + question.evidence + "\n";
  user += "\nSchema:\n\n" + ddl_for(*reduced.base, &reduced) + "\n";
  user += "Database contents:\n\n" + db.render();
  user += "Structural check results:\n" + structural.summary_text() + "\n";
  user += "\nScore the database from 1 (poor) to 10 (excellent) on:\n";
  if (question.has_evidence())
    user += "- hint_alignment: values match the hint's literals and formats\n";
  user += "- key_integrity: primary keys unique, every foreign key resolves\n";
  user += "- schema_coverage: all tables and columns hold meaningful data\n";
  user += "- data_complexity: joins, filters, and aggregates can discriminate\n";
  user += "- data_variety: values vary in range, casing, and repetition\n";
  user += "- relevance: the contents let the question be answered non-emptily\n";
  user +=
      "\nRespond with a JSON object holding one integer per dimension plus a "
      "\"feedback\" string listing concrete fixes, for example "
      "{\"key_integrity\": 9, \"feedback\": \"...\"}. No commentary.";
  req.user_text = user;
  return req;
}

// ============================================================================
// Score parsing
// ============================================================================

namespace detail {

inline std::string dimension_key(std::string key) {
  key = fold_case(trim(key));
  for (char& c : key)
    if (c == ' ' || c == '-') c = '_';
  return key;
}

inline std::optional<int> score_from_json(const nlohmann::json& v) {
  double d;
  if (v.is_number()) {
    d = v.get<double>();
  } else if (v.is_string()) {
    auto parsed = parse_real(v.get<std::string>());
    if (!parsed) return std::nullopt;
    d = *parsed;
  } else {
    return std::nullopt;
  }
  int score = static_cast<int>(std::llround(d));
  return std::clamp(score, 1, 10);
}

/// Extract the required dimension scores and feedback. Tolerates a nested
/// "scores" object, spaced or capitalized keys, and numeric strings; missing
/// dimensions make the whole response unparseable.
inline std::optional<std::pair<std::map<std::string, int>, std::string>> parse_critique(
    const std::string& text, bool expect_hint) {
  auto doc = extract_json(text);
  if (!doc || !doc->is_object()) return std::nullopt;

  std::map<std::string, nlohmann::json> fields;
  auto absorb = [&](const nlohmann::json& obj) {
    for (auto& [key, value] : obj.items()) fields[dimension_key(key)] = value;
  };
  absorb(*doc);
  if (doc->contains("scores") && (*doc)["scores"].is_object()) absorb((*doc)["scores"]);

  std::map<std::string, int> scores;
  for (const auto& dim : critic_dimensions()) {
    if (dim == "hint_alignment" && !expect_hint) continue;
    auto it = fields.find(dim);
    if (it == fields.end()) return std::nullopt;
    auto score = score_from_json(it->second);
    if (!score) return std::nullopt;
    scores[dim] = *score;
  }

  std::string feedback;
  auto fb = fields.find("feedback");
  if (fb != fields.end() && fb->second.is_string()) feedback = fb->second.get<std::string>();
  return std::make_pair(std::move(scores), std::move(feedback));
}

}  // namespace detail

// ============================================================================
// Critic
// ============================================================================

class Critic {
 public:
  Critic(Gateway& gateway, const RunConfig& config) : gateway_(gateway), config_(config) {}

  /// One critique round. Unparseable output is retried once at temperature 0;
  /// a second failure degrades to all-1 scores. Key violations found by the
  /// structural check clamp the integrity score to 3 and veto acceptance
  /// regardless of the average, so no violating instance can slip through on
  /// high scores elsewhere.
  CritiqueReport critique(const Question& question, const SyntheticDatabase& db,
                          const ReducedSchema& reduced,
                          const StructuralReport& structural) const {
    ModelRequest req = build_critique_request(question, db, reduced, structural,
                                              config_.critic_model,
                                              config_.critic_temperature);
    bool expect_hint = question.has_evidence();

    auto parsed = detail::parse_critique(gateway_.complete(req).text, expect_hint);
    if (!parsed) {
      req.temperature = 0.0;
      parsed = detail::parse_critique(gateway_.complete(req).text, expect_hint);
    }

    CritiqueReport report;
    if (parsed) {
      report.scores = std::move(parsed->first);
      report.feedback = std::move(parsed->second);
    } else {
      for (const auto& dim : critic_dimensions()) {
        if (dim == "hint_alignment" && !expect_hint) continue;
        report.scores[dim] = 1;
      }
      report.feedback = "critic output was not parseable; treat this attempt as rejected";
    }

    if (structural.has_key_violation())
      report.scores["key_integrity"] = std::min(report.scores["key_integrity"], 3);
    report.average = rounded_mean(report.scores);
    report.accepted =
        report.average >= config_.threshold && !structural.has_key_violation();
    return report;
  }

 private:
  Gateway& gateway_;
  const RunConfig& config_;
};

// ============================================================================
// Refinement loop
// ============================================================================

enum class Termination { Accepted, BudgetExhausted, Error };

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::Accepted: return "accepted";
    case Termination::BudgetExhausted: return "budget_exhausted";
    default: return "error";
  }
}

struct IterationRecord {
  SyntheticDatabase database;
  std::string payload_text;  // raw completion, kept for the run directory
  bool parse_failed = false;
  StructuralReport structural;
  std::optional<CritiqueReport> critique;  // absent only in vanilla runs
  std::string error;                       // non-empty when the iteration failed

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc;
    doc["parse_failed"] = parse_failed;
    doc["structural"] = structural.to_json();
    doc["critique"] = critique ? critique->to_json() : nlohmann::ordered_json(nullptr);
    doc["error"] = error;
    doc["database"] = database.to_json();
    return doc;
  }
};

struct RefinementTrace {
  std::vector<IterationRecord> iterations;
  int final_index = 0;
  Termination termination = Termination::Error;

  const IterationRecord& final_iteration() const { return iterations.at(final_index); }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc;
    doc["termination"] = termination_name(termination);
    doc["final_index"] = final_index;
    doc["iterations"] = nlohmann::ordered_json::array();
    for (const auto& it : iterations) doc["iterations"].push_back(it.to_json());
    return doc;
  }
};

/// Synthesize-critique-refine for one question. Iteration 1 runs without
/// feedback; later iterations splice the previous critique's feedback into
/// the synthesis prompt verbatim. Stops on acceptance or after
/// max_iterations, keeping the best-scoring iteration. Vanilla runs collapse
/// to a single uncritiqued pass.
inline RefinementTrace refine_loop(Gateway& gateway, const Question& question,
                                   const ReducedSchema& reduced, const RunConfig& config) {
  Critic critic(gateway, config);
  RefinementTrace trace;
  int budget = config.vanilla ? 1 : config.max_iterations;
  std::string feedback;

  for (int iteration = 0; iteration < budget; ++iteration) {
    IterationRecord record;
    try {
      SynthesisResult synth = synthesize(gateway, question, reduced, feedback, config);
      record.database = std::move(synth.database);
      record.payload_text = std::move(synth.payload.text);
      record.parse_failed = synth.parse_failed;
      record.structural = check_structure(record.database, reduced);

      if (config.vanilla) {
        trace.iterations.push_back(std::move(record));
        trace.final_index = iteration;
        trace.termination = Termination::Accepted;
        return trace;
      }

      if (record.parse_failed) {
        // No point judging a sentinel; score it out deterministically.
        CritiqueReport failed;
        for (const auto& dim : critic_dimensions()) {
          if (dim == "hint_alignment" && !question.has_evidence()) continue;
          failed.scores[dim] = 1;
        }
        failed.average = rounded_mean(failed.scores);
        failed.accepted = false;
        failed.feedback =
            "the previous response was not a parseable JSON object of table "
            "rows; respond with only the JSON object";
        record.critique = std::move(failed);
      } else {
        record.critique = critic.critique(question, record.database, reduced,
                                          record.structural);
      }
      feedback = record.critique->feedback;
    } catch (const std::exception& e) {
      record.error = e.what();
      record.structural = check_structure(record.database, reduced);
      feedback = "the previous attempt failed to produce a database (" +
                 std::string(e.what()) + "); generate a complete JSON object of table rows";
    }

    bool accepted = record.critique && record.critique->accepted;
    trace.iterations.push_back(std::move(record));
    if (accepted) {
      trace.final_index = iteration;
      trace.termination = Termination::Accepted;
      return trace;
    }
  }

  // Budget exhausted: keep the best-scoring non-errored iteration.
  trace.termination = Termination::Error;
  double best = -1.0;
  for (size_t i = 0; i < trace.iterations.size(); ++i) {
    const auto& it = trace.iterations[i];
    if (!it.error.empty()) continue;
    trace.termination = Termination::BudgetExhausted;
    double avg = it.critique ? it.critique->average : 0.0;
    if (avg > best) {
      best = avg;
      trace.final_index = static_cast<int>(i);
    }
  }
  return trace;
}

}  // namespace synsql
