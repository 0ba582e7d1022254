#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "synsql/config.hpp"
#include "synsql/corpus.hpp"
#include "synsql/critic.hpp"
#include "synsql/db.hpp"
#include "synsql/errors.hpp"
#include "synsql/evaluator.hpp"
#include "synsql/selector.hpp"
#include "synsql/structure.hpp"

namespace synsql {

// ============================================================================
// Run directory layout
// ============================================================================

inline std::string sanitize_id(const std::string& id) {
  std::string out;
  for (char c : id) {
    bool keep = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                (c >= '0' && c <= '9') || c == '.' || c == '_' || c == '-';
    out.push_back(keep ? c : '_');
  }
  if (out.empty()) out = "q";
  return out;
}

struct QuestionPaths {
  std::filesystem::path dir;

  std::filesystem::path selection() const { return dir / "selection.json"; }
  std::filesystem::path iterations() const { return dir / "iterations"; }
  std::filesystem::path iteration(size_t i) const {
    return iterations() / ("iter_" + std::to_string(i) + ".json");
  }
  std::filesystem::path final_db() const { return dir / "final.sqlite"; }
  std::filesystem::path trace() const { return dir / "trace.json"; }
};

/// Stable per-question directories under <run_dir>/questions. Sanitized ids
/// that collide get positional suffixes, deterministic in corpus order so
/// resumed runs land in the same directories.
inline std::vector<QuestionPaths> run_layout(const std::string& run_dir,
                                             const std::vector<Question>& questions) {
  std::filesystem::path base = std::filesystem::path(run_dir) / "questions";
  std::set<std::string> seen;
  std::vector<QuestionPaths> out;
  for (size_t i = 0; i < questions.size(); ++i) {
    std::string name = sanitize_id(questions[i].question_id);
    if (!seen.insert(fold_case(name)).second) {
      name += "_" + std::to_string(i);
      seen.insert(fold_case(name));
    }
    out.push_back({base / name});
  }
  return out;
}

// ============================================================================
// Per-question pipeline
// ============================================================================

enum class RunStatus { Completed, Skipped, Failed };

inline const char* run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::Skipped: return "skipped";
    default: return "failed";
  }
}

struct QuestionRunResult {
  std::string question_id;
  RunStatus status = RunStatus::Failed;
  std::string termination;  // accepted | budget_exhausted | error | ""
  bool produced = false;    // a final instance exists on disk
  bool valid = false;       // and passes the structural audit
  std::string error;
};

inline std::optional<nlohmann::json> read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  auto doc = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) return std::nullopt;
  return doc;
}

inline void write_json_file(const std::filesystem::path& path,
                            const nlohmann::ordered_json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

/// A question is complete when an earlier run under the same config hash
/// finished it successfully. Failed questions are retried on resume.
inline bool question_complete(const QuestionPaths& paths, const std::string& config_hash) {
  auto trace = read_json_file(paths.trace());
  if (!trace || trace->value("config_hash", "") != config_hash) return false;
  if (!trace->value("error", std::string{}).empty()) return false;
  if (trace->value("termination", "") == "error") return false;
  return std::filesystem::exists(paths.final_db());
}

class Runner {
 public:
  Runner(Gateway& gateway, const SchemaCatalog& catalog, const RunConfig& config)
      : gateway_(gateway), catalog_(catalog), config_(config) {}

  /// Select, refine, and materialize one question into its directory. Every
  /// failure is caught and recorded in trace.json; the caller only sees the
  /// status.
  QuestionRunResult run_question(const Question& question, const QuestionPaths& paths) {
    QuestionRunResult result;
    result.question_id = question.question_id;
    std::string hash = config_.config_hash();

    if (question_complete(paths, hash)) {
      auto trace = read_json_file(paths.trace());
      result.status = RunStatus::Skipped;
      result.termination = trace->value("termination", "");
      result.produced = true;
      result.valid = trace->value("valid", false);
      return result;
    }

    std::error_code ec;
    std::filesystem::create_directories(paths.iterations(), ec);

    nlohmann::ordered_json trace_doc;
    trace_doc["question_id"] = question.question_id;
    trace_doc["db_id"] = question.db_id;
    trace_doc["config_hash"] = hash;
    trace_doc["vanilla"] = config_.vanilla;

    try {
      const Schema& schema = catalog_.resolve(question.db_id);
      SelectionMode mode = config_.vanilla ? SelectionMode::FullSchema : config_.mode;
      trace_doc["mode"] = selection_mode_name(mode);

      SchemaSelector selector(gateway_, config_);
      SelectionTrace selection = selector.select(question, schema, mode);
      write_json_file(paths.selection(), selection.to_json());
      trace_doc["used_fallback"] = selection.used_fallback;

      RefinementTrace refinement = refine_loop(gateway_, question, selection.final, config_);
      for (size_t i = 0; i < refinement.iterations.size(); ++i)
        write_json_file(paths.iteration(i + 1), refinement.iterations[i].to_json());
      trace_doc["termination"] = termination_name(refinement.termination);
      trace_doc["final_index"] = refinement.final_index;
      trace_doc["iteration_count"] = refinement.iterations.size();
      result.termination = termination_name(refinement.termination);

      if (refinement.termination == Termination::Error) {
        const auto& last = refinement.iterations.back();
        trace_doc["error"] = last.error.empty() ? "all iterations failed" : last.error;
        write_json_file(paths.trace(), trace_doc);
        result.error = trace_doc["error"].get<std::string>();
        return result;
      }

      const IterationRecord& chosen = refinement.final_iteration();
      auto mat = materialize(ddl_for(schema, &selection.final), chosen.database,
                             paths.final_db().string());
      if (!mat.ok) throw Error("materializing final instance: " + mat.error);

      std::vector<std::string> selected;
      for (const auto& [key, ref] : selection.final.selected)
        selected.push_back(ref.display());
      std::sort(selected.begin(), selected.end());
      trace_doc["selection"] = selected;
      trace_doc["valid"] = chosen.structural.valid();
      trace_doc["structural"] = chosen.structural.to_json();
      trace_doc["final_instance"] = chosen.database.to_json();
      write_json_file(paths.trace(), trace_doc);

      result.status = RunStatus::Completed;
      result.produced = true;
      result.valid = chosen.structural.valid();
      return result;
    } catch (const std::exception& e) {
      trace_doc["error"] = e.what();
      if (!trace_doc.contains("termination")) trace_doc["termination"] = "error";
      std::error_code ignore;
      std::filesystem::remove(paths.final_db(), ignore);
      try {
        write_json_file(paths.trace(), trace_doc);
      } catch (const std::exception&) {
        // The directory itself is unwritable; the status still records it.
      }
      result.termination = trace_doc["termination"].get<std::string>();
      result.error = e.what();
      return result;
    }
  }

  /// Worker pool over the corpus. Results line up with the input order.
  std::vector<QuestionRunResult> run(const std::vector<Question>& questions,
                                     bool quiet = false) {
    auto layout = run_layout(config_.run_dir, questions);
    std::filesystem::create_directories(std::filesystem::path(config_.run_dir));
    nlohmann::ordered_json config_doc;
    config_doc["config"] = config_.to_json();
    config_doc["config_hash"] = config_.config_hash();
    write_json_file(std::filesystem::path(config_.run_dir) / "config.json", config_doc);

    std::vector<QuestionRunResult> results(questions.size());
    std::atomic<size_t> next{0};
    std::atomic<size_t> done{0};
    std::mutex log_mu;

    auto worker = [&]() {
      while (true) {
        size_t i = next.fetch_add(1);
        if (i >= questions.size()) return;
        results[i] = run_question(questions[i], layout[i]);
        size_t finished = done.fetch_add(1) + 1;
        if (!quiet) {
          std::lock_guard<std::mutex> lock(log_mu);
          std::cerr << "[" << finished << "/" << questions.size() << "] "
                    << questions[i].question_id << " "
                    << run_status_name(results[i].status);
          if (!results[i].termination.empty())
            std::cerr << " (" << results[i].termination << ")";
          if (!results[i].error.empty()) std::cerr << ": " << results[i].error;
          std::cerr << "\n";
        }
      }
    };

    size_t width = std::min<size_t>(std::max(1, config_.workers), questions.size());
    if (width <= 1) {
      worker();
    } else {
      std::vector<std::thread> threads;
      for (size_t i = 0; i < width; ++i) threads.emplace_back(worker);
      for (auto& t : threads) t.join();
    }
    return results;
  }

 private:
  Gateway& gateway_;
  const SchemaCatalog& catalog_;
  RunConfig config_;
};

// ============================================================================
// Validity recheck
// ============================================================================

/// Rebuild the reduced schema a stored selection describes. The stored set is
/// already relationally closed, so re-closing it reproduces the original.
inline ReducedSchema reduced_from_selection(const Schema& schema,
                                            const std::vector<std::string>& names) {
  std::vector<ColumnRef> refs;
  for (const auto& name : names) {
    bool resolved = false;
    for (size_t dot = name.find('.'); dot != std::string::npos;
         dot = name.find('.', dot + 1)) {
      const Table* table = schema.find_table(name.substr(0, dot));
      if (!table) continue;
      const Column* column = table->find_column(name.substr(dot + 1));
      if (!column) continue;
      refs.push_back({table->name, column->name});
      resolved = true;
      break;
    }
    if (!resolved) throw SchemaIntegrityError("stored selection names unknown column " + name);
  }
  if (refs.empty()) return full_selection(schema);
  return close_relationally(schema, refs);
}

struct RecheckedInstance {
  bool produced = false;   // the run claims a final instance
  bool parse_ok = false;   // its stored form loads back
  StructuralReport report; // recomputed audit (when parse_ok)

  bool valid() const { return produced && parse_ok && report.valid(); }
};

/// Recompute the structural audit of a stored final instance from its
/// trace.json, trusting nothing but the files on disk. Corrupt stored state
/// counts as an invalid instance rather than a missing one.
inline RecheckedInstance recheck_question(const SchemaCatalog& catalog,
                                          const QuestionPaths& paths) {
  RecheckedInstance out;
  auto trace = read_json_file(paths.trace());
  if (!trace) {
    out.produced = std::filesystem::exists(paths.final_db());
    return out;
  }
  if (!trace->contains("final_instance")) {
    out.produced = std::filesystem::exists(paths.final_db());
    return out;
  }
  out.produced = true;
  try {
    const Schema& schema = catalog.resolve(trace->value("db_id", ""));
    std::vector<std::string> names =
        trace->value("selection", std::vector<std::string>{});
    ReducedSchema reduced = reduced_from_selection(schema, names);
    SyntheticDatabase db = SyntheticDatabase::from_json((*trace)["final_instance"]);
    out.report = check_structure(db, reduced);
    out.parse_ok = true;
  } catch (const std::exception&) {
    out.parse_ok = false;
  }
  return out;
}

struct ValiditySummary {
  size_t produced = 0;
  size_t valid = 0;
  std::map<std::string, size_t> violation_histogram;

  std::optional<double> rate() const { return percentage(valid, produced); }
};

inline ValiditySummary validate_run(const SchemaCatalog& catalog,
                                    const std::string& run_dir,
                                    const std::vector<Question>& questions) {
  ValiditySummary summary;
  auto layout = run_layout(run_dir, questions);
  for (const auto& paths : layout) {
    RecheckedInstance rechecked = recheck_question(catalog, paths);
    if (!rechecked.produced) continue;
    ++summary.produced;
    if (rechecked.valid()) {
      ++summary.valid;
      continue;
    }
    if (!rechecked.parse_ok) {
      ++summary.violation_histogram["unreadable"];
      continue;
    }
    const auto& r = rechecked.report;
    if (!r.loadable) ++summary.violation_histogram["unloadable"];
    summary.violation_histogram["pk"] += r.pk_violations.size();
    summary.violation_histogram["fk"] += r.fk_violations.size();
    summary.violation_histogram["type"] += r.type_violations.size();
    summary.violation_histogram["empty_table"] += r.empty_tables.size();
  }
  for (auto it = summary.violation_histogram.begin();
       it != summary.violation_histogram.end();) {
    it = it->second == 0 ? summary.violation_histogram.erase(it) : std::next(it);
  }
  return summary;
}

// ============================================================================
// Run evaluation
// ============================================================================

struct RunEvaluation {
  std::vector<QuestionVerdict> verdicts;
  EvaluationReport report;
};

/// Score a finished run directory: execute gold and predictions against the
/// original and synthetic databases, recheck instance validity from stored
/// state, and aggregate.
inline RunEvaluation evaluate_run(
    const SchemaCatalog& catalog, const std::vector<Question>& questions,
    const std::string& run_dir,
    const std::map<std::string, std::map<std::string, std::string>>& predictions,
    const RunConfig& config) {
  RunEvaluation out;
  auto layout = run_layout(run_dir, questions);
  ExecutionLimits limits{std::chrono::milliseconds(config.timeout_ms),
                         static_cast<size_t>(config.row_cap)};

  std::vector<bool> validity;
  for (size_t i = 0; i < questions.size(); ++i) {
    const Question& q = questions[i];
    const Schema& schema = catalog.resolve(q.db_id);
    std::optional<std::string> orig = catalog.original_db_path(q.db_id);
    std::optional<std::string> syn;
    if (std::filesystem::exists(layout[i].final_db()))
      syn = layout[i].final_db().string();
    out.verdicts.push_back(evaluate_question(q, schema, orig, syn, predictions, limits));

    RecheckedInstance rechecked = recheck_question(catalog, layout[i]);
    if (rechecked.produced) validity.push_back(rechecked.valid());
  }
  out.report = aggregate(out.verdicts, validity);
  return out;
}

}  // namespace synsql
