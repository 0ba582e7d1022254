#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synsql/config.hpp"
#include "synsql/corpus.hpp"
#include "synsql/db.hpp"
#include "synsql/errors.hpp"
#include "synsql/schema.hpp"
#include "synsql/structure.hpp"

namespace synsql {

// ============================================================================
// Complexity buckets
// ============================================================================

enum class Bucket { Low, Medium, High, Unknown };

inline const char* bucket_name(Bucket b) {
  switch (b) {
    case Bucket::Low: return "low";
    case Bucket::Medium: return "medium";
    case Bucket::High: return "high";
    default: return "unknown";
  }
}

inline Bucket bucket_for_count(size_t count) {
  if (count <= 15) return Bucket::Low;
  if (count <= 60) return Bucket::Medium;
  return Bucket::High;
}

/// Total column count of the tables a gold query touches, bucketed. Queries
/// whose tables cannot be resolved land in "unknown": counted in overall
/// rates, excluded from bucket breakdowns.
inline Bucket complexity_bucket(const std::string& gold_sql, const Schema& schema) {
  try {
    return bucket_for_count(column_count(gold_sql, schema));
  } catch (const AnalysisError&) {
    return Bucket::Unknown;
  }
}

// ============================================================================
// Verdicts
// ============================================================================

/// Execution outcome boiled down for reporting: status, row count, error.
struct OutcomeSummary {
  std::string status = "missing";
  size_t rows = 0;
  std::string error;

  static OutcomeSummary from(const ExecutionOutcome& outcome) {
    OutcomeSummary out;
    out.status = outcome.status_name();
    out.rows = outcome.table.rows.size();
    out.error = outcome.error;
    return out;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc;
    doc["status"] = status;
    doc["rows"] = rows;
    if (!error.empty()) doc["error"] = error;
    return doc;
  }
};

struct SystemVerdict {
  bool has_prediction = false;
  OutcomeSummary pred_orig;
  OutcomeSummary pred_syn;
  bool ex_orig = false;
  bool ex_syn = false;
  bool exc = false;  // always ex_orig && ex_syn

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc;
    doc["has_prediction"] = has_prediction;
    doc["ex_orig"] = ex_orig;
    doc["ex_syn"] = ex_syn;
    doc["exc"] = exc;
    doc["pred_orig"] = pred_orig.to_json();
    doc["pred_syn"] = pred_syn.to_json();
    return doc;
  }
};

struct QuestionVerdict {
  std::string question_id;
  Bucket bucket = Bucket::Unknown;
  bool sr = false;
  bool pipeline_failure = false;  // no synthetic instance was produced
  OutcomeSummary gold_orig;
  OutcomeSummary gold_syn;
  std::map<std::string, SystemVerdict> systems;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc;
    doc["question_id"] = question_id;
    doc["bucket"] = bucket_name(bucket);
    doc["sr"] = sr;
    doc["pipeline_failure"] = pipeline_failure;
    doc["gold_orig"] = gold_orig.to_json();
    doc["gold_syn"] = gold_syn.to_json();
    doc["systems"] = nlohmann::ordered_json::object();
    for (const auto& [name, verdict] : systems) doc["systems"][name] = verdict.to_json();
    return doc;
  }
};

// ============================================================================
// Per-question evaluation
// ============================================================================

/// Execute gold and predictions on the original and synthetic databases and
/// derive every flag. Either database path may be absent: queries against a
/// missing database score as failures, and a missing synthetic instance also
/// tags the question as a pipeline failure.
inline QuestionVerdict evaluate_question(
    const Question& question, const Schema& schema,
    const std::optional<std::string>& orig_db, const std::optional<std::string>& syn_db,
    const std::map<std::string, std::map<std::string, std::string>>& predictions,
    const ExecutionLimits& limits = {}) {
  QuestionVerdict verdict;
  verdict.question_id = question.question_id;
  verdict.bucket = complexity_bucket(question.gold_sql, schema);
  verdict.pipeline_failure = !syn_db.has_value();

  bool order_sensitive = is_order_sensitive(question.gold_sql);

  std::optional<ExecutionOutcome> gold_orig;
  if (orig_db) {
    gold_orig = execute(*orig_db, question.gold_sql, limits);
    verdict.gold_orig = OutcomeSummary::from(*gold_orig);
  }
  std::optional<ExecutionOutcome> gold_syn;
  if (syn_db) {
    gold_syn = execute(*syn_db, question.gold_sql, limits);
    verdict.gold_syn = OutcomeSummary::from(*gold_syn);
  }
  verdict.sr = gold_syn && gold_syn->ok() && !gold_syn->table.rows.empty();

  for (const auto& [system, preds] : predictions) {
    SystemVerdict sv;
    auto it = preds.find(question.question_id);
    if (it != preds.end()) {
      sv.has_prediction = true;
      const std::string& pred_sql = it->second;
      if (gold_orig) {
        ExecutionOutcome pred = execute(*orig_db, pred_sql, limits);
        sv.pred_orig = OutcomeSummary::from(pred);
        sv.ex_orig = gold_orig->ok() && pred.ok() &&
                     results_equal(pred.table, gold_orig->table, order_sensitive);
      }
      if (gold_syn) {
        ExecutionOutcome pred = execute(*syn_db, pred_sql, limits);
        sv.pred_syn = OutcomeSummary::from(pred);
        sv.ex_syn = gold_syn->ok() && pred.ok() &&
                    results_equal(pred.table, gold_syn->table, order_sensitive);
      }
    }
    sv.exc = sv.ex_orig && sv.ex_syn;
    verdict.systems[system] = sv;
  }
  return verdict;
}

// ============================================================================
// Aggregation
// ============================================================================

inline double round2(double v) { return std::round(v * 100.0) / 100.0; }

inline std::optional<double> percentage(size_t hits, size_t n) {
  if (n == 0) return std::nullopt;
  return round2(100.0 * static_cast<double>(hits) / static_cast<double>(n));
}

struct SystemAggregate {
  size_t n = 0;
  size_t ex_orig_hits = 0;
  size_t ex_syn_hits = 0;
  size_t exc_hits = 0;

  std::optional<double> ex_orig() const { return percentage(ex_orig_hits, n); }
  std::optional<double> ex_syn() const { return percentage(ex_syn_hits, n); }
  std::optional<double> exc() const { return percentage(exc_hits, n); }
  std::optional<double> delta_exc() const {
    auto a = exc();
    auto b = ex_orig();
    if (!a || !b) return std::nullopt;
    return round2(*a - *b);
  }
};

struct BucketAggregate {
  size_t n = 0;
  size_t sr_hits = 0;
  std::map<std::string, SystemAggregate> systems;
};

struct EvaluationReport {
  size_t n_questions = 0;
  size_t sr_hits = 0;
  size_t pipeline_failures = 0;
  size_t validity_n = 0;     // instances actually produced
  size_t validity_hits = 0;  // of those, structurally valid
  std::map<std::string, SystemAggregate> systems;
  std::map<std::string, BucketAggregate> buckets;  // low/medium/high only

  std::optional<double> sr() const { return percentage(sr_hits, n_questions); }
  std::optional<double> validity_rate() const {
    return percentage(validity_hits, validity_n);
  }
};

/// Fold verdicts and per-instance validity flags into aggregates. The EXc
/// upper bound is definitionally guaranteed per question; the aggregate-level
/// assertion guards against future bookkeeping drift.
inline EvaluationReport aggregate(const std::vector<QuestionVerdict>& verdicts,
                                  const std::vector<bool>& validity_flags) {
  EvaluationReport report;
  report.n_questions = verdicts.size();
  report.validity_n = validity_flags.size();
  for (bool valid : validity_flags)
    if (valid) ++report.validity_hits;

  for (const auto& verdict : verdicts) {
    if (verdict.sr) ++report.sr_hits;
    if (verdict.pipeline_failure) ++report.pipeline_failures;
    BucketAggregate* bucket = nullptr;
    if (verdict.bucket != Bucket::Unknown) {
      bucket = &report.buckets[bucket_name(verdict.bucket)];
      ++bucket->n;
      if (verdict.sr) ++bucket->sr_hits;
    }
    for (const auto& [system, sv] : verdict.systems) {
      auto bump = [&](SystemAggregate& agg) {
        ++agg.n;
        if (sv.ex_orig) ++agg.ex_orig_hits;
        if (sv.ex_syn) ++agg.ex_syn_hits;
        if (sv.exc) ++agg.exc_hits;
      };
      bump(report.systems[system]);
      if (bucket) bump(bucket->systems[system]);
    }
  }

  for (const auto& [system, agg] : report.systems) {
    if (agg.exc_hits > agg.ex_orig_hits || agg.exc_hits > agg.ex_syn_hits)
      throw Error("EXc bookkeeping violated its upper bound for system " + system);
  }
  return report;
}

// ============================================================================
// Report emission
// ============================================================================

namespace detail {

inline nlohmann::ordered_json opt_pct(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

/// Competition ranking, 1-based: ties share a rank and the next distinct
/// value skips past them (100, 95, 95, 90 -> 1, 2, 2, 4). Higher is better.
inline std::vector<size_t> rank_descending(const std::vector<double>& values) {
  std::vector<size_t> ranks(values.size(), 1);
  for (size_t i = 0; i < values.size(); ++i)
    for (size_t j = 0; j < values.size(); ++j)
      if (values[j] > values[i]) ++ranks[i];
  return ranks;
}

inline std::string format_pct(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v);
  return buf;
}

}  // namespace detail

/// Deterministic report document: canonical config, aggregates, buckets, and
/// per-question detail. No timestamps, no environment capture; two identical
/// runs serialize byte-identically.
inline nlohmann::ordered_json report_json(const std::vector<QuestionVerdict>& verdicts,
                                          const EvaluationReport& report,
                                          const RunConfig& config) {
  nlohmann::ordered_json doc;
  doc["config"] = config.to_json();
  doc["config_hash"] = config.config_hash();
  doc["n_questions"] = report.n_questions;
  doc["pipeline_failures"] = report.pipeline_failures;

  nlohmann::ordered_json agg;
  agg["sr"] = detail::opt_pct(report.sr());
  agg["validity_rate"] = detail::opt_pct(report.validity_rate());
  agg["validity_n"] = report.validity_n;
  agg["systems"] = nlohmann::ordered_json::object();
  for (const auto& [system, sys] : report.systems) {
    nlohmann::ordered_json s;
    s["n"] = sys.n;
    s["ex_orig"] = detail::opt_pct(sys.ex_orig());
    s["ex_syn"] = detail::opt_pct(sys.ex_syn());
    s["exc"] = detail::opt_pct(sys.exc());
    s["delta_exc"] = detail::opt_pct(sys.delta_exc());
    agg["systems"][system] = std::move(s);
  }
  agg["buckets"] = nlohmann::ordered_json::object();
  for (const char* name : {"low", "medium", "high"}) {
    auto it = report.buckets.find(name);
    if (it == report.buckets.end()) continue;
    nlohmann::ordered_json b;
    b["n"] = it->second.n;
    b["sr"] = detail::opt_pct(percentage(it->second.sr_hits, it->second.n));
    b["systems"] = nlohmann::ordered_json::object();
    for (const auto& [system, sys] : it->second.systems) {
      nlohmann::ordered_json s;
      s["ex_orig"] = detail::opt_pct(sys.ex_orig());
      s["ex_syn"] = detail::opt_pct(sys.ex_syn());
      s["exc"] = detail::opt_pct(sys.exc());
      b["systems"][system] = std::move(s);
    }
    agg["buckets"][name] = std::move(b);
  }
  doc["aggregates"] = std::move(agg);

  doc["questions"] = nlohmann::ordered_json::array();
  for (const auto& verdict : verdicts) doc["questions"].push_back(verdict.to_json());
  return doc;
}

/// The numbers the summary tables are built from, detached from verdicts so
/// tables can be regenerated from a stored report.json without recomputing
/// anything.
struct SummaryView {
  std::string config_hash;
  size_t n_questions = 0;
  std::vector<std::string> systems;
  std::vector<std::optional<double>> ex_orig, ex_syn, exc, delta_exc;  // per system
  std::optional<double> sr;
  std::optional<double> validity_rate;

  static SummaryView from(const EvaluationReport& report, const RunConfig& config) {
    SummaryView view;
    view.config_hash = config.config_hash();
    view.n_questions = report.n_questions;
    for (const auto& [name, agg] : report.systems) {
      view.systems.push_back(name);
      view.ex_orig.push_back(agg.ex_orig());
      view.ex_syn.push_back(agg.ex_syn());
      view.exc.push_back(agg.exc());
      view.delta_exc.push_back(agg.delta_exc());
    }
    view.sr = report.sr();
    view.validity_rate = report.validity_rate();
    return view;
  }

  static SummaryView from_json(const nlohmann::json& doc) {
    auto opt_of = [](const nlohmann::json& v) -> std::optional<double> {
      if (v.is_number()) return v.get<double>();
      return std::nullopt;
    };
    SummaryView view;
    view.config_hash = doc.value("config_hash", "");
    view.n_questions = doc.value("n_questions", size_t{0});
    const auto& agg = doc.at("aggregates");
    view.sr = opt_of(agg.at("sr"));
    view.validity_rate = opt_of(agg.at("validity_rate"));
    for (const auto& [name, sys] : agg.at("systems").items()) {
      view.systems.push_back(name);
      view.ex_orig.push_back(opt_of(sys.at("ex_orig")));
      view.ex_syn.push_back(opt_of(sys.at("ex_syn")));
      view.exc.push_back(opt_of(sys.at("exc")));
      view.delta_exc.push_back(opt_of(sys.at("delta_exc")));
    }
    return view;
  }
};

namespace detail {

/// Format one metric row: values with "(rank)" appended wherever a value is
/// present, ranks computed over the present values only.
inline std::vector<std::string> ranked_cells(const std::vector<std::optional<double>>& values) {
  std::vector<double> present;
  for (const auto& v : values)
    if (v) present.push_back(*v);
  auto ranks = rank_descending(present);
  std::vector<std::string> cells;
  size_t k = 0;
  for (const auto& v : values) {
    std::string cell = format_pct(v);
    if (v) cell += " (" + std::to_string(ranks[k++]) + ")";
    cells.push_back(std::move(cell));
  }
  return cells;
}

}  // namespace detail

/// Summary table, metrics as rows and systems as columns. Ranked rows carry
/// "(rank)" using competition ranking; higher values rank first, which for
/// the delta row puts the most robust system (smallest drop) on top.
inline std::string summary_tsv(const SummaryView& view) {
  std::ostringstream out;
  out << "# config " << view.config_hash << "\tn=" << view.n_questions << "\n";
  out << "metric";
  for (const auto& s : view.systems) out << "\t" << s;
  out << "\n";
  auto row = [&](const std::string& label, const std::vector<std::optional<double>>& values) {
    out << label;
    for (const auto& cell : detail::ranked_cells(values)) out << "\t" << cell;
    out << "\n";
  };
  row("ex_orig", view.ex_orig);
  row("ex_syn", view.ex_syn);
  row("exc", view.exc);
  row("delta_exc", view.delta_exc);
  out << "sr\t" << detail::format_pct(view.sr) << "\n";
  out << "validity_rate\t" << detail::format_pct(view.validity_rate) << "\n";
  return out.str();
}

inline std::string summary_tsv(const EvaluationReport& report, const RunConfig& config) {
  return summary_tsv(SummaryView::from(report, config));
}

/// Markdown digest of the same numbers: the per-system table with the
/// baseline accuracy row and the delta row, then the corpus-wide rates.
inline std::string summary_markdown(const SummaryView& view) {
  std::ostringstream out;
  out << "# Evaluation summary\n\n";
  out << "Config `" << view.config_hash << "`, " << view.n_questions << " questions.\n\n";
  out << "| metric |";
  for (const auto& s : view.systems) out << " " << s << " |";
  out << "\n|---|";
  for (size_t i = 0; i < view.systems.size(); ++i) out << "---|";
  out << "\n";
  auto row = [&](const std::string& label, const std::vector<std::optional<double>>& values) {
    out << "| " << label << " |";
    for (const auto& cell : detail::ranked_cells(values)) out << " " << cell << " |";
    out << "\n";
  };
  row("ex_orig", view.ex_orig);
  row("ex_syn", view.ex_syn);
  row("exc", view.exc);
  row("delta_exc", view.delta_exc);
  out << "\n";
  out << "- success rate: " << detail::format_pct(view.sr) << "\n";
  out << "- validity rate: " << detail::format_pct(view.validity_rate) << "\n";
  return out.str();
}

/// Write report.json, summary.tsv, and summary.md into the run directory.
inline void emit_report(const std::vector<QuestionVerdict>& verdicts,
                        const EvaluationReport& report, const RunConfig& config,
                        const std::string& run_dir) {
  std::filesystem::create_directories(run_dir);
  auto write_file = [&](const char* name, const std::string& content) {
    std::ofstream out(std::filesystem::path(run_dir) / name);
    if (!out) throw Error("cannot write " + std::string(name) + " under " + run_dir);
    out << content;
  };
  write_file("report.json", report_json(verdicts, report, config).dump(2) + "\n");
  SummaryView view = SummaryView::from(report, config);
  write_file("summary.tsv", summary_tsv(view));
  write_file("summary.md", summary_markdown(view));
}

}  // namespace synsql
