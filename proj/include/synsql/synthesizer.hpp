#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "synsql/config.hpp"
#include "synsql/corpus.hpp"
#include "synsql/gateway.hpp"
#include "synsql/instance.hpp"
#include "synsql/json_extract.hpp"
#include "synsql/structure.hpp"

namespace synsql {

// ============================================================================
// Raw payloads
// ============================================================================

/// One table's contents as the model emitted them, before any cleanup.
struct RawTable {
  std::optional<std::vector<std::string>> columns;  // explicit header, if any
  std::vector<Row> rows;
};

/// The untrusted synthesis output. parsed is absent when no JSON object could
/// be recovered; the refine loop treats that as a zero-score iteration.
struct RawPayload {
  std::string text;
  std::optional<std::map<std::string, RawTable>> parsed;

  bool parse_ok() const { return parsed.has_value(); }
};

// ============================================================================
// Prompt
// ============================================================================

inline ModelRequest build_synthesis_request(const Question& question,
                                            const ReducedSchema& reduced,
                                            const std::string& feedback, int rows_per_table,
                                            const std::string& model_id, double temperature) {
  ModelRequest req;
  req.model_id = model_id;
  req.temperature = temperature;
  req.system_text =
      "You are a relational data synthesizer for a text-to-SQL benchmark. "
      "Given a database schema and a question, you populate every table with "
      "realistic rows such that the question has a non-empty answer on the "
      "resulting database.";

  std::string user;
  user += "Database schema:\n\n" + ddl_for(*reduced.base, &reduced) + "\n";
  user += "Question: " + question.question_text + "\n";
  if (question.has_evidence()) user += "Hint: " + question.evidence + "\n";
  user += "\nGenerate exactly " + std::to_string(rows_per_table) +
          " rows for every table. Vary the values and include boundary cases "
          "(repeated and distinct values, small and large numbers, differing "
          "strings). Keep every primary key unique and make every foreign key "
          "reference an existing parent row. Use values consistent with the "
          "question so that its answer is non-empty.\n";
  user +=
      "\nRespond with a JSON object mapping each table name to an array of "
      "rows, each row an array of values in the exact column order shown "
      "above. Use JSON null for missing values. No commentary.";
  if (!feedback.empty()) {
    user += "\n\nA previous attempt was rejected. Fix these issues:\n" + feedback + "\n";
  }
  req.user_text = user;
  return req;
}

// ============================================================================
// Payload parsing
// ============================================================================

namespace detail {

inline Row row_from_array(const nlohmann::json& arr) {
  Row row;
  for (const auto& cell : arr) row.push_back(CellValue::from_json(cell));
  return row;
}

/// Row-object arrays get a header built from the union of their keys, so
/// differently shaped rows still line up by name.
inline RawTable table_from_row_objects(const nlohmann::json& arr) {
  RawTable out;
  std::vector<std::string> header;
  std::set<std::string> seen;
  for (const auto& item : arr) {
    if (!item.is_object()) continue;
    for (auto& [key, value] : item.items())
      if (seen.insert(fold_case(key)).second) header.push_back(key);
  }
  for (const auto& item : arr) {
    Row row;
    if (item.is_object()) {
      for (const auto& name : header) {
        bool found = false;
        for (auto& [key, value] : item.items()) {
          if (iequals(key, name)) {
            row.push_back(CellValue::from_json(value));
            found = true;
            break;
          }
        }
        if (!found) row.push_back(CellValue::null());
      }
    } else if (item.is_array()) {
      row = row_from_array(item);
    } else {
      row.push_back(CellValue::from_json(item));
    }
    out.rows.push_back(std::move(row));
  }
  out.columns = std::move(header);
  return out;
}

inline std::optional<RawTable> table_from_json(const nlohmann::json& value) {
  if (value.is_array()) {
    bool any_object = std::any_of(value.begin(), value.end(),
                                  [](const nlohmann::json& v) { return v.is_object(); });
    if (any_object) return table_from_row_objects(value);
    RawTable out;
    for (const auto& item : value) {
      if (item.is_array()) out.rows.push_back(row_from_array(item));
      else out.rows.push_back(Row{CellValue::from_json(item)});
    }
    return out;
  }
  if (value.is_object() && value.contains("rows") && value["rows"].is_array()) {
    auto out = table_from_json(value["rows"]);
    if (!out) return std::nullopt;
    if (!out->columns && value.contains("columns") && value["columns"].is_array()) {
      std::vector<std::string> header;
      for (const auto& c : value["columns"])
        if (c.is_string()) header.push_back(c.get<std::string>());
      if (!header.empty()) out->columns = std::move(header);
    }
    return out;
  }
  return std::nullopt;
}

}  // namespace detail

/// Recover a table→rows map from a completion. Accepts positional row arrays,
/// {"columns": [...], "rows": [...]} wrappers, and arrays of row objects.
/// Unrecoverable text keeps parsed absent; per-table garbage is skipped.
inline RawPayload parse_payload(const std::string& text) {
  RawPayload out;
  out.text = text;
  auto doc = extract_json(text);
  if (!doc || !doc->is_object()) return out;

  std::map<std::string, RawTable> tables;
  for (auto& [name, value] : doc->items()) {
    if (auto table = detail::table_from_json(value)) tables[name] = std::move(*table);
  }
  out.parsed = std::move(tables);
  return out;
}

// ============================================================================
// Keyword normalization
// ============================================================================

/// Literals whose exact spelling the question fixes: quoted spans from the
/// question and evidence, plus unquoted right-hand sides of "=" in evidence.
/// First spelling wins on case-insensitive duplicates.
inline std::vector<std::string> question_keywords(const Question& question) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  auto add = [&](const std::string& raw) {
    std::string v = trim(raw);
    if (v.empty()) return;
    if (seen.insert(fold_case(v)).second) out.push_back(v);
  };

  auto scan_quotes = [&](const std::string& text) {
    for (size_t i = 0; i < text.size(); ++i) {
      if (text[i] != '\'' && text[i] != '"') continue;
      auto close = text.find(text[i], i + 1);
      if (close == std::string::npos) break;
      add(text.substr(i + 1, close - i - 1));
      i = close;
    }
  };
  scan_quotes(question.question_text);
  scan_quotes(question.evidence);

  // Unquoted "= value" in evidence: capture up to a comma, semicolon, or
  // newline. Overcapture is harmless (exact-match rewriting only).
  const std::string& ev = question.evidence;
  for (size_t i = 0; i < ev.size(); ++i) {
    if (ev[i] != '=') continue;
    size_t start = i + 1;
    while (start < ev.size() && ev[start] == ' ') ++start;
    if (start >= ev.size() || ev[start] == '\'' || ev[start] == '"') continue;
    size_t end = ev.find_first_of(",;\n", start);
    if (end == std::string::npos) end = ev.size();
    add(ev.substr(start, end - start));
    i = end;
  }
  return out;
}

// ============================================================================
// Postprocessing
// ============================================================================

/// Deterministic cleanup of a parsed payload against the reduced schema:
/// unknown tables and columns dropped, columns reordered to schema order,
/// rows right-padded with nulls or right-truncated to the schema arity,
/// cells folded to column affinity where lossless, then text cells that
/// case-insensitively equal a question literal rewritten to its spelling.
inline SyntheticDatabase postprocess(const RawPayload& raw, const ReducedSchema& reduced,
                                     const Question& question) {
  if (!raw.parse_ok())
    throw ParseError("postprocess needs a parsed payload");

  auto keywords = question_keywords(question);
  SyntheticDatabase db;
  db.instance_id = question.question_id;

  for (const Table* table : reduced.tables()) {
    const RawTable* source = nullptr;
    for (const auto& [name, data] : *raw.parsed) {
      if (iequals(name, table->name)) {
        source = &data;
        break;
      }
    }
    if (!source) continue;

    TableData out;
    out.name = table->name;
    std::vector<const Column*> target = reduced.columns_of(*table);
    for (const auto* col : target) out.columns.push_back(col->name);

    // Header-based source index per target column, or -1 for positional.
    std::vector<int> source_index;
    if (source->columns) {
      for (const auto* col : target) {
        int idx = -1;
        for (size_t i = 0; i < source->columns->size(); ++i) {
          if (iequals((*source->columns)[i], col->name)) {
            idx = static_cast<int>(i);
            break;
          }
        }
        source_index.push_back(idx);
      }
    }

    for (const auto& row : source->rows) {
      Row cooked;
      for (size_t i = 0; i < target.size(); ++i) {
        CellValue cell = CellValue::null();
        if (source->columns) {
          int idx = source_index[i];
          if (idx >= 0 && static_cast<size_t>(idx) < row.size()) cell = row[idx];
        } else if (i < row.size()) {
          cell = row[i];
        }
        bool ok = true;
        cell = detail::coerce_for_affinity(cell, target[i]->declared_type, ok);
        if (cell.is_text()) {
          for (const auto& keyword : keywords) {
            if (iequals(cell.as_text(), keyword)) {
              cell = CellValue::text(keyword);
              break;
            }
          }
        }
        cooked.push_back(std::move(cell));
      }
      out.rows.push_back(std::move(cooked));
    }
    db.tables.push_back(std::move(out));
  }

  if (db.tables.empty())
    throw EmptyDatabase("no table survived postprocessing for question " +
                        question.question_id);
  db.validate(reduced);
  return db;
}

/// Instance back to payload form; feeding it through postprocess again must
/// reproduce the instance exactly (idempotence), and it doubles as the resume
/// path for instances reloaded from disk.
inline RawPayload to_payload(const SyntheticDatabase& db) {
  RawPayload out;
  std::map<std::string, RawTable> tables;
  for (const auto& t : db.tables) {
    RawTable raw;
    raw.columns = t.columns;
    raw.rows = t.rows;
    tables[t.name] = std::move(raw);
  }
  out.parsed = std::move(tables);
  return out;
}

// ============================================================================
// Synthesis
// ============================================================================

struct SynthesisResult {
  SyntheticDatabase database;
  RawPayload payload;
  bool parse_failed = false;  // unparseable completion; database is a sentinel
};

/// One synthesis round. Unparseable output returns an empty sentinel instance
/// for the critic to reject; an empty parsed payload raises EmptyDatabase.
inline SynthesisResult synthesize(Gateway& gateway, const Question& question,
                                  const ReducedSchema& reduced, const std::string& feedback,
                                  const RunConfig& config) {
  ModelRequest req =
      build_synthesis_request(question, reduced, feedback, config.rows_per_table,
                              config.synthesizer_model, config.synthesis_temperature);
  ModelResponse response = gateway.complete(req);

  SynthesisResult out;
  out.payload = parse_payload(response.text);
  if (!out.payload.parse_ok()) {
    out.parse_failed = true;
    out.database.instance_id = question.question_id;
    return out;
  }
  out.database = postprocess(out.payload, reduced, question);
  return out;
}

}  // namespace synsql
