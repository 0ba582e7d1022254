#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synsql/errors.hpp"
#include "synsql/schema.hpp"
#include "synsql/util.hpp"

namespace synsql {

// ============================================================================
// Questions
// ============================================================================

struct Question {
  std::string question_id;
  std::string question_text;
  std::string evidence;  // auxiliary hint text; empty when the corpus has none
  std::string db_id;
  std::string gold_sql;

  bool has_evidence() const { return !trim(evidence).empty(); }
};

/// Load a benchmark question list. Accepts the common field spellings:
/// "question", optional "evidence", "db_id", and "SQL"/"query"/"sql" for the
/// gold query. Question ids fall back to the list position.
inline std::vector<Question> load_questions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read question file: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed question file " + path + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError(path + " is not a JSON array of questions");

  std::vector<Question> questions;
  for (size_t i = 0; i < doc.size(); ++i) {
    const auto& entry = doc[i];
    Question q;
    if (entry.contains("question_id")) {
      const auto& qid = entry["question_id"];
      q.question_id = qid.is_string() ? qid.get<std::string>()
                                      : std::to_string(qid.get<int64_t>());
    } else {
      q.question_id = std::to_string(i);
    }
    q.question_text = entry.value("question", "");
    q.evidence = entry.value("evidence", "");
    q.db_id = entry.value("db_id", "");
    for (const char* field : {"SQL", "query", "sql", "gold_sql"}) {
      if (entry.contains(field) && entry[field].is_string()) {
        q.gold_sql = entry[field].get<std::string>();
        break;
      }
    }
    if (trim(q.gold_sql).empty())
      throw ParseError("question " + q.question_id + " in " + path + " has no gold SQL");
    if (q.db_id.empty())
      throw ParseError("question " + q.question_id + " in " + path + " has no db_id");
    questions.push_back(std::move(q));
  }
  return questions;
}

// ============================================================================
// Predictions
// ============================================================================

/// Predictions for one system: question_id -> SQL text. Input is either a
/// JSON object map or tab-separated "id<TAB>sql" lines.
inline std::map<std::string, std::string> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read prediction file: " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());

  auto doc = nlohmann::json::parse(content, nullptr, /*allow_exceptions=*/false);
  std::map<std::string, std::string> out;
  if (doc.is_object()) {
    for (auto& [key, value] : doc.items()) {
      if (value.is_string()) out[key] = value.get<std::string>();
    }
    return out;
  }

  for (const auto& line : split(content, '\n')) {
    if (trim(line).empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError("prediction line without a tab separator in " + path + ": " + line);
    out[trim(line.substr(0, tab))] = trim(line.substr(tab + 1));
  }
  return out;
}

// ============================================================================
// Schema catalog
// ============================================================================

/// All schemas of a benchmark, keyed by db_id, with optional paths to the
/// original database files (<db_dir>/<db_id>/<db_id>.sqlite or flat).
class SchemaCatalog {
 public:
  SchemaCatalog() = default;

  static SchemaCatalog from_descriptor(const std::string& tables_path,
                                       const std::string& db_dir = "") {
    SchemaCatalog catalog;
    catalog.db_dir_ = db_dir;
    for (auto& schema : load_schema_descriptors(tables_path)) {
      std::string key = fold_case(schema.name);
      catalog.schemas_[key] = std::move(schema);
    }
    return catalog;
  }

  const Schema& resolve(const std::string& db_id) const {
    auto it = schemas_.find(fold_case(db_id));
    if (it == schemas_.end())
      throw ParseError("unknown db_id: " + db_id);
    return it->second;
  }

  bool contains(const std::string& db_id) const {
    return schemas_.count(fold_case(db_id)) > 0;
  }

  /// Path to the original database file for a db_id, if one exists on disk.
  std::optional<std::string> original_db_path(const std::string& db_id) const {
    if (db_dir_.empty()) return std::nullopt;
    namespace fs = std::filesystem;
    for (const char* ext : {".sqlite", ".db", ".sqlite3"}) {
      fs::path nested = fs::path(db_dir_) / db_id / (db_id + ext);
      if (fs::exists(nested)) return nested.string();
      fs::path flat = fs::path(db_dir_) / (db_id + ext);
      if (fs::exists(flat)) return flat.string();
    }
    return std::nullopt;
  }

  size_t size() const { return schemas_.size(); }

 private:
  std::map<std::string, Schema> schemas_;
  std::string db_dir_;
};

}  // namespace synsql
