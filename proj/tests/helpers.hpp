#pragma once

// Shared test machinery: temp paths, a SQL-based constraint oracle that
// double-checks check_structure through plain queries, and a randomized
// instance generator with violation planting.

#include <filesystem>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <sqlite3.h>

#include "synsql/gateway.hpp"
#include "synsql/instance.hpp"
#include "synsql/schema.hpp"
#include "synsql/structure.hpp"

namespace testutil {

using namespace synsql;
namespace fs = std::filesystem;

inline fs::path temp_dir(const std::string& stem) {
  fs::path p = fs::temp_directory_path() / stem;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// ============================================================================
// Scripted model backend
// ============================================================================

/// Answers each request through a handler function; the workhorse for
/// pipeline tests. Throw from the handler to simulate failures. Safe to call
/// from several worker threads at once.
class ScriptedBackend : public Backend {
 public:
  using Handler = std::function<std::string(const ModelRequest&)>;

  explicit ScriptedBackend(Handler handler) : handler_(std::move(handler)) {}

  ModelResponse complete(const ModelRequest& req) override {
    {
      std::lock_guard<std::mutex> lock(mu_);
      ++calls_;
      requests_.push_back(req);
    }
    return {handler_(req), std::nullopt, name()};
  }

  std::string name() const override { return "scripted"; }
  int calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
  }
  std::vector<ModelRequest> requests() const {
    std::lock_guard<std::mutex> lock(mu_);
    return requests_;
  }

 private:
  Handler handler_;
  mutable std::mutex mu_;
  int calls_ = 0;
  std::vector<ModelRequest> requests_;
};

/// Gateway whose retry pauses are captured instead of slept.
struct FakeClock {
  std::vector<int64_t> sleeps_ms;
  Gateway::Sleeper sleeper() {
    return [this](std::chrono::milliseconds d) { sleeps_ms.push_back(d.count()); };
  }
};

// ============================================================================
// Constraint summary: the comparable core of a structural report
// ============================================================================

struct ConstraintSummary {
  std::map<std::string, int> pk_duplicates;   // table -> duplicated key tuples
  std::map<std::string, int> fk_orphans;      // edge display -> distinct orphans
  std::set<std::string> empty_tables;

  bool operator==(const ConstraintSummary&) const = default;
};

inline ConstraintSummary summarize(const StructuralReport& report) {
  ConstraintSummary s;
  for (const auto& v : report.pk_violations) s.pk_duplicates[v.table]++;
  for (const auto& v : report.fk_violations) s.fk_orphans[v.edge]++;
  for (const auto& t : report.empty_tables) s.empty_tables.insert(t);
  return s;
}

// ============================================================================
// SQL constraint oracle
// ============================================================================
// Loads the instance into a constraint-free twin of the reduced schema (same
// column type names so storage affinity applies, no PK/FK clauses so nothing
// aborts) and asks SQL directly: GROUP BY ... HAVING COUNT(*) > 1 for
// duplicate keys, NOT EXISTS anti-join for orphans, COUNT(*) for emptiness.

inline bool table_has_column(const TableData& t, const std::string& name) {
  for (const auto& c : t.columns)
    if (iequals(c, name)) return true;
  return false;
}

class SqlOracle {
 public:
  SqlOracle() { sqlite3_open(":memory:", &db_); }
  ~SqlOracle() { sqlite3_close(db_); }

  ConstraintSummary run(const SyntheticDatabase& db, const ReducedSchema& reduced) {
    const Schema& schema = *reduced.base;
    exec("BEGIN");
    for (const auto* table : reduced.tables()) {
      std::string ddl = "CREATE TABLE " + quote_ident(table->name) + " (";
      bool first = true;
      for (const auto* col : reduced.columns_of(*table)) {
        if (!first) ddl += ", ";
        first = false;
        ddl += quote_ident(col->name);
        const char* type = affinity_name(col->declared_type);
        if (*type) ddl += std::string(" ") + type;
      }
      ddl += ")";
      exec(ddl);
    }
    for (const auto& table : db.tables) {
      if (table.columns.empty()) continue;
      std::string sql = "INSERT INTO " + quote_ident(table.name) + " (";
      for (size_t i = 0; i < table.columns.size(); ++i)
        sql += (i ? ", " : "") + quote_ident(table.columns[i]);
      sql += ") VALUES (";
      for (size_t i = 0; i < table.columns.size(); ++i) sql += i ? ", ?" : "?";
      sql += ")";
      sqlite3_stmt* stmt = nullptr;
      sqlite3_prepare_v2(db_, sql.c_str(), -1, &stmt, nullptr);
      for (const auto& row : table.rows) {
        for (size_t i = 0; i < row.size(); ++i) {
          const CellValue& v = row[i];
          int pos = static_cast<int>(i + 1);
          if (v.is_null())
            sqlite3_bind_null(stmt, pos);
          else if (v.is_integer())
            sqlite3_bind_int64(stmt, pos, v.as_integer());
          else if (v.is_real())
            sqlite3_bind_double(stmt, pos, v.as_real());
          else if (v.is_boolean())
            sqlite3_bind_int64(stmt, pos, v.as_boolean() ? 1 : 0);
          else
            sqlite3_bind_text(stmt, pos, v.as_text().c_str(), -1, SQLITE_TRANSIENT);
        }
        sqlite3_step(stmt);
        sqlite3_reset(stmt);
        sqlite3_clear_bindings(stmt);
      }
      sqlite3_finalize(stmt);
    }
    exec("COMMIT");

    ConstraintSummary out;
    for (const auto* table : reduced.tables()) {
      auto pk = table->primary_key();
      const TableData* data = db.find_table(table->name);
      if (!pk.empty() && data && !data->rows.empty()) {
        std::string keys;
        for (size_t i = 0; i < pk.size(); ++i)
          keys += (i ? ", " : "") + quote_ident(pk[i]);
        int dups = scalar("SELECT COUNT(*) FROM (SELECT 1 FROM " +
                          quote_ident(table->name) + " GROUP BY " + keys +
                          " HAVING COUNT(*) > 1)");
        if (dups > 0) out.pk_duplicates[table->name] = dups;
      }
      if (scalar("SELECT COUNT(*) FROM " + quote_ident(table->name)) == 0)
        out.empty_tables.insert(table->name);
    }
    for (const auto& fk : schema.foreign_keys) {
      if (!reduced.table_selected(fk.from.table) || !reduced.table_selected(fk.to.table))
        continue;
      const TableData* child = db.find_table(fk.from.table);
      if (!child || !table_has_column(*child, fk.from.column)) continue;
      int orphans = scalar(
          "SELECT COUNT(*) FROM (SELECT DISTINCT c." + quote_ident(fk.from.column) +
          " FROM " + quote_ident(fk.from.table) + " c WHERE c." +
          quote_ident(fk.from.column) + " IS NOT NULL AND NOT EXISTS (SELECT 1 FROM " +
          quote_ident(fk.to.table) + " p WHERE p." + quote_ident(fk.to.column) + " = c." +
          quote_ident(fk.from.column) + "))");
      if (orphans > 0) out.fk_orphans[fk.display()] = orphans;
    }
    return out;
  }

 private:
  void exec(const std::string& sql) { sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, nullptr); }
  int scalar(const std::string& sql) {
    sqlite3_stmt* stmt = nullptr;
    sqlite3_prepare_v2(db_, sql.c_str(), -1, &stmt, nullptr);
    int v = 0;
    if (sqlite3_step(stmt) == SQLITE_ROW) v = sqlite3_column_int(stmt, 0);
    sqlite3_finalize(stmt);
    return v;
  }
  sqlite3* db_ = nullptr;
};


// ============================================================================
// Randomized instance generation with violation planting
// ============================================================================

struct GeneratedCase {
  Schema schema;
  ReducedSchema reduced;  // reduced.base points at this object's schema member
  SyntheticDatabase instance;
};

/// Two-to-three tables with int or text keys, FK edges between same-affinity
/// columns, and randomly planted duplicate keys, orphan references, nulls,
/// and empty tables. Fills a caller-owned case so the schema address that
/// reduced.base captures stays valid.
inline void generate_instance_case(std::mt19937& rng, GeneratedCase& out) {
  out = GeneratedCase{};
  Schema& s = out.schema;
  s.name = "gen";

  bool text_keys = rng() % 4 == 0;
  Affinity key_type = text_keys ? Affinity::Text : Affinity::Integer;
  s.tables.push_back({"parents",
                      {{"pid", key_type, true, false},
                       {"label", Affinity::Text, false, true},
                       {"score", Affinity::Real, false, true}}});
  s.tables.push_back({"children",
                      {{"cid", Affinity::Integer, true, false},
                       {"parent_ref", key_type, false, true},
                       {"note", Affinity::Text, false, true}}});
  s.foreign_keys.push_back({{"children", "parent_ref"}, {"parents", "pid"}});
  bool third_table = rng() % 2 == 0;
  if (third_table) {
    s.tables.push_back({"tags",
                        {{"tag_a", Affinity::Integer, true, false},
                         {"tag_b", Affinity::Text, true, false},
                         {"weight", Affinity::Real, false, true}}});
  }
  s.validate();
  out.reduced = full_selection(s);

  auto key_cell = [&](int64_t n) {
    return text_keys ? CellValue::text("k" + std::to_string(n)) : CellValue::integer(n);
  };

  SyntheticDatabase& db = out.instance;
  db.instance_id = "case";

  size_t parent_rows = rng() % 6;  // 0 = planted empty table
  TableData parents{"parents", {"pid", "label", "score"}, {}};
  for (size_t r = 0; r < parent_rows; ++r) {
    int64_t pid = static_cast<int64_t>(r);
    if (rng() % 8 == 0 && r > 0) pid = 0;  // duplicate key plant
    parents.rows.push_back({key_cell(pid),
                            CellValue::text("p" + std::to_string(rng() % 3)),
                            rng() % 5 ? CellValue::real(0.5 * (rng() % 7)) : CellValue::null()});
  }
  db.tables.push_back(std::move(parents));

  size_t child_rows = rng() % 7;
  TableData children{"children", {"cid", "parent_ref", "note"}, {}};
  for (size_t r = 0; r < child_rows; ++r) {
    CellValue ref = CellValue::null();
    switch (rng() % 4) {
      case 0: ref = CellValue::null(); break;                        // exempt
      case 1: ref = key_cell(static_cast<int64_t>(rng() % 4)); break;  // may or may not match
      default: ref = key_cell(100 + static_cast<int64_t>(rng() % 2)); break;  // orphan plant
    }
    children.rows.push_back({CellValue::integer(static_cast<int64_t>(r)), ref,
                             CellValue::text("n" + std::to_string(rng() % 4))});
  }
  db.tables.push_back(std::move(children));

  if (third_table && rng() % 3 != 0) {
    TableData tags{"tags", {"tag_a", "tag_b", "weight"}, {}};
    size_t tag_rows = rng() % 4;
    for (size_t r = 0; r < tag_rows; ++r) {
      int64_t a = static_cast<int64_t>(rng() % 3);
      std::string b = rng() % 2 ? "x" : "y";
      tags.rows.push_back({CellValue::integer(a), CellValue::text(b),
                           CellValue::real(1.5 * (rng() % 3))});
    }
    db.tables.push_back(std::move(tags));
  }
  // third_table && rng()%3==0 leaves tags absent: an empty selected table.
}

}  // namespace testutil
