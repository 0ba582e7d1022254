#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <sqlite3.h>

#include "synsql/instance.hpp"
#include "synsql/schema.hpp"
#include "synsql/sql_tokens.hpp"
#include "synsql/value.hpp"

namespace synsql {

// ============================================================================
// Connection handling
// ============================================================================

/// RAII wrapper over one sqlite3 handle. Never shared across threads.
class SqliteDb {
 public:
  SqliteDb(const std::string& path, bool read_only) {
    int flags = read_only ? SQLITE_OPEN_READONLY
                          : (SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
    if (sqlite3_open_v2(path.c_str(), &db_, flags, nullptr) != SQLITE_OK) {
      error_ = db_ ? sqlite3_errmsg(db_) : "cannot open database";
      sqlite3_close(db_);
      db_ = nullptr;
    }
  }
  ~SqliteDb() { sqlite3_close(db_); }
  SqliteDb(const SqliteDb&) = delete;
  SqliteDb& operator=(const SqliteDb&) = delete;

  bool ok() const { return db_ != nullptr; }
  const std::string& error() const { return error_; }
  sqlite3* handle() { return db_; }

  bool exec(const std::string& sql) {
    char* msg = nullptr;
    if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &msg) != SQLITE_OK) {
      error_ = msg ? msg : sqlite3_errmsg(db_);
      sqlite3_free(msg);
      return false;
    }
    return true;
  }

 private:
  sqlite3* db_ = nullptr;
  std::string error_;
};

// ============================================================================
// Materialization
// ============================================================================

struct MaterializeResult {
  bool ok = false;
  std::string error;
};

namespace detail {

inline bool bind_cell(sqlite3_stmt* stmt, int pos, const CellValue& v) {
  if (v.is_null()) return sqlite3_bind_null(stmt, pos) == SQLITE_OK;
  if (v.is_integer()) return sqlite3_bind_int64(stmt, pos, v.as_integer()) == SQLITE_OK;
  if (v.is_real()) return sqlite3_bind_double(stmt, pos, v.as_real()) == SQLITE_OK;
  if (v.is_boolean()) return sqlite3_bind_int64(stmt, pos, v.as_boolean() ? 1 : 0) == SQLITE_OK;
  const std::string& s = v.as_text();
  return sqlite3_bind_text(stmt, pos, s.data(), static_cast<int>(s.size()),
                           SQLITE_TRANSIENT) == SQLITE_OK;
}

}  // namespace detail

/// Create a database file at `path` from DDL plus instance rows. With
/// enforce_fk=false (the default for candidate instances) referential
/// violations load anyway so the critic can observe them; primary keys are
/// always enforced by the engine, so duplicate keys abort either way.
inline MaterializeResult materialize(const std::string& ddl, const SyntheticDatabase& db,
                                     const std::string& path, bool enforce_fk = false) {
  bool in_memory = path == ":memory:" || path.empty();
  auto fail = [&](SqliteDb& conn, const std::string& what) {
    MaterializeResult r;
    r.error = what + ": " + conn.error();
    if (!in_memory) {
      std::error_code ec;
      std::filesystem::remove(path, ec);
    }
    return r;
  };

  if (!in_memory) {
    std::error_code ec;
    std::filesystem::remove(path, ec);
  }
  SqliteDb conn(in_memory ? ":memory:" : path, /*read_only=*/false);
  if (!conn.ok()) return {false, conn.error()};

  if (!conn.exec(enforce_fk ? "PRAGMA foreign_keys=ON" : "PRAGMA foreign_keys=OFF"))
    return fail(conn, "pragma");
  if (!conn.exec("BEGIN")) return fail(conn, "begin");
  if (!conn.exec(ddl)) return fail(conn, "schema");

  for (const auto& table : db.tables) {
    if (table.columns.empty()) continue;
    std::string sql = "INSERT INTO " + quote_ident(table.name) + " (";
    for (size_t i = 0; i < table.columns.size(); ++i)
      sql += (i ? ", " : "") + quote_ident(table.columns[i]);
    sql += ") VALUES (";
    for (size_t i = 0; i < table.columns.size(); ++i) sql += i ? ", ?" : "?";
    sql += ")";

    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(conn.handle(), sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK)
      return fail(conn, "insert into " + table.name);
    for (const auto& row : table.rows) {
      for (size_t i = 0; i < row.size() && i < table.columns.size(); ++i)
        detail::bind_cell(stmt, static_cast<int>(i + 1), row[i]);
      int rc = sqlite3_step(stmt);
      if (rc != SQLITE_DONE) {
        std::string msg = sqlite3_errmsg(conn.handle());
        sqlite3_finalize(stmt);
        MaterializeResult r;
        r.error = "insert into " + table.name + ": " + msg;
        if (!in_memory) {
          std::error_code ec;
          std::filesystem::remove(path, ec);
        }
        return r;
      }
      sqlite3_reset(stmt);
      sqlite3_clear_bindings(stmt);
    }
    sqlite3_finalize(stmt);
  }
  if (!conn.exec("COMMIT")) return fail(conn, "commit");
  return {true, ""};
}

// ============================================================================
// Execution
// ============================================================================

struct ResultTable {
  std::vector<std::string> columns;
  std::vector<Row> rows;
  bool truncated = false;
};

struct ExecutionOutcome {
  enum class Status { Ok, SqlError, Timeout, DbUnloadable };
  Status status = Status::SqlError;
  ResultTable table;
  std::string error;

  bool ok() const { return status == Status::Ok; }
  const char* status_name() const {
    switch (status) {
      case Status::Ok: return "ok";
      case Status::SqlError: return "sql_error";
      case Status::Timeout: return "timeout";
      default: return "db_unloadable";
    }
  }
};

struct ExecutionLimits {
  std::chrono::milliseconds timeout{30000};
  size_t row_cap = 100000;
};

/// Run one read-only query against a materialized database file. The row cap
/// marks the result truncated (comparisons then treat it as incomparable);
/// a wall-clock deadline aborts runaway queries via the progress handler.
inline ExecutionOutcome execute(const std::string& db_file, const std::string& sql,
                                const ExecutionLimits& limits = {}) {
  ExecutionOutcome out;
  SqliteDb conn(db_file, /*read_only=*/true);
  if (!conn.ok()) {
    out.status = ExecutionOutcome::Status::DbUnloadable;
    out.error = conn.error();
    return out;
  }

  using Clock = std::chrono::steady_clock;
  auto deadline = Clock::now() + limits.timeout;
  sqlite3_progress_handler(
      conn.handle(), 1000,
      [](void* p) -> int { return Clock::now() > *static_cast<Clock::time_point*>(p); },
      &deadline);

  sqlite3_stmt* stmt = nullptr;
  if (sqlite3_prepare_v2(conn.handle(), sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
    out.status = ExecutionOutcome::Status::SqlError;
    out.error = sqlite3_errmsg(conn.handle());
    sqlite3_finalize(stmt);
    return out;
  }
  if (!stmt) {
    out.status = ExecutionOutcome::Status::SqlError;
    out.error = "empty statement";
    return out;
  }

  int ncols = sqlite3_column_count(stmt);
  for (int i = 0; i < ncols; ++i) {
    const char* name = sqlite3_column_name(stmt, i);
    out.table.columns.push_back(name ? name : "");
  }

  int rc;
  while ((rc = sqlite3_step(stmt)) == SQLITE_ROW) {
    if (out.table.rows.size() >= limits.row_cap) {
      out.table.truncated = true;
      break;
    }
    Row row;
    for (int i = 0; i < ncols; ++i) {
      switch (sqlite3_column_type(stmt, i)) {
        case SQLITE_INTEGER:
          row.push_back(CellValue::integer(sqlite3_column_int64(stmt, i)));
          break;
        case SQLITE_FLOAT:
          row.push_back(CellValue::real(sqlite3_column_double(stmt, i)));
          break;
        case SQLITE_NULL:
          row.push_back(CellValue::null());
          break;
        default: {
          const unsigned char* text = sqlite3_column_text(stmt, i);
          row.push_back(CellValue::text(text ? reinterpret_cast<const char*>(text) : ""));
          break;
        }
      }
    }
    out.table.rows.push_back(std::move(row));
  }
  if (rc == SQLITE_ROW || rc == SQLITE_DONE) {
    out.status = ExecutionOutcome::Status::Ok;
  } else if (rc == SQLITE_INTERRUPT || Clock::now() > deadline) {
    out.status = ExecutionOutcome::Status::Timeout;
    out.error = "query exceeded time limit";
  } else {
    out.status = ExecutionOutcome::Status::SqlError;
    out.error = sqlite3_errmsg(conn.handle());
  }
  sqlite3_finalize(stmt);
  return out;
}

// ============================================================================
// Result comparison
// ============================================================================

/// True iff the query has ORDER BY at parenthesis depth zero. ORDER BY inside
/// a subquery does not constrain the outer result's row order.
inline bool is_order_sensitive(const std::string& sql) {
  auto tokens = scan_sql(sql);
  for (size_t i = 0; i + 1 < tokens.size(); ++i)
    if (tokens[i].depth == 0 && tokens[i].kind == SqlToken::Kind::Identifier &&
        iequals(tokens[i].text, "order") &&
        tokens[i + 1].kind == SqlToken::Kind::Identifier &&
        iequals(tokens[i + 1].text, "by"))
      return true;
  return false;
}

namespace detail {

/// Canonical comparison key for one cell. Reals round to 6 significant digits
/// (keeping equality transitive, unlike pairwise epsilon); integral reals
/// within exact-int64 range collapse onto the integer key so 25 and 25.0
/// compare equal. Text drops trailing whitespace only.
inline std::string cell_key(const CellValue& v) {
  if (v.is_null()) return "N";
  if (v.is_text()) return "T:" + std::string(rtrim(v.as_text()));
  int64_t as_int = 0;
  bool integral = false;
  if (v.is_integer()) {
    as_int = v.as_integer();
    integral = true;
  } else if (v.is_boolean()) {
    as_int = v.as_boolean() ? 1 : 0;
    integral = true;
  } else {
    double d = v.as_real();
    if (std::isfinite(d) && std::nearbyint(d) == d && std::fabs(d) <= 9007199254740992.0) {
      as_int = static_cast<int64_t>(d);
      integral = true;
    }
  }
  if (integral) return "I:" + std::to_string(as_int);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "R:%.6g", v.as_real());
  return buf;
}

inline std::string row_key(const Row& row) {
  std::string key;
  for (const auto& cell : row) {
    key += cell_key(cell);
    key += '\x1f';
  }
  return key;
}

}  // namespace detail

/// Benchmark-standard result equivalence: arity must match, labels are
/// ignored, rows compare as a sequence when order-sensitive and as a multiset
/// otherwise. Truncated tables are incomparable and never equal.
inline bool results_equal(const ResultTable& a, const ResultTable& b, bool order_sensitive) {
  if (a.truncated || b.truncated) return false;
  if (a.columns.size() != b.columns.size()) return false;
  if (a.rows.size() != b.rows.size()) return false;
  std::vector<std::string> ka, kb;
  ka.reserve(a.rows.size());
  kb.reserve(b.rows.size());
  for (const auto& row : a.rows) ka.push_back(detail::row_key(row));
  for (const auto& row : b.rows) kb.push_back(detail::row_key(row));
  if (!order_sensitive) {
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
  }
  return ka == kb;
}

}  // namespace synsql
