#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sqlite3.h>
#include <nlohmann/json.hpp>

#include "synsql/errors.hpp"
#include "synsql/sql_tokens.hpp"
#include "synsql/util.hpp"

namespace synsql {

// ============================================================================
// Types
// ============================================================================

/// Storage class a column's declared type folds into. Folding is substring
/// based, mirroring how the storage engine assigns affinity, so synthesized
/// values coerce the same way in memory and on disk.
enum class Affinity { Integer, Real, Text, DateLike, Boolean, Unknown };

inline Affinity fold_affinity(std::string_view declared) {
  std::string t = fold_case(declared);
  auto has = [&](const char* s) { return t.find(s) != std::string::npos; };
  if (has("int")) return Affinity::Integer;
  if (has("char") || has("text") || has("clob")) return Affinity::Text;
  if (has("real") || has("floa") || has("doub") || has("num") || has("dec")) return Affinity::Real;
  if (has("date") || has("time")) return Affinity::DateLike;
  if (has("bool")) return Affinity::Boolean;
  return Affinity::Unknown;
}

inline const char* affinity_name(Affinity a) {
  switch (a) {
    case Affinity::Integer: return "INTEGER";
    case Affinity::Real: return "REAL";
    case Affinity::Text: return "TEXT";
    case Affinity::DateLike: return "DATE";
    case Affinity::Boolean: return "BOOLEAN";
    default: return "";
  }
}

/// Case-insensitive reference to a column; keeps the original spelling.
struct ColumnRef {
  std::string table;
  std::string column;

  std::string key() const { return fold_case(table) + "\x1f" + fold_case(column); }
  std::string display() const { return table + "." + column; }

  friend bool operator==(const ColumnRef& a, const ColumnRef& b) {
    return iequals(a.table, b.table) && iequals(a.column, b.column);
  }
  friend bool operator<(const ColumnRef& a, const ColumnRef& b) { return a.key() < b.key(); }
};

struct Column {
  std::string name;
  Affinity declared_type = Affinity::Unknown;
  bool is_primary_key = false;
  bool is_nullable = true;
};

struct ForeignKey {
  ColumnRef from;
  ColumnRef to;
  std::string display() const { return from.display() + " -> " + to.display(); }
};

struct Table {
  std::string name;
  std::vector<Column> columns;

  const Column* find_column(std::string_view col) const {
    for (const auto& c : columns)
      if (iequals(c.name, col)) return &c;
    return nullptr;
  }
  std::vector<std::string> primary_key() const {
    std::vector<std::string> pk;
    for (const auto& c : columns)
      if (c.is_primary_key) pk.push_back(c.name);
    return pk;
  }
};

/// Full relational schema: ordered tables, ordered columns, FK edges.
/// Immutable after construction; validate() is called by every loader.
struct Schema {
  std::string name;
  std::vector<Table> tables;
  std::vector<ForeignKey> foreign_keys;

  const Table* find_table(std::string_view table) const {
    for (const auto& t : tables)
      if (iequals(t.name, table)) return &t;
    return nullptr;
  }

  const Column* find_column(const ColumnRef& ref) const {
    const Table* t = find_table(ref.table);
    return t ? t->find_column(ref.column) : nullptr;
  }

  size_t total_column_count() const {
    size_t n = 0;
    for (const auto& t : tables) n += t.columns.size();
    return n;
  }

  std::vector<ColumnRef> all_columns() const {
    std::vector<ColumnRef> refs;
    for (const auto& t : tables)
      for (const auto& c : t.columns) refs.push_back({t.name, c.name});
    return refs;
  }

  void validate() const {
    std::set<std::string> seen_tables;
    for (const auto& t : tables) {
      if (!seen_tables.insert(fold_case(t.name)).second)
        throw SchemaIntegrityError("duplicate table name: " + t.name);
      std::set<std::string> seen_cols;
      for (const auto& c : t.columns)
        if (!seen_cols.insert(fold_case(c.name)).second)
          throw SchemaIntegrityError("duplicate column " + c.name + " in table " + t.name);
    }
    for (const auto& fk : foreign_keys) {
      if (!find_column(fk.from))
        throw SchemaIntegrityError("foreign key " + fk.display() + " has unknown source column");
      if (!find_column(fk.to))
        throw SchemaIntegrityError("foreign key " + fk.display() + " has unknown target column");
      if (fk.from == fk.to)
        throw SchemaIntegrityError("foreign key " + fk.display() + " loops on itself");
    }
  }
};

enum class Provenance { Core, Expansion, Closure };

inline const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Core: return "core";
    case Provenance::Expansion: return "expansion";
    default: return "closure";
  }
}

/// A selected, relationally closed subset of a Schema. Selected tables always
/// carry their full primary key, and any FK between two selected tables keeps
/// both endpoint columns so integrity stays satisfiable for the synthesizer.
struct ReducedSchema {
  const Schema* base = nullptr;
  std::string base_name;
  std::map<std::string, ColumnRef> selected;        // folded key -> original spelling
  std::map<std::string, Provenance> provenance;

  bool contains(const ColumnRef& ref) const { return selected.count(ref.key()) > 0; }

  bool table_selected(std::string_view table) const {
    std::string prefix = fold_case(table) + "\x1f";
    auto it = selected.lower_bound(prefix);
    return it != selected.end() && it->first.compare(0, prefix.size(), prefix) == 0;
  }

  /// Selected columns of one table, in schema column order.
  std::vector<const Column*> columns_of(const Table& t) const {
    std::vector<const Column*> out;
    for (const auto& c : t.columns)
      if (contains({t.name, c.name})) out.push_back(&c);
    return out;
  }

  /// Tables with at least one selected column, in schema order.
  std::vector<const Table*> tables() const {
    std::vector<const Table*> out;
    for (const auto& t : base->tables)
      if (table_selected(t.name)) out.push_back(&t);
    return out;
  }

  size_t size() const { return selected.size(); }

  void validate() const {
    for (const auto& [key, ref] : selected)
      if (!base->find_column(ref))
        throw SchemaIntegrityError("selected column not in schema: " + ref.display());
    for (const auto* t : tables())
      for (const auto& pk : t->primary_key())
        if (!contains({t->name, pk}))
          throw SchemaIntegrityError("selected table " + t->name + " missing key column " + pk);
    for (const auto& fk : base->foreign_keys)
      if (table_selected(fk.from.table) && table_selected(fk.to.table))
        if (!contains(fk.from) || !contains(fk.to))
          throw SchemaIntegrityError("selection breaks foreign key " + fk.display());
  }
};

// ============================================================================
// Relational closure
// ============================================================================

/// Minimal superset of `selected` with complete primary keys and both
/// endpoints of every FK between selected tables. Added columns carry
/// provenance=closure; the table set never grows, only the column set.
inline ReducedSchema close_relationally(const Schema& schema,
                                        const std::map<std::string, ColumnRef>& selected,
                                        const std::map<std::string, Provenance>& provenance) {
  ReducedSchema out;
  out.base = &schema;
  out.base_name = schema.name;
  for (const auto& [key, ref] : selected) {
    const Column* col = schema.find_column(ref);
    if (!col)
      throw SchemaIntegrityError("cannot close over unknown column " + ref.display());
    const Table* t = schema.find_table(ref.table);
    ColumnRef canonical{t->name, col->name};
    out.selected[canonical.key()] = canonical;
    auto it = provenance.find(key);
    out.provenance[canonical.key()] =
        it != provenance.end() ? it->second : Provenance::Core;
  }

  auto add_closure = [&](const ColumnRef& ref) {
    auto [it, inserted] = out.selected.emplace(ref.key(), ref);
    if (inserted) out.provenance[ref.key()] = Provenance::Closure;
    return inserted;
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& t : schema.tables) {
      if (!out.table_selected(t.name)) continue;
      for (const auto& pk : t.primary_key())
        changed |= add_closure({t.name, pk});
    }
    for (const auto& fk : schema.foreign_keys) {
      if (!out.table_selected(fk.from.table) || !out.table_selected(fk.to.table)) continue;
      const Column* from = schema.find_column(fk.from);
      const Column* to = schema.find_column(fk.to);
      changed |= add_closure({schema.find_table(fk.from.table)->name, from->name});
      changed |= add_closure({schema.find_table(fk.to.table)->name, to->name});
    }
  }
  return out;
}

inline ReducedSchema close_relationally(const Schema& schema,
                                        const std::vector<ColumnRef>& selected,
                                        Provenance default_provenance = Provenance::Core) {
  std::map<std::string, ColumnRef> sel;
  std::map<std::string, Provenance> prov;
  for (const auto& ref : selected) {
    sel[ref.key()] = ref;
    prov[ref.key()] = default_provenance;
  }
  return close_relationally(schema, sel, prov);
}

inline ReducedSchema full_selection(const Schema& schema) {
  return close_relationally(schema, schema.all_columns(), Provenance::Core);
}

// ============================================================================
// DDL emission
// ============================================================================

inline std::string quote_ident(std::string_view name) {
  std::string out = "\"";
  for (char c : name) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

/// CREATE TABLE script for the schema, restricted to `reduced` when given.
/// FK clauses are emitted only for edges whose endpoints both survive, so the
/// script never contains a dangling REFERENCES.
inline std::string ddl_for(const Schema& schema, const ReducedSchema* reduced = nullptr) {
  std::ostringstream out;
  for (const auto& t : schema.tables) {
    std::vector<const Column*> cols;
    if (reduced) {
      cols = reduced->columns_of(t);
      if (cols.empty()) continue;
    } else {
      for (const auto& c : t.columns) cols.push_back(&c);
    }

    out << "CREATE TABLE " << quote_ident(t.name) << " (\n";
    std::vector<std::string> lines;
    for (const auto* c : cols) {
      std::string line = "  " + quote_ident(c->name);
      const char* type = affinity_name(c->declared_type);
      if (*type) line += std::string(" ") + type;
      if (!c->is_nullable) line += " NOT NULL";
      lines.push_back(std::move(line));
    }
    std::vector<std::string> pk;
    for (const auto* c : cols)
      if (c->is_primary_key) pk.push_back(quote_ident(c->name));
    if (!pk.empty()) {
      std::string line = "  PRIMARY KEY (";
      for (size_t i = 0; i < pk.size(); ++i) line += (i ? ", " : "") + pk[i];
      lines.push_back(line + ")");
    }
    for (const auto& fk : schema.foreign_keys) {
      if (!iequals(fk.from.table, t.name)) continue;
      if (reduced) {
        if (!reduced->contains(fk.from) || !reduced->contains(fk.to)) continue;
      }
      lines.push_back("  FOREIGN KEY (" + quote_ident(fk.from.column) + ") REFERENCES " +
                      quote_ident(fk.to.table) + "(" + quote_ident(fk.to.column) + ")");
    }
    for (size_t i = 0; i < lines.size(); ++i)
      out << lines[i] << (i + 1 < lines.size() ? "," : "") << "\n";
    out << ");\n";
  }
  return out.str();
}

// ============================================================================
// Descriptor ingestion
// ============================================================================

namespace detail {

inline Schema schema_from_descriptor(const nlohmann::json& entry) {
  Schema schema;
  try {
    schema.name = entry.value("db_id", "schema");
    const auto& table_names = entry.contains("table_names_original")
                                  ? entry.at("table_names_original")
                                  : entry.at("table_names");
    const auto& column_names = entry.contains("column_names_original")
                                   ? entry.at("column_names_original")
                                   : entry.at("column_names");
    const auto& column_types = entry.at("column_types");

    for (const auto& name : table_names)
      schema.tables.push_back({name.get<std::string>(), {}});

    // Global column index -> (table index, column position); entry 0 is the
    // "*" pseudo-column with table index -1.
    std::vector<std::pair<int, int>> column_slots;
    for (size_t i = 0; i < column_names.size(); ++i) {
      int tidx = column_names[i].at(0).get<int>();
      std::string cname = column_names[i].at(1).get<std::string>();
      if (tidx < 0) {
        column_slots.emplace_back(-1, -1);
        continue;
      }
      if (tidx >= static_cast<int>(schema.tables.size()))
        throw SchemaIntegrityError("column " + cname + " references unknown table index " +
                                   std::to_string(tidx));
      Column col;
      col.name = cname;
      if (i < column_types.size())
        col.declared_type = fold_affinity(column_types[i].get<std::string>());
      column_slots.emplace_back(tidx, static_cast<int>(schema.tables[tidx].columns.size()));
      schema.tables[tidx].columns.push_back(std::move(col));
    }

    auto resolve = [&](int idx) -> ColumnRef {
      if (idx < 0 || idx >= static_cast<int>(column_slots.size()) ||
          column_slots[idx].first < 0)
        throw SchemaIntegrityError("column index " + std::to_string(idx) +
                                   " out of range in " + schema.name);
      auto [tidx, cpos] = column_slots[idx];
      return {schema.tables[tidx].name, schema.tables[tidx].columns[cpos].name};
    };
    auto resolve_named = [&](const std::string& spec) -> ColumnRef {
      auto dot = spec.find('.');
      if (dot == std::string::npos)
        throw ParseError("foreign key endpoint '" + spec + "' is not table.column");
      ColumnRef ref{spec.substr(0, dot), spec.substr(dot + 1)};
      if (!schema.find_table(ref.table))
        throw SchemaIntegrityError("foreign key endpoint " + spec + " names unknown table " +
                                   ref.table);
      if (!schema.find_column(ref))
        throw SchemaIntegrityError("foreign key endpoint " + spec + " names unknown column");
      return ref;
    };

    if (entry.contains("primary_keys")) {
      for (const auto& pk : entry.at("primary_keys")) {
        std::vector<int> indices;
        if (pk.is_array())
          for (const auto& x : pk) indices.push_back(x.get<int>());
        else
          indices.push_back(pk.get<int>());
        for (int idx : indices) {
          resolve(idx);  // range check
          auto [tidx, cpos] = column_slots[static_cast<size_t>(idx)];
          schema.tables[tidx].columns[cpos].is_primary_key = true;
        }
      }
    }

    if (entry.contains("foreign_keys")) {
      for (const auto& fk : entry.at("foreign_keys")) {
        ForeignKey edge;
        if (fk.at(0).is_string()) {
          edge.from = resolve_named(fk.at(0).get<std::string>());
          edge.to = resolve_named(fk.at(1).get<std::string>());
        } else {
          edge.from = resolve(fk.at(0).get<int>());
          edge.to = resolve(fk.at(1).get<int>());
        }
        schema.foreign_keys.push_back(std::move(edge));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed schema descriptor: ") + e.what());
  }
  schema.validate();
  return schema;
}

}  // namespace detail

/// Introspect an on-disk SQLite database into a Schema.
inline Schema introspect_sqlite(const std::string& path) {
  sqlite3* db = nullptr;
  if (sqlite3_open_v2(path.c_str(), &db, SQLITE_OPEN_READONLY, nullptr) != SQLITE_OK) {
    std::string msg = db ? sqlite3_errmsg(db) : "cannot open";
    sqlite3_close(db);
    throw ParseError("cannot open database " + path + ": " + msg);
  }

  auto query = [&](const std::string& sql) {
    std::vector<std::vector<std::string>> rows;
    sqlite3_stmt* stmt = nullptr;
    if (sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr) != SQLITE_OK) {
      std::string msg = sqlite3_errmsg(db);
      sqlite3_close(db);
      throw ParseError("introspection failed on " + path + ": " + msg);
    }
    while (sqlite3_step(stmt) == SQLITE_ROW) {
      std::vector<std::string> row;
      for (int i = 0; i < sqlite3_column_count(stmt); ++i) {
        const unsigned char* text = sqlite3_column_text(stmt, i);
        row.push_back(text ? reinterpret_cast<const char*>(text) : "");
      }
      rows.push_back(std::move(row));
    }
    sqlite3_finalize(stmt);
    return rows;
  };

  Schema schema;
  std::filesystem::path p(path);
  schema.name = p.stem().string();

  for (const auto& row : query("SELECT name FROM sqlite_master WHERE type='table' "
                               "AND name NOT LIKE 'sqlite\\_%' ESCAPE '\\' ORDER BY rowid")) {
    Table table;
    table.name = row[0];
    for (const auto& info : query("PRAGMA table_info(" + quote_ident(row[0]) + ")")) {
      Column col;
      col.name = info[1];
      col.declared_type = fold_affinity(info[2]);
      col.is_nullable = info[3] == "0";
      col.is_primary_key = info[5] != "0";
      table.columns.push_back(std::move(col));
    }
    schema.tables.push_back(std::move(table));
  }
  for (const auto& t : schema.tables) {
    for (const auto& fk : query("PRAGMA foreign_key_list(" + quote_ident(t.name) + ")")) {
      // columns: id, seq, table, from, to, ...; "to" empty means parent PK.
      std::string parent = fk[2], from = fk[3], to = fk[4];
      if (to.empty()) {
        const Table* pt = schema.find_table(parent);
        if (pt) {
          auto pk = pt->primary_key();
          size_t seq = static_cast<size_t>(std::stol(fk[1]));
          if (seq < pk.size()) to = pk[seq];
        }
      }
      if (!to.empty())
        schema.foreign_keys.push_back({{t.name, from}, {parent, to}});
    }
  }
  sqlite3_close(db);
  schema.validate();
  return schema;
}

/// Load every schema in a descriptor file (single object or benchmark array).
inline std::vector<Schema> load_schema_descriptors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read schema descriptor: " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed descriptor " + path + ": " + e.what());
  }
  std::vector<Schema> schemas;
  if (doc.is_array())
    for (const auto& entry : doc) schemas.push_back(detail::schema_from_descriptor(entry));
  else
    schemas.push_back(detail::schema_from_descriptor(doc));
  return schemas;
}

/// Load one schema from a descriptor file or a SQLite database file.
inline Schema load_schema(const std::string& path, const std::string& db_id = "") {
  {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw ParseError("cannot read schema source: " + path);
    char magic[16] = {};
    probe.read(magic, 15);
    if (std::string_view(magic).substr(0, 15) == "SQLite format 3")
      return introspect_sqlite(path);
  }
  auto schemas = load_schema_descriptors(path);
  if (db_id.empty()) {
    if (schemas.size() != 1)
      throw ParseError(path + " holds " + std::to_string(schemas.size()) +
                       " schemas; a db_id is required");
    return std::move(schemas[0]);
  }
  for (auto& s : schemas)
    if (iequals(s.name, db_id)) return std::move(s);
  throw ParseError("schema " + db_id + " not found in " + path);
}

// ============================================================================
// Query analysis
// ============================================================================

/// Distinct schema tables referenced by a query. Tables are recognized after
/// FROM/JOIN, after commas inside a FROM list, and as the qualifier of a
/// dotted reference; alias names simply fail the schema match.
inline std::vector<const Table*> referenced_tables(const std::string& sql,
                                                   const Schema& schema) {
  auto tokens = scan_sql(sql);
  std::set<std::string> candidates;
  bool in_from = false;
  int from_depth = 0;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = tokens[i];
    bool is_kw = tok.kind == SqlToken::Kind::Identifier;
    std::string lower = is_kw ? fold_case(tok.text) : "";
    if (is_kw && (lower == "from" || lower == "join")) {
      if (lower == "from") { in_from = true; from_depth = tok.depth; }
      if (i + 1 < tokens.size() && is_name_token(tokens[i + 1]))
        candidates.insert(fold_case(tokens[i + 1].text));
      continue;
    }
    if (in_from && tok.depth == from_depth && is_kw &&
        (lower == "where" || lower == "group" || lower == "order" || lower == "having" ||
         lower == "limit" || lower == "select" || lower == "union" || lower == "intersect" ||
         lower == "except" || lower == "on"))
      in_from = false;
    if (in_from && tok.kind == SqlToken::Kind::Punct && tok.text == "," &&
        tok.depth == from_depth) {
      if (i + 1 < tokens.size() && is_name_token(tokens[i + 1]))
        candidates.insert(fold_case(tokens[i + 1].text));
    }
    if (is_name_token(tok) && i + 1 < tokens.size() &&
        tokens[i + 1].kind == SqlToken::Kind::Punct && tokens[i + 1].text == ".")
      candidates.insert(fold_case(tok.text));
  }

  std::vector<const Table*> matched;
  for (const auto& t : schema.tables)
    if (candidates.count(fold_case(t.name))) matched.push_back(&t);
  return matched;
}

/// Total column count across all distinct tables referenced by the query;
/// the complexity measure behind the low/medium/high buckets.
inline size_t column_count(const std::string& sql, const Schema& schema) {
  auto tables = referenced_tables(sql, schema);
  if (tables.empty())
    throw AnalysisError("no known table referenced by query against " + schema.name);
  size_t n = 0;
  for (const auto* t : tables) n += t->columns.size();
  return n;
}

/// Columns a query touches, by identifier scan: dotted references resolved
/// through FROM/JOIN aliases, bare identifiers matched against the columns of
/// every referenced table, and '*' expanding to all of them. Recall-oriented.
inline std::vector<ColumnRef> extract_query_columns(const std::string& sql,
                                                    const Schema& schema) {
  auto tables = referenced_tables(sql, schema);
  if (tables.empty())
    throw AnalysisError("no known table referenced by query against " + schema.name);

  auto tokens = scan_sql(sql);
  // Alias map from "FROM t [AS] a" / "JOIN t [AS] a" sequences.
  std::map<std::string, std::string> alias_to_table;
  for (size_t i = 0; i + 1 < tokens.size(); ++i) {
    if (tokens[i].kind != SqlToken::Kind::Identifier) continue;
    std::string lower = fold_case(tokens[i].text);
    if (lower != "from" && lower != "join") continue;
    if (!is_name_token(tokens[i + 1])) continue;
    const Table* t = schema.find_table(tokens[i + 1].text);
    if (!t) continue;
    size_t j = i + 2;
    if (j < tokens.size() && tokens[j].kind == SqlToken::Kind::Identifier &&
        iequals(tokens[j].text, "as"))
      ++j;
    if (j < tokens.size() && is_name_token(tokens[j])) {
      std::string alias = fold_case(tokens[j].text);
      static const std::set<std::string> stop = {"where", "group", "order",  "having",
                                                 "limit", "join",  "on",     "inner",
                                                 "left",  "right", "full",   "cross",
                                                 "union", "intersect", "except"};
      if (!stop.count(alias)) alias_to_table[alias] = fold_case(t->name);
    }
  }
  auto resolve_table = [&](const std::string& name) -> const Table* {
    std::string lower = fold_case(name);
    auto it = alias_to_table.find(lower);
    if (it != alias_to_table.end()) lower = it->second;
    for (const auto* t : tables)
      if (fold_case(t->name) == lower) return t;
    return nullptr;
  };

  std::map<std::string, ColumnRef> found;
  auto add = [&](const Table* t, const Column& c) {
    ColumnRef ref{t->name, c.name};
    found[ref.key()] = ref;
  };
  for (size_t i = 0; i < tokens.size(); ++i) {
    const auto& tok = tokens[i];
    bool dotted = is_name_token(tok) && i + 1 < tokens.size() &&
                  tokens[i + 1].kind == SqlToken::Kind::Punct && tokens[i + 1].text == ".";
    if (dotted) {
      const Table* t = resolve_table(tok.text);
      if (t && i + 2 < tokens.size()) {
        const auto& member = tokens[i + 2];
        if (member.kind == SqlToken::Kind::Punct && member.text == "*") {
          for (const auto& c : t->columns) add(t, c);
        } else if (is_name_token(member)) {
          if (const Column* c = t->find_column(member.text)) add(t, *c);
        }
      }
      ++i;  // skip the dot
      continue;
    }
    if (tok.kind == SqlToken::Kind::Punct && tok.text == "*") {
      bool after_select = i > 0 && tokens[i - 1].kind == SqlToken::Kind::Identifier &&
                          iequals(tokens[i - 1].text, "select");
      if (after_select)
        for (const auto* t : tables)
          for (const auto& c : t->columns) add(t, c);
      continue;
    }
    if (is_name_token(tok)) {
      bool call = i + 1 < tokens.size() && tokens[i + 1].kind == SqlToken::Kind::Punct &&
                  tokens[i + 1].text == "(";
      bool qualified = i > 0 && tokens[i - 1].kind == SqlToken::Kind::Punct &&
                       tokens[i - 1].text == ".";
      if (call || qualified) continue;
      for (const auto* t : tables)
        if (const Column* c = t->find_column(tok.text)) add(t, *c);
    }
  }
  std::vector<ColumnRef> out;
  for (auto& [key, ref] : found) out.push_back(ref);
  return out;
}

}  // namespace synsql
