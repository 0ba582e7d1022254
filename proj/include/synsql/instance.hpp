#pragma once

#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synsql/schema.hpp"
#include "synsql/value.hpp"

namespace synsql {

/// One table's synthesized contents: column order fixed, rows uniform arity.
struct TableData {
  std::string name;
  std::vector<std::string> columns;
  std::vector<Row> rows;
};

/// A candidate database instance. Tables follow schema order; every row
/// matches its table's column list, and every name resolves in the governing
/// reduced schema. Enforced by postprocessing, asserted by validate().
struct SyntheticDatabase {
  std::string instance_id;
  std::vector<TableData> tables;

  const TableData* find_table(std::string_view name) const {
    for (const auto& t : tables)
      if (iequals(t.name, name)) return &t;
    return nullptr;
  }

  size_t total_rows() const {
    size_t n = 0;
    for (const auto& t : tables) n += t.rows.size();
    return n;
  }

  void validate(const ReducedSchema& reduced) const {
    for (const auto& t : tables) {
      const Table* st = reduced.base->find_table(t.name);
      if (!st || !reduced.table_selected(t.name))
        throw SchemaIntegrityError("instance table " + t.name + " not in reduced schema");
      for (const auto& c : t.columns)
        if (!reduced.contains({t.name, c}))
          throw SchemaIntegrityError("instance column " + t.name + "." + c +
                                     " not in reduced schema");
      for (const auto& row : t.rows)
        if (row.size() != t.columns.size())
          throw SchemaIntegrityError("row arity " + std::to_string(row.size()) +
                                     " != " + std::to_string(t.columns.size()) +
                                     " in table " + t.name);
    }
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json doc;
    doc["instance_id"] = instance_id;
    doc["tables"] = nlohmann::ordered_json::array();
    for (const auto& t : tables) {
      nlohmann::ordered_json table;
      table["name"] = t.name;
      table["columns"] = t.columns;
      auto rows = nlohmann::ordered_json::array();
      for (const auto& row : t.rows) {
        auto r = nlohmann::ordered_json::array();
        for (const auto& cell : row) r.push_back(cell.to_json());
        rows.push_back(std::move(r));
      }
      table["rows"] = std::move(rows);
      doc["tables"].push_back(std::move(table));
    }
    return doc;
  }

  static SyntheticDatabase from_json(const nlohmann::json& doc) {
    SyntheticDatabase db;
    try {
      db.instance_id = doc.value("instance_id", "");
      for (const auto& table : doc.at("tables")) {
        TableData t;
        t.name = table.at("name").get<std::string>();
        for (const auto& c : table.at("columns")) t.columns.push_back(c.get<std::string>());
        for (const auto& row : table.at("rows")) {
          Row r;
          for (const auto& cell : row) r.push_back(CellValue::from_json(cell));
          t.rows.push_back(std::move(r));
        }
        db.tables.push_back(std::move(t));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed instance document: ") + e.what());
    }
    return db;
  }

  /// Pipe-delimited rendering for judge prompts and diagnostics.
  std::string render() const {
    std::ostringstream out;
    for (const auto& t : tables) {
      out << "### " << t.name << "\n";
      for (size_t i = 0; i < t.columns.size(); ++i)
        out << (i ? " | " : "") << t.columns[i];
      out << "\n";
      for (const auto& row : t.rows) {
        for (size_t i = 0; i < row.size(); ++i)
          out << (i ? " | " : "") << row[i].repr();
        out << "\n";
      }
      out << "\n";
    }
    return out.str();
  }
};

}  // namespace synsql
