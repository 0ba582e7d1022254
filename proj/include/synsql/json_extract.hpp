#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "synsql/errors.hpp"
#include "synsql/schema.hpp"
#include "synsql/util.hpp"

namespace synsql {

// Model output is unreliable: sometimes clean JSON, sometimes fenced,
// sometimes buried in prose. Parsing goes strict to lenient and never throws.

namespace detail {

inline std::optional<nlohmann::json> try_parse(const std::string& text) {
  auto doc = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded()) return std::nullopt;
  return doc;
}

/// Longest balanced {...} or [...] span, string-aware, starting at `open`.
inline std::optional<std::string> balanced_span(const std::string& text, size_t start) {
  char open = text[start];
  char close = open == '{' ? '}' : ']';
  int depth = 0;
  bool in_string = false;
  for (size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == open) ++depth;
    else if (c == close && --depth == 0) return text.substr(start, i - start + 1);
  }
  return std::nullopt;
}

}  // namespace detail

/// Best-effort JSON recovery: strict parse, then fenced code blocks, then the
/// largest balanced object/array substring. Absent result means no JSON.
inline std::optional<nlohmann::json> extract_json(const std::string& raw) {
  std::string text = trim(raw);
  if (auto doc = detail::try_parse(text)) return doc;

  // Fenced blocks, with or without a language tag.
  size_t pos = 0;
  while ((pos = text.find("```", pos)) != std::string::npos) {
    size_t body = text.find('\n', pos);
    if (body == std::string::npos) break;
    size_t end = text.find("```", body);
    if (end == std::string::npos) break;
    if (auto doc = detail::try_parse(trim(text.substr(body, end - body)))) return doc;
    pos = end + 3;
  }

  // Balanced substrings, longest candidates first.
  std::vector<std::string> candidates;
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{' && text[i] != '[') continue;
    if (auto span = detail::balanced_span(text, i)) {
      candidates.push_back(std::move(*span));
      // Skip past this span's opener; nested openers are covered by it.
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
  for (const auto& c : candidates)
    if (auto doc = detail::try_parse(c)) return doc;
  return std::nullopt;
}

/// As extract_json, but unrecoverable text is an error. The snippet in the
/// message keeps critic-retry diagnostics readable.
inline nlohmann::json require_json(const std::string& raw) {
  if (auto doc = extract_json(raw)) return std::move(*doc);
  std::string snippet = trim(raw).substr(0, 120);
  throw ParseError("no JSON document found in model output: \"" + snippet + "\"");
}

// ============================================================================
// Column-selection responses
// ============================================================================

struct ParsedSelection {
  std::vector<ColumnRef> accepted;   // schema-resolved, deduplicated
  std::vector<std::string> rejected; // spellings that matched nothing
};

/// Parse a column-selection completion against a schema. Accepts a JSON
/// object {table: [columns]}, a JSON array of "table.column" strings, or a
/// line-based table.column fallback. Unknown names are logged, not fatal.
inline ParsedSelection parse_selection(const std::string& raw, const Schema& schema) {
  ParsedSelection out;
  std::set<std::string> seen;
  auto add = [&](const std::string& table, const std::string& column) {
    ColumnRef ref{table, column};
    const Table* t = schema.find_table(table);
    const Column* c = t ? t->find_column(column) : nullptr;
    if (!c) {
      out.rejected.push_back(ref.display());
      return;
    }
    ColumnRef canonical{t->name, c->name};
    if (seen.insert(canonical.key()).second) out.accepted.push_back(canonical);
  };
  auto add_dotted = [&](const std::string& spec) {
    auto dot = spec.rfind('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 >= spec.size()) {
      out.rejected.push_back(spec);
      return;
    }
    add(trim(spec.substr(0, dot)), trim(spec.substr(dot + 1)));
  };

  if (auto doc = extract_json(raw)) {
    if (doc->is_object()) {
      for (auto& [table, cols] : doc->items()) {
        if (cols.is_array()) {
          for (const auto& c : cols)
            if (c.is_string()) add(table, c.get<std::string>());
        } else if (cols.is_string()) {
          add(table, cols.get<std::string>());
        }
      }
      return out;
    }
    if (doc->is_array()) {
      bool any_string = false;
      for (const auto& item : *doc) {
        if (item.is_string()) {
          any_string = true;
          add_dotted(item.get<std::string>());
        }
      }
      if (any_string) return out;
    }
  }

  // Line-based fallback: one table.column per line, bullets tolerated.
  for (auto& line : split(raw, '\n')) {
    std::string t = trim(line);
    while (!t.empty() && (t[0] == '-' || t[0] == '*' || t[0] == '"' || t[0] == '`'))
      t = trim(t.substr(1));
    while (!t.empty() && (t.back() == ',' || t.back() == '"' || t.back() == '`'))
      t = trim(t.substr(0, t.size() - 1));
    if (t.empty() || t.find('.') == std::string::npos) continue;
    add_dotted(t);
  }
  return out;
}

}  // namespace synsql
