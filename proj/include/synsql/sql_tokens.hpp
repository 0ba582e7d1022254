#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace synsql {

// Lexical scan only: enough structure to find table references, ORDER BY
// placement, and paren depth. Not a SQL parser.
struct SqlToken {
  enum class Kind { Identifier, QuotedIdentifier, Literal, Number, Punct };
  Kind kind;
  std::string text;   // unquoted for QuotedIdentifier
  int depth = 0;      // paren depth at token start
};

inline std::vector<SqlToken> scan_sql(std::string_view sql) {
  std::vector<SqlToken> tokens;
  size_t i = 0, n = sql.size();
  int depth = 0;
  auto push = [&](SqlToken::Kind k, std::string t) {
    tokens.push_back({k, std::move(t), depth});
  };
  while (i < n) {
    char c = sql[i];
    if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
    if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
      while (i < n && sql[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
      i += 2;
      while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
      i = (i + 1 < n) ? i + 2 : n;
      continue;
    }
    if (c == '\'') {
      std::string lit;
      ++i;
      while (i < n) {
        if (sql[i] == '\'' && i + 1 < n && sql[i + 1] == '\'') { lit += '\''; i += 2; continue; }
        if (sql[i] == '\'') { ++i; break; }
        lit += sql[i++];
      }
      push(SqlToken::Kind::Literal, std::move(lit));
      continue;
    }
    if (c == '"' || c == '`' || c == '[') {
      char close = (c == '[') ? ']' : c;
      std::string ident;
      ++i;
      while (i < n) {
        if (sql[i] == close && close != ']' && i + 1 < n && sql[i + 1] == close) {
          ident += close; i += 2; continue;
        }
        if (sql[i] == close) { ++i; break; }
        ident += sql[i++];
      }
      push(SqlToken::Kind::QuotedIdentifier, std::move(ident));
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(sql[i + 1])))) {
      size_t start = i;
      while (i < n && (std::isalnum(static_cast<unsigned char>(sql[i])) || sql[i] == '.' ||
                       ((sql[i] == '+' || sql[i] == '-') && i > start &&
                        (sql[i - 1] == 'e' || sql[i - 1] == 'E'))))
        ++i;
      push(SqlToken::Kind::Number, std::string(sql.substr(start, i - start)));
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = i;
      while (i < n && (std::isalnum(static_cast<unsigned char>(sql[i])) || sql[i] == '_' ||
                       sql[i] == '$'))
        ++i;
      push(SqlToken::Kind::Identifier, std::string(sql.substr(start, i - start)));
      continue;
    }
    if (c == '(') { push(SqlToken::Kind::Punct, "("); ++depth; ++i; continue; }
    if (c == ')') { push(SqlToken::Kind::Punct, ")"); if (depth > 0) --depth; ++i; continue; }
    push(SqlToken::Kind::Punct, std::string(1, c));
    ++i;
  }
  return tokens;
}

inline bool is_name_token(const SqlToken& t) {
  return t.kind == SqlToken::Kind::Identifier || t.kind == SqlToken::Kind::QuotedIdentifier;
}

}  // namespace synsql
