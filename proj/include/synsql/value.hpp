#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "synsql/util.hpp"

namespace synsql {

/// A single database cell: null, integer, real, text, or boolean.
/// Text preserves exact bytes; serialization round-trips losslessly.
class CellValue {
 public:
  CellValue() = default;

  static CellValue null() { return CellValue(); }
  static CellValue integer(int64_t v) { return CellValue(Data(std::in_place_index<1>, v)); }
  static CellValue real(double v) { return CellValue(Data(std::in_place_index<2>, v)); }
  static CellValue text(std::string v) { return CellValue(Data(std::in_place_index<3>, std::move(v))); }
  static CellValue boolean(bool v) { return CellValue(Data(std::in_place_index<4>, v)); }

  bool is_null() const { return data_.index() == 0; }
  bool is_integer() const { return data_.index() == 1; }
  bool is_real() const { return data_.index() == 2; }
  bool is_text() const { return data_.index() == 3; }
  bool is_boolean() const { return data_.index() == 4; }
  bool is_numeric() const { return is_integer() || is_real(); }

  int64_t as_integer() const { return std::get<1>(data_); }
  double as_real() const { return std::get<2>(data_); }
  const std::string& as_text() const { return std::get<3>(data_); }
  bool as_boolean() const { return std::get<4>(data_); }

  double numeric_value() const {
    if (is_integer()) return static_cast<double>(as_integer());
    if (is_boolean()) return as_boolean() ? 1.0 : 0.0;
    return as_real();
  }

  bool operator==(const CellValue& other) const { return data_ == other.data_; }

  nlohmann::ordered_json to_json() const {
    switch (data_.index()) {
      case 1: return as_integer();
      case 2: return as_real();
      case 3: return as_text();
      case 4: return as_boolean();
      default: return nullptr;
    }
  }

  static CellValue from_json(const nlohmann::json& j) {
    if (j.is_null()) return null();
    if (j.is_boolean()) return boolean(j.get<bool>());
    if (j.is_number_integer() || j.is_number_unsigned()) return integer(j.get<int64_t>());
    if (j.is_number_float()) return real(j.get<double>());
    if (j.is_string()) return text(j.get<std::string>());
    // Arrays/objects inside a cell are kept as their serialized form.
    return text(j.dump());
  }

  /// Display form used in prompts and diagnostics.
  std::string repr() const {
    switch (data_.index()) {
      case 1: return std::to_string(as_integer());
      case 2: return format_double(as_real());
      case 3: return "'" + as_text() + "'";
      case 4: return as_boolean() ? "true" : "false";
      default: return "NULL";
    }
  }

 private:
  using Data = std::variant<std::monostate, int64_t, double, std::string, bool>;
  explicit CellValue(Data d) : data_(std::move(d)) {}
  Data data_;
};

using Row = std::vector<CellValue>;

}  // namespace synsql
