#include <catch2/catch_amalgamated.hpp>

#include "synsql/util.hpp"
#include "synsql/value.hpp"

using namespace synsql;

TEST_CASE("case folding and comparison") {
  CHECK(fold_case("OwNeR") == "owner");
  CHECK(iequals("OWNER", "owner"));
  CHECK(!iequals("owner", "owners"));
  CHECK(icontains("VARCHAR(32)", "char"));
  CHECK(!icontains("REAL", "int"));
}

TEST_CASE("trimming") {
  CHECK(rtrim("Alton  ") == "Alton");
  CHECK(rtrim("Alton") == "Alton");
  CHECK(rtrim("  ") == "");
  CHECK(trim("  Prague 1 ") == "Prague 1");
  CHECK(rtrim(" leading stays") == " leading stays");
  CHECK(rtrim("tabs\t\n") == "tabs");
}

TEST_CASE("split") {
  auto parts = split("a.b.c", '.');
  REQUIRE(parts.size() == 3);
  CHECK(parts[0] == "a");
  CHECK(parts[2] == "c");
  CHECK(split("", '.').size() == 1);
}

TEST_CASE("numeric literal detection") {
  CHECK(looks_numeric("42"));
  CHECK(looks_numeric(" 3.5 "));
  CHECK(looks_numeric("-1e3"));
  CHECK(looks_numeric("+0.5"));
  CHECK(looks_numeric(".5"));
  CHECK(!looks_numeric(""));
  CHECK(!looks_numeric("abc"));
  CHECK(!looks_numeric("1.2.3"));
  CHECK(!looks_numeric("inf"));
  CHECK(!looks_numeric("nan"));
  CHECK(!looks_numeric("0x10"));
  CHECK(!looks_numeric("12abc"));
  CHECK(!looks_numeric("-"));
}

TEST_CASE("numeric parsing") {
  CHECK(parse_int("42") == 42);
  CHECK(parse_int("-7") == -7);
  CHECK(!parse_int("42.5").has_value());
  CHECK(!parse_int("").has_value());
  CHECK(parse_real("3.5") == 3.5);
  CHECK(parse_real("-1e3") == -1000.0);
  CHECK(!parse_real("abc").has_value());
}

TEST_CASE("double formatting round-trips") {
  CHECK(format_double(1.5) == "1.5");
  CHECK(parse_real(format_double(0.1)).value() == 0.1);
  CHECK(parse_real(format_double(1.0 / 3.0)).value() == 1.0 / 3.0);
}

TEST_CASE("fnv1a is the reference 64-bit variant") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
  CHECK(to_hex(fnv1a("")) == "cbf29ce484222325");
  CHECK(fnv1a("ab") != fnv1a("ba"));
}

TEST_CASE("cell values round-trip through json") {
  for (const CellValue& v :
       {CellValue::null(), CellValue::integer(-5), CellValue::real(2.75),
        CellValue::text("Prague 1"), CellValue::text("Alton  "), CellValue::boolean(true)}) {
    CHECK(CellValue::from_json(v.to_json()) == v);
  }
}

TEST_CASE("cell text preserves case and whitespace exactly") {
  CellValue v = CellValue::text("OWNER  ");
  CHECK(v.as_text() == "OWNER  ");
  CHECK(CellValue::from_json(v.to_json()).as_text() == "OWNER  ");
}

TEST_CASE("nested json inside a cell survives as text") {
  nlohmann::json cell = nlohmann::json::array({1, 2});
  CellValue v = CellValue::from_json(cell);
  REQUIRE(v.is_text());
  CHECK(CellValue::from_json(v.to_json()) == v);
}
