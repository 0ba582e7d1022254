#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <memory>
#include <sstream>

#include "synsql/runner.hpp"

#include "helpers.hpp"

using namespace synsql;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Scripted four-question benchmark over one two-table schema. Questions q1-q2
// are accepted first try, q3 is scored below threshold every round, and q4's
// synthesizer only ever emits an unusable payload.
struct RunnerRig {
  std::filesystem::path root;
  std::string tables_path;
  std::string questions_path;
  std::string db_dir;
  SchemaCatalog catalog;
  std::vector<Question> questions;
  std::shared_ptr<testutil::ScriptedBackend> backend;
  std::unique_ptr<Gateway> gateway;
  RunConfig config;

  explicit RunnerRig(const std::string& stem) {
    root = testutil::temp_dir(stem);
    tables_path = (root / "tables.json").string();
    questions_path = (root / "questions.json").string();
    db_dir = (root / "databases").string();
    std::filesystem::create_directories(db_dir);

    write_descriptor();
    write_questions();
    catalog = SchemaCatalog::from_descriptor(tables_path, db_dir);
    questions = load_questions(questions_path);
    materialize_original();

    backend = std::make_shared<testutil::ScriptedBackend>(
        [this](const ModelRequest& req) { return answer(req); });
    gateway = std::make_unique<Gateway>(backend);

    config.fixture_dir = "unused";
    config.run_dir = (root / "run").string();
    config.workers = 2;
  }

  void write_descriptor() {
    nlohmann::json entry;
    entry["db_id"] = "music";
    entry["table_names_original"] = {"albums", "tracks"};
    entry["column_names_original"] = {
        nlohmann::json::array({-1, "*"}), nlohmann::json::array({0, "id"}),
        nlohmann::json::array({0, "title"}), nlohmann::json::array({0, "year"}),
        nlohmann::json::array({1, "id"}), nlohmann::json::array({1, "album_id"}),
        nlohmann::json::array({1, "name"})};
    entry["column_types"] = {"text", "int", "text", "int", "int", "int", "text"};
    entry["primary_keys"] = {1, 4};
    entry["foreign_keys"] = {nlohmann::json::array({5, 1})};
    std::ofstream(tables_path) << nlohmann::json::array({entry}).dump(2);
  }

  void write_questions() {
    auto q = [](const char* id, const char* text, const char* sql) {
      nlohmann::json doc;
      doc["question_id"] = id;
      doc["question"] = text;
      doc["db_id"] = "music";
      doc["SQL"] = sql;
      return doc;
    };
    nlohmann::json corpus = nlohmann::json::array(
        {q("q1", "List the album titles released before 1970.",
           "SELECT title FROM albums WHERE year < 1970"),
         q("q2", "Show each track with its album title.",
           "SELECT a.title, t.name FROM albums AS a JOIN tracks AS t ON t.album_id = a.id"),
         q("q3", "Name the albums released before 1970.",
           "SELECT title FROM albums WHERE year < 1970"),
         q("q4", "List every track name.", "SELECT name FROM tracks")});
    std::ofstream(questions_path) << corpus.dump(2);
  }

  void materialize_original() {
    const Schema& schema = catalog.resolve("music");
    SyntheticDatabase db;
    db.instance_id = "original";
    db.tables = {
        {"albums",
         {"id", "title", "year"},
         {{CellValue::integer(1), CellValue::text("Kind of Blue"), CellValue::integer(1959)},
          {CellValue::integer(2), CellValue::text("Blue Train"), CellValue::integer(1957)},
          {CellValue::integer(3), CellValue::text("Head Hunters"), CellValue::integer(1973)}}},
        {"tracks",
         {"id", "album_id", "name"},
         {{CellValue::integer(1), CellValue::integer(1), CellValue::text("So What")},
          {CellValue::integer(2), CellValue::integer(1), CellValue::text("Blue in Green")},
          {CellValue::integer(3), CellValue::integer(3), CellValue::text("Chameleon")}}}};
    auto r = materialize(ddl_for(schema), db,
                         (std::filesystem::path(db_dir) / "music.sqlite").string());
    if (!r.ok) throw Error("rig: " + r.error);
  }

  std::string answer(const ModelRequest& req) const {
    const std::string& u = req.user_text;
    bool q2 = u.find("track with its album") != std::string::npos;
    bool q3 = u.find("Name the albums") != std::string::npos;
    bool q4 = u.find("every track name") != std::string::npos;

    if (u.find("Already selected columns:") != std::string::npos) return "{}";
    if (req.system_text.find("schema analyst") != std::string::npos) {
      if (q2) return R"({"albums": ["title"], "tracks": ["name", "album_id"]})";
      if (q4) return R"({"tracks": ["name"]})";
      return R"({"albums": ["title", "year"]})";
    }
    if (req.system_text.find("data synthesizer") != std::string::npos) {
      if (q4) return R"({"pets": []})";
      // Full-schema payload with headers; postprocessing projects it onto
      // whatever reduction the question selected.
      return R"({
        "albums": {"columns": ["id", "title", "year"],
                   "rows": [[1, "Alpha", 1959], [2, "Beta", 1980]]},
        "tracks": {"columns": ["id", "album_id", "name"],
                   "rows": [[1, 1, "One"], [2, 2, "Two"]]}
      })";
    }
    if (req.system_text.find("data-quality judge") != std::string::npos) {
      int score = q3 ? 6 : 9;
      nlohmann::json doc;
      for (const auto& dim : critic_dimensions()) {
        if (dim == "hint_alignment") continue;  // no question carries evidence
        doc[dim] = score;
      }
      doc["feedback"] = q3 ? "needs richer rows" : "";
      return doc.dump();
    }
    throw Error("rig: unexpected request " + req.system_text.substr(0, 40));
  }

  std::vector<QuestionRunResult> run_all() {
    Runner runner(*gateway, catalog, config);
    return runner.run(questions, /*quiet=*/true);
  }

  std::vector<QuestionPaths> layout() const {
    return run_layout(config.run_dir, questions);
  }
};

}  // namespace

// ============================================================================
// Directory layout
// ============================================================================

TEST_CASE("question ids become filesystem-safe directory names") {
  CHECK(sanitize_id("q7") == "q7");
  CHECK(sanitize_id("dev/12:a b") == "dev_12_a_b");
  CHECK(sanitize_id("") == "q");
  CHECK(sanitize_id("..") == "..");

  Question a;
  a.question_id = "a b";
  Question b;
  b.question_id = "a_b";
  auto layout = run_layout("/tmp/r", {a, b});
  CHECK(layout[0].dir.filename() == "a_b");
  CHECK(layout[1].dir.filename() == "a_b_1");
}

TEST_CASE("stored selections rebuild the reduced schema") {
  RunnerRig rig("synsql_runner_rebuild");
  const Schema& schema = rig.catalog.resolve("music");
  ReducedSchema reduced =
      close_relationally(schema, {{"albums", "title"}, {"albums", "year"}});
  std::vector<std::string> names;
  for (const auto& [key, ref] : reduced.selected) names.push_back(ref.display());

  ReducedSchema rebuilt = reduced_from_selection(schema, names);
  CHECK(rebuilt.selected.size() == reduced.selected.size());
  for (const auto& [key, ref] : reduced.selected) CHECK(rebuilt.selected.count(key) == 1);

  CHECK_THROWS_AS(reduced_from_selection(schema, {"albums.colour"}),
                  SchemaIntegrityError);
  CHECK_THROWS_AS(reduced_from_selection(schema, {"no_dot_here"}), SchemaIntegrityError);
}

// ============================================================================
// End-to-end scripted run
// ============================================================================

TEST_CASE("runner materializes accepted questions and records failures") {
  RunnerRig rig("synsql_runner_full");
  auto results = rig.run_all();
  auto layout = rig.layout();

  REQUIRE(results.size() == 4);
  CHECK(results[0].status == RunStatus::Completed);
  CHECK(results[0].termination == "accepted");
  CHECK(results[0].valid);
  CHECK(results[1].status == RunStatus::Completed);
  CHECK(results[2].status == RunStatus::Completed);
  CHECK(results[2].termination == "budget_exhausted");
  CHECK(results[2].produced);
  CHECK(results[3].status == RunStatus::Failed);
  CHECK(results[3].termination == "error");
  CHECK_FALSE(results[3].produced);

  // Ensemble (3) + expansion (1) per question, then per-question refinement:
  // one round for q1/q2, three rejected rounds for q3, three unusable
  // payloads for q4 (the critic is never consulted on those).
  CHECK(rig.backend->calls() == 29);

  for (int i : {0, 1, 2}) {
    CHECK(std::filesystem::exists(layout[i].selection()));
    CHECK(std::filesystem::exists(layout[i].trace()));
    CHECK(std::filesystem::exists(layout[i].final_db()));
    CHECK(std::filesystem::exists(layout[i].iteration(1)));
  }
  CHECK(std::filesystem::exists(layout[2].iteration(3)));
  CHECK_FALSE(std::filesystem::exists(layout[0].iteration(2)));
  CHECK_FALSE(std::filesystem::exists(layout[3].final_db()));
  CHECK(std::filesystem::exists(layout[3].trace()));

  auto trace1 = read_json_file(layout[0].trace());
  REQUIRE(trace1);
  CHECK((*trace1)["config_hash"] == rig.config.config_hash());
  CHECK((*trace1)["mode"] == "full");
  CHECK((*trace1)["termination"] == "accepted");
  CHECK((*trace1)["iteration_count"] == 1);
  CHECK((*trace1)["valid"] == true);
  CHECK((*trace1)["used_fallback"] == false);
  auto selected = (*trace1)["selection"].get<std::vector<std::string>>();
  CHECK(selected == std::vector<std::string>{"albums.id", "albums.title", "albums.year"});

  auto trace3 = read_json_file(layout[2].trace());
  REQUIRE(trace3);
  CHECK((*trace3)["termination"] == "budget_exhausted");
  CHECK((*trace3)["final_index"] == 0);

  auto trace4 = read_json_file(layout[3].trace());
  REQUIRE(trace4);
  CHECK((*trace4)["termination"] == "error");
  CHECK_FALSE((*trace4)["error"].get<std::string>().empty());

  // The materialized instance answers the gold query.
  auto outcome = execute(layout[0].final_db().string(),
                         "SELECT title FROM albums WHERE year < 1970");
  REQUIRE(outcome.ok());
  REQUIRE(outcome.table.rows.size() == 1);
  CHECK(outcome.table.rows[0][0].as_text() == "Alpha");
}

TEST_CASE("resume skips finished questions and retries failures") {
  RunnerRig rig("synsql_runner_resume");
  auto first = rig.run_all();
  auto layout = rig.layout();
  REQUIRE(first[0].status == RunStatus::Completed);

  int calls_after_first = rig.backend->calls();
  std::string trace1 = slurp(layout[0].trace());
  std::string trace3 = slurp(layout[2].trace());

  auto second = rig.run_all();
  CHECK(second[0].status == RunStatus::Skipped);
  CHECK(second[0].termination == "accepted");
  CHECK(second[0].valid);
  CHECK(second[1].status == RunStatus::Skipped);
  CHECK(second[2].status == RunStatus::Skipped);
  CHECK(second[2].termination == "budget_exhausted");
  CHECK(second[3].status == RunStatus::Failed);

  // Only q4 consumed the gateway again: selection 4 + three failed rounds.
  CHECK(rig.backend->calls() == calls_after_first + 7);
  CHECK(slurp(layout[0].trace()) == trace1);
  CHECK(slurp(layout[2].trace()) == trace3);

  SECTION("a config change invalidates completed questions") {
    rig.config.threshold = 7.5;
    auto third = rig.run_all();
    CHECK(third[0].status == RunStatus::Completed);
    CHECK(third[2].status == RunStatus::Completed);
    auto trace = read_json_file(layout[0].trace());
    CHECK((*trace)["config_hash"] == rig.config.config_hash());
  }
}

TEST_CASE("vanilla runs skip selection and critique entirely") {
  RunnerRig rig("synsql_runner_vanilla");
  rig.config.vanilla = true;
  std::vector<Question> solo{rig.questions[0]};

  Runner runner(*rig.gateway, rig.catalog, rig.config);
  auto results = runner.run(solo, /*quiet=*/true);

  REQUIRE(results.size() == 1);
  CHECK(results[0].status == RunStatus::Completed);
  CHECK(results[0].termination == "accepted");
  CHECK(rig.backend->calls() == 1);

  auto reqs = rig.backend->requests();
  REQUIRE(reqs.size() == 1);
  CHECK(reqs[0].system_text.find("data synthesizer") != std::string::npos);
  CHECK(reqs[0].user_text.find("\"year\"") != std::string::npos);
  CHECK(reqs[0].user_text.find("\"album_id\"") != std::string::npos);

  auto layout = run_layout(rig.config.run_dir, solo);
  auto trace = read_json_file(layout[0].trace());
  REQUIRE(trace);
  CHECK((*trace)["mode"] == "full-schema");
  CHECK((*trace)["vanilla"] == true);
  auto iter = read_json_file(layout[0].iteration(1));
  REQUIRE(iter);
  CHECK((*iter)["critique"].is_null());

  // The full-schema instance carries every column of both tables.
  auto outcome = execute(layout[0].final_db().string(),
                         "SELECT t.name FROM tracks t JOIN albums a ON t.album_id = a.id");
  REQUIRE(outcome.ok());
  CHECK(outcome.table.rows.size() == 2);
}

// ============================================================================
// Validity recheck and evaluation over a finished run
// ============================================================================

TEST_CASE("validity recheck audits stored instances from disk") {
  RunnerRig rig("synsql_runner_validate");
  rig.run_all();
  auto layout = rig.layout();

  auto clean = validate_run(rig.catalog, rig.config.run_dir, rig.questions);
  CHECK(clean.produced == 3);
  CHECK(clean.valid == 3);
  CHECK(clean.rate() == Catch::Approx(100.0));
  CHECK(clean.violation_histogram.empty());

  SECTION("an unreadable trace with a materialized file counts invalid") {
    std::ofstream(layout[0].trace()) << "{ not json";
    auto summary = validate_run(rig.catalog, rig.config.run_dir, rig.questions);
    CHECK(summary.produced == 3);
    CHECK(summary.valid == 2);
    CHECK(summary.violation_histogram.at("unreadable") == 1);
  }

  SECTION("a planted orphan shows up in the histogram") {
    auto trace = read_json_file(layout[1].trace());
    REQUIRE(trace);
    // q2's reduced tracks table is (id, album_id, name); retarget one child.
    for (auto& table : (*trace)["final_instance"]["tables"]) {
      if (table["name"] != "tracks") continue;
      table["rows"][0][1] = 99;
    }
    std::ofstream(layout[1].trace()) << trace->dump(2);
    auto summary = validate_run(rig.catalog, rig.config.run_dir, rig.questions);
    CHECK(summary.produced == 3);
    CHECK(summary.valid == 2);
    CHECK(summary.violation_histogram.at("fk") == 1);
  }
}

TEST_CASE("evaluating a run scores predictions and flags pipeline failures") {
  RunnerRig rig("synsql_runner_evaluate");
  rig.run_all();

  std::map<std::string, std::map<std::string, std::string>> predictions;
  for (const auto& q : rig.questions) predictions["gold"][q.question_id] = q.gold_sql;
  predictions["noisy"]["q1"] = "SELECT title FROM albums WHERE year > 2000";

  auto eval = evaluate_run(rig.catalog, rig.questions, rig.config.run_dir, predictions,
                           rig.config);

  REQUIRE(eval.verdicts.size() == 4);
  CHECK(eval.report.n_questions == 4);
  CHECK(eval.report.sr_hits == 3);
  CHECK(eval.report.pipeline_failures == 1);
  CHECK(eval.report.validity_n == 3);
  CHECK(eval.report.validity_hits == 3);

  const auto& gold = eval.report.systems.at("gold");
  CHECK(gold.ex_orig_hits == 4);
  CHECK(gold.ex_syn_hits == 3);
  CHECK(gold.exc_hits == 3);
  CHECK(gold.delta_exc() == Catch::Approx(-25.0));

  const auto& noisy = eval.report.systems.at("noisy");
  CHECK(noisy.ex_orig_hits == 0);
  CHECK(noisy.exc_hits == 0);

  const auto& q4 = eval.verdicts[3];
  CHECK(q4.pipeline_failure);
  CHECK_FALSE(q4.sr);
  CHECK(q4.systems.at("gold").ex_orig);
  CHECK_FALSE(q4.systems.at("gold").exc);

  for (const auto& v : eval.verdicts) CHECK(v.bucket == Bucket::Low);

  SECTION("report files regenerate byte-identically") {
    auto emit = [&](const char* stem) {
      auto again = evaluate_run(rig.catalog, rig.questions, rig.config.run_dir,
                                predictions, rig.config);
      auto dir = testutil::temp_dir(stem);
      emit_report(again.verdicts, again.report, rig.config, dir.string());
      return slurp(dir / "report.json") + "\x1f" + slurp(dir / "summary.tsv") + "\x1f" +
             slurp(dir / "summary.md");
    };
    CHECK(emit("synsql_runner_emit_a") == emit("synsql_runner_emit_b"));
  }

  SECTION("markdown digest regenerates from the stored report alone") {
    auto dir = testutil::temp_dir("synsql_runner_md");
    emit_report(eval.verdicts, eval.report, rig.config, dir.string());
    auto doc = read_json_file(dir / "report.json");
    REQUIRE(doc);
    SummaryView from_disk = SummaryView::from_json(*doc);
    SummaryView from_memory = SummaryView::from(eval.report, rig.config);
    CHECK(summary_markdown(from_disk) == summary_markdown(from_memory));
    CHECK(summary_tsv(from_disk) == summary_tsv(from_memory));
    CHECK(summary_markdown(from_disk).find("| delta_exc |") != std::string::npos);
  }
}
