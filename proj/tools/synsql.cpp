// Command-line front end: synthesize benchmark instances, evaluate
// predictions against them, recheck stored instances, and re-render report
// tables. Every config field can come from a config file, a dedicated flag,
// or a generic --set key=value override, applied in that order.

#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "synsql/runner.hpp"

using namespace synsql;

namespace {

struct CliState {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;  // applied in order
  bool quiet = false;

  RunConfig build() const {
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    for (const auto& [key, value] : overrides) {
      if (key == "mode" && fold_case(value) == "vanilla") {
        config.vanilla = true;
        continue;
      }
      if (key == "mode") config.vanilla = false;
      apply_config_override(config, key, value);
    }
    return config;
  }
};

/// Register the shared configuration surface on a subcommand. Each flag
/// records an override so precedence follows the order flags were given.
void add_config_options(CLI::App* cmd, CliState& state) {
  cmd->add_option("--config", state.config_path, "config file (TOML-style or JSON)");
  auto push = [&state](const std::string& key) {
    return [&state, key](const std::string& value) {
      state.overrides.emplace_back(key, value);
    };
  };
  cmd->add_option_function<std::string>(
      "--mode", push("mode"),
      "full | vanilla | no-expansion | no-ensemble-expansion | full-schema | oracle");
  cmd->add_option_function<std::string>("--dataset", push("dataset"),
                                        "spider | bird | spider2-sqlite");
  cmd->add_option_function<std::string>("--questions", push("questions"),
                                        "benchmark question list (JSON)");
  cmd->add_option_function<std::string>("--tables", push("tables"),
                                        "schema descriptor file (JSON)");
  cmd->add_option_function<std::string>("--db-dir", push("db_dir"),
                                        "directory of original database files");
  cmd->add_option_function<std::string>("--run-dir", push("run_dir"), "run directory");
  cmd->add_option_function<std::string>("--threshold", push("threshold"),
                                        "critic acceptance threshold");
  cmd->add_option_function<std::string>("--max-iterations", push("max_iterations"),
                                        "refinement budget per question");
  cmd->add_option_function<std::string>("--rows-per-table", push("rows_per_table"),
                                        "rows requested per table");
  cmd->add_option_function<std::string>("--workers", push("workers"),
                                        "parallel question workers");
  cmd->add_option_function<std::string>("--model", push("model"),
                                        "model id for all three roles");
  cmd->add_option_function<std::string>("--fixture-dir", push("fixture_dir"),
                                        "replay recorded completions from this directory");
  cmd->add_option_function<std::string>("--record-dir", push("record_dir"),
                                        "record live completions into this directory");
  cmd->add_option_function<std::string>("--base-url", push("base_url"),
                                        "chat-completions endpoint base URL");
  cmd->add_option_function<std::vector<std::string>>(
      "--set",
      [&state](const std::vector<std::string>& pairs) {
        for (const auto& pair : pairs) {
          auto eq = pair.find('=');
          if (eq == std::string::npos)
            throw CLI::ValidationError("--set expects key=value, got: " + pair);
          state.overrides.emplace_back(pair.substr(0, eq), pair.substr(eq + 1));
        }
      },
      "override any config key (repeatable)");
  cmd->add_flag("--quiet", state.quiet, "suppress per-question progress");
}

std::shared_ptr<Backend> make_backend(const RunConfig& config) {
  std::shared_ptr<Backend> backend;
  if (!config.fixture_dir.empty()) {
    backend = std::make_shared<FixtureBackend>(config.fixture_dir);
  } else {
    HttpBackendConfig http;
    http.base_url = config.base_url;
    http.path = config.api_path;
    http.api_key_env = config.api_key_env;
    http.concurrency = config.concurrency;
    backend = std::make_shared<HttpBackend>(http);
  }
  if (!config.record_dir.empty())
    backend = std::make_shared<RecordingBackend>(backend, config.record_dir);
  return backend;
}

std::vector<Question> load_corpus(const RunConfig& config) {
  if (config.questions_path.empty())
    throw ConfigError("no question file configured (--questions)");
  return load_questions(config.questions_path);
}

SchemaCatalog load_catalog(const RunConfig& config) {
  if (config.tables_path.empty())
    throw ConfigError("no schema descriptor configured (--tables)");
  return SchemaCatalog::from_descriptor(config.tables_path, config.db_dir);
}

int cmd_synthesize(const CliState& state) {
  RunConfig config = state.build();
  config.validate();
  auto questions = load_corpus(config);
  auto catalog = load_catalog(config);
  for (const auto& q : questions)
    if (!catalog.contains(q.db_id))
      throw ConfigError("question " + q.question_id + " references unknown db_id " +
                        q.db_id);

  Gateway gateway(make_backend(config));
  Runner runner(gateway, catalog, config);
  auto results = runner.run(questions, state.quiet);

  size_t completed = 0, skipped = 0, failed = 0, valid = 0, produced = 0;
  for (const auto& r : results) {
    if (r.status == RunStatus::Completed) ++completed;
    if (r.status == RunStatus::Skipped) ++skipped;
    if (r.status == RunStatus::Failed) ++failed;
    if (r.produced) ++produced;
    if (r.valid) ++valid;
  }
  std::cout << "synthesized " << completed << ", resumed " << skipped << ", failed "
            << failed << " of " << results.size() << " questions; " << valid << "/"
            << produced << " instances structurally valid\n";
  std::cout << "run directory: " << config.run_dir << "\n";
  return failed == 0 ? 0 : 1;
}

int cmd_evaluate(const CliState& state) {
  RunConfig config = state.build();
  auto questions = load_corpus(config);
  auto catalog = load_catalog(config);

  std::map<std::string, std::map<std::string, std::string>> predictions;
  for (const auto& [system, path] : config.predictions) {
    try {
      predictions[system] = load_predictions(path);
    } catch (const ParseError& e) {
      std::cerr << "warning: skipping system " << system << ": " << e.what() << "\n";
    }
  }

  auto eval = evaluate_run(catalog, questions, config.run_dir, predictions, config);
  emit_report(eval.verdicts, eval.report, config, config.run_dir);
  std::cout << summary_tsv(eval.report, config);
  std::cerr << "wrote " << config.run_dir << "/report.json, summary.tsv, summary.md\n";
  return 0;
}

int cmd_validate(const CliState& state) {
  RunConfig config = state.build();
  auto questions = load_corpus(config);
  auto catalog = load_catalog(config);

  auto summary = validate_run(catalog, config.run_dir, questions);
  std::cout << "instances produced: " << summary.produced << "\n";
  std::cout << "structurally valid: " << summary.valid << "\n";
  if (auto rate = summary.rate()) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *rate);
    std::cout << "validity rate: " << buf << "%\n";
  } else {
    std::cout << "validity rate: n/a\n";
  }
  if (!summary.violation_histogram.empty()) {
    std::cout << "violations:\n";
    for (const auto& [kind, count] : summary.violation_histogram)
      std::cout << "  " << kind << ": " << count << "\n";
  }
  return 0;
}

int cmd_report(const CliState& state) {
  RunConfig config = state.build();
  auto path = std::filesystem::path(config.run_dir) / "report.json";
  auto doc = read_json_file(path);
  if (!doc) throw Error("no readable report at " + path.string() + "; run evaluate first");

  SummaryView view = SummaryView::from_json(*doc);
  auto write_file = [&](const char* name, const std::string& content) {
    std::ofstream out(std::filesystem::path(config.run_dir) / name);
    if (!out) throw Error(std::string("cannot write ") + name);
    out << content;
  };
  write_file("summary.tsv", summary_tsv(view));
  write_file("summary.md", summary_markdown(view));
  std::cout << summary_tsv(view);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"question-conditioned synthetic database benchmark pipeline"};
  app.require_subcommand(1);

  CliState state;
  auto* synthesize =
      app.add_subcommand("synthesize", "generate synthetic instances for a corpus");
  add_config_options(synthesize, state);

  auto* evaluate =
      app.add_subcommand("evaluate", "score prediction files against a finished run");
  add_config_options(evaluate, state);
  evaluate->add_option_function<std::vector<std::string>>(
      "--predictions",
      [&state](const std::vector<std::string>& pairs) {
        for (const auto& pair : pairs) {
          auto eq = pair.find('=');
          if (eq == std::string::npos)
            throw CLI::ValidationError("--predictions expects system=path, got: " + pair);
          state.overrides.emplace_back("predictions." + pair.substr(0, eq),
                                       pair.substr(eq + 1));
        }
      },
      "system=path prediction file (repeatable)");

  auto* validate =
      app.add_subcommand("validate", "recheck stored instances against their schemas");
  add_config_options(validate, state);

  auto* report = app.add_subcommand("report", "re-render summary tables from report.json");
  add_config_options(report, state);

  CLI11_PARSE(app, argc, argv);

  try {
    if (synthesize->parsed()) return cmd_synthesize(state);
    if (evaluate->parsed()) return cmd_evaluate(state);
    if (validate->parsed()) return cmd_validate(state);
    if (report->parsed()) return cmd_report(state);
  } catch (const std::exception& e) {
    std::cerr << "synsql: error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
