#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <thread>
#include <vector>

#ifdef SYNSQL_HTTPS_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "synsql/errors.hpp"
#include "synsql/util.hpp"

namespace synsql {

// ============================================================================
// Requests and responses
// ============================================================================

struct ModelRequest {
  std::string system_text;
  std::string user_text;
  double temperature = 0.0;
  std::string model_id;
  int max_output = 4096;
};

struct TokenUsage {
  int64_t prompt_tokens = 0;
  int64_t completion_tokens = 0;
};

struct ModelResponse {
  std::string text;  // unmodified completion payload
  std::optional<TokenUsage> usage;
  std::string backend;
};

/// Temperatures render through %.6g so 0.3 keys identically everywhere.
inline std::string format_temperature(double t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", t);
  return buf;
}

/// Stable replay key for a request. Everything that shapes the completion
/// participates; field order and the separator are frozen, since recorded
/// fixture stores depend on them.
inline std::string fixture_key(const ModelRequest& req) {
  std::string material = req.model_id;
  material += '\x1f';
  material += format_temperature(req.temperature);
  material += '\x1f';
  material += req.system_text;
  material += '\x1f';
  material += req.user_text;
  return to_hex(fnv1a(material));
}

/// Transport-level failure worth retrying (connection loss, 429, 5xx).
/// Everything else fails fast as BackendUnavailable.
struct TransientBackendError : BackendUnavailable {
  using BackendUnavailable::BackendUnavailable;
};

// ============================================================================
// Backends
// ============================================================================

class Backend {
 public:
  virtual ~Backend() = default;
  virtual ModelResponse complete(const ModelRequest& req) = 0;
  virtual std::string name() const = 0;
};

/// Replays recorded completions from a directory of {key, response_text}
/// JSON files. Read-only after load; lock-free thereafter.
class FixtureBackend : public Backend {
 public:
  explicit FixtureBackend(const std::string& dir) : dir_(dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir))
      throw BackendUnavailable("fixture directory not found: " + dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() != ".json") continue;
      std::ifstream in(entry.path());
      nlohmann::json doc;
      try {
        in >> doc;
        store_[doc.at("key").get<std::string>()] =
            doc.at("response_text").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw ParseError("bad fixture file " + entry.path().string() + ": " + e.what());
      }
    }
  }

  ModelResponse complete(const ModelRequest& req) override {
    std::string key = fixture_key(req);
    auto it = store_.find(key);
    if (it == store_.end())
      throw FixtureMiss("no recorded response for key " + key + " (model " + req.model_id +
                        ", temperature " + format_temperature(req.temperature) + ") in " +
                        dir_);
    return {it->second, std::nullopt, name()};
  }

  std::string name() const override { return "fixture"; }
  size_t size() const { return store_.size(); }

 private:
  std::string dir_;
  std::map<std::string, std::string> store_;
};

struct HttpBackendConfig {
  std::string base_url;                        // e.g. http://localhost:8000
  std::string path = "/v1/chat/completions";
  std::string api_key_env;                     // name of the env var holding the key
  int concurrency = 4;                         // in-flight request cap
};

/// Chat-completions JSON POST client. One shape covers the usual endpoints:
/// messages array, temperature, model, bearer-token auth.
class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config)
      : config_(std::move(config)),
        slots_(config_.concurrency > 0 ? config_.concurrency : 1) {}

  const HttpBackendConfig& config() const { return config_; }

  ModelResponse complete(const ModelRequest& req) override {
    const char* key = config_.api_key_env.empty() ? "" : std::getenv(config_.api_key_env.c_str());
    if (!config_.api_key_env.empty() && (!key || !*key))
      throw BackendUnavailable("environment variable " + config_.api_key_env +
                               " is not set; cannot reach " + config_.base_url);

    nlohmann::ordered_json body;
    body["model"] = req.model_id;
    body["messages"] = nlohmann::ordered_json::array();
    if (!req.system_text.empty())
      body["messages"].push_back({{"role", "system"}, {"content", req.system_text}});
    body["messages"].push_back({{"role", "user"}, {"content", req.user_text}});
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_output;

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);

    slots_.acquire();
    auto res = client.Post(config_.path, headers, body.dump(), "application/json");
    slots_.release();

    if (!res)
      throw TransientBackendError("transport failure reaching " + config_.base_url + ": " +
                                  httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
      throw TransientBackendError("endpoint " + config_.base_url + " answered " +
                                  std::to_string(res->status));
    if (res->status != 200)
      throw BackendUnavailable("endpoint " + config_.base_url + " answered " +
                               std::to_string(res->status) + ": " + res->body);

    try {
      auto doc = nlohmann::json::parse(res->body);
      const auto& choice = doc.at("choices").at(0);
      if (choice.value("finish_reason", "") == "length")
        throw BudgetExceeded("completion truncated at max_tokens=" +
                             std::to_string(req.max_output));
      ModelResponse out;
      out.text = choice.at("message").at("content").get<std::string>();
      out.backend = name();
      if (doc.contains("usage")) {
        TokenUsage usage;
        usage.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
        usage.completion_tokens = doc["usage"].value("completion_tokens", 0);
        out.usage = usage;
      }
      return out;
    } catch (const nlohmann::json::exception& e) {
      throw BackendUnavailable("unparseable completion payload from " + config_.base_url +
                               ": " + e.what());
    }
  }

  std::string name() const override { return "http:" + config_.base_url; }

 private:
  HttpBackendConfig config_;
  std::counting_semaphore<256> slots_;
};

/// Wraps another backend and writes a fixture file per completion, so a live
/// run can be replayed offline later.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, std::string dir)
      : inner_(std::move(inner)), dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  ModelResponse complete(const ModelRequest& req) override {
    ModelResponse res = inner_->complete(req);
    std::string key = fixture_key(req);
    nlohmann::ordered_json doc;
    doc["key"] = key;
    doc["response_text"] = res.text;
    doc["model_id"] = req.model_id;
    doc["temperature"] = req.temperature;
    std::lock_guard<std::mutex> lock(mu_);
    std::ofstream out(dir_ + "/" + key + ".json");
    out << doc.dump(1) << "\n";
    return res;
  }

  std::string name() const override { return "recording(" + inner_->name() + ")"; }

 private:
  std::shared_ptr<Backend> inner_;
  std::string dir_;
  std::mutex mu_;
};

// ============================================================================
// Gateway
// ============================================================================

struct TranscriptEntry {
  std::string model_id;
  double temperature;
  std::string system_text;
  std::string user_text;
  std::string response_text;
};

struct EnsembleSlot {
  double temperature;
  std::optional<ModelResponse> response;
  std::string error;  // set when the slot failed
};

/// Front door for all model calls: retry-with-backoff around the backend,
/// ensemble fan-out, and an optional transcript for tests and traces.
/// Nothing outside this header performs network I/O.
class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit Gateway(std::shared_ptr<Backend> backend, Sleeper sleeper = nullptr)
      : backend_(std::move(backend)),
        sleeper_(sleeper ? std::move(sleeper)
                         : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {}

  /// Retries transient failures up to 3 times (1s, 2s, 4s pauses), then gives
  /// up with the last error. Non-transient failures propagate immediately.
  ModelResponse complete(const ModelRequest& req) {
    static constexpr int kRetries = 3;
    for (int attempt = 0;; ++attempt) {
      try {
        ModelResponse res = backend_->complete(req);
        record(req, res);
        return res;
      } catch (const TransientBackendError&) {
        if (attempt >= kRetries) throw;
        sleeper_(std::chrono::milliseconds(1000LL << attempt));
      }
    }
  }

  /// One completion per temperature, in input order. Individual slot failures
  /// are captured so callers can proceed with the successful subset.
  std::vector<EnsembleSlot> complete_ensemble(const ModelRequest& base,
                                              const std::vector<double>& temperatures) {
    if (temperatures.empty())
      throw std::invalid_argument("complete_ensemble needs at least one temperature");
    std::vector<EnsembleSlot> slots;
    size_t failures = 0;
    for (double t : temperatures) {
      EnsembleSlot slot;
      slot.temperature = t;
      ModelRequest req = base;
      req.temperature = t;
      try {
        slot.response = complete(req);
      } catch (const Error& e) {
        slot.error = e.what();
        ++failures;
      }
      slots.push_back(std::move(slot));
    }
    if (failures == temperatures.size())
      throw AllSlotsFailed("every ensemble slot failed; last error: " + slots.back().error);
    return slots;
  }

  std::vector<TranscriptEntry> transcript() const {
    std::lock_guard<std::mutex> lock(mu_);
    return transcript_;
  }
  void clear_transcript() {
    std::lock_guard<std::mutex> lock(mu_);
    transcript_.clear();
  }

  Backend& backend() { return *backend_; }

 private:
  void record(const ModelRequest& req, const ModelResponse& res) {
    std::lock_guard<std::mutex> lock(mu_);
    transcript_.push_back(
        {req.model_id, req.temperature, req.system_text, req.user_text, res.text});
  }

  std::shared_ptr<Backend> backend_;
  Sleeper sleeper_;
  mutable std::mutex mu_;
  std::vector<TranscriptEntry> transcript_;
};

}  // namespace synsql
