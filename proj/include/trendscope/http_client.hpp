#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "trendscope/completion.hpp"

namespace trendscope::llm {

struct HttpOptions {
  std::string endpoint;  // e.g. http://127.0.0.1:8080/v1/complete
  std::string api_key;   // sent as "Authorization: Bearer <key>" when non-empty
  std::string model;
  int timeout_ms = 30000;
  int max_attempts = 3;
  int backoff_base_ms = 250;  // doubles after each failed attempt

  /// Fills endpoint/api_key/model from TREND_LLM_* when they are unset.
  void apply_env() {
    auto env = [](const char* name) -> std::string {
      const char* v = std::getenv(name);
      return v ? v : "";
    };
    if (endpoint.empty()) endpoint = env("TREND_LLM_ENDPOINT");
    if (api_key.empty()) api_key = env("TREND_LLM_API_KEY");
    if (model.empty()) model = env("TREND_LLM_MODEL");
  }
};

/// Canonical request body; field order is fixed so identical requests are
/// byte-identical on the wire.
inline std::string request_body(const std::string& model, const CompletionRequest& req) {
  nlohmann::ordered_json body;
  body["model"] = model;
  body["prompt"] = req.prompt;
  body["max_tokens"] = req.max_tokens;
  body["temperature"] = 0;
  return body.dump();
}

class HttpClient final : public CompletionClient {
 public:
  explicit HttpClient(HttpOptions opts) : opts_(std::move(opts)) {
    if (opts_.endpoint.empty()) throw std::invalid_argument("llm endpoint is not configured");
    auto scheme = opts_.endpoint.find("://");
    if (scheme == std::string::npos) throw std::invalid_argument("llm endpoint needs a scheme");
    auto path = opts_.endpoint.find('/', scheme + 3);
    base_ = opts_.endpoint.substr(0, path);
    path_ = path == std::string::npos ? "/" : opts_.endpoint.substr(path);
  }

  CompletionResponse complete(const CompletionRequest& req) override {
    check_request(req);
    const auto body = request_body(opts_.model, req);
    httplib::Headers headers;
    if (!opts_.api_key.empty()) headers.emplace("Authorization", "Bearer " + opts_.api_key);

    std::string last_error;
    bool last_was_transport = false;
    int last_status = 0;
    for (int attempt = 0; attempt < opts_.max_attempts; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(opts_.backoff_base_ms << (attempt - 1)));

      httplib::Client cli(base_);
      auto timeout = std::chrono::milliseconds(opts_.timeout_ms);
      cli.set_connection_timeout(timeout);
      cli.set_read_timeout(timeout);
      cli.set_write_timeout(timeout);

      const auto start = std::chrono::steady_clock::now();
      auto res = cli.Post(path_, headers, body, "application/json");
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - start);

      if (!res) {
        last_was_transport = true;
        last_error = "llm transport failure: " + httplib::to_string(res.error());
        continue;
      }
      last_was_transport = false;
      last_status = res->status;
      if (res->status >= 200 && res->status < 300) {
        try {
          auto j = nlohmann::json::parse(res->body);
          return {j.at("text").get<std::string>(), elapsed.count()};
        } catch (const nlohmann::json::exception& e) {
          throw ServiceError(res->status, std::string("malformed llm response: ") + e.what());
        }
      }
      last_error = "llm service returned HTTP " + std::to_string(res->status);
      if (res->status != 429 && res->status < 500) break;  // not retryable
    }
    if (last_was_transport) throw TransportError(last_error);
    throw ServiceError(last_status, last_error);
  }

 private:
  HttpOptions opts_;
  std::string base_;
  std::string path_;
};

}  // namespace trendscope::llm
