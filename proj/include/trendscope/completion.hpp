#pragma once

// Completion-client boundary. Every model-backed stage talks to a
// CompletionClient; the concrete backends are replay (fixture file), mock
// (in-process heuristics, see mock_llm.hpp) and http (http_client.hpp).

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <memory>
#include <mutex>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

#include "trendscope/error.hpp"

namespace trendscope::llm {

enum class Stage { extract, sensitive, generic, consolidate, describe, synthesize };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::extract: return "extract";
    case Stage::sensitive: return "sensitive";
    case Stage::generic: return "generic";
    case Stage::consolidate: return "consolidate";
    case Stage::describe: return "describe";
    case Stage::synthesize: return "synthesize";
  }
  return "unknown";
}

struct CompletionRequest {
  std::string prompt;
  int max_tokens = 256;
  double temperature = 0.0;  // always 0: responses must be reproducible
  Stage tag = Stage::extract;
};

struct CompletionResponse {
  std::string text;  // empty only on an explicit refusal
  std::int64_t latency_ms = 0;
};

class LlmError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
/// Timeout or connection failure that survived all retries.
class TransportError : public LlmError {
 public:
  using LlmError::LlmError;
};
/// Non-2xx status that survived all retries (or was not retryable).
class ServiceError : public LlmError {
 public:
  ServiceError(int status, const std::string& what) : LlmError(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};
/// Replay backend has no entry for the request. Always a test setup bug.
class FixtureMissError : public LlmError {
 public:
  using LlmError::LlmError;
};

inline void check_request(const CompletionRequest& req) {
  if (req.prompt.empty()) throw std::invalid_argument("completion prompt must be non-empty");
  if (req.max_tokens <= 0) throw std::invalid_argument("max_tokens must be positive");
  if (req.temperature != 0.0) throw std::invalid_argument("temperature must be 0");
}

class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual CompletionResponse complete(const CompletionRequest& req) = 0;
};

// Fixture keys: FNV-1a 64 over the stage tag, one NUL byte, then the prompt.
inline constexpr std::string_view kFixtureHashName = "fnv1a64(tag || 0x00 || prompt)";
inline constexpr std::string_view kFixtureFormat = "trendscope-llm-fixtures";
inline constexpr int kFixtureVersion = 1;

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fixture_hash(Stage tag, std::string_view prompt) {
  auto h = fnv1a64(to_string(tag));
  h = fnv1a64(std::string_view("\0", 1), h);
  return fnv1a64(prompt, h);
}

inline std::string fixture_key(Stage tag, std::string_view prompt) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fixture_hash(tag, prompt)));
  return buf;
}

/// Serves recorded responses. Read-only after construction, so concurrent
/// complete() calls need no locking.
class ReplayClient final : public CompletionClient {
 public:
  static ReplayClient from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open llm fixture file: " + path);
    ReplayClient client;
    std::string line;
    bool header_seen = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line_no, std::string("llm fixture: ") + e.what());
      }
      if (!header_seen) {
        if (j.value("format", "") != kFixtureFormat || j.value("version", 0) != kFixtureVersion)
          throw IncompatibleSnapshotError("unsupported llm fixture header in " + path);
        header_seen = true;
        continue;
      }
      client.entries_[j.at("key").get<std::string>()] = j.at("text").get<std::string>();
    }
    if (!header_seen) throw IncompatibleSnapshotError("llm fixture file has no header: " + path);
    return client;
  }

  void add(Stage tag, std::string_view prompt, std::string text) {
    entries_[fixture_key(tag, prompt)] = std::move(text);
  }

  std::size_t size() const { return entries_.size(); }

  CompletionResponse complete(const CompletionRequest& req) override {
    check_request(req);
    auto key = fixture_key(req.tag, req.prompt);
    auto it = entries_.find(key);
    if (it == entries_.end())
      throw FixtureMissError("no replay fixture for stage " + std::string(to_string(req.tag)) +
                             " key " + key);
    return {it->second, 0};
  }

 private:
  std::unordered_map<std::string, std::string> entries_;
};

/// Decorator that appends every (tag, key, response) it sees to a fixture
/// file the replay backend can load. Duplicate keys are written once.
class RecordingClient final : public CompletionClient {
 public:
  RecordingClient(std::shared_ptr<CompletionClient> inner, const std::string& path)
      : inner_(std::move(inner)), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot write llm fixture file: " + path);
    nlohmann::ordered_json header;
    header["format"] = kFixtureFormat;
    header["version"] = kFixtureVersion;
    header["hash"] = kFixtureHashName;
    out_ << header.dump() << '\n';
    out_.flush();
  }

  CompletionResponse complete(const CompletionRequest& req) override {
    auto resp = inner_->complete(req);
    auto key = fixture_key(req.tag, req.prompt);
    std::lock_guard lock(mu_);
    if (seen_.insert(key).second) {
      nlohmann::ordered_json entry;
      entry["tag"] = to_string(req.tag);
      entry["key"] = key;
      entry["text"] = resp.text;
      out_ << entry.dump() << '\n';
      out_.flush();
      if (!out_) throw IoError("llm fixture write failed");
    }
    return resp;
  }

 private:
  std::shared_ptr<CompletionClient> inner_;
  std::ofstream out_;
  std::mutex mu_;
  std::unordered_set<std::string> seen_;
};

/// Caps the number of in-flight requests across all workers.
class LimitedClient final : public CompletionClient {
 public:
  LimitedClient(std::shared_ptr<CompletionClient> inner, int max_in_flight)
      : inner_(std::move(inner)), slots_(max_in_flight < 1 ? 1 : max_in_flight) {}

  CompletionResponse complete(const CompletionRequest& req) override {
    slots_.acquire();
    struct Release {
      std::counting_semaphore<>& s;
      ~Release() { s.release(); }
    } release{slots_};
    return inner_->complete(req);
  }

 private:
  std::shared_ptr<CompletionClient> inner_;
  std::counting_semaphore<> slots_;
};

}  // namespace trendscope::llm
