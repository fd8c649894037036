#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "trendscope/completion.hpp"
#include "trendscope/http_client.hpp"
#include "trendscope/mock_llm.hpp"
#include "trendscope/prompts.hpp"

using namespace trendscope;
using namespace trendscope::llm;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("trendscope_" + name)).string();
}

CompletionRequest request(std::string prompt, Stage tag = Stage::extract) {
  CompletionRequest r;
  r.prompt = std::move(prompt);
  r.tag = tag;
  return r;
}

class CountingClient : public CompletionClient {
 public:
  CompletionResponse complete(const CompletionRequest& req) override {
    ++calls;
    return {"echo:" + req.prompt, 0};
  }
  std::atomic<int> calls{0};
};

// Local HTTP server whose handler is swapped per test.
class TestServer {
 public:
  explicit TestServer(httplib::Server::Handler handler) {
    server_.Post("/v1/complete", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~TestServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/complete"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

HttpOptions fast_options(const std::string& endpoint) {
  HttpOptions o;
  o.endpoint = endpoint;
  o.model = "test-model";
  o.timeout_ms = 2000;
  o.backoff_base_ms = 1;
  return o;
}

}  // namespace

TEST(FixtureHash, KnownFnvVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ull);
}

TEST(FixtureHash, KeyCoversTagAndPrompt) {
  EXPECT_EQ(fixture_key(Stage::extract, "p").size(), 16u);
  EXPECT_NE(fixture_key(Stage::extract, "p"), fixture_key(Stage::describe, "p"));
  EXPECT_NE(fixture_key(Stage::extract, "p"), fixture_key(Stage::extract, "q"));
  // the 0x00 separator keeps "extract"+"x" apart from "extractx"+""
  std::string joined = "extract";
  joined.push_back('\0');
  joined += "p";
  EXPECT_EQ(fixture_hash(Stage::extract, "p"), fnv1a64(joined));
}

TEST(Request, Validation) {
  CountingClient inner;
  ReplayClient replay;
  auto r = request("");
  EXPECT_THROW(replay.complete(r), std::invalid_argument);
  r = request("x");
  r.temperature = 0.5;
  EXPECT_THROW(replay.complete(r), std::invalid_argument);
  r = request("x");
  r.max_tokens = 0;
  EXPECT_THROW(replay.complete(r), std::invalid_argument);
}

TEST(Replay, ServesAndMisses) {
  ReplayClient replay;
  replay.add(Stage::generic, "prompt", "KEEP a");
  EXPECT_EQ(replay.complete(request("prompt", Stage::generic)).text, "KEEP a");
  EXPECT_THROW(replay.complete(request("prompt", Stage::sensitive)), FixtureMissError);
  EXPECT_THROW(replay.complete(request("other", Stage::generic)), FixtureMissError);
}

TEST(Replay, RecordThenReplayRoundTrip) {
  const auto path = temp_path("record.jsonl");
  auto inner = std::make_shared<CountingClient>();
  {
    RecordingClient rec(inner, path);
    EXPECT_EQ(rec.complete(request("one")).text, "echo:one");
    rec.complete(request("one"));
    rec.complete(request("two", Stage::describe));
  }
  EXPECT_EQ(inner->calls, 3);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 3) << "header plus one line per distinct key";

  auto replay = ReplayClient::from_file(path);
  EXPECT_EQ(replay.size(), 2u);
  EXPECT_EQ(replay.complete(request("one")).text, "echo:one");
  EXPECT_EQ(replay.complete(request("two", Stage::describe)).text, "echo:two");
}

TEST(Replay, RejectsUnknownFormat) {
  const auto path = temp_path("bad_fixture.jsonl");
  std::ofstream(path) << R"({"format":"other","version":1})" << "\n";
  EXPECT_THROW(ReplayClient::from_file(path), IncompatibleSnapshotError);
  std::ofstream(path, std::ios::trunc) << "{not json\n";
  EXPECT_THROW(ReplayClient::from_file(path), ParseError);
  EXPECT_THROW(ReplayClient::from_file(temp_path("no_such_fixture.jsonl")), IoError);
}

TEST(Limiter, BoundsInFlightRequests) {
  struct Slow : CompletionClient {
    std::atomic<int> now{0}, peak{0};
    CompletionResponse complete(const CompletionRequest&) override {
      int n = ++now;
      int p = peak.load();
      while (n > p && !peak.compare_exchange_weak(p, n)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
      --now;
      return {"ok", 0};
    }
  };
  auto slow = std::make_shared<Slow>();
  LimitedClient limited(slow, 3);
  {
    std::vector<std::jthread> threads;
    for (int i = 0; i < 12; ++i)
      threads.emplace_back([&] {
        for (int k = 0; k < 5; ++k) limited.complete(request("x"));
      });
  }
  EXPECT_LE(slow->peak.load(), 3);
  EXPECT_GE(slow->peak.load(), 1);
}

TEST(Http, SendsCanonicalBodyAndBearer) {
  std::string seen_body, seen_auth;
  TestServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    seen_auth = req.get_header_value("Authorization");
    res.set_content(R"({"text":"hello"})", "application/json");
  });
  auto opts = fast_options(server.endpoint());
  opts.api_key = "secret";
  HttpClient client(opts);
  auto resp = client.complete(request("say hi"));
  EXPECT_EQ(resp.text, "hello");
  EXPECT_EQ(seen_auth, "Bearer secret");
  EXPECT_EQ(seen_body, R"({"model":"test-model","prompt":"say hi","max_tokens":256,"temperature":0})");
}

TEST(Http, RetriesServerErrorsThenGivesUp) {
  std::atomic<int> hits{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
  });
  HttpClient client(fast_options(server.endpoint()));
  try {
    client.complete(request("x"));
    FAIL() << "expected a service error";
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.status(), 500);
  }
  EXPECT_EQ(hits.load(), 3);
}

TEST(Http, RateLimitIsRetried) {
  std::atomic<int> hits{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++hits < 3) {
      res.status = 429;
      return;
    }
    res.set_content(R"({"text":"finally"})", "application/json");
  });
  HttpClient client(fast_options(server.endpoint()));
  EXPECT_EQ(client.complete(request("x")).text, "finally");
  EXPECT_EQ(hits.load(), 3);
}

TEST(Http, ClientErrorsAreNotRetried) {
  std::atomic<int> hits{0};
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 400;
  });
  HttpClient client(fast_options(server.endpoint()));
  EXPECT_THROW(client.complete(request("x")), ServiceError);
  EXPECT_EQ(hits.load(), 1);
}

TEST(Http, MalformedReplyIsAServiceError) {
  TestServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  HttpClient client(fast_options(server.endpoint()));
  EXPECT_THROW(client.complete(request("x")), ServiceError);
}

TEST(Http, UnreachableEndpointIsATransportError) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpClient client(fast_options("http://127.0.0.1:" + std::to_string(port) + "/v1/complete"));
  EXPECT_THROW(client.complete(request("x")), TransportError);
}

TEST(Http, EndpointFromEnvironment) {
  ::setenv("TREND_LLM_ENDPOINT", "http://127.0.0.1:9/x", 1);
  ::setenv("TREND_LLM_API_KEY", "k", 1);
  ::setenv("TREND_LLM_MODEL", "m", 1);
  HttpOptions o;
  o.apply_env();
  EXPECT_EQ(o.endpoint, "http://127.0.0.1:9/x");
  EXPECT_EQ(o.api_key, "k");
  EXPECT_EQ(o.model, "m");
  HttpOptions explicit_opts;
  explicit_opts.endpoint = "http://other";
  explicit_opts.apply_env();
  EXPECT_EQ(explicit_opts.endpoint, "http://other");
  ::unsetenv("TREND_LLM_ENDPOINT");
  ::unsetenv("TREND_LLM_API_KEY");
  ::unsetenv("TREND_LLM_MODEL");
  EXPECT_THROW(HttpClient(HttpOptions{}), std::invalid_argument);
}

TEST(Mock, RepliesInEachStageFormat) {
  MockClient mock;
  auto ask = [&](std::string_view tmpl, Stage tag, std::string_view input) {
    return mock.complete(request(prompts::render(tmpl, input), tag)).text;
  };
  EXPECT_EQ(ask(prompts::kExtract, Stage::extract, "CAPTION: hi there\nHASHTAGS: a b"), "a\nb");
  EXPECT_EQ(ask(prompts::kExtract, Stage::extract, "OCR: ..."), "NONE");
  EXPECT_EQ(ask(prompts::kSensitive, Stage::sensitive, "world cup\nweapons haul"), "KEEP world cup\nDROP weapons haul");
  EXPECT_EQ(ask(prompts::kGeneric, Stage::generic, "funny videos\nmessi"), "DROP funny videos\nKEEP messi");
  EXPECT_EQ(ask(prompts::kConsolidate, Stage::consolidate, "world cup\nworld cup 2026\nmessi"),
            "world cup 2026 | world cup\nmessi");
  auto synth = ask(prompts::kSynthesize, Stage::synthesize, "TREND: world cup 2026\nVIDEO: fans at a match");
  EXPECT_NE(synth.find("CATEGORY: sports"), std::string::npos);
}
