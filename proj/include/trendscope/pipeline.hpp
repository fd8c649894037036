#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "trendscope/burst.hpp"
#include "trendscope/category.hpp"
#include "trendscope/completion.hpp"
#include "trendscope/enrichment.hpp"
#include "trendscope/error.hpp"
#include "trendscope/event.hpp"
#include "trendscope/http_client.hpp"
#include "trendscope/log.hpp"
#include "trendscope/mock_llm.hpp"
#include "trendscope/parallel.hpp"
#include "trendscope/postprocess.hpp"
#include "trendscope/prompts.hpp"
#include "trendscope/store.hpp"
#include "trendscope/topic.hpp"

namespace trendscope {

/// Every knob of a pipeline run. Mirrors the JSON config file one-to-one.
struct PipelineConfig {
  DetectionConfig detection;
  HourIndex retention_hours = 14 * 24;
  std::size_t max_topics_per_post = kDefaultTopicsPerPost;

  std::string extractor = "mock";  // passthrough | mock | llm
  std::string topic_dict;
  std::string extract_prompt;

  std::string sensitive_mode = "llm";  // rules | llm
  std::string blocklist;
  std::string sensitive_prompt;
  std::string generic_mode = "llm";  // rules | llm
  std::string generic_list;
  std::string generic_prompt;
  std::string consolidate_mode = "llm";  // rules | llm
  std::string consolidate_prompt;
  double consolidate_jaccard = 0.6;
  std::string category_keywords;
  std::map<std::string, CategoryThreshold> category_thresholds;

  std::string describe_mode = "llm";    // template | llm
  std::string describe_prompt;
  std::string synthesize_mode = "llm";  // template | llm
  std::string synthesize_prompt;
  std::size_t reps_per_trend = 10;

  std::string llm_backend = "mock";  // http | replay | mock
  std::string llm_fixtures;
  std::string llm_record;
  int llm_timeout_ms = 30000;
  int llm_concurrency = 8;
  std::size_t llm_batch_size = 20;

  int workers = 1;
  std::optional<HourIndex> at_hour;
  int every_hours = 0;  // 0: single tick
  std::optional<HourIndex> from_hour;
  std::optional<HourIndex> to_hour;
  std::optional<int> warmup_hours;  // default: 2·max(N)

  std::string snapshot_path;
  int match_window = 6;
  std::vector<double> thresholds{1.0, 1.4, 1.8, 2.2, 3.0};
  std::uint64_t seed = 42;

  bool uses_llm() const {
    return extractor == "llm" || sensitive_mode == "llm" || generic_mode == "llm" || consolidate_mode == "llm" ||
           describe_mode == "llm" || synthesize_mode == "llm";
  }

  PrecisionControl precision_control() const {
    auto pc = PrecisionControl::from(detection);
    pc.per_category = category_thresholds;
    return pc;
  }

  void validate() const {
    try {
      detection.validate();
    } catch (const std::invalid_argument& e) {
      throw ValidationError(e.what());
    }
    auto one_of = [](const std::string& v, std::initializer_list<const char*> allowed, const char* what) {
      for (const char* a : allowed)
        if (v == a) return;
      throw ValidationError(std::string("invalid ") + what + ": '" + v + "'");
    };
    one_of(extractor, {"passthrough", "mock", "llm"}, "extractor");
    one_of(sensitive_mode, {"rules", "llm"}, "sensitive mode");
    one_of(generic_mode, {"rules", "llm"}, "generic mode");
    one_of(consolidate_mode, {"rules", "llm"}, "consolidate mode");
    one_of(describe_mode, {"template", "llm"}, "describe mode");
    one_of(synthesize_mode, {"template", "llm"}, "synthesize mode");
    one_of(llm_backend, {"http", "replay", "mock"}, "llm backend");
    if (retention_hours < detection.history_span())
      throw ValidationError("retention_hours must cover 2*max(window) hours of history");
    if (max_topics_per_post < 1) throw ValidationError("max_topics_per_post must be >= 1");
    if (consolidate_jaccard <= 0 || consolidate_jaccard > 1) throw ValidationError("consolidate_jaccard must be in (0,1]");
    if (reps_per_trend < 1) throw ValidationError("reps_per_trend must be >= 1");
    if (workers < 1) throw ValidationError("workers must be >= 1");
    if (llm_concurrency < 1) throw ValidationError("llm_concurrency must be >= 1");
    if (llm_timeout_ms < 1) throw ValidationError("llm_timeout_ms must be >= 1");
    if (every_hours < 0) throw ValidationError("every_hours must be >= 0");
    if (match_window < 0) throw ValidationError("match_window must be >= 0");
    for (const auto& [cat, th] : category_thresholds) {
      if (!is_category(cat)) throw ValidationError("unknown category in thresholds: " + cat);
      if ((th.score_threshold && *th.score_threshold <= 0) || (th.min_uu && *th.min_uu < 1))
        throw ValidationError("category thresholds must be positive");
    }
    if (uses_llm() && llm_backend == "replay" && llm_fixtures.empty())
      throw ValidationError("the replay llm backend needs --llm-fixtures");
  }

  /// Referenced input files must exist before any stage runs.
  void check_paths() const {
    for (const auto* p : {&topic_dict, &extract_prompt, &blocklist, &sensitive_prompt, &generic_list, &generic_prompt,
                          &consolidate_prompt, &category_keywords, &describe_prompt, &synthesize_prompt})
      if (!p->empty() && !std::filesystem::exists(*p)) throw IoError("file not found: " + *p);
    if (uses_llm() && llm_backend == "replay" && !std::filesystem::exists(llm_fixtures))
      throw IoError("file not found: " + llm_fixtures);
  }
};

namespace detail {
template <class T>
void read_if(const nlohmann::json& j, const char* key, T& dst) {
  if (auto it = j.find(key); it != j.end()) dst = it->get<T>();
}
template <class T>
void read_if(const nlohmann::json& j, const char* key, std::optional<T>& dst) {
  if (auto it = j.find(key); it != j.end()) dst = it->is_null() ? std::nullopt : std::optional<T>(it->get<T>());
}
}  // namespace detail

inline nlohmann::ordered_json to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["agg_hours"] = c.detection.agg_hours;
  j["windows"] = c.detection.windows;
  j["lambda"] = c.detection.lambda;
  j["min_uu"] = c.detection.min_uu;
  j["score_threshold"] = c.detection.score_threshold;
  j["baseline_floor"] = c.detection.baseline_floor;
  j["lift_cap"] = c.detection.lift_cap;
  j["retention_hours"] = c.retention_hours;
  j["max_topics_per_post"] = c.max_topics_per_post;
  j["extractor"] = c.extractor;
  j["topic_dict"] = c.topic_dict;
  j["extract_prompt"] = c.extract_prompt;
  j["sensitive_mode"] = c.sensitive_mode;
  j["blocklist"] = c.blocklist;
  j["sensitive_prompt"] = c.sensitive_prompt;
  j["generic_mode"] = c.generic_mode;
  j["generic_list"] = c.generic_list;
  j["generic_prompt"] = c.generic_prompt;
  j["consolidate_mode"] = c.consolidate_mode;
  j["consolidate_prompt"] = c.consolidate_prompt;
  j["consolidate_jaccard"] = c.consolidate_jaccard;
  j["category_keywords"] = c.category_keywords;
  auto th = nlohmann::ordered_json::object();
  for (const auto& [cat, t] : c.category_thresholds) {
    nlohmann::ordered_json x = nlohmann::ordered_json::object();
    if (t.score_threshold) x["score_threshold"] = *t.score_threshold;
    if (t.min_uu) x["min_uu"] = *t.min_uu;
    th[cat] = x;
  }
  j["category_thresholds"] = th;
  j["describe_mode"] = c.describe_mode;
  j["describe_prompt"] = c.describe_prompt;
  j["synthesize_mode"] = c.synthesize_mode;
  j["synthesize_prompt"] = c.synthesize_prompt;
  j["reps_per_trend"] = c.reps_per_trend;
  j["llm_backend"] = c.llm_backend;
  j["llm_fixtures"] = c.llm_fixtures;
  j["llm_record"] = c.llm_record;
  j["llm_timeout_ms"] = c.llm_timeout_ms;
  j["llm_concurrency"] = c.llm_concurrency;
  j["llm_batch_size"] = c.llm_batch_size;
  j["workers"] = c.workers;
  j["at_hour"] = c.at_hour ? nlohmann::ordered_json(*c.at_hour) : nlohmann::ordered_json();
  j["every_hours"] = c.every_hours;
  j["from_hour"] = c.from_hour ? nlohmann::ordered_json(*c.from_hour) : nlohmann::ordered_json();
  j["to_hour"] = c.to_hour ? nlohmann::ordered_json(*c.to_hour) : nlohmann::ordered_json();
  j["warmup_hours"] = c.warmup_hours ? nlohmann::ordered_json(*c.warmup_hours) : nlohmann::ordered_json();
  j["snapshot_path"] = c.snapshot_path;
  j["match_window"] = c.match_window;
  j["thresholds"] = c.thresholds;
  j["seed"] = c.seed;
  return j;
}

/// Overlays a JSON config document onto `c`. Unknown keys are rejected.
inline void apply_json(PipelineConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  static const std::set<std::string> known = [] {
    std::set<std::string> keys;
    const auto defaults = to_json(PipelineConfig{});
    for (const auto& [k, v] : defaults.items()) keys.insert(k);
    return keys;
  }();
  for (const auto& [k, v] : j.items())
    if (!known.count(k)) throw ValidationError("unknown config key: " + k);
  try {
    using detail::read_if;
    read_if(j, "agg_hours", c.detection.agg_hours);
    read_if(j, "windows", c.detection.windows);
    read_if(j, "lambda", c.detection.lambda);
    read_if(j, "min_uu", c.detection.min_uu);
    read_if(j, "score_threshold", c.detection.score_threshold);
    read_if(j, "baseline_floor", c.detection.baseline_floor);
    read_if(j, "lift_cap", c.detection.lift_cap);
    read_if(j, "retention_hours", c.retention_hours);
    read_if(j, "max_topics_per_post", c.max_topics_per_post);
    read_if(j, "extractor", c.extractor);
    read_if(j, "topic_dict", c.topic_dict);
    read_if(j, "extract_prompt", c.extract_prompt);
    read_if(j, "sensitive_mode", c.sensitive_mode);
    read_if(j, "blocklist", c.blocklist);
    read_if(j, "sensitive_prompt", c.sensitive_prompt);
    read_if(j, "generic_mode", c.generic_mode);
    read_if(j, "generic_list", c.generic_list);
    read_if(j, "generic_prompt", c.generic_prompt);
    read_if(j, "consolidate_mode", c.consolidate_mode);
    read_if(j, "consolidate_prompt", c.consolidate_prompt);
    read_if(j, "consolidate_jaccard", c.consolidate_jaccard);
    read_if(j, "category_keywords", c.category_keywords);
    if (auto it = j.find("category_thresholds"); it != j.end()) {
      c.category_thresholds.clear();
      for (const auto& [cat, v] : it->items()) {
        CategoryThreshold t;
        if (v.is_number()) {
          t.score_threshold = v.get<double>();
        } else {
          read_if(v, "score_threshold", t.score_threshold);
          read_if(v, "min_uu", t.min_uu);
        }
        c.category_thresholds[cat] = t;
      }
    }
    read_if(j, "describe_mode", c.describe_mode);
    read_if(j, "describe_prompt", c.describe_prompt);
    read_if(j, "synthesize_mode", c.synthesize_mode);
    read_if(j, "synthesize_prompt", c.synthesize_prompt);
    read_if(j, "reps_per_trend", c.reps_per_trend);
    read_if(j, "llm_backend", c.llm_backend);
    read_if(j, "llm_fixtures", c.llm_fixtures);
    read_if(j, "llm_record", c.llm_record);
    read_if(j, "llm_timeout_ms", c.llm_timeout_ms);
    read_if(j, "llm_concurrency", c.llm_concurrency);
    read_if(j, "llm_batch_size", c.llm_batch_size);
    read_if(j, "workers", c.workers);
    read_if(j, "at_hour", c.at_hour);
    read_if(j, "every_hours", c.every_hours);
    read_if(j, "from_hour", c.from_hour);
    read_if(j, "to_hour", c.to_hour);
    read_if(j, "warmup_hours", c.warmup_hours);
    read_if(j, "snapshot_path", c.snapshot_path);
    read_if(j, "match_window", c.match_window);
    read_if(j, "thresholds", c.thresholds);
    read_if(j, "seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  PipelineConfig c;
  try {
    apply_json(c, nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config " + path + ": " + e.what());
  }
  return c;
}

// --- intermediate files ----------------------------------------------------------

inline nlohmann::ordered_json to_json(const TrendCandidate& c) {
  nlohmann::ordered_json j;
  j["topic"] = c.topic.str();
  j["detect_hour"] = c.detect_hour;
  j["uu_now"] = c.uu_now;
  j["trend_score"] = c.trend_score;
  auto lifts = nlohmann::ordered_json::array();
  for (const auto& w : c.lift_profile.per_window) {
    nlohmann::ordered_json x;
    x["window"] = w.window;
    x["lift"] = w.lift;
    x["weight"] = w.weight;
    lifts.push_back(x);
  }
  j["lifts"] = lifts;
  if (c.category) j["category"] = *c.category;
  return j;
}

inline TrendCandidate candidate_from_json(const nlohmann::json& j) {
  TrendCandidate c;
  c.topic = normalize_topic(j.at("topic").get<std::string>());
  c.detect_hour = j.at("detect_hour").get<HourIndex>();
  c.uu_now = j.at("uu_now").get<std::int64_t>();
  c.trend_score = j.at("trend_score").get<double>();
  for (const auto& x : j.at("lifts"))
    c.lift_profile.per_window.push_back({x.at("window").get<int>(), x.at("lift").get<double>(), x.at("weight").get<double>()});
  if (auto it = j.find("category"); it != j.end()) c.category = it->get<std::string>();
  return c;
}

inline nlohmann::ordered_json to_json(const ConsolidatedTrend& t) {
  nlohmann::ordered_json j;
  j["representative"] = t.representative.str();
  auto members = nlohmann::ordered_json::array();
  for (const auto& m : t.members) members.push_back(m.str());
  j["members"] = members;
  j["trend_score"] = t.trend_score;
  j["uu_now"] = t.uu_now;
  j["detect_hour"] = t.detect_hour;
  if (t.category) j["category"] = *t.category;
  return j;
}

inline ConsolidatedTrend consolidated_from_json(const nlohmann::json& j) {
  ConsolidatedTrend t;
  t.representative = normalize_topic(j.at("representative").get<std::string>());
  for (const auto& m : j.at("members")) t.members.push_back(normalize_topic(m.get<std::string>()));
  t.trend_score = j.at("trend_score").get<double>();
  t.uu_now = j.at("uu_now").get<std::int64_t>();
  t.detect_hour = j.at("detect_hour").get<HourIndex>();
  if (auto it = j.find("category"); it != j.end()) t.category = it->get<std::string>();
  if (std::find(t.members.begin(), t.members.end(), t.representative) == t.members.end())
    throw ValidationError("consolidated trend representative must be a member");
  return t;
}

inline nlohmann::ordered_json verdict_json(const FilterVerdict& v, HourIndex detect_hour) {
  nlohmann::ordered_json j;
  j["topic"] = v.topic.str();
  j["detect_hour"] = detect_hour;
  j["keep"] = v.keep;
  j["reason"] = to_string(v.reason);
  j["source"] = to_string(v.source);
  return j;
}

template <class T, class Fn>
void write_jsonl(const std::string& path, const std::vector<T>& items, Fn&& to) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const auto& x : items) out << to(x).dump() << '\n';
  if (!out) throw IoError("write failure on " + path);
}

template <class Fn>
auto read_jsonl(const std::string& path, Fn&& from) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<decltype(from(nlohmann::json{}))> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(from(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(n, path + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline void write_trends(const std::string& path, const std::vector<EnrichedTrend>& trends) {
  write_jsonl(path, trends, [](const EnrichedTrend& t) { return to_json(t); });
}

// --- stage components ---------------------------------------------------------------

/// Completion client for the configured backend, with recording and the
/// in-flight limit applied. Null when no stage uses a model.
inline std::shared_ptr<llm::CompletionClient> make_client(const PipelineConfig& cfg) {
  if (!cfg.uses_llm()) return nullptr;
  std::shared_ptr<llm::CompletionClient> client;
  if (cfg.llm_backend == "replay") {
    client = std::make_shared<llm::ReplayClient>(llm::ReplayClient::from_file(cfg.llm_fixtures));
  } else if (cfg.llm_backend == "mock") {
    client = std::make_shared<llm::MockClient>();
  } else {
    llm::HttpOptions opts;
    opts.timeout_ms = cfg.llm_timeout_ms;
    opts.apply_env();
    client = std::make_shared<llm::HttpClient>(opts);
  }
  if (!cfg.llm_record.empty()) client = std::make_shared<llm::RecordingClient>(client, cfg.llm_record);
  return std::make_shared<llm::LimitedClient>(client, cfg.llm_concurrency);
}

struct Components {
  std::shared_ptr<llm::CompletionClient> client;
  std::unique_ptr<TopicExtractor> extractor;
  std::unique_ptr<TopicClassifier> sensitive;
  std::unique_ptr<TopicClassifier> generic;
  std::unique_ptr<Consolidator> consolidator;
  std::unique_ptr<VideoDescriber> describer;
  std::unique_ptr<TrendSynthesizer> synthesizer;
  CategoryKeywords keywords;
};

inline Components make_components(const PipelineConfig& cfg, WarningSink warn) {
  Components c;
  c.client = make_client(cfg);
  if (!cfg.category_keywords.empty()) c.keywords = CategoryKeywords::from_file(cfg.category_keywords);

  if (cfg.extractor == "passthrough") {
    c.extractor = std::make_unique<PassthroughExtractor>(cfg.max_topics_per_post);
  } else if (cfg.extractor == "mock") {
    auto dict = std::make_shared<TopicDictionary>(cfg.topic_dict.empty() ? TopicDictionary{}
                                                                          : TopicDictionary::from_file(cfg.topic_dict));
    c.extractor = std::make_unique<MockExtractor>(std::move(dict), cfg.max_topics_per_post);
  } else {
    c.extractor = std::make_unique<LlmExtractor>(c.client, prompts::load_template(cfg.extract_prompt, prompts::kExtract),
                                                 cfg.max_topics_per_post, warn);
  }

  if (cfg.sensitive_mode == "rules")
    c.sensitive = std::make_unique<BlocklistPolicy>(cfg.blocklist.empty() ? std::vector<std::string>{}
                                                                          : read_phrase_list(cfg.blocklist));
  else
    c.sensitive = std::make_unique<LlmTopicClassifier>(
        c.client, prompts::load_template(cfg.sensitive_prompt, prompts::kSensitive), llm::Stage::sensitive,
        FilterReason::sensitive, FailureMode::drop, cfg.llm_batch_size, warn);

  if (cfg.generic_mode == "rules")
    c.generic = std::make_unique<GenericTermRules>(cfg.generic_list.empty() ? std::vector<std::string>{}
                                                                            : read_phrase_list(cfg.generic_list));
  else
    c.generic = std::make_unique<LlmTopicClassifier>(
        c.client, prompts::load_template(cfg.generic_prompt, prompts::kGeneric), llm::Stage::generic,
        FilterReason::generic, FailureMode::keep, cfg.llm_batch_size, warn);

  if (cfg.consolidate_mode == "rules")
    c.consolidator = std::make_unique<TokenSetConsolidator>(cfg.consolidate_jaccard);
  else
    c.consolidator = std::make_unique<LlmConsolidator>(
        c.client, prompts::load_template(cfg.consolidate_prompt, prompts::kConsolidate), cfg.consolidate_jaccard, warn);

  if (cfg.describe_mode == "template")
    c.describer = std::make_unique<TemplateDescriber>();
  else
    c.describer = std::make_unique<LlmDescriber>(c.client, prompts::load_template(cfg.describe_prompt, prompts::kDescribe), warn);

  if (cfg.synthesize_mode == "template")
    c.synthesizer = std::make_unique<TemplateSynthesizer>(c.keywords);
  else
    c.synthesizer = std::make_unique<LlmSynthesizer>(
        c.client, prompts::load_template(cfg.synthesize_prompt, prompts::kSynthesize), c.keywords, warn);
  return c;
}

// --- stages -----------------------------------------------------------------------

/// Replaces each event's topics with the extractor's output (normalized).
inline std::vector<PostEvent> extract_stage(std::vector<PostEvent> events, const TopicExtractor& extractor, int workers) {
  parallel_for(events.size(), workers, [&](std::size_t i) {
    auto topics = extractor.extract(unify_signals(events[i]), events[i]);
    std::vector<std::string> names;
    names.reserve(topics.size());
    for (auto& t : topics) names.push_back(t.str());
    events[i].topics = std::move(names);
  });
  return events;
}

/// Records every (topic, user, country, ts) of extracted events.
inline TopicStore build_store(const std::vector<PostEvent>& events, const PipelineConfig& cfg) {
  StoreOptions opts;
  opts.retention_hours = cfg.retention_hours;
  TopicStore store(opts);
  const std::size_t chunk = 4096;
  const std::size_t chunks = (events.size() + chunk - 1) / chunk;
  parallel_for(chunks, cfg.workers, [&](std::size_t c) {
    const auto end = std::min(events.size(), (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      const auto& e = events[i];
      if (!e.topics) continue;
      for (const auto& raw : *e.topics)
        if (auto t = try_normalize_topic(raw)) store.record(*t, e.user_id, e.country, e.ts);
    }
  });
  return store;
}

/// Detection hours implied by the config for a store whose data spans
/// [first, last].
inline std::vector<HourIndex> detection_hours(const PipelineConfig& cfg, std::optional<HourIndex> first,
                                              std::optional<HourIndex> last) {
  if (cfg.at_hour) return {*cfg.at_hour};
  if (!last) return {};
  if (cfg.every_hours <= 0) return {cfg.to_hour.value_or(*last)};
  const HourIndex to = cfg.to_hour.value_or(*last);
  const HourIndex from = cfg.from_hour.value_or(*first + cfg.warmup_hours.value_or(cfg.detection.history_span()));
  std::vector<HourIndex> hours;
  for (HourIndex h = from; h <= to; h += cfg.every_hours) hours.push_back(h);
  return hours;
}

inline std::optional<HourIndex> first_hour(const std::vector<PostEvent>& events) {
  std::optional<HourIndex> out;
  for (const auto& e : events)
    if (!out || hour_bucket(e.ts) < *out) out = hour_bucket(e.ts);
  return out;
}

inline std::vector<TrendCandidate> detect_stage(const TopicStore& store, const PipelineConfig& cfg,
                                                const std::vector<HourIndex>& hours) {
  std::vector<TrendCandidate> out;
  for (auto h : hours) {
    auto tick = detect(store, cfg.detection, h, cfg.workers);
    out.insert(out.end(), std::make_move_iterator(tick.begin()), std::make_move_iterator(tick.end()));
  }
  return out;
}

inline PostprocessResult postprocess_stage(const std::vector<TrendCandidate>& candidates, const Components& c,
                                           const TopicStore& store, const PipelineConfig& cfg) {
  return postprocess(candidates, *c.sensitive, *c.generic, cfg.precision_control(), c.keywords, *c.consolidator, store,
                     cfg.detection.agg_hours);
}

inline std::vector<EnrichedTrend> enrich_stage(const std::vector<ConsolidatedTrend>& trends,
                                               const std::vector<PostEvent>& events, const TopicStore& store,
                                               const Components& c, const PipelineConfig& cfg) {
  EnrichOptions opts;
  opts.reps_per_trend = cfg.reps_per_trend;
  opts.window_hours = cfg.detection.agg_hours;
  opts.workers = cfg.workers;
  return enrich(trends, TopicEventIndex(events), store, *c.describer, *c.synthesizer, opts);
}

struct RunResult {
  std::vector<PostEvent> events;  // extracted
  std::vector<TrendCandidate> candidates;
  PostprocessResult post;
  std::vector<EnrichedTrend> trends;
  nlohmann::ordered_json manifest;
};

/// extract -> detect -> postprocess -> enrich over already-validated events.
inline RunResult run_pipeline(std::vector<PostEvent> events, const PipelineConfig& cfg, WarningSink warn) {
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::time_point a, clock::time_point b) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(b - a).count();
  };
  cfg.validate();
  cfg.check_paths();
  auto components = make_components(cfg, warn);
  RunResult r;
  const auto n_input = events.size();

  const auto t0 = clock::now();
  r.events = extract_stage(std::move(events), *components.extractor, cfg.workers);
  const auto t1 = clock::now();
  const auto store = build_store(r.events, cfg);
  if (!cfg.snapshot_path.empty()) store.snapshot(cfg.snapshot_path);
  const auto hours = detection_hours(cfg, first_hour(r.events), store.last_hour());
  r.candidates = detect_stage(store, cfg, hours);
  const auto t2 = clock::now();
  r.post = postprocess_stage(r.candidates, components, store, cfg);
  const auto t3 = clock::now();
  r.trends = enrich_stage(r.post.trends, r.events, store, components, cfg);
  const auto t4 = clock::now();

  auto& m = r.manifest;
  m["config"] = to_json(cfg);
  nlohmann::ordered_json counts;
  counts["events"] = n_input;
  counts["topics"] = store.topic_count();
  counts["detection_hours"] = hours.size();
  counts["candidates"] = r.candidates.size();
  counts["filtered_out"] = r.post.verdicts.size();
  counts["published"] = r.post.published.size();
  counts["consolidated"] = r.post.trends.size();
  counts["trends"] = r.trends.size();
  m["counts"] = counts;
  nlohmann::ordered_json timings;
  timings["extract"] = ms(t0, t1);
  timings["ingest_detect"] = ms(t1, t2);
  timings["postprocess"] = ms(t2, t3);
  timings["enrich"] = ms(t3, t4);
  m["timings_ms"] = timings;
  return r;
}

}  // namespace trendscope
