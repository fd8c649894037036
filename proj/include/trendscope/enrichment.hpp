#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "trendscope/category.hpp"
#include "trendscope/completion.hpp"
#include "trendscope/event.hpp"
#include "trendscope/log.hpp"
#include "trendscope/parallel.hpp"
#include "trendscope/postprocess.hpp"
#include "trendscope/prompts.hpp"
#include "trendscope/store.hpp"
#include "trendscope/topic.hpp"

namespace trendscope {

inline constexpr std::size_t kMaxDescriptionChars = 500;
inline constexpr std::size_t kMaxTopCountries = 3;

/// Output record. Field names on the wire are fixed; see to_json().
struct EnrichedTrend {
  std::string trend_name;
  EpochSeconds detection_time = 0;
  double trend_score = 0;
  std::string trend_summary;
  std::string trend_details;
  std::vector<std::string> top_countries;
  std::string trend_category;
  friend bool operator==(const EnrichedTrend&, const EnrichedTrend&) = default;
};

inline constexpr std::array<std::string_view, 7> kTrendFields = {
    "trend_name", "detection_time", "trend_score", "trend_summary", "trend_details", "top_countries", "trend_category"};

inline nlohmann::ordered_json to_json(const EnrichedTrend& t) {
  nlohmann::ordered_json j;
  j["trend_name"] = t.trend_name;
  j["detection_time"] = t.detection_time;
  j["trend_score"] = t.trend_score;
  j["trend_summary"] = t.trend_summary;
  j["trend_details"] = t.trend_details;
  j["top_countries"] = t.top_countries;
  j["trend_category"] = t.trend_category;
  return j;
}

/// Schema check for one output record: exactly the seven fields, right types,
/// non-empty text, known category, at most three countries.
inline void validate_trend_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("trend record must be an object");
  if (j.size() != kTrendFields.size()) throw ValidationError("trend record must have exactly 7 fields");
  for (auto f : kTrendFields)
    if (!j.contains(std::string(f))) throw ValidationError("trend record is missing " + std::string(f));
  for (auto f : {"trend_name", "trend_summary", "trend_details", "trend_category"}) {
    if (!j.at(f).is_string() || j.at(f).get<std::string>().empty())
      throw ValidationError(std::string(f) + " must be a non-empty string");
  }
  if (!j.at("detection_time").is_number_integer() || j.at("detection_time").get<std::int64_t>() <= 0)
    throw ValidationError("detection_time must be a positive integer");
  if (j.at("detection_time").get<std::int64_t>() % kSecondsPerHour != 0)
    throw ValidationError("detection_time must fall on an hour boundary");
  if (!j.at("trend_score").is_number()) throw ValidationError("trend_score must be a number");
  const auto& countries = j.at("top_countries");
  if (!countries.is_array() || countries.size() > kMaxTopCountries)
    throw ValidationError("top_countries must be an array of at most 3 codes");
  for (const auto& c : countries)
    if (!c.is_string() || c.get<std::string>().empty()) throw ValidationError("country codes must be non-empty strings");
  if (!is_category(j.at("trend_category").get<std::string>())) throw ValidationError("unknown trend_category");
}

inline EnrichedTrend trend_from_json(const nlohmann::json& j) {
  validate_trend_json(j);
  EnrichedTrend t;
  t.trend_name = j.at("trend_name").get<std::string>();
  t.detection_time = j.at("detection_time").get<EpochSeconds>();
  t.trend_score = j.at("trend_score").get<double>();
  t.trend_summary = j.at("trend_summary").get<std::string>();
  t.trend_details = j.at("trend_details").get<std::string>();
  t.top_countries = j.at("top_countries").get<std::vector<std::string>>();
  t.trend_category = j.at("trend_category").get<std::string>();
  return t;
}

// --- representative videos ----------------------------------------------------

/// topic -> indices of events whose extracted topics include it.
class TopicEventIndex {
 public:
  explicit TopicEventIndex(std::span<const PostEvent> events) : events_(events) {
    for (std::size_t i = 0; i < events.size(); ++i) {
      if (!events[i].topics) continue;
      for (const auto& raw : *events[i].topics)
        if (auto t = try_normalize_topic(raw)) by_topic_[t->str()].push_back(i);
    }
  }

  /// Posts matching any member within [detect_hour - window + 1, detect_hour]:
  /// newest first, one per user, at most k.
  std::vector<PostEvent> representatives(const ConsolidatedTrend& trend, std::size_t k, int window_hours) const {
    std::vector<std::size_t> hits;
    for (const auto& m : trend.members)
      if (auto it = by_topic_.find(m.str()); it != by_topic_.end()) hits.insert(hits.end(), it->second.begin(), it->second.end());
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    const HourIndex lo = trend.detect_hour - window_hours + 1;
    std::erase_if(hits, [&](std::size_t i) {
      const auto h = hour_bucket(events_[i].ts);
      return h < lo || h > trend.detect_hour;
    });
    std::sort(hits.begin(), hits.end(), [&](std::size_t a, std::size_t b) {
      if (events_[a].ts != events_[b].ts) return events_[a].ts > events_[b].ts;
      return events_[a].post_id < events_[b].post_id;
    });
    std::vector<PostEvent> out;
    std::unordered_set<std::string> users;
    for (auto i : hits) {
      if (out.size() >= k) break;
      if (users.insert(events_[i].user_id).second) out.push_back(events_[i]);
    }
    return out;
  }

 private:
  std::span<const PostEvent> events_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_topic_;
};

inline std::vector<PostEvent> select_representative_videos(const ConsolidatedTrend& trend,
                                                           std::span<const PostEvent> events, std::size_t k,
                                                           int window_hours) {
  return TopicEventIndex(events).representatives(trend, k, window_hours);
}

// --- per-video descriptions ---------------------------------------------------

struct VideoDescription {
  std::string post_id;
  std::string description;
  friend bool operator==(const VideoDescription&, const VideoDescription&) = default;
};

inline std::string clip_description(std::string text) {
  auto b = text.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  auto e = text.find_last_not_of(" \t\r\n");
  text = text.substr(b, e - b + 1);
  detail::truncate_code_points(text, kMaxDescriptionChars);
  return text;
}

/// "Post about: <visual tags>. Caption: ... . Hashtags: ..." over the
/// non-empty signals, or "Post about topic: ..." for topic-only posts.
inline std::string template_description(const PostEvent& e) {
  std::vector<std::string> parts;
  auto join = [](const std::vector<std::string>& v, std::string_view sep) {
    std::string out;
    for (const auto& s : v) {
      if (s.empty()) continue;
      if (!out.empty()) out.append(sep);
      out.append(s);
    }
    return out;
  };
  if (auto tags = join(e.visual_tags, ", "); !tags.empty()) parts.push_back("Post about: " + tags);
  if (!e.caption.empty()) parts.push_back("Caption: " + e.caption);
  if (auto tags = detail::join(e.hashtags, true); !tags.empty()) parts.push_back("Hashtags: " + tags);
  if (!e.transcript.empty()) parts.push_back("Transcript: " + e.transcript);
  if (!e.ocr_text.empty()) parts.push_back("On-screen text: " + e.ocr_text);
  if (parts.empty()) {
    std::string topics = e.topics ? join(*e.topics, ", ") : "";
    parts.push_back("Post about topic: " + (topics.empty() ? std::string("unknown") : topics));
  }
  return clip_description(join(parts, ". "));
}

class VideoDescriber {
 public:
  virtual ~VideoDescriber() = default;
  virtual VideoDescription describe(const PostEvent& event) const = 0;
};

class TemplateDescriber final : public VideoDescriber {
 public:
  VideoDescription describe(const PostEvent& e) const override { return {e.post_id, template_description(e)}; }
};

/// Sends the post's textual signals (never media) through the client.
/// Failures and empty replies fall back to the template.
class LlmDescriber final : public VideoDescriber {
 public:
  LlmDescriber(std::shared_ptr<llm::CompletionClient> client, std::string prompt_template,
               WarningSink warn = stderr_warnings())
      : client_(std::move(client)), template_(std::move(prompt_template)), warn_(std::move(warn)) {}

  VideoDescription describe(const PostEvent& e) const override {
    auto unified = unify_signals(e);
    if (unified.empty()) return {e.post_id, template_description(e)};
    llm::CompletionRequest req;
    req.prompt = prompts::render(template_, unified.render());
    req.tag = llm::Stage::describe;
    req.max_tokens = 160;
    try {
      auto text = clip_description(client_->complete(req).text);
      if (!text.empty()) return {e.post_id, std::move(text)};
      if (warn_) warn_("describe: empty llm reply for post " + e.post_id + ", using template");
    } catch (const llm::LlmError& err) {
      if (warn_) warn_("describe: llm failure for post " + e.post_id + ", using template: " + err.what());
    }
    return {e.post_id, template_description(e)};
  }

 private:
  std::shared_ptr<llm::CompletionClient> client_;
  std::string template_;
  WarningSink warn_;
};

inline VideoDescription describe_video(const PostEvent& event, const VideoDescriber& describer) {
  return describer.describe(event);
}

// --- trend-level synthesis ------------------------------------------------------

struct TrendText {
  std::string summary;
  std::string details;
  std::string category;
};

class TrendSynthesizer {
 public:
  virtual ~TrendSynthesizer() = default;
  virtual TrendText synthesize(const ConsolidatedTrend& trend, const std::vector<VideoDescription>& descriptions) const = 0;
};

class TemplateSynthesizer final : public TrendSynthesizer {
 public:
  explicit TemplateSynthesizer(CategoryKeywords keywords = {}) : keywords_(std::move(keywords)) {}

  TrendText synthesize(const ConsolidatedTrend& trend, const std::vector<VideoDescription>& descriptions) const override {
    const auto& name = trend.representative.str();
    TrendText out;
    out.summary = "\"" + name + "\" is trending: " + std::to_string(trend.uu_now) + " distinct users posted about it in the latest window.";
    if (descriptions.empty()) {
      out.details = "Detected from a burst in posting activity about \"" + name + "\".";
    } else {
      out.details = "Representative posts: ";
      for (std::size_t i = 0; i < descriptions.size() && i < 3; ++i) {
        if (i) out.details += " | ";
        out.details += descriptions[i].description;
      }
    }
    if (trend.members.size() > 1) {
      out.details += " Related topics: ";
      bool first = true;
      for (const auto& m : trend.members) {
        if (m == trend.representative) continue;
        if (!first) out.details += ", ";
        out.details += m.str();
        first = false;
      }
      out.details += ".";
    }
    out.category = category_for(trend);
    return out;
  }

  std::string category_for(const ConsolidatedTrend& trend) const {
    if (auto c = keywords_.lookup(trend.representative.str())) return *c;
    for (const auto& m : trend.members)
      if (auto c = keywords_.lookup(m.str())) return *c;
    return "other";
  }

 private:
  CategoryKeywords keywords_;
};

/// Parses "SUMMARY: / DETAILS: / CATEGORY:" lines; nullopt unless all three
/// are present, non-empty and the category is in the fixed list.
inline std::optional<TrendText> parse_trend_text(std::string_view text) {
  TrendText out;
  std::size_t pos = 0;
  auto field = [](std::string_view line, std::string_view key) -> std::optional<std::string> {
    if (line.rfind(key, 0) != 0) return std::nullopt;
    auto rest = line.substr(key.size());
    while (!rest.empty() && detail::ascii_space(rest.front())) rest.remove_prefix(1);
    while (!rest.empty() && detail::ascii_space(rest.back())) rest.remove_suffix(1);
    return std::string(rest);
  };
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (auto v = field(line, "SUMMARY:")) out.summary = *v;
    else if (auto d = field(line, "DETAILS:")) out.details = *d;
    else if (auto c = field(line, "CATEGORY:")) out.category = detail::fold_case_nfc(*c);
  }
  if (out.summary.empty() || out.details.empty() || !is_category(out.category)) return std::nullopt;
  return out;
}

class LlmSynthesizer final : public TrendSynthesizer {
 public:
  LlmSynthesizer(std::shared_ptr<llm::CompletionClient> client, std::string prompt_template,
                 CategoryKeywords keywords = {}, WarningSink warn = stderr_warnings())
      : client_(std::move(client)), template_(std::move(prompt_template)), fallback_(std::move(keywords)),
        warn_(std::move(warn)) {}

  TrendText synthesize(const ConsolidatedTrend& trend, const std::vector<VideoDescription>& descriptions) const override {
    if (descriptions.empty()) return fallback_.synthesize(trend, descriptions);
    std::string input = "TREND: " + trend.representative.str();
    for (const auto& d : descriptions) input += "\nVIDEO: " + d.description;
    llm::CompletionRequest req;
    req.prompt = prompts::render(template_, input);
    req.tag = llm::Stage::synthesize;
    req.max_tokens = 400;
    try {
      if (auto parsed = parse_trend_text(client_->complete(req).text)) return std::move(*parsed);
      if (warn_) warn_("synthesize: unparseable llm reply for '" + trend.representative.str() + "', using template");
    } catch (const llm::LlmError& e) {
      if (warn_) warn_("synthesize: llm failure for '" + trend.representative.str() + "', using template: " + e.what());
    }
    return fallback_.synthesize(trend, descriptions);
  }

 private:
  std::shared_ptr<llm::CompletionClient> client_;
  std::string template_;
  TemplateSynthesizer fallback_;
  WarningSink warn_;
};

/// Up to three countries by distinct posting users over the window, ties by
/// code. Computed from the store only.
inline std::vector<std::string> top_countries(const TopicStore& store, const ConsolidatedTrend& trend, int window_hours) {
  std::vector<std::string> out;
  for (const auto& [code, n] : store.country_counts(trend.members, trend.detect_hour, window_hours)) {
    if (out.size() == kMaxTopCountries) break;
    out.push_back(code);
  }
  return out;
}

inline EnrichedTrend synthesize_trend(const ConsolidatedTrend& trend, const std::vector<VideoDescription>& descriptions,
                                      const TopicStore& store, const TrendSynthesizer& synthesizer, int window_hours) {
  auto text = synthesizer.synthesize(trend, descriptions);
  EnrichedTrend out;
  out.trend_name = trend.representative.str();
  out.detection_time = trend.detect_hour * kSecondsPerHour;
  out.trend_score = trend.trend_score;
  out.trend_summary = std::move(text.summary);
  out.trend_details = std::move(text.details);
  out.top_countries = top_countries(store, trend, window_hours);
  out.trend_category = std::move(text.category);
  return out;
}

struct EnrichOptions {
  std::size_t reps_per_trend = 10;
  int window_hours = 3;  // same trailing window as num_user(t)
  int workers = 1;
};

/// Representative selection, per-video description (parallel) and trend
/// synthesis for every consolidated trend, in input order.
inline std::vector<EnrichedTrend> enrich(const std::vector<ConsolidatedTrend>& trends, const TopicEventIndex& index,
                                         const TopicStore& store, const VideoDescriber& describer,
                                         const TrendSynthesizer& synthesizer, const EnrichOptions& opts) {
  std::vector<EnrichedTrend> out(trends.size());
  for (std::size_t i = 0; i < trends.size(); ++i) {
    const auto reps = index.representatives(trends[i], opts.reps_per_trend, opts.window_hours);
    std::vector<VideoDescription> descriptions(reps.size());
    parallel_for(reps.size(), opts.workers, [&](std::size_t j) { descriptions[j] = describer.describe(reps[j]); });
    out[i] = synthesize_trend(trends[i], descriptions, store, synthesizer, opts.window_hours);
  }
  return out;
}

}  // namespace trendscope
