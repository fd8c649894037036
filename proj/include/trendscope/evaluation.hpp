#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "trendscope/burst.hpp"
#include "trendscope/error.hpp"
#include "trendscope/event.hpp"
#include "trendscope/postprocess.hpp"
#include "trendscope/topic.hpp"

namespace trendscope::eval {

struct InjectedBurst {
  int topic = 0;       // index into the background topics
  int onset = 0;       // hours from the start of the stream
  int duration = 1;    // hours
  double peak = 5.0;   // rate multiplier at the top of the ramp
  friend bool operator==(const InjectedBurst&, const InjectedBurst&) = default;
};

struct SyntheticSpec {
  int n_topics = 0;
  int horizon_hours = 0;
  double base_rate = 0;  // mean posting users per hour per background topic
  std::vector<InjectedBurst> bursts;
  std::uint64_t seed = 0;
  HourIndex start_hour = 480555;  // absolute UTC hour of stream hour 0
  int noise_topics = 0;           // long-tail topics that never trend
  double noise_rate = 0.5;

  friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;

  void validate() const {
    if (n_topics < 1) throw ValidationError("n_topics must be >= 1");
    if (horizon_hours < 1) throw ValidationError("horizon_hours must be >= 1");
    if (!(base_rate > 0)) throw ValidationError("base_rate must be > 0");
    if (start_hour < 1) throw ValidationError("start_hour must be >= 1");
    if (noise_topics < 0 || noise_rate < 0) throw ValidationError("noise settings must be non-negative");
    for (const auto& b : bursts) {
      if (b.topic < 0 || b.topic >= n_topics) throw ValidationError("burst topic index out of range");
      if (b.onset < 0 || b.duration < 1) throw ValidationError("burst onset/duration invalid");
      if (b.onset + b.duration > horizon_hours) throw ValidationError("burst must end within the horizon");
      if (!(b.peak > 1)) throw ValidationError("burst peak multiplier must be > 1");
    }
  }
};

inline SyntheticSpec spec_from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.n_topics = j.at("n_topics").get<int>();
  s.horizon_hours = j.at("horizon_hours").get<int>();
  s.base_rate = j.at("base_rate").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.start_hour = j.value("start_hour", s.start_hour);
  s.noise_topics = j.value("noise_topics", 0);
  s.noise_rate = j.value("noise_rate", s.noise_rate);
  for (const auto& b : j.value("bursts", nlohmann::json::array()))
    s.bursts.push_back({b.at("topic").get<int>(), b.at("onset").get<int>(), b.at("duration").get<int>(),
                        b.at("peak").get<double>()});
  s.validate();
  return s;
}

inline nlohmann::ordered_json to_json(const SyntheticSpec& s) {
  nlohmann::ordered_json j;
  j["n_topics"] = s.n_topics;
  j["horizon_hours"] = s.horizon_hours;
  j["base_rate"] = s.base_rate;
  j["seed"] = s.seed;
  j["start_hour"] = s.start_hour;
  j["noise_topics"] = s.noise_topics;
  j["noise_rate"] = s.noise_rate;
  auto bursts = nlohmann::ordered_json::array();
  for (const auto& b : s.bursts) {
    nlohmann::ordered_json x;
    x["topic"] = b.topic;
    x["onset"] = b.onset;
    x["duration"] = b.duration;
    x["peak"] = b.peak;
    bursts.push_back(x);
  }
  j["bursts"] = bursts;
  return j;
}

/// The reference suite shipped as fixtures/synthetic_reference.json: 200
/// background topics, 20 bursts at 5x-10x, onsets after a 144 h warm-up and a
/// burst-free 48 h tail at the end, plus long-tail noise topics.
inline SyntheticSpec reference_spec(std::uint64_t seed = 42) {
  SyntheticSpec s;
  s.n_topics = 200;
  s.horizon_hours = 264;
  s.base_rate = 15;
  s.seed = seed;
  s.noise_topics = 300;
  s.noise_rate = 0.5;
  for (int i = 0; i < 20; ++i) s.bursts.push_back({7 + 10 * i, 150 + 3 * i, 4 + i % 5, 5.0 + i % 6});
  return s;
}

inline SyntheticSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open synthetic spec: " + path);
  try {
    return spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("synthetic spec " + path + ": " + e.what());
  }
}

inline std::string background_topic_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "topic%04d", i);
  return buf;
}
inline std::string noise_topic_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "noise%04d", i);
  return buf;
}

/// Rate multiplier `h` hours into a burst: linear ramp up to the peak over the
/// first ceil(d/2) hours, then linear decay towards 1.
inline double burst_multiplier(const InjectedBurst& b, int h) {
  const int k = h - b.onset;
  if (k < 0 || k >= b.duration) return 1.0;
  const int rise = (b.duration + 1) / 2;
  if (k < rise) return 1.0 + (b.peak - 1.0) * (k + 1) / rise;
  const int fall = b.duration - rise;
  return 1.0 + (b.peak - 1.0) * (b.duration - k) / (fall + 1);
}

struct BurstLabel {
  std::string topic;
  HourIndex onset_hour = 0;  // absolute hour index
  int duration_hours = 0;
  friend bool operator==(const BurstLabel&, const BurstLabel&) = default;
};

struct SyntheticStream {
  std::vector<PostEvent> events;  // ordered by ts, then post_id
  std::vector<BurstLabel> labels;
};

/// Seeded generator. Each (topic, hour) draws a Poisson user count around the
/// topic's current rate; every draw gets fresh random user ids.
inline SyntheticStream generate_synthetic_stream(const SyntheticSpec& spec) {
  spec.validate();
  static constexpr std::array<const char*, 8> kCountries = {"US", "BR", "GB", "FR", "DE", "IN", "MX", "JP"};
  static constexpr std::array<double, 8> kCountryWeights = {40, 20, 10, 8, 8, 6, 5, 3};

  std::mt19937_64 rng(spec.seed);
  std::discrete_distribution<int> pick_country(kCountryWeights.begin(), kCountryWeights.end());
  std::uniform_int_distribution<int> pick_second(0, static_cast<int>(kSecondsPerHour) - 1);

  std::vector<std::vector<const InjectedBurst*>> bursts_of(static_cast<std::size_t>(spec.n_topics));
  for (const auto& b : spec.bursts) bursts_of[static_cast<std::size_t>(b.topic)].push_back(&b);

  SyntheticStream out;
  std::uint64_t post_seq = 0;
  auto emit = [&](const std::string& name, HourIndex hour, double rate) {
    if (rate <= 0) return;
    std::poisson_distribution<int> draw(rate);
    for (int n = draw(rng); n > 0; --n) {
      PostEvent e;
      char buf[40];
      std::snprintf(buf, sizeof buf, "p%09llu", static_cast<unsigned long long>(post_seq++));
      e.post_id = buf;
      std::snprintf(buf, sizeof buf, "u%016llx", static_cast<unsigned long long>(rng()));
      e.user_id = buf;
      e.ts = hour * kSecondsPerHour + pick_second(rng);
      e.country = kCountries[static_cast<std::size_t>(pick_country(rng))];
      e.caption = "new post about " + name;
      e.hashtags = {name};
      e.topics = std::vector<std::string>{name};
      out.events.push_back(std::move(e));
    }
  };

  for (int h = 0; h < spec.horizon_hours; ++h) {
    const HourIndex hour = spec.start_hour + h;
    const std::size_t first = out.events.size();
    for (int k = 0; k < spec.n_topics; ++k) {
      double m = 1.0;
      for (const auto* b : bursts_of[static_cast<std::size_t>(k)]) m = std::max(m, burst_multiplier(*b, h));
      emit(background_topic_name(k), hour, spec.base_rate * m);
    }
    for (int k = 0; k < spec.noise_topics; ++k) emit(noise_topic_name(k), hour, spec.noise_rate);
    std::sort(out.events.begin() + static_cast<std::ptrdiff_t>(first), out.events.end(),
              [](const PostEvent& a, const PostEvent& b) { return a.ts != b.ts ? a.ts < b.ts : a.post_id < b.post_id; });
  }
  for (const auto& b : spec.bursts)
    out.labels.push_back({background_topic_name(b.topic), spec.start_hour + b.onset, b.duration});
  return out;
}

inline nlohmann::ordered_json to_json(const BurstLabel& l) {
  nlohmann::ordered_json j;
  j["topic"] = l.topic;
  j["onset_hour"] = l.onset_hour;
  j["duration_hours"] = l.duration_hours;
  return j;
}

inline void write_labels(const std::string& path, const std::vector<BurstLabel>& labels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write labels: " + path);
  for (const auto& l : labels) out << to_json(l).dump() << '\n';
}

inline std::vector<BurstLabel> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open labels: " + path);
  std::vector<BurstLabel> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({normalize_topic(j.at("topic").get<std::string>()).str(), j.at("onset_hour").get<HourIndex>(),
                     j.at("duration_hours").get<int>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(n, e.what());
    }
  }
  return out;
}

// --- scoring ------------------------------------------------------------------

/// One detected trend: its name, consolidated members and detection hour.
struct Detection {
  std::string topic;
  std::vector<std::string> members;
  HourIndex detect_hour = 0;
};

inline Detection detection_of(const TrendCandidate& c) { return {c.topic.str(), {c.topic.str()}, c.detect_hour}; }
inline Detection detection_of(const ConsolidatedTrend& t) {
  Detection d{t.representative.str(), {}, t.detect_hour};
  for (const auto& m : t.members) d.members.push_back(m.str());
  return d;
}

struct ThresholdRow {
  double threshold = 0;
  std::optional<double> precision;  // none when nothing is retained
  double coverage = 0;
  std::size_t retained = 0;
  std::size_t correct = 0;
};

struct EvalReport {
  std::optional<double> precision;  // none when nothing was detected
  std::optional<double> recall_on_injected;  // none when there are no labels
  std::optional<double> mean_detection_latency_hours;  // none when no label matched
  std::size_t detected = 0;
  std::size_t correct = 0;
  std::size_t labels = 0;
  std::size_t labels_matched = 0;
  std::vector<ThresholdRow> per_threshold;
};

/// A detection is correct when any member names a labelled topic and the
/// hour lies in [onset, onset + duration + match_window].
inline EvalReport evaluate(const std::vector<Detection>& detections, const std::vector<BurstLabel>& labels,
                           int match_window) {
  std::map<std::string, std::vector<std::size_t>> labels_by_topic;
  for (std::size_t i = 0; i < labels.size(); ++i) labels_by_topic[labels[i].topic].push_back(i);
  std::vector<std::optional<HourIndex>> first_hit(labels.size());

  EvalReport r;
  r.detected = detections.size();
  r.labels = labels.size();
  for (const auto& d : detections) {
    bool correct = false;
    std::vector<std::string> names = d.members;
    names.push_back(d.topic);
    for (const auto& name : names) {
      auto it = labels_by_topic.find(name);
      if (it == labels_by_topic.end()) continue;
      for (auto li : it->second) {
        const auto& l = labels[li];
        if (d.detect_hour >= l.onset_hour && d.detect_hour <= l.onset_hour + l.duration_hours + match_window) {
          correct = true;
          if (!first_hit[li] || d.detect_hour < *first_hit[li]) first_hit[li] = d.detect_hour;
        }
      }
    }
    r.correct += correct;
  }
  if (r.detected) r.precision = static_cast<double>(r.correct) / static_cast<double>(r.detected);
  double latency = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (first_hit[i]) {
      ++r.labels_matched;
      latency += static_cast<double>(*first_hit[i] - labels[i].onset_hour);
    }
  if (r.labels) r.recall_on_injected = static_cast<double>(r.labels_matched) / static_cast<double>(r.labels);
  if (r.labels_matched) r.mean_detection_latency_hours = latency / static_cast<double>(r.labels_matched);
  return r;
}

/// Precision control at each threshold, then evaluation of the survivors.
/// Coverage is the retained fraction of the pre-threshold candidates.
inline std::vector<ThresholdRow> sweep_thresholds(const std::vector<TrendCandidate>& candidates,
                                                  const std::vector<BurstLabel>& labels,
                                                  const std::vector<double>& thresholds, int match_window,
                                                  PrecisionControl base = {0.0, 0, {}}) {
  std::vector<ThresholdRow> rows;
  for (double th : thresholds) {
    base.score_threshold = th;
    const auto kept = apply_precision_control(candidates, base);
    std::vector<Detection> dets;
    for (const auto& c : kept) dets.push_back(detection_of(c));
    const auto report = evaluate(dets, labels, match_window);
    ThresholdRow row;
    row.threshold = th;
    row.retained = kept.size();
    row.correct = report.correct;
    row.precision = report.precision;
    row.coverage = candidates.empty() ? 0.0 : static_cast<double>(kept.size()) / static_cast<double>(candidates.size());
    rows.push_back(row);
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<ThresholdRow>& rows) {
  std::ostringstream out;
  out << "threshold,precision,coverage,retained,correct\n";
  char buf[128];
  for (const auto& r : rows) {
    std::string precision;
    if (r.precision) {
      std::snprintf(buf, sizeof buf, "%.6f", *r.precision);
      precision = buf;
    }
    std::snprintf(buf, sizeof buf, "%g,%s,%.6f,%zu,%zu\n", r.threshold, precision.c_str(), r.coverage, r.retained,
                  r.correct);
    out << buf;
  }
  return out.str();
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(); };
  nlohmann::ordered_json j;
  j["precision"] = opt(r.precision);
  j["recall_on_injected"] = opt(r.recall_on_injected);
  j["mean_detection_latency_hours"] = opt(r.mean_detection_latency_hours);
  j["detected"] = r.detected;
  j["correct"] = r.correct;
  j["labels"] = r.labels;
  j["labels_matched"] = r.labels_matched;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& row : r.per_threshold) {
    nlohmann::ordered_json x;
    x["threshold"] = row.threshold;
    x["precision"] = opt(row.precision);
    x["coverage"] = row.coverage;
    x["retained"] = row.retained;
    x["correct"] = row.correct;
    rows.push_back(x);
  }
  j["per_threshold"] = rows;
  return j;
}

}  // namespace trendscope::eval
