#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "trendscope/event.hpp"
#include "trendscope/parallel.hpp"
#include "trendscope/store.hpp"
#include "trendscope/topic.hpp"

namespace trendscope {

struct DetectionConfig {
  int agg_hours = 3;                      // T: num_user(t) aggregates the trailing T hours
  std::vector<int> windows{6, 12, 24, 72};  // N values, strictly increasing
  double lambda = 0.05;                   // window weight decay per hour
  std::int64_t min_uu = 30;               // M: pre-filter threshold (inclusive)
  double score_threshold = 1.8;           // applied later, by precision control
  double baseline_floor = 1.0;
  double lift_cap = 1000.0;

  void validate() const {
    if (agg_hours < 1) throw std::invalid_argument("agg_hours must be >= 1");
    if (windows.empty()) throw std::invalid_argument("at least one window is required");
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (windows[i] < 2) throw std::invalid_argument("every window must be >= 2 hours");
      if (i > 0 && windows[i] <= windows[i - 1])
        throw std::invalid_argument("windows must be strictly increasing");
    }
    if (!(lambda > 0)) throw std::invalid_argument("lambda must be > 0");
    if (min_uu < 1) throw std::invalid_argument("min_uu must be >= 1");
    if (!(score_threshold > 0)) throw std::invalid_argument("score_threshold must be > 0");
    if (!(baseline_floor > 0)) throw std::invalid_argument("baseline_floor must be > 0");
    if (!(lift_cap > 1)) throw std::invalid_argument("lift_cap must be > 1");
  }

  int max_window() const { return windows.empty() ? 0 : windows.back(); }

  /// Hours of history a lift at t depends on: [t - 2·max(N) + 1, t].
  int history_span() const { return 2 * max_window(); }
};

/// Counts indexed by hour. Hours before `origin` (or past the end) read as 0.
class CountSeries {
 public:
  CountSeries() = default;
  CountSeries(HourIndex origin, std::vector<std::int64_t> values) : origin_(origin), values_(std::move(values)) {}

  std::int64_t at(HourIndex t) const {
    if (t < origin_) return 0;
    const auto i = static_cast<std::size_t>(t - origin_);
    return i < values_.size() ? values_[i] : 0;
  }

  HourIndex origin() const { return origin_; }
  HourIndex last() const { return origin_ + static_cast<HourIndex>(values_.size()) - 1; }
  const std::vector<std::int64_t>& values() const { return values_; }

 private:
  HourIndex origin_ = 0;
  std::vector<std::int64_t> values_;
};

/// Peak count over [t-N+1, t].
inline std::int64_t moving_max(const CountSeries& series, int window, HourIndex t) {
  std::int64_t best = 0;
  for (HourIndex i = t - window + 1; i <= t; ++i) best = std::max(best, series.at(i));
  return best;
}

namespace detail {

/// Sum of moving_max(N, i) for i in [t-N+1, t], via a monotonic deque over
/// [t-2N+2, t]. Linear in N instead of quadratic.
inline std::int64_t sum_of_window_maxima(const CountSeries& series, int window, HourIndex t) {
  std::deque<std::pair<HourIndex, std::int64_t>> dq;  // decreasing values
  std::int64_t sum = 0;
  const HourIndex first_end = t - window + 1;
  for (HourIndex j = first_end - window + 1; j <= t; ++j) {
    const auto v = series.at(j);
    while (!dq.empty() && dq.back().second <= v) dq.pop_back();
    dq.emplace_back(j, v);
    while (dq.front().first <= j - window) dq.pop_front();
    if (j >= first_end) sum += dq.front().second;
  }
  return sum;
}

}  // namespace detail

/// Mean of the N moving maxima ending at t.
inline double moving_max_avg(const CountSeries& series, int window, HourIndex t) {
  return static_cast<double>(detail::sum_of_window_maxima(series, window, t)) / window;
}

/// num_user(t) over the floored baseline at t-1, clamped to [0, lift_cap].
inline double lift(const CountSeries& series, int window, HourIndex t, const DetectionConfig& config) {
  const double baseline = std::max(moving_max_avg(series, window, t - 1), config.baseline_floor);
  const double value = static_cast<double>(series.at(t)) / baseline;
  return std::clamp(value, 0.0, config.lift_cap);
}

inline double window_weight(int window, double lambda) { return std::exp(-lambda * window); }

struct WindowLift {
  int window = 0;
  double lift = 0;
  double weight = 0;
  friend bool operator==(const WindowLift&, const WindowLift&) = default;
};

/// Lift and weight per window, in window order.
struct LiftProfile {
  std::vector<WindowLift> per_window;

  double min_lift() const {
    double m = per_window.empty() ? 0 : per_window.front().lift;
    for (const auto& w : per_window) m = std::min(m, w.lift);
    return m;
  }
  double max_lift() const {
    double m = 0;
    for (const auto& w : per_window) m = std::max(m, w.lift);
    return m;
  }
  friend bool operator==(const LiftProfile&, const LiftProfile&) = default;
};

inline LiftProfile lift_profile(const CountSeries& series, const DetectionConfig& config, HourIndex t) {
  LiftProfile p;
  p.per_window.reserve(config.windows.size());
  for (int n : config.windows) p.per_window.push_back({n, lift(series, n, t, config), window_weight(n, config.lambda)});
  return p;
}

/// Weighted harmonic mean of the lifts; 0 as soon as any lift is 0.
inline double score_profile(const LiftProfile& profile) {
  if (profile.per_window.empty()) throw std::invalid_argument("empty lift profile");
  double num = 0;
  double den = 0;
  for (const auto& w : profile.per_window) {
    if (w.lift <= 0) return 0.0;
    num += w.weight;
    den += w.weight / w.lift;
  }
  return num / den;
}

inline double trend_score(const CountSeries& series, const DetectionConfig& config, HourIndex t) {
  if (config.windows.empty()) throw std::invalid_argument("trend_score needs at least one window");
  return score_profile(lift_profile(series, config, t));
}

struct TrendCandidate {
  TopicString topic;
  HourIndex detect_hour = 0;
  std::int64_t uu_now = 0;
  LiftProfile lift_profile;
  double trend_score = 0;
  std::optional<std::string> category;  // assigned by precision control when a keyword map is present

  friend bool operator==(const TrendCandidate&, const TrendCandidate&) = default;
};

/// Ranking used by detect(): score desc, uu_now desc, topic asc.
inline bool candidate_order(const TrendCandidate& a, const TrendCandidate& b) {
  if (a.trend_score != b.trend_score) return a.trend_score > b.trend_score;
  if (a.uu_now != b.uu_now) return a.uu_now > b.uu_now;
  return a.topic < b.topic;
}

/// Keeps topics whose trailing-T unique users at t reach min_uu (inclusive).
inline std::vector<TopicString> prefilter(const std::vector<TopicString>& topics, const TopicStore& store,
                                          HourIndex t, const DetectionConfig& config) {
  std::vector<TopicString> out;
  for (const auto& topic : topics)
    if (static_cast<std::int64_t>(store.unique_users(topic, t, config.agg_hours)) >= config.min_uu)
      out.push_back(topic);
  return out;
}

/// Scores every pre-filtered topic at hour t. No score threshold is applied.
inline std::vector<TrendCandidate> detect(const TopicStore& store, const DetectionConfig& config, HourIndex t,
                                          int workers = 1) {
  config.validate();
  const auto topics = prefilter(store.topics(), store, t, config);
  std::vector<TrendCandidate> out(topics.size());
  const int span = config.history_span();
  parallel_for(topics.size(), workers, [&](std::size_t i) {
    CountSeries series(t - span + 1, store.series_view(topics[i], t, span, config.agg_hours));
    TrendCandidate& c = out[i];
    c.topic = topics[i];
    c.detect_hour = t;
    c.uu_now = series.at(t);
    c.lift_profile = lift_profile(series, config, t);
    c.trend_score = score_profile(c.lift_profile);
  });
  std::sort(out.begin(), out.end(), candidate_order);
  return out;
}

/// detect() at every `every`-th hour in [from, to].
inline std::vector<TrendCandidate> detect_range(const TopicStore& store, const DetectionConfig& config,
                                                HourIndex from, HourIndex to, int every, int workers = 1) {
  if (every < 1) throw std::invalid_argument("detection cadence must be >= 1 hour");
  std::vector<TrendCandidate> out;
  for (HourIndex t = from; t <= to; t += every) {
    auto tick = detect(store, config, t, workers);
    out.insert(out.end(), std::make_move_iterator(tick.begin()), std::make_move_iterator(tick.end()));
  }
  return out;
}

}  // namespace trendscope
