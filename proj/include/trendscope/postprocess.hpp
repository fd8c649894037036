#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "trendscope/burst.hpp"
#include "trendscope/category.hpp"
#include "trendscope/completion.hpp"
#include "trendscope/log.hpp"
#include "trendscope/prompts.hpp"
#include "trendscope/store.hpp"
#include "trendscope/topic.hpp"

namespace trendscope {

enum class FilterReason { ok, sensitive, generic };
enum class VerdictSource { rules, llm };

inline std::string_view to_string(FilterReason r) {
  switch (r) {
    case FilterReason::ok: return "OK";
    case FilterReason::sensitive: return "SENSITIVE";
    case FilterReason::generic: return "GENERIC";
  }
  return "";
}
inline std::string_view to_string(VerdictSource s) { return s == VerdictSource::rules ? "RULES" : "LLM"; }

struct FilterVerdict {
  TopicString topic;
  bool keep = true;  // keep <=> reason == ok
  FilterReason reason = FilterReason::ok;
  VerdictSource source = VerdictSource::rules;
  friend bool operator==(const FilterVerdict&, const FilterVerdict&) = default;
};

/// Partition of a candidate batch; verdicts line up with `removed`.
struct FilterOutcome {
  std::vector<TrendCandidate> kept;
  std::vector<TrendCandidate> removed;
  std::vector<FilterVerdict> verdicts;
};

/// Decides keep/drop for a set of distinct topics.
class TopicClassifier {
 public:
  virtual ~TopicClassifier() = default;
  /// One verdict per input topic, same order.
  virtual std::vector<FilterVerdict> classify(const std::vector<TopicString>& topics) const = 0;
};

inline std::vector<std::string> read_phrase_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open phrase list: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#') continue;
    out.push_back(line);
  }
  return out;
}

/// Drops a topic when any blocklisted phrase occurs in it as a contiguous
/// run of whole tokens ("weapon" blocks "weapon sale", not "weaponry").
class BlocklistPolicy final : public TopicClassifier {
 public:
  explicit BlocklistPolicy(const std::vector<std::string>& phrases) {
    for (const auto& p : phrases)
      if (auto toks = word_tokens(p); !toks.empty()) phrases_.push_back(std::move(toks));
  }

  std::vector<FilterVerdict> classify(const std::vector<TopicString>& topics) const override {
    std::vector<FilterVerdict> out;
    for (const auto& t : topics) {
      const auto toks = word_tokens(t.str());
      bool hit = std::any_of(phrases_.begin(), phrases_.end(), [&](const auto& p) {
        return std::search(toks.begin(), toks.end(), p.begin(), p.end()) != toks.end();
      });
      out.push_back({t, !hit, hit ? FilterReason::sensitive : FilterReason::ok, VerdictSource::rules});
    }
    return out;
  }

 private:
  std::vector<std::vector<std::string>> phrases_;
};

/// Drops topics that equal a listed generic phrase, and single-token topics
/// whose only token is a stop-listed head noun.
class GenericTermRules final : public TopicClassifier {
 public:
  static const std::set<std::string>& default_head_nouns() {
    static const std::set<std::string> nouns = {"video", "videos", "clip", "clips", "content", "life",
                                                "vibes", "mood", "stuff", "things", "moments", "memes"};
    return nouns;
  }

  explicit GenericTermRules(const std::vector<std::string>& phrases,
                            std::set<std::string> head_nouns = default_head_nouns())
      : head_nouns_(std::move(head_nouns)) {
    for (const auto& p : phrases)
      if (auto t = try_normalize_topic(p)) phrases_.insert(t->str());
  }

  std::vector<FilterVerdict> classify(const std::vector<TopicString>& topics) const override {
    std::vector<FilterVerdict> out;
    for (const auto& t : topics) {
      bool generic = phrases_.count(t.str()) > 0;
      if (!generic) {
        auto toks = topic_tokens(t.str());
        generic = toks.size() == 1 && head_nouns_.count(std::string(toks.front())) > 0;
      }
      out.push_back({t, !generic, generic ? FilterReason::generic : FilterReason::ok, VerdictSource::rules});
    }
    return out;
  }

 private:
  std::set<std::string> phrases_;
  std::set<std::string> head_nouns_;
};

enum class FailureMode { drop, keep };

/// Sends topics in batches with a KEEP/DROP prompt. On a client error, or
/// for topics the reply does not mention, applies `on_failure`: the
/// sensitive filter fails closed (drop), the generality filter fails open.
class LlmTopicClassifier final : public TopicClassifier {
 public:
  LlmTopicClassifier(std::shared_ptr<llm::CompletionClient> client, std::string prompt_template, llm::Stage stage,
                     FilterReason drop_reason, FailureMode on_failure, std::size_t batch_size = 20,
                     WarningSink warn = stderr_warnings())
      : client_(std::move(client)), template_(std::move(prompt_template)), stage_(stage), reason_(drop_reason),
        on_failure_(on_failure), batch_(std::max<std::size_t>(1, batch_size)), warn_(std::move(warn)) {}

  std::vector<FilterVerdict> classify(const std::vector<TopicString>& topics) const override {
    std::vector<FilterVerdict> out;
    for (std::size_t start = 0; start < topics.size(); start += batch_) {
      const auto end = std::min(topics.size(), start + batch_);
      std::vector<TopicString> batch(topics.begin() + static_cast<std::ptrdiff_t>(start),
                                     topics.begin() + static_cast<std::ptrdiff_t>(end));
      auto verdicts = classify_batch(batch);
      out.insert(out.end(), verdicts.begin(), verdicts.end());
    }
    return out;
  }

 private:
  FilterVerdict failed(const TopicString& t) const {
    const bool keep = on_failure_ == FailureMode::keep;
    return {t, keep, keep ? FilterReason::ok : reason_, VerdictSource::llm};
  }

  std::vector<FilterVerdict> classify_batch(const std::vector<TopicString>& batch) const {
    std::string input;
    for (const auto& t : batch) input.append(t.str()).push_back('\n');
    input.pop_back();
    llm::CompletionRequest req;
    req.prompt = prompts::render(template_, input);
    req.tag = stage_;
    req.max_tokens = static_cast<int>(16 * batch.size() + 16);

    std::map<std::string, bool> decided;
    try {
      auto resp = client_->complete(req);
      std::size_t pos = 0;
      const std::string_view text = resp.text;
      while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        while (!line.empty() && detail::ascii_space(line.front())) line.remove_prefix(1);
        bool keep;
        if (line.rfind("KEEP ", 0) == 0)
          keep = true;
        else if (line.rfind("DROP ", 0) == 0)
          keep = false;
        else
          continue;
        if (auto t = try_normalize_topic(line.substr(5))) decided.emplace(t->str(), keep);
      }
    } catch (const llm::LlmError& e) {
      if (warn_)
        warn_(std::string(llm::to_string(stage_)) + " filter: llm failure, applying " +
              (on_failure_ == FailureMode::drop ? "drop" : "keep") + " to batch: " + e.what());
      std::vector<FilterVerdict> out;
      for (const auto& t : batch) out.push_back(failed(t));
      return out;
    }

    std::vector<FilterVerdict> out;
    for (const auto& t : batch) {
      auto it = decided.find(t.str());
      if (it == decided.end()) {
        if (warn_) warn_(std::string(llm::to_string(stage_)) + " filter: no verdict for '" + t.str() + "'");
        out.push_back(failed(t));
      } else {
        out.push_back({t, it->second, it->second ? FilterReason::ok : reason_, VerdictSource::llm});
      }
    }
    return out;
  }

  std::shared_ptr<llm::CompletionClient> client_;
  std::string template_;
  llm::Stage stage_;
  FilterReason reason_;
  FailureMode on_failure_;
  std::size_t batch_;
  WarningSink warn_;
};

namespace detail {

inline FilterOutcome apply_classifier(const std::vector<TrendCandidate>& candidates, const TopicClassifier& classifier,
                                      FilterReason reason) {
  std::vector<TopicString> distinct;
  for (const auto& c : candidates) distinct.push_back(c.topic);
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::unordered_map<std::string, FilterVerdict> verdict;
  for (auto& v : classifier.classify(distinct)) {
    if (!v.keep) v.reason = reason;
    verdict[v.topic.str()] = std::move(v);
  }
  FilterOutcome out;
  for (const auto& c : candidates) {
    const auto& v = verdict.at(c.topic.str());
    if (v.keep) {
      out.kept.push_back(c);
    } else {
      out.removed.push_back(c);
      out.verdicts.push_back(v);
    }
  }
  return out;
}

}  // namespace detail

inline FilterOutcome filter_sensitive(const std::vector<TrendCandidate>& candidates, const TopicClassifier& policy) {
  return detail::apply_classifier(candidates, policy, FilterReason::sensitive);
}

inline FilterOutcome filter_generic(const std::vector<TrendCandidate>& candidates, const TopicClassifier& classifier) {
  return detail::apply_classifier(candidates, classifier, FilterReason::generic);
}

// --- precision control ------------------------------------------------------

struct CategoryThreshold {
  std::optional<double> score_threshold;
  std::optional<std::int64_t> min_uu;
};

struct PrecisionControl {
  double score_threshold = 1.8;
  std::int64_t min_uu = 30;
  std::map<std::string, CategoryThreshold> per_category;

  static PrecisionControl from(const DetectionConfig& cfg) { return {cfg.score_threshold, cfg.min_uu, {}}; }
};

/// Tags candidates with a category from the keyword map (topic text only).
inline void assign_categories(std::vector<TrendCandidate>& candidates, const CategoryKeywords& keywords) {
  if (keywords.empty()) return;
  for (auto& c : candidates) c.category = keywords.lookup(c.topic.str());
}

/// Keeps candidates at or above the effective score threshold and UU level.
inline std::vector<TrendCandidate> apply_precision_control(const std::vector<TrendCandidate>& candidates,
                                                           const PrecisionControl& control) {
  std::vector<TrendCandidate> out;
  for (const auto& c : candidates) {
    double threshold = control.score_threshold;
    std::int64_t min_uu = control.min_uu;
    if (c.category) {
      if (auto it = control.per_category.find(*c.category); it != control.per_category.end()) {
        threshold = it->second.score_threshold.value_or(threshold);
        min_uu = it->second.min_uu.value_or(min_uu);
      }
    }
    if (c.trend_score >= threshold && c.uu_now >= min_uu) out.push_back(c);
  }
  return out;
}

// --- consolidation ----------------------------------------------------------

struct ConsolidatedTrend {
  TopicString representative;
  std::vector<TopicString> members;  // sorted, contains representative
  double trend_score = 0;            // max over members
  std::int64_t uu_now = 0;           // distinct users across members at detect_hour
  HourIndex detect_hour = 0;
  std::optional<std::string> category;
  friend bool operator==(const ConsolidatedTrend&, const ConsolidatedTrend&) = default;
};

/// A grouping of candidate indices with a chosen representative index.
struct TopicGroup {
  std::size_t representative;
  std::vector<std::size_t> members;
};

class Consolidator {
 public:
  virtual ~Consolidator() = default;
  /// Partitions `candidates` (all from one detection hour) into groups.
  virtual std::vector<TopicGroup> group(const std::vector<TrendCandidate>& candidates) const = 0;
};

inline double token_jaccard(const std::set<std::string_view>& a, const std::set<std::string_view>& b) {
  std::size_t inter = 0;
  for (const auto& t : a) inter += b.count(t);
  const auto uni = a.size() + b.size() - inter;
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Highest uu_now, then fewest tokens, then lexicographic.
inline std::size_t pick_representative(const std::vector<TrendCandidate>& c, const std::vector<std::size_t>& members) {
  return *std::min_element(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
    if (c[a].uu_now != c[b].uu_now) return c[a].uu_now > c[b].uu_now;
    const auto ta = topic_tokens(c[a].topic.str()).size(), tb = topic_tokens(c[b].topic.str()).size();
    if (ta != tb) return ta < tb;
    return c[a].topic < c[b].topic;
  });
}

/// Joins two topics when one token set contains the other or their Jaccard
/// similarity reaches the cutoff; clusters are the transitive closure.
class TokenSetConsolidator final : public Consolidator {
 public:
  explicit TokenSetConsolidator(double jaccard_cutoff = 0.6) : cutoff_(jaccard_cutoff) {}

  std::vector<TopicGroup> group(const std::vector<TrendCandidate>& c) const override {
    const std::size_t n = c.size();
    std::vector<std::set<std::string_view>> toks(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto t = topic_tokens(c[i].topic.str());
      toks[i] = {t.begin(), t.end()};
    }
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::size_t x) {
      while (parent[x] != x) x = parent[x] = parent[parent[x]];
      return x;
    };
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto& a = toks[i];
        const auto& b = toks[j];
        bool related = std::includes(a.begin(), a.end(), b.begin(), b.end()) ||
                       std::includes(b.begin(), b.end(), a.begin(), a.end()) || token_jaccard(a, b) >= cutoff_;
        if (related) parent[find(i)] = find(j);
      }
    std::map<std::size_t, std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < n; ++i) clusters[find(i)].push_back(i);
    std::vector<TopicGroup> out;
    for (auto& [root, members] : clusters) out.push_back({pick_representative(c, members), std::move(members)});
    return out;
  }

 private:
  double cutoff_;
};

/// Parses "rep | member | ..." lines into groups over `c`. nullopt unless
/// the reply is an exact partition of the input topics.
inline std::optional<std::vector<TopicGroup>> parse_groups(std::string_view text, const std::vector<TrendCandidate>& c) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < c.size(); ++i) index.emplace(c[i].topic.str(), i);
  std::vector<bool> used(c.size(), false);
  std::vector<TopicGroup> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    TopicGroup g{};
    bool first = true;
    std::size_t start = 0;
    while (start <= line.size()) {
      auto bar = line.find('|', start);
      if (bar == std::string_view::npos) bar = line.size();
      auto item = try_normalize_topic(line.substr(start, bar - start));
      start = bar + 1;
      if (!item) return std::nullopt;
      auto it = index.find(item->str());
      if (it == index.end() || used[it->second]) return std::nullopt;
      used[it->second] = true;
      if (first) g.representative = it->second;
      first = false;
      g.members.push_back(it->second);
    }
    out.push_back(std::move(g));
  }
  if (std::find(used.begin(), used.end(), false) != used.end()) return std::nullopt;
  return out;
}

/// Model-backed clustering with rules-mode fallback on transport errors or
/// replies that are not an exact partition of the input.
class LlmConsolidator final : public Consolidator {
 public:
  LlmConsolidator(std::shared_ptr<llm::CompletionClient> client, std::string prompt_template,
                  double jaccard_cutoff = 0.6, WarningSink warn = stderr_warnings())
      : client_(std::move(client)), template_(std::move(prompt_template)), fallback_(jaccard_cutoff),
        warn_(std::move(warn)) {}

  std::vector<TopicGroup> group(const std::vector<TrendCandidate>& c) const override {
    if (c.size() <= 1) return fallback_.group(c);
    std::string input;
    for (const auto& cand : c) input.append(cand.topic.str()).push_back('\n');
    input.pop_back();
    llm::CompletionRequest req;
    req.prompt = prompts::render(template_, input);
    req.tag = llm::Stage::consolidate;
    req.max_tokens = static_cast<int>(24 * c.size() + 16);
    try {
      auto resp = client_->complete(req);
      if (auto groups = parse_groups(resp.text, c)) return std::move(*groups);
      if (warn_) warn_("consolidate: unparseable llm grouping, using token-set rules");
    } catch (const llm::LlmError& e) {
      if (warn_) warn_(std::string("consolidate: llm failure, using token-set rules: ") + e.what());
    }
    return fallback_.group(c);
  }

 private:
  std::shared_ptr<llm::CompletionClient> client_;
  std::string template_;
  TokenSetConsolidator fallback_;
  WarningSink warn_;
};

/// Merges candidates per detection hour. Output is ordered by detect_hour,
/// then trend_score desc, uu_now desc, representative.
inline std::vector<ConsolidatedTrend> consolidate(const std::vector<TrendCandidate>& candidates,
                                                  const Consolidator& consolidator, const TopicStore& store,
                                                  int agg_hours) {
  std::map<HourIndex, std::vector<TrendCandidate>> by_hour;
  for (const auto& c : candidates) by_hour[c.detect_hour].push_back(c);
  std::vector<ConsolidatedTrend> out;
  for (auto& [hour, batch] : by_hour) {
    std::sort(batch.begin(), batch.end(), candidate_order);
    std::vector<ConsolidatedTrend> tick;
    for (const auto& g : consolidator.group(batch)) {
      ConsolidatedTrend t;
      t.representative = batch[g.representative].topic;
      t.detect_hour = hour;
      t.category = batch[g.representative].category;
      for (auto m : g.members) {
        t.members.push_back(batch[m].topic);
        t.trend_score = std::max(t.trend_score, batch[m].trend_score);
      }
      std::sort(t.members.begin(), t.members.end());
      t.uu_now = static_cast<std::int64_t>(store.unique_users(t.members, hour, agg_hours));
      tick.push_back(std::move(t));
    }
    std::sort(tick.begin(), tick.end(), [](const auto& a, const auto& b) {
      if (a.trend_score != b.trend_score) return a.trend_score > b.trend_score;
      if (a.uu_now != b.uu_now) return a.uu_now > b.uu_now;
      return a.representative < b.representative;
    });
    out.insert(out.end(), tick.begin(), tick.end());
  }
  return out;
}

// --- stage composition ------------------------------------------------------

struct PostprocessResult {
  std::vector<FilterVerdict> verdicts;  // removed topics, in stage order
  std::vector<TrendCandidate> published;  // survivors of all filters
  std::vector<ConsolidatedTrend> trends;
};

/// sensitive -> generic -> precision control -> consolidation.
inline PostprocessResult postprocess(std::vector<TrendCandidate> candidates, const TopicClassifier& sensitive,
                                     const TopicClassifier& generic, const PrecisionControl& control,
                                     const CategoryKeywords& keywords, const Consolidator& consolidator,
                                     const TopicStore& store, int agg_hours) {
  PostprocessResult r;
  auto s = filter_sensitive(candidates, sensitive);
  r.verdicts = std::move(s.verdicts);
  auto g = filter_generic(s.kept, generic);
  r.verdicts.insert(r.verdicts.end(), g.verdicts.begin(), g.verdicts.end());
  assign_categories(g.kept, keywords);
  r.published = apply_precision_control(g.kept, control);
  r.trends = consolidate(r.published, consolidator, store, agg_hours);
  return r;
}

}  // namespace trendscope
