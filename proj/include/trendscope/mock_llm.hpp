#pragma once

// Deterministic in-process completion backend. It reads the INPUT section of
// the built-in prompt templates and answers in each stage's reply format, so
// llm-mode stages can run (and fixtures can be recorded) without a model.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "trendscope/completion.hpp"
#include "trendscope/prompts.hpp"
#include "trendscope/topic.hpp"

namespace trendscope::llm {

class MockClient final : public CompletionClient {
 public:
  CompletionResponse complete(const CompletionRequest& req) override {
    check_request(req);
    const auto input = prompts::input_section(req.prompt);
    switch (req.tag) {
      case Stage::extract: return {extract(input), 0};
      case Stage::sensitive: return {verdicts(input, unsafe_words(), {}), 0};
      case Stage::generic: return {verdicts(input, {}, generic_phrases()), 0};
      case Stage::consolidate: return {groups(input), 0};
      case Stage::describe: return {describe(input), 0};
      case Stage::synthesize: return {synthesize(input), 0};
    }
    return {};
  }

 private:
  static std::vector<std::string_view> lines(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      if (nl > pos) out.push_back(text.substr(pos, nl - pos));
      pos = nl + 1;
    }
    return out;
  }

  static std::string_view section(std::string_view input, std::string_view label) {
    for (auto line : lines(input))
      if (line.size() > label.size() + 1 && line.substr(0, label.size()) == label && line[label.size()] == ':')
        return line.substr(label.size() + 2);
    return {};
  }

  static const std::set<std::string>& unsafe_words() {
    static const std::set<std::string> w = {"weapon", "weapons", "gun", "guns", "drugs", "gore", "nsfw", "violence"};
    return w;
  }
  static const std::set<std::string>& generic_phrases() {
    static const std::set<std::string> p = {"funny videos", "daily life", "funny", "vibes", "mood", "videos", "memes"};
    return p;
  }

  static std::string extract(std::string_view input) {
    std::string out;
    auto tags = section(input, "HASHTAGS");
    for (auto t : topic_tokens(tags)) out.append(t).push_back('\n');
    if (out.empty()) {
      auto words = word_tokens(section(input, "CAPTION"));
      if (words.empty()) words = word_tokens(section(input, "VISUAL_TAGS"));
      for (std::size_t i = 0; i < words.size() && i < 3; ++i) out.append(i ? " " : "").append(words[i]);
    }
    if (out.empty()) return "NONE";
    while (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
  }

  static std::string verdicts(std::string_view input, const std::set<std::string>& unsafe,
                              const std::set<std::string>& generic) {
    std::string out;
    for (auto line : lines(input)) {
      bool drop = generic.count(std::string(line)) > 0;
      for (const auto& w : word_tokens(line)) drop = drop || unsafe.count(w) > 0;
      out.append(drop ? "DROP " : "KEEP ").append(line).push_back('\n');
    }
    if (!out.empty()) out.pop_back();
    return out;
  }

  // Token-subset chains; the member with the most tokens in common with the
  // rest of its group is named first, the longer one on ties.
  static std::string groups(std::string_view input) {
    auto items = lines(input);
    std::vector<std::set<std::string_view>> toks;
    for (auto it : items) {
      auto t = topic_tokens(it);
      toks.emplace_back(t.begin(), t.end());
    }
    std::vector<std::size_t> group(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) group[i] = i;
    for (std::size_t i = 0; i < items.size(); ++i)
      for (std::size_t j = 0; j < i; ++j) {
        const auto& a = toks[i];
        const auto& b = toks[j];
        if (std::includes(a.begin(), a.end(), b.begin(), b.end()) || std::includes(b.begin(), b.end(), a.begin(), a.end())) {
          auto from = group[i], to = group[j];
          for (auto& g : group)
            if (g == from) g = to;
        }
      }
    std::map<std::size_t, std::vector<std::size_t>> by_group;
    for (std::size_t i = 0; i < items.size(); ++i) by_group[group[i]].push_back(i);
    std::string out;
    for (const auto& [g, members] : by_group) {
      // the most central member by summed token overlap, longer names on ties
      std::size_t rep = members.front();
      double best = -1;
      for (auto m : members) {
        double score = 0;
        for (auto o : members) {
          if (o == m) continue;
          std::size_t shared = 0;
          for (const auto& t : toks[m]) shared += toks[o].count(t);
          score += static_cast<double>(shared) / static_cast<double>(toks[m].size() + toks[o].size() - shared);
        }
        if (score > best + 1e-12 || (std::abs(score - best) <= 1e-12 && toks[m].size() > toks[rep].size())) {
          best = score;
          rep = m;
        }
      }
      out.append(items[rep]);
      for (auto m : members)
        if (m != rep) out.append(" | ").append(items[m]);
      out.push_back('\n');
    }
    if (!out.empty()) out.pop_back();
    return out;
  }

  static std::string describe(std::string_view input) {
    std::string out = "A short video";
    if (auto v = section(input, "VISUAL_TAGS"); !v.empty()) out.append(" showing ").append(v);
    if (auto h = section(input, "HASHTAGS"); !h.empty()) out.append(", tagged ").append(h);
    out.push_back('.');
    if (auto c = section(input, "CAPTION"); !c.empty()) out.append(" The creator writes: \"").append(c).append("\".");
    if (auto t = section(input, "TRANSCRIPT"); !t.empty()) out.append(" Audio mentions: \"").append(t).append("\".");
    return out;
  }

  static std::string synthesize(std::string_view input) {
    std::string name(section(input, "TREND"));
    std::vector<std::string_view> videos;
    for (auto line : lines(input))
      if (line.rfind("VIDEO: ", 0) == 0) videos.push_back(line.substr(7));
    static const std::map<std::string, std::string> hints = {
        {"cup", "sports"},     {"goal", "sports"},   {"match", "sports"},   {"soccer", "sports"},
        {"concert", "music"},  {"album", "music"},   {"song", "music"},     {"movie", "entertainment"},
        {"game", "gaming"},    {"recipe", "food"},   {"earthquake", "news"}, {"election", "news"},
        {"phone", "technology"}, {"outfit", "fashion"}};
    std::string category = "other";
    std::string haystack = name;
    for (auto v : videos) haystack.append(" ").append(v);
    for (const auto& w : word_tokens(haystack))
      if (auto it = hints.find(w); it != hints.end()) {
        category = it->second;
        break;
      }
    std::string details = std::to_string(videos.size()) + " representative videos";
    if (!videos.empty()) details.append(", for example: ").append(videos.front());
    return "SUMMARY: Creators are posting about " + name + ".\nDETAILS: " + details + "\nCATEGORY: " + category;
  }
};

}  // namespace trendscope::llm
