#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/locid.h>
#include <unicode/unistr.h>

#include "trendscope/completion.hpp"
#include "trendscope/error.hpp"
#include "trendscope/event.hpp"
#include "trendscope/log.hpp"
#include "trendscope/prompts.hpp"

namespace trendscope {

inline constexpr std::size_t kMaxTopicChars = 80;
inline constexpr std::size_t kDefaultTopicsPerPost = 5;

/// Canonical topic key: lowercase, NFC, single-spaced, no leading '#',
/// 1..80 code points. Only normalize_topic() (or a trusted re-load) makes one.
class TopicString {
 public:
  TopicString() = default;

  const std::string& str() const noexcept { return value_; }
  operator std::string_view() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend auto operator<=>(const TopicString&, const TopicString&) = default;
  friend bool operator==(const TopicString&, const TopicString&) = default;

 private:
  explicit TopicString(std::string v) : value_(std::move(v)) {}
  friend TopicString normalize_topic(std::string_view raw);
  std::string value_;
};

namespace detail {

inline bool is_ascii(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](char c) { return static_cast<unsigned char>(c) < 0x80; });
}

inline bool ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// Lowercase + NFC. ASCII input is already NFC, so it skips ICU entirely.
inline std::string fold_case_nfc(std::string_view raw) {
  if (is_ascii(raw)) {
    std::string out(raw);
    for (auto& c : out)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
  }
  auto u = icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  u.toLower(icu::Locale::getRoot());
  UErrorCode status = U_ZERO_ERROR;
  const auto* nfc = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status)) throw std::runtime_error("ICU NFC normalizer unavailable");
  auto normalized = nfc->normalize(u, status);
  if (U_FAILURE(status)) throw ValidationError("invalid text for normalization");
  // Replace every Unicode whitespace code point with an ASCII space so later
  // passes only need to look for ' '.
  icu::UnicodeString spaced;
  for (int32_t i = 0; i < normalized.length();) {
    UChar32 cp = normalized.char32At(i);
    spaced.append(u_isUWhiteSpace(cp) ? UChar32(' ') : cp);
    i += U16_LENGTH(cp);
  }
  std::string out;
  spaced.toUTF8String(out);
  return out;
}

/// Truncates to at most `max_cp` UTF-8 code points.
inline void truncate_code_points(std::string& s, std::size_t max_cp) {
  std::size_t cps = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
      if (cps == max_cp) {
        s.resize(i);
        return;
      }
      ++cps;
    }
  }
}

}  // namespace detail

/// Lowercases, applies NFC, drops leading '#', collapses whitespace and cuts
/// to 80 code points. Throws ValidationError when nothing is left.
inline TopicString normalize_topic(std::string_view raw) {
  const auto folded = detail::fold_case_nfc(raw);
  std::string out;
  out.reserve(folded.size());
  bool leading = true;
  bool pending_space = false;
  for (char c : folded) {
    if (detail::ascii_space(c)) {
      pending_space = !leading;
      continue;
    }
    if (leading && c == '#') continue;
    if (pending_space) out.push_back(' ');
    pending_space = false;
    leading = false;
    out.push_back(c);
  }
  detail::truncate_code_points(out, kMaxTopicChars);
  while (!out.empty() && out.back() == ' ') out.pop_back();
  if (out.empty()) throw ValidationError("topic is empty after normalization: '" + std::string(raw) + "'");
  return TopicString(std::move(out));
}

inline std::optional<TopicString> try_normalize_topic(std::string_view raw) {
  try {
    return normalize_topic(raw);
  } catch (const ValidationError&) {
    return std::nullopt;
  }
}

/// Space-separated tokens of a normalized topic.
inline std::vector<std::string_view> topic_tokens(std::string_view topic) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start < topic.size()) {
    auto end = topic.find(' ', start);
    if (end == std::string_view::npos) end = topic.size();
    if (end > start) out.push_back(topic.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

/// Lowercased word tokens of free text. ASCII letters/digits and any non-ASCII
/// byte count as word characters; everything else separates words.
inline std::vector<std::string> word_tokens(std::string_view text) {
  const auto folded = detail::fold_case_nfc(text);
  std::vector<std::string> out;
  std::string cur;
  for (char c : folded) {
    auto u = static_cast<unsigned char>(c);
    bool word = u >= 0x80 || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    if (word) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// --- unified textual representation ----------------------------------------

enum class SignalLabel { caption, hashtags, visual_tags, transcript, ocr };

inline std::string_view to_string(SignalLabel l) {
  switch (l) {
    case SignalLabel::caption: return "CAPTION";
    case SignalLabel::hashtags: return "HASHTAGS";
    case SignalLabel::visual_tags: return "VISUAL_TAGS";
    case SignalLabel::transcript: return "TRANSCRIPT";
    case SignalLabel::ocr: return "OCR";
  }
  return "";
}

struct UnifiedText {
  std::vector<std::pair<SignalLabel, std::string>> sections;

  bool empty() const { return sections.empty(); }

  /// One "LABEL: text" line per section.
  std::string render() const {
    std::string out;
    for (const auto& [label, text] : sections) {
      if (!out.empty()) out.push_back('\n');
      out.append(to_string(label)).append(": ").append(text);
    }
    return out;
  }

  friend bool operator==(const UnifiedText&, const UnifiedText&) = default;
};

namespace detail {
inline std::string join(const std::vector<std::string>& parts, bool strip_hash) {
  std::string out;
  for (const auto& p : parts) {
    std::string_view v = p;
    if (strip_hash)
      while (!v.empty() && v.front() == '#') v.remove_prefix(1);
    if (v.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(v);
  }
  return out;
}
}  // namespace detail

/// Assembles the post's non-empty signals in fixed label order.
inline UnifiedText unify_signals(const PostEvent& e) {
  UnifiedText u;
  auto add = [&](SignalLabel l, std::string text) {
    if (!text.empty()) u.sections.emplace_back(l, std::move(text));
  };
  add(SignalLabel::caption, e.caption);
  add(SignalLabel::hashtags, detail::join(e.hashtags, true));
  add(SignalLabel::visual_tags, detail::join(e.visual_tags, false));
  add(SignalLabel::transcript, e.transcript);
  add(SignalLabel::ocr, e.ocr_text);
  return u;
}

// --- extractors -------------------------------------------------------------

/// Appends `t` unless already present or the list is full.
inline void push_unique(std::vector<TopicString>& out, TopicString t, std::size_t cap) {
  if (out.size() >= cap) return;
  if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
}

class TopicExtractor {
 public:
  virtual ~TopicExtractor() = default;
  virtual std::vector<TopicString> extract(const UnifiedText& unified, const PostEvent& event) const = 0;
};

/// Uses the post's pre-extracted topics as-is (after normalization).
class PassthroughExtractor final : public TopicExtractor {
 public:
  explicit PassthroughExtractor(std::size_t max_topics = kDefaultTopicsPerPost) : cap_(max_topics) {}

  std::vector<TopicString> extract(const UnifiedText&, const PostEvent& event) const override {
    std::vector<TopicString> out;
    if (!event.topics) return out;
    for (const auto& raw : *event.topics)
      if (auto t = try_normalize_topic(raw)) push_unique(out, std::move(*t), cap_);
    return out;
  }

 private:
  std::size_t cap_;
};

/// Phrase list used by the mock extractor. Matching is on whole word tokens.
class TopicDictionary {
 public:
  TopicDictionary() = default;

  explicit TopicDictionary(const std::vector<std::string>& phrases) {
    for (const auto& p : phrases) add(p);
  }

  static TopicDictionary from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open topic dictionary: " + path);
    TopicDictionary dict;
    std::string line;
    while (std::getline(in, line)) dict.add(line);
    return dict;
  }

  void add(std::string_view phrase) {
    auto topic = try_normalize_topic(phrase);
    if (!topic) return;
    auto toks = word_tokens(topic->str());
    if (toks.empty()) return;
    for (const auto& existing : entries_)
      if (existing.topic == *topic) return;
    const std::size_t idx = entries_.size();
    by_first_[toks.front()].push_back(idx);
    max_len_ = std::max(max_len_, toks.size());
    entries_.push_back({std::move(*topic), std::move(toks)});
  }

  std::size_t size() const { return entries_.size(); }

  /// Entries found in the token stream, in dictionary order.
  std::vector<std::size_t> match(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> hits;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      auto it = by_first_.find(tokens[i]);
      if (it == by_first_.end()) continue;
      for (std::size_t idx : it->second) {
        const auto& phrase = entries_[idx].tokens;
        if (i + phrase.size() > tokens.size()) continue;
        if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i)))
          hits.push_back(idx);
      }
    }
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    return hits;
  }

  const TopicString& topic(std::size_t idx) const { return entries_[idx].topic; }

 private:
  struct Entry {
    TopicString topic;
    std::vector<std::string> tokens;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_first_;
  std::size_t max_len_ = 0;
};

/// Deterministic stand-in for the model extractor: normalized hashtags first,
/// then dictionary phrases found in any unified section.
class MockExtractor final : public TopicExtractor {
 public:
  explicit MockExtractor(std::shared_ptr<const TopicDictionary> dict,
                         std::size_t max_topics = kDefaultTopicsPerPost)
      : dict_(std::move(dict)), cap_(max_topics) {}

  std::vector<TopicString> extract(const UnifiedText& unified, const PostEvent& event) const override {
    std::vector<TopicString> out;
    for (const auto& tag : event.hashtags)
      if (auto t = try_normalize_topic(tag)) push_unique(out, std::move(*t), cap_);
    if (!dict_ || dict_->size() == 0) return out;
    std::vector<std::size_t> hits;
    for (const auto& [label, text] : unified.sections) {
      if (label == SignalLabel::hashtags) continue;
      auto h = dict_->match(word_tokens(text));
      hits.insert(hits.end(), h.begin(), h.end());
    }
    std::sort(hits.begin(), hits.end());
    hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
    for (auto idx : hits) push_unique(out, dict_->topic(idx), cap_);
    return out;
  }

 private:
  std::shared_ptr<const TopicDictionary> dict_;
  std::size_t cap_;
};

/// Parses a line-per-topic completion. nullopt means the output was unusable.
inline std::optional<std::vector<TopicString>> parse_topic_lines(std::string_view text, std::size_t cap) {
  std::vector<TopicString> out;
  bool none = false;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    while (!line.empty() && (detail::ascii_space(line.front()) || line.front() == '-' || line.front() == '*'))
      line.remove_prefix(1);
    // "1." / "2)" numbering
    std::size_t digits = 0;
    while (digits < line.size() && line[digits] >= '0' && line[digits] <= '9') ++digits;
    if (digits > 0 && digits < line.size() && (line[digits] == '.' || line[digits] == ')'))
      line.remove_prefix(digits + 1);
    while (!line.empty() && detail::ascii_space(line.back())) line.remove_suffix(1);
    if (line.empty()) continue;
    if (line == "NONE" || line == "none") {
      none = true;
      continue;
    }
    if (line.find(',') != std::string_view::npos) return std::nullopt;
    if (auto t = try_normalize_topic(line)) push_unique(out, std::move(*t), cap);
  }
  if (out.empty() && !none) return std::nullopt;
  return out;
}

/// Asks the completion client for topics. Client errors propagate; an
/// unparseable reply leaves the post topicless and emits a warning.
class LlmExtractor final : public TopicExtractor {
 public:
  LlmExtractor(std::shared_ptr<llm::CompletionClient> client, std::string prompt_template,
               std::size_t max_topics = kDefaultTopicsPerPost, WarningSink warn = stderr_warnings())
      : client_(std::move(client)), template_(std::move(prompt_template)), cap_(max_topics),
        warn_(std::move(warn)) {}

  std::vector<TopicString> extract(const UnifiedText& unified, const PostEvent& event) const override {
    if (unified.empty()) return PassthroughExtractor(cap_).extract(unified, event);
    llm::CompletionRequest req;
    req.prompt = prompts::render(template_, unified.render());
    req.tag = llm::Stage::extract;
    req.max_tokens = 128;
    auto resp = client_->complete(req);
    auto parsed = parse_topic_lines(resp.text, cap_);
    if (!parsed) {
      if (warn_) warn_("unparseable topic extraction output for post " + event.post_id);
      return {};
    }
    return std::move(*parsed);
  }

 private:
  std::shared_ptr<llm::CompletionClient> client_;
  std::string template_;
  std::size_t cap_;
  WarningSink warn_;
};

inline std::vector<TopicString> extract_topics(const UnifiedText& unified, const PostEvent& event,
                                               const TopicExtractor& extractor) {
  return extractor.extract(unified, event);
}

}  // namespace trendscope

template <>
struct std::hash<trendscope::TopicString> {
  std::size_t operator()(const trendscope::TopicString& t) const noexcept {
    return std::hash<std::string>{}(t.str());
  }
};
