#pragma once

#include <algorithm>
#include <array>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "trendscope/error.hpp"
#include "trendscope/topic.hpp"

namespace trendscope {

inline constexpr std::array<std::string_view, 10> kCategories = {
    "sports", "entertainment", "news", "music", "fashion", "food", "gaming", "technology", "lifestyle", "other"};

inline bool is_category(std::string_view c) {
  return std::find(kCategories.begin(), kCategories.end(), c) != kCategories.end();
}

/// keyword -> category lookup. A keyword matches when its tokens appear
/// contiguously in the text's tokens; the longest matching keyword wins,
/// ties broken lexicographically.
class CategoryKeywords {
 public:
  CategoryKeywords() = default;

  explicit CategoryKeywords(const std::map<std::string, std::string>& entries) {
    for (const auto& [k, v] : entries) add(k, v);
  }

  /// JSON object {"keyword": "category", ...}
  static CategoryKeywords from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open category keyword file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("category keyword file " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ValidationError("category keyword file must hold a JSON object");
    CategoryKeywords out;
    for (const auto& [k, v] : j.items()) {
      if (!v.is_string()) throw ValidationError("category for keyword '" + k + "' must be a string");
      out.add(k, v.get<std::string>());
    }
    return out;
  }

  void add(std::string_view keyword, std::string_view category) {
    if (!is_category(category))
      throw ValidationError("unknown category '" + std::string(category) + "' for keyword '" + std::string(keyword) + "'");
    auto toks = word_tokens(keyword);
    if (toks.empty()) return;
    std::string key;
    for (const auto& t : toks) key += (key.empty() ? "" : " ") + t;
    entries_[key] = Entry{std::move(toks), std::string(category)};
  }

  bool empty() const { return entries_.empty(); }

  std::optional<std::string> lookup(std::string_view text) const {
    const auto toks = word_tokens(text);
    const Entry* best = nullptr;
    for (const auto& [key, e] : entries_) {  // map order = lexicographic
      if (best && e.tokens.size() <= best->tokens.size()) continue;
      if (std::search(toks.begin(), toks.end(), e.tokens.begin(), e.tokens.end()) != toks.end()) best = &e;
    }
    if (!best) return std::nullopt;
    return best->category;
  }

 private:
  struct Entry {
    std::vector<std::string> tokens;
    std::string category;
  };
  std::map<std::string, Entry> entries_;
};

}  // namespace trendscope
