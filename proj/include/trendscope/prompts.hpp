#pragma once

// Built-in prompt templates. Copies live under prompts/ so they can be edited
// and passed back in with the --*-prompt flags; a test keeps the two in sync.
// Every template ends with an INPUT marker followed by the {{input}} slot.

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

#include "trendscope/error.hpp"

namespace trendscope::prompts {

inline constexpr std::string_view kInputMarker = "### INPUT\n";
inline constexpr std::string_view kInputSlot = "{{input}}";

inline constexpr std::string_view kExtract =
    R"(You extract topic candidates from one short-video post.
Read the post signals and reply with at most 5 concise topical phrases or named entities that summarize the main content.
Rules:
- one phrase per line
- no numbering, bullets, hashtags or commas
- reply with NONE if the post has no identifiable topic
### INPUT
{{input}})";

inline constexpr std::string_view kSensitive =
    R"(You review candidate trend topics for a short-video platform.
Policy: drop any topic that refers to sexual content, graphic violence, weapons, illegal drugs, self-harm, hate or harassment, or tragedy involving private individuals. Keep everything else.
Reply with exactly one line per topic, either "KEEP <topic>" or "DROP <topic>", copying the topic verbatim.
### INPUT
{{input}})";

inline constexpr std::string_view kGeneric =
    R"(You review candidate trend topics for a short-video platform.
Drop topics that are overly broad or generic and do not name a specific emerging subject (for example "funny videos" or "daily life"). Keep specific events, people, products, places and memes.
Reply with exactly one line per topic, either "KEEP <topic>" or "DROP <topic>", copying the topic verbatim.
### INPUT
{{input}})";

inline constexpr std::string_view kConsolidate =
    R"(Group the topics below that refer to the same trend and pick the most representative topic of each group as its final trend name.
Reply with one line per group: the representative first, then the remaining members, separated by " | ". Every input topic must appear in exactly one group, copied verbatim.
### INPUT
{{input}})";

inline constexpr std::string_view kDescribe =
    R"(Describe the main content of this short video in one or two sentences, under 500 characters, using only the signals given.
### INPUT
{{input}})";

inline constexpr std::string_view kSynthesize =
    R"(You are given descriptions of representative videos for one trend.
Reply with exactly three lines:
SUMMARY: <one-sentence high-level summary of the trend>
DETAILS: <a few sentences with the key details>
CATEGORY: <one of sports, entertainment, news, music, fashion, food, gaming, technology, lifestyle, other>
### INPUT
{{input}})";

/// Substitutes the first {{input}} slot.
inline std::string render(std::string_view tmpl, std::string_view input) {
  std::string out(tmpl);
  if (auto pos = out.find(kInputSlot); pos != std::string::npos)
    out.replace(pos, kInputSlot.size(), input);
  else
    out.append("\n").append(input);
  return out;
}

/// The text after the INPUT marker, or empty when the marker is absent.
inline std::string_view input_section(std::string_view prompt) {
  auto pos = prompt.rfind(kInputMarker);
  if (pos == std::string_view::npos) return {};
  return prompt.substr(pos + kInputMarker.size());
}

inline std::string load_template(const std::string& path, std::string_view fallback) {
  if (path.empty()) return std::string(fallback);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read prompt template: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  auto text = ss.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  return text;
}

}  // namespace trendscope::prompts
