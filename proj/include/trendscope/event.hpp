#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "trendscope/error.hpp"

namespace trendscope {

using HourIndex = std::int64_t;
using EpochSeconds = std::int64_t;

inline constexpr EpochSeconds kSecondsPerHour = 3600;

/// One short-video post together with the textual signals extracted from it
/// upstream (visual tags, speech transcript, on-screen text, user metadata).
struct PostEvent {
  std::string post_id;
  std::string user_id;
  EpochSeconds ts = 0;
  std::string country;
  std::string caption;
  std::vector<std::string> hashtags;
  std::vector<std::string> visual_tags;
  std::string transcript;
  std::string ocr_text;
  std::optional<std::vector<std::string>> topics;

  bool has_signals() const {
    return !caption.empty() || !hashtags.empty() || !visual_tags.empty() ||
           !transcript.empty() || !ocr_text.empty();
  }

  friend bool operator==(const PostEvent&, const PostEvent&) = default;
};

/// UTC hour containing `ts`.
constexpr HourIndex hour_bucket(EpochSeconds ts) {
  // floor division; ts > 0 by precondition but keep negative inputs sane
  return ts >= 0 ? ts / kSecondsPerHour : -((-ts + kSecondsPerHour - 1) / kSecondsPerHour);
}

inline void validate(const PostEvent& e) {
  if (e.post_id.empty()) throw ValidationError("post_id must be non-empty");
  if (e.user_id.empty()) throw ValidationError("user_id must be non-empty");
  if (e.ts <= 0) throw ValidationError("ts must be positive (post " + e.post_id + ")");
  if (!e.topics && !e.has_signals())
    throw ValidationError("post " + e.post_id + " carries no signals and no topics");
}

namespace detail {

inline std::string string_field(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) throw ValidationError(std::string(key) + " must be a string");
  return it->get<std::string>();
}

inline std::vector<std::string> string_list_field(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_array()) throw ValidationError(std::string(key) + " must be an array of strings");
  std::vector<std::string> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_string()) throw ValidationError(std::string(key) + " must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace detail

/// Builds a validated event from an already-parsed JSON object.
inline PostEvent event_from_json(const nlohmann::json& obj) {
  if (!obj.is_object()) throw ValidationError("event must be a JSON object");
  PostEvent e;
  if (!obj.contains("post_id")) throw ValidationError("missing post_id");
  if (!obj.contains("user_id")) throw ValidationError("missing user_id");
  auto ts = obj.find("ts");
  if (ts == obj.end()) throw ValidationError("missing ts");
  if (!ts->is_number_integer()) throw ValidationError("ts must be an integer");
  e.post_id = detail::string_field(obj, "post_id");
  e.user_id = detail::string_field(obj, "user_id");
  e.ts = ts->get<EpochSeconds>();
  e.country = detail::string_field(obj, "country");
  e.caption = detail::string_field(obj, "caption");
  e.hashtags = detail::string_list_field(obj, "hashtags");
  e.visual_tags = detail::string_list_field(obj, "visual_tags");
  e.transcript = detail::string_field(obj, "transcript");
  e.ocr_text = detail::string_field(obj, "ocr_text");
  if (auto t = obj.find("topics"); t != obj.end() && !t->is_null())
    e.topics = detail::string_list_field(obj, "topics");
  validate(e);
  return e;
}

/// Parses one JSONL line. `line_no` is only used to label errors.
inline PostEvent parse_event(std::string_view line, std::size_t line_no = 0) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& err) {
    throw ParseError(line_no, err.what());
  }
  try {
    return event_from_json(obj);
  } catch (const ParseError&) {
    throw;
  } catch (const ValidationError& err) {
    throw ValidationError("line " + std::to_string(line_no) + ": " + err.what());
  }
}

/// Canonical serialization: fixed field order, `topics` only when present.
inline nlohmann::ordered_json to_json(const PostEvent& e) {
  nlohmann::ordered_json j;
  j["post_id"] = e.post_id;
  j["user_id"] = e.user_id;
  j["ts"] = e.ts;
  j["country"] = e.country;
  j["caption"] = e.caption;
  j["hashtags"] = e.hashtags;
  j["visual_tags"] = e.visual_tags;
  j["transcript"] = e.transcript;
  j["ocr_text"] = e.ocr_text;
  if (e.topics) j["topics"] = *e.topics;
  return j;
}

inline std::string serialize_event(const PostEvent& e) { return to_json(e).dump(); }

/// Reads a JSONL event file. Blank lines are skipped; any other bad line throws.
inline std::vector<PostEvent> read_events(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open event file: " + path);
  std::vector<PostEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    events.push_back(parse_event(line, line_no));
  }
  if (in.bad()) throw IoError("read failure on " + path);
  return events;
}

inline void write_events(const std::string& path, const std::vector<PostEvent>& events) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write event file: " + path);
  for (const auto& e : events) out << serialize_event(e) << '\n';
  if (!out) throw IoError("write failure on " + path);
}

}  // namespace trendscope
