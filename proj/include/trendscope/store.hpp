#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "trendscope/error.hpp"
#include "trendscope/event.hpp"
#include "trendscope/topic.hpp"

namespace trendscope {

struct StoreOptions {
  HourIndex retention_hours = 14 * 24;
  std::size_t shards = 16;
};

inline constexpr std::array<char, 4> kSnapshotMagic = {'T', 'P', 'S', '1'};
inline constexpr std::uint8_t kSnapshotVersion = 1;

/// Per-topic hourly sets of distinct posting users, with per-country sets
/// for attribution. Writes lock one shard (topics are sharded by hash);
/// reads take shared locks, so queries may run concurrently with each other.
///
/// Only posting activity is ever recorded; there is no viewer-side input.
class TopicStore {
 public:
  explicit TopicStore(StoreOptions opts = {})
      : opts_(opts), shards_(std::max<std::size_t>(1, opts.shards)) {}

  TopicStore(TopicStore&& other) noexcept
      : opts_(other.opts_), shards_(std::move(other.shards_)) {}
  TopicStore& operator=(TopicStore&& other) noexcept {
    opts_ = other.opts_;
    shards_ = std::move(other.shards_);
    return *this;
  }

  const StoreOptions& options() const { return opts_; }

  /// Adds `user` to the topic's bucket for hour_bucket(ts). Idempotent per
  /// (topic, user, hour). Posts older than the retention horizon of the
  /// topic are dropped.
  void record(const TopicString& topic, std::string_view user, std::string_view country, EpochSeconds ts) {
    const HourIndex hour = hour_bucket(ts);
    Shard& shard = shard_for(topic.str());
    std::unique_lock lock(shard.mu);
    auto [it, created] = shard.topics.try_emplace(topic.str());
    Series& s = it->second;
    if (created) {
      s.first_seen = s.last_seen = hour;
    } else if (hour < s.last_seen - opts_.retention_hours) {
      return;
    }
    const auto uid = shard.users.intern(user);
    Bucket& b = s.buckets[hour];
    insert_sorted(b.users, uid);
    if (!country.empty()) {
      const auto cid = shard.countries.intern(country);
      auto cit = std::lower_bound(b.countries.begin(), b.countries.end(), cid,
                                  [](const auto& entry, std::uint32_t key) { return entry.first < key; });
      if (cit == b.countries.end() || cit->first != cid) cit = b.countries.insert(cit, {cid, {}});
      insert_sorted(cit->second, uid);
    }
    if (hour > s.last_seen) {
      s.last_seen = hour;
      s.buckets.erase(s.buckets.begin(), s.buckets.lower_bound(hour - opts_.retention_hours));
    }
    s.first_seen = s.buckets.begin()->first;
  }

  /// Distinct users over hours [t-T+1, t]. Unknown topics count as zero.
  std::size_t unique_users(const TopicString& topic, HourIndex t, int agg_hours) const {
    const Shard& shard = shard_for(topic.str());
    std::shared_lock lock(shard.mu);
    auto it = shard.topics.find(topic.str());
    if (it == shard.topics.end()) return 0;
    const auto& buckets = it->second.buckets;
    auto lo = buckets.lower_bound(t - agg_hours + 1);
    auto hi = buckets.upper_bound(t);
    if (lo == hi) return 0;
    if (std::next(lo) == hi) return lo->second.users.size();
    std::vector<std::uint32_t> all;
    for (auto b = lo; b != hi; ++b) all.insert(all.end(), b->second.users.begin(), b->second.users.end());
    std::sort(all.begin(), all.end());
    return static_cast<std::size_t>(std::unique(all.begin(), all.end()) - all.begin());
  }

  /// Distinct users over the window across several topics (union of users).
  std::size_t unique_users(std::span<const TopicString> topics, HourIndex t, int agg_hours) const {
    if (topics.size() == 1) return unique_users(topics.front(), t, agg_hours);
    std::vector<std::string> all;
    for (const auto& topic : topics)
      visit_window(topic, t, agg_hours, [&](const Shard& shard, const Bucket& b) {
        for (auto uid : b.users) all.push_back(shard.users.name(uid));
      });
    std::sort(all.begin(), all.end());
    return static_cast<std::size_t>(std::unique(all.begin(), all.end()) - all.begin());
  }

  /// Element i is unique_users(topic, t_end - span + 1 + i, T).
  std::vector<std::int64_t> series_view(const TopicString& topic, HourIndex t_end, int span, int agg_hours) const {
    std::vector<std::int64_t> out(static_cast<std::size_t>(std::max(span, 0)), 0);
    if (span <= 0) return out;
    const Shard& shard = shard_for(topic.str());
    std::shared_lock lock(shard.mu);
    auto it = shard.topics.find(topic.str());
    if (it == shard.topics.end()) return out;
    const auto& buckets = it->second.buckets;
    const HourIndex first = t_end - span + 1;

    if (agg_hours == 1) {
      for (auto b = buckets.lower_bound(first); b != buckets.end() && b->first <= t_end; ++b)
        out[static_cast<std::size_t>(b->first - first)] = static_cast<std::int64_t>(b->second.users.size());
      return out;
    }
    // Sliding multiset of user ids over the aggregation window.
    std::unordered_map<std::uint32_t, std::uint32_t> live;
    auto add = [&](const Bucket& b) {
      for (auto uid : b.users) ++live[uid];
    };
    auto drop = [&](const Bucket& b) {
      for (auto uid : b.users)
        if (auto e = live.find(uid); e != live.end() && --e->second == 0) live.erase(e);
    };
    for (auto b = buckets.lower_bound(first - agg_hours + 1); b != buckets.end() && b->first < first; ++b)
      add(b->second);
    for (HourIndex h = first; h <= t_end; ++h) {
      if (auto b = buckets.find(h); b != buckets.end()) add(b->second);
      if (auto b = buckets.find(h - agg_hours); b != buckets.end()) drop(b->second);
      out[static_cast<std::size_t>(h - first)] = static_cast<std::int64_t>(live.size());
    }
    return out;
  }

  /// Distinct posting users per country over the window, across `topics`.
  /// Sorted by count descending, then country code.
  std::vector<std::pair<std::string, std::size_t>> country_counts(std::span<const TopicString> topics,
                                                                  HourIndex t, int agg_hours) const {
    std::map<std::string, std::vector<std::string>> per_country;
    for (const auto& topic : topics)
      visit_window(topic, t, agg_hours, [&](const Shard& shard, const Bucket& b) {
        for (const auto& [cid, users] : b.countries) {
          auto& dst = per_country[shard.countries.name(cid)];
          for (auto uid : users) dst.push_back(shard.users.name(uid));
        }
      });
    std::vector<std::pair<std::string, std::size_t>> out;
    for (auto& [code, users] : per_country) {
      std::sort(users.begin(), users.end());
      out.emplace_back(code, static_cast<std::size_t>(std::unique(users.begin(), users.end()) - users.begin()));
    }
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
  }

  /// All known topics, sorted.
  std::vector<TopicString> topics() const {
    std::vector<TopicString> out;
    for (const auto& shard : shards_) {
      std::shared_lock lock(shard.mu);
      for (const auto& [name, series] : shard.topics) out.push_back(normalize_topic(name));
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::size_t topic_count() const {
    std::size_t n = 0;
    for (const auto& shard : shards_) {
      std::shared_lock lock(shard.mu);
      n += shard.topics.size();
    }
    return n;
  }

  /// Latest hour with any recorded post, if any.
  std::optional<HourIndex> last_hour() const {
    std::optional<HourIndex> out;
    for (const auto& shard : shards_) {
      std::shared_lock lock(shard.mu);
      for (const auto& [name, series] : shard.topics)
        if (!out || series.last_seen > *out) out = series.last_seen;
    }
    return out;
  }

  std::optional<std::pair<HourIndex, HourIndex>> seen_range(const TopicString& topic) const {
    const Shard& shard = shard_for(topic.str());
    std::shared_lock lock(shard.mu);
    auto it = shard.topics.find(topic.str());
    if (it == shard.topics.end()) return std::nullopt;
    return std::pair{it->second.first_seen, it->second.last_seen};
  }

  // --- persistence ----------------------------------------------------------
  //
  // Layout (little-endian): "TPS1" | u8 version | i64 retention | u64 topics,
  // then per topic (sorted): str name | i64 first | i64 last | u64 buckets,
  // per bucket: i64 hour | u64 n | n×str user | u64 c | c×(str code | u64 n |
  // n×str user). str = u32 length + bytes. Users and codes are written
  // sorted, so equal stores produce identical files.

  void snapshot(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write snapshot: " + path);
    Writer w{out};
    out.write(kSnapshotMagic.data(), kSnapshotMagic.size());
    w.u8(kSnapshotVersion);
    w.i64(opts_.retention_hours);

    std::vector<std::pair<std::string, const Shard*>> names;
    for (const auto& shard : shards_) shard.mu.lock_shared();
    for (const auto& shard : shards_)
      for (const auto& [name, series] : shard.topics) names.emplace_back(name, &shard);
    std::sort(names.begin(), names.end());
    w.u64(names.size());
    for (const auto& [name, shard] : names) {
      const Series& s = shard->topics.at(name);
      w.str(name);
      w.i64(s.first_seen);
      w.i64(s.last_seen);
      w.u64(s.buckets.size());
      for (const auto& [hour, bucket] : s.buckets) {
        w.i64(hour);
        w.strs(sorted_names(shard->users, bucket.users));
        std::vector<std::pair<std::string, std::vector<std::string>>> cs;
        for (const auto& [cid, users] : bucket.countries)
          cs.emplace_back(shard->countries.name(cid), sorted_names(shard->users, users));
        std::sort(cs.begin(), cs.end());
        w.u64(cs.size());
        for (const auto& [code, users] : cs) {
          w.str(code);
          w.strs(users);
        }
      }
    }
    for (const auto& shard : shards_) shard.mu.unlock_shared();
    if (!out) throw IoError("snapshot write failed: " + path);
  }

  static TopicStore load(const std::string& path, std::size_t shards = 16) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open snapshot: " + path);
    std::array<char, 4> magic{};
    in.read(magic.data(), magic.size());
    if (!in || magic != kSnapshotMagic) throw IncompatibleSnapshotError("not a topic store snapshot: " + path);
    Reader r{in, path};
    const auto version = r.u8();
    if (version != kSnapshotVersion)
      throw IncompatibleSnapshotError("unsupported snapshot version " + std::to_string(version) + " in " + path);
    StoreOptions opts;
    opts.retention_hours = r.i64();
    opts.shards = shards;
    TopicStore store(opts);
    const auto n_topics = r.u64();
    for (std::uint64_t i = 0; i < n_topics; ++i) {
      auto name = r.str();
      Shard& shard = store.shard_for(name);
      Series& s = shard.topics[name];
      s.first_seen = r.i64();
      s.last_seen = r.i64();
      const auto n_buckets = r.u64();
      for (std::uint64_t j = 0; j < n_buckets; ++j) {
        Bucket& b = s.buckets[r.i64()];
        for (auto& u : r.strs()) b.users.push_back(shard.users.intern(u));
        std::sort(b.users.begin(), b.users.end());
        const auto n_countries = r.u64();
        for (std::uint64_t k = 0; k < n_countries; ++k) {
          auto cid = shard.countries.intern(r.str());
          std::vector<std::uint32_t> users;
          for (auto& u : r.strs()) users.push_back(shard.users.intern(u));
          std::sort(users.begin(), users.end());
          b.countries.emplace_back(cid, std::move(users));
        }
        std::sort(b.countries.begin(), b.countries.end());
      }
    }
    return store;
  }

 private:
  struct Bucket {
    std::vector<std::uint32_t> users;  // sorted interned ids
    std::vector<std::pair<std::uint32_t, std::vector<std::uint32_t>>> countries;  // sorted by id
  };
  struct Series {
    std::map<HourIndex, Bucket> buckets;  // never holds an empty bucket
    HourIndex first_seen = 0;
    HourIndex last_seen = 0;
  };
  class Interner {
   public:
    std::uint32_t intern(std::string_view s) {
      auto it = ids_.find(std::string(s));
      if (it != ids_.end()) return it->second;
      auto id = static_cast<std::uint32_t>(names_.size());
      names_.emplace_back(s);
      ids_.emplace(names_.back(), id);
      return id;
    }
    const std::string& name(std::uint32_t id) const { return names_[id]; }

   private:
    std::unordered_map<std::string, std::uint32_t> ids_;
    std::vector<std::string> names_;
  };
  struct Shard {
    mutable std::shared_mutex mu;
    std::unordered_map<std::string, Series> topics;
    Interner users;
    Interner countries;
  };

  static void insert_sorted(std::vector<std::uint32_t>& v, std::uint32_t id) {
    auto it = std::lower_bound(v.begin(), v.end(), id);
    if (it == v.end() || *it != id) v.insert(it, id);
  }

  static std::vector<std::string> sorted_names(const Interner& in, const std::vector<std::uint32_t>& ids) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (auto id : ids) out.push_back(in.name(id));
    std::sort(out.begin(), out.end());
    return out;
  }

  Shard& shard_for(const std::string& name) { return shards_[std::hash<std::string>{}(name) % shards_.size()]; }
  const Shard& shard_for(const std::string& name) const {
    return shards_[std::hash<std::string>{}(name) % shards_.size()];
  }

  template <class Fn>
  void visit_window(const TopicString& topic, HourIndex t, int agg_hours, Fn&& fn) const {
    const Shard& shard = shard_for(topic.str());
    std::shared_lock lock(shard.mu);
    auto it = shard.topics.find(topic.str());
    if (it == shard.topics.end()) return;
    const auto& buckets = it->second.buckets;
    for (auto b = buckets.lower_bound(t - agg_hours + 1); b != buckets.end() && b->first <= t; ++b)
      fn(shard, b->second);
  }

  struct Writer {
    std::ostream& out;
    void raw(const void* p, std::size_t n) { out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u8(std::uint8_t v) { raw(&v, 1); }
    void u64(std::uint64_t v) {
      unsigned char b[8];
      for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
      raw(b, 8);
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
      auto n = static_cast<std::uint32_t>(s.size());
      unsigned char b[4];
      for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(n >> (8 * i));
      raw(b, 4);
      raw(s.data(), s.size());
    }
    void strs(const std::vector<std::string>& v) {
      u64(v.size());
      for (const auto& s : v) str(s);
    }
  };

  struct Reader {
    std::istream& in;
    const std::string& path;
    void raw(void* p, std::size_t n) {
      in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
      if (!in) throw IoError("truncated snapshot: " + path);
    }
    std::uint8_t u8() {
      std::uint8_t v;
      raw(&v, 1);
      return v;
    }
    std::uint64_t u64() {
      unsigned char b[8];
      raw(b, 8);
      std::uint64_t v = 0;
      for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
      return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    std::string str() {
      unsigned char b[4];
      raw(b, 4);
      std::uint32_t n = 0;
      for (int i = 3; i >= 0; --i) n = (n << 8) | b[i];
      std::string s(n, '\0');
      if (n) raw(s.data(), n);
      return s;
    }
    std::vector<std::string> strs() {
      const auto n = u64();
      std::vector<std::string> v;
      v.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
      for (std::uint64_t i = 0; i < n; ++i) v.push_back(str());
      return v;
    }
  };

  StoreOptions opts_;
  std::vector<Shard> shards_;
};

}  // namespace trendscope
