#pragma once

// Test-only reference implementations. Written directly from the formulas
// with plain loops and 1-based indexing; shares no code with the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace oracle {

/// values[k] is num_user at hour k+1; hours < 1 are zero.
struct Series {
  std::vector<double> values;
  double at(long t) const {
    if (t < 1 || t > static_cast<long>(values.size())) return 0.0;
    return values[static_cast<std::size_t>(t - 1)];
  }
};

inline double num_max(const Series& s, long n, long t) {
  double m = 0.0;
  for (long i = t - n + 1; i <= t; ++i)
    if (s.at(i) > m) m = s.at(i);
  return m;
}

inline double num_max_avg(const Series& s, long n, long t) {
  double sum = 0.0;
  for (long i = t - n + 1; i <= t; ++i) sum += num_max(s, n, i);
  return sum / static_cast<double>(n);
}

inline double lift(const Series& s, long n, long t, double floor, double cap) {
  double base = num_max_avg(s, n, t - 1);
  if (base < floor) base = floor;
  double v = s.at(t) / base;
  if (v > cap) v = cap;
  if (v < 0) v = 0;
  return v;
}

inline double trend_score(const Series& s, const std::vector<int>& windows, double lambda, long t, double floor,
                          double cap) {
  double num = 0.0, den = 0.0;
  for (int n : windows) {
    const double l = lift(s, n, t, floor, cap);
    if (l == 0.0) return 0.0;
    const double w = std::exp(-lambda * n);
    num += w;
    den += w / l;
  }
  return num / den;
}

/// |union of user sets over hours [t-T+1, t]|
inline std::size_t union_count(const std::vector<std::pair<long, std::string>>& posts, long t, long agg) {
  std::set<std::string> users;
  for (const auto& [hour, user] : posts)
    if (hour >= t - agg + 1 && hour <= t) users.insert(user);
  return users.size();
}

}  // namespace oracle
