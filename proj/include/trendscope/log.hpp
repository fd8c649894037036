#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace trendscope {

/// Receives non-fatal warnings (llm fallbacks, unparseable outputs).
using WarningSink = std::function<void(std::string_view)>;

inline WarningSink stderr_warnings() {
  return [](std::string_view msg) {
    static std::mutex mu;
    std::lock_guard lock(mu);
    std::cerr << "warning: " << msg << '\n';
  };
}

/// Thread-safe collector, mostly for tests and run manifests.
class WarningLog {
 public:
  WarningSink sink() {
    return [this](std::string_view msg) {
      std::lock_guard lock(mu_);
      messages_.emplace_back(msg);
    };
  }
  std::vector<std::string> messages() const {
    std::lock_guard lock(mu_);
    return messages_;
  }
  std::size_t size() const {
    std::lock_guard lock(mu_);
    return messages_.size();
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> messages_;
};

}  // namespace trendscope
