#pragma once

#include <chrono>
#include <functional>
#include <thread>

namespace rtrace {

/// Exponential backoff: delay before retry k (1-based) is initial * multiplier^(k-1).
struct RetryPolicy {
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;

  std::chrono::milliseconds delay_before_retry(int retry) const {
    double ms = static_cast<double>(initial_backoff.count());
    for (int i = 1; i < retry; ++i) ms *= multiplier;
    return std::chrono::milliseconds(static_cast<long long>(ms));
  }
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

}  // namespace rtrace
