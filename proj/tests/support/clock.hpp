#pragma once

#include <mutex>
#include <vector>

#include "egm/ingest/provider.hpp"

namespace egm::testkit {

// Time only moves when someone sleeps.
class ManualClock final : public ingest::Clock {
 public:
  double now() const override {
    std::lock_guard lock(mu_);
    return t_;
  }
  void sleep_for(double seconds) override {
    std::lock_guard lock(mu_);
    if (seconds > 0) t_ += seconds;
    sleeps_.push_back(seconds);
  }
  void advance(double seconds) {
    std::lock_guard lock(mu_);
    t_ += seconds;
  }
  std::vector<double> sleeps() const {
    std::lock_guard lock(mu_);
    return sleeps_;
  }

 private:
  mutable std::mutex mu_;
  double t_ = 1000.0;
  std::vector<double> sleeps_;
};

}  // namespace egm::testkit
