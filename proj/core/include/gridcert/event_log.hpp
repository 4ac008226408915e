#pragma once

#include <mutex>
#include <string>
#include <vector>

namespace gridcert {

// Ordered, thread-safe record of protocol events. Used to check ordering
// guarantees such as "nothing is written before the CA has signed".
class EventLog {
 public:
  void record(std::string event) {
    std::lock_guard lock(mu_);
    events_.push_back(std::move(event));
  }

  std::vector<std::string> events() const {
    std::lock_guard lock(mu_);
    return events_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> events_;
};

}  // namespace gridcert
