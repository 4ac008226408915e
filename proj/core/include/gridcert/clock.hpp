#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace gridcert {

// All protocol time is whole UTC seconds.
using Timestamp = std::chrono::sys_seconds;
using Duration = std::chrono::seconds;

inline std::int64_t to_unix(Timestamp t) noexcept { return t.time_since_epoch().count(); }
inline Timestamp from_unix(std::int64_t s) noexcept { return Timestamp{Duration{s}}; }

class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override;
};

// Test and demo clock; shared by every in-process service so that
// expiry scenarios are deterministic.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start) : now_(to_unix(start)) {}

  Timestamp now() const override { return from_unix(now_.load()); }
  void set(Timestamp t) { now_.store(to_unix(t)); }
  void advance(Duration d) { now_.fetch_add(d.count()); }

 private:
  std::atomic<std::int64_t> now_;
};

}  // namespace gridcert
