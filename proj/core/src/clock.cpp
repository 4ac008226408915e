#include "gridcert/clock.hpp"

namespace gridcert {

Timestamp SystemClock::now() const {
  return std::chrono::floor<Duration>(std::chrono::system_clock::now());
}

}  // namespace gridcert
