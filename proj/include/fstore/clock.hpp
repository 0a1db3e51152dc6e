#pragma once

#include <atomic>

#include "fstore/types.hpp"

namespace fstore {

// The engine never reads wall-clock time; every "now" flows through a Clock.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class ManualClock final : public Clock {
 public:
  explicit ManualClock(Timestamp start = 0) : now_(start) {}

  Timestamp now() const override { return now_.load(); }
  void set(Timestamp ts) { now_.store(ts); }
  void advance(Duration d) { now_.fetch_add(d); }

 private:
  std::atomic<Timestamp> now_;
};

}  // namespace fstore
