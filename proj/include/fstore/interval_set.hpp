#pragma once

#include <vector>

#include "fstore/types.hpp"

namespace fstore {

/// Disjoint, coalesced set of half-open event-time intervals, kept sorted by start.
class IntervalSet {
 public:
  void add(FeatureWindow w);
  bool covers(FeatureWindow w) const;
  bool contains(Timestamp ts) const;
  bool overlaps(FeatureWindow w) const;
  bool empty() const { return intervals_.empty(); }
  const std::vector<FeatureWindow>& intervals() const { return intervals_; }

  friend bool operator==(const IntervalSet&, const IntervalSet&) = default;

 private:
  std::vector<FeatureWindow> intervals_;
};

}  // namespace fstore
