#include "fstore/interval_set.hpp"

#include <algorithm>

namespace fstore {

void IntervalSet::add(FeatureWindow w) {
  if (w.start_ts >= w.end_ts) return;
  std::vector<FeatureWindow> out;
  out.reserve(intervals_.size() + 1);
  bool placed = false;
  for (const auto& cur : intervals_) {
    if (cur.end_ts < w.start_ts) {
      out.push_back(cur);
    } else if (w.end_ts < cur.start_ts) {
      if (!placed) {
        out.push_back(w);
        placed = true;
      }
      out.push_back(cur);
    } else {
      // touching or overlapping: absorb
      w.start_ts = std::min(w.start_ts, cur.start_ts);
      w.end_ts = std::max(w.end_ts, cur.end_ts);
    }
  }
  if (!placed) out.push_back(w);
  intervals_ = std::move(out);
}

bool IntervalSet::covers(FeatureWindow w) const {
  if (w.start_ts >= w.end_ts) return true;
  auto it = std::upper_bound(intervals_.begin(), intervals_.end(), w.start_ts,
                             [](Timestamp ts, const FeatureWindow& iv) { return ts < iv.start_ts; });
  if (it == intervals_.begin()) return false;
  --it;
  return it->start_ts <= w.start_ts && w.end_ts <= it->end_ts;
}

bool IntervalSet::contains(Timestamp ts) const { return covers(FeatureWindow{ts, ts + 1}); }

bool IntervalSet::overlaps(FeatureWindow w) const {
  return std::any_of(intervals_.begin(), intervals_.end(),
                     [&](const FeatureWindow& iv) { return iv.overlaps(w); });
}

}  // namespace fstore
