#pragma once

#include <cstdint>
#include <vector>

#include "nkc/rng.hpp"

namespace nkc {

// Merge rate of k exchangeable blocks with per-pair rate `rate_scale`.
double pair_merge_rate(std::int64_t k, double rate_scale);

// Deterministic block-count approximation 2/(t + 2/n).
double expected_blocks(std::int64_t n, double t);

// One exact draw of the Kingman block count at time t started from n blocks.
std::int64_t sample_block_count(std::int64_t n, double t, RngStream& rng);

struct BlockEvent {
  double time;         // when the merger happened
  std::int64_t count;  // block count right after it
};

// Event list of one single-level run; counts descend from start-1 to the
// final level in steps of one.
struct BlockTrajectory {
  std::int64_t start = 0;
  double rate_scale = 1.0;
  std::vector<BlockEvent> events;

  std::int64_t final_count() const {
    return events.empty() ? start : events.back().count;
  }
};

// Hitting times tau(m) = first time the count equals m; tau(start) = 0.
// Levels below `lowest` were not reached (or were filtered out).
struct HittingTimes {
  std::int64_t start = 0;
  std::int64_t lowest = 1;
  std::vector<double> tau;  // tau[start - m] for m in [lowest, start]

  double at(std::int64_t m) const;
};

struct BlockRun {
  BlockTrajectory trajectory;
  HittingTimes hitting_times;
};

// Exact event-driven run from n blocks down to `stop_level` (default 1).
// Hitting times are recorded for every level unless a stop_level filter
// cuts the run short; experiments that only need tau(m) pass stop_level=m.
BlockRun simulate_block_trajectory(std::int64_t n, RngStream& rng,
                                   double rate_scale = 1.0,
                                   std::int64_t stop_level = 1);

// Yule time-change check (species-level trajectory run at per-pair rate c).
//
// With f_m(t) = log(mc/2) + integral_t^{tau_{m-1}} c(S(r)-1)/2 dr computed
// exactly from the step function, the image of the level-k holding interval
// has an Exp(k) law, so k times its length is Exp(1).  The report collects
// those normalized durations for k in [m, start] together with their sample
// mean and the Kolmogorov-Smirnov distance from Exp(1).
struct YuleCheckReport {
  std::int64_t level_min = 0;
  std::int64_t level_max = -1;  // empty report when level_max < level_min
  std::vector<double> normalized_durations;
  double mean = 0.0;
  double ks_distance = 0.0;

  std::size_t count() const { return normalized_durations.size(); }
};

YuleCheckReport yule_timechange_statistic(const BlockTrajectory& traj,
                                          std::int64_t m, double c);

// KS distance of a sample against the Exp(1) CDF.
double ks_distance_exp1(std::vector<double> sample);

}  // namespace nkc
