#include "nkc/kingman.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nkc {

double pair_merge_rate(std::int64_t k, double rate_scale) {
  if (k < 0) throw std::invalid_argument("pair_merge_rate: k must be >= 0");
  if (k < 2) return 0.0;
  return rate_scale * 0.5 * static_cast<double>(k) * static_cast<double>(k - 1);
}

double expected_blocks(std::int64_t n, double t) {
  if (n < 1) throw std::invalid_argument("expected_blocks: n must be >= 1");
  if (t < 0) throw std::invalid_argument("expected_blocks: t must be >= 0");
  return 2.0 / (t + 2.0 / static_cast<double>(n));
}

std::int64_t sample_block_count(std::int64_t n, double t, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("sample_block_count: n must be >= 1");
  if (t < 0) throw std::invalid_argument("sample_block_count: t must be >= 0");
  std::int64_t k = n;
  double elapsed = 0.0;
  while (k > 1) {
    elapsed += rng.exponential(pair_merge_rate(k, 1.0));
    if (elapsed > t) break;
    --k;
  }
  return k;
}

double HittingTimes::at(std::int64_t m) const {
  if (m > start || m < lowest) {
    throw std::out_of_range("HittingTimes::at: level not recorded");
  }
  return tau[static_cast<std::size_t>(start - m)];
}

BlockRun simulate_block_trajectory(std::int64_t n, RngStream& rng,
                                   double rate_scale, std::int64_t stop_level) {
  if (n < 2) throw std::invalid_argument("simulate_block_trajectory: n must be >= 2");
  if (stop_level < 1 || stop_level > n) {
    throw std::invalid_argument("simulate_block_trajectory: stop_level out of range");
  }
  BlockRun run;
  run.trajectory.start = n;
  run.trajectory.rate_scale = rate_scale;
  run.trajectory.events.reserve(static_cast<std::size_t>(n - stop_level));
  run.hitting_times.start = n;
  run.hitting_times.lowest = stop_level;
  run.hitting_times.tau.reserve(static_cast<std::size_t>(n - stop_level) + 1);
  run.hitting_times.tau.push_back(0.0);  // tau(n) = 0

  double t = 0.0;
  for (std::int64_t k = n; k > stop_level; --k) {
    t += rng.exponential(pair_merge_rate(k, rate_scale));
    run.trajectory.events.push_back({t, k - 1});
    run.hitting_times.tau.push_back(t);
  }
  return run;
}

double ks_distance_exp1(std::vector<double> sample) {
  if (sample.empty()) return 0.0;
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double cdf = 1.0 - std::exp(-sample[i]);
    d = std::max(d, std::abs(cdf - static_cast<double>(i + 1) / n));
    d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
  }
  return d;
}

YuleCheckReport yule_timechange_statistic(const BlockTrajectory& traj,
                                          std::int64_t m, double c) {
  if (c <= 0) throw std::invalid_argument("yule_timechange_statistic: c must be > 0");
  if (m < 2) throw std::invalid_argument("yule_timechange_statistic: m must be >= 2");
  if (traj.final_count() > m - 1) {
    throw std::invalid_argument(
        "yule_timechange_statistic: trajectory never reaches level m-1");
  }

  YuleCheckReport report;
  if (traj.start <= m) return report;  // degenerate start: empty, not an error

  // The integrand c(S(r)-1)/2 is constant on each holding interval, so the
  // Yule-side image of the level-k interval [tau_k, tau_{k-1}) has length
  // c(k-1)/2 * (tau_{k-1} - tau_k) exactly; scaled by k it is Exp(1).
  report.level_min = m;
  report.level_max = traj.start;
  report.normalized_durations.reserve(static_cast<std::size_t>(traj.start - m) + 1);

  double tau_prev = 0.0;  // tau at the current level k (tau_start = 0)
  std::int64_t k = traj.start;
  double sum = 0.0;
  for (const auto& ev : traj.events) {
    // ev takes the count from k to k-1 at time ev.time = tau_{k-1}.
    if (k <= m - 1) break;
    const double duration = ev.time - tau_prev;
    const double yule_duration = 0.5 * c * static_cast<double>(k - 1) * duration;
    if (k >= m) {
      const double normalized = static_cast<double>(k) * yule_duration;
      report.normalized_durations.push_back(normalized);
      sum += normalized;
    }
    tau_prev = ev.time;
    --k;
  }
  report.mean = sum / static_cast<double>(report.normalized_durations.size());
  report.ks_distance = ks_distance_exp1(report.normalized_durations);
  return report;
}

}  // namespace nkc
