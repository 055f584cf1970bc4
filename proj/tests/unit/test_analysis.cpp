#include "doctest.h"

#include <cmath>
#include <vector>

#include "nkc/analysis.hpp"
#include "nkc/nested.hpp"
#include "nkc/parallel.hpp"

using namespace nkc;

namespace {

// Synthetic trajectory with points exactly at the sampling grid, so the
// step-function queries return unfloored values.
Trajectory power_law_trajectory(double amplitude, double exponent, double t_lo,
                                double t_hi, int points) {
  Trajectory traj;
  const auto grid = geometric_grid(t_lo, t_hi, points);
  traj.points.push_back({0.0, 1.0, amplitude * std::pow(t_lo, exponent)});
  for (double t : grid) {
    traj.points.push_back({t, 1.0, amplitude * std::pow(t, exponent)});
  }
  return traj;
}

Trajectory floored_trajectory(double amplitude, double exponent, double t_lo,
                              double t_hi, int points) {
  Trajectory traj;
  const auto grid = geometric_grid(t_lo, t_hi, points);
  traj.points.push_back({0.0, 1.0, std::floor(amplitude * std::pow(t_lo, exponent))});
  for (double t : grid) {
    traj.points.push_back({t, 1.0, std::floor(amplitude * std::pow(t, exponent))});
  }
  return traj;
}

}  // namespace

TEST_CASE("loglog slope is exact on unfloored power laws") {
  const Trajectory traj = power_law_trajectory(7.3, -2.0, 0.01, 0.1, 40);
  const ScalingReport report = loglog_slope(traj, 0.01, 0.1, 40);
  CHECK(std::abs(report.slope - (-2.0)) < 1e-12);
  CHECK(report.r_squared > 1.0 - 1e-12);
  CHECK(report.max_abs_deviation < 1e-12);

  const Trajectory kingman = power_law_trajectory(2.0, -1.0, 0.01, 0.1, 40);
  CHECK(std::abs(loglog_slope(kingman, 0.01, 0.1, 40).slope - (-1.0)) < 1e-12);
}

TEST_CASE("loglog slope on floored synthetic trajectories") {
  const Trajectory a = floored_trajectory(2.0, -1.0, 0.005, 0.12, 3000);
  CHECK(loglog_slope(a, 0.01, 0.1, 40).slope == doctest::Approx(-1.0).epsilon(0.05));
  const Trajectory b = floored_trajectory(7.0, -2.0, 0.005, 0.12, 3000);
  CHECK(loglog_slope(b, 0.01, 0.1, 40).slope == doctest::Approx(-2.0).epsilon(0.05));
}

TEST_CASE("constant trajectories are flagged degenerate") {
  Trajectory flat;
  flat.points.push_back({0.0, 1.0, 5.0});
  for (double t : geometric_grid(0.01, 1.0, 30)) flat.points.push_back({t, 1.0, 5.0});
  const ScalingReport report = loglog_slope(flat, 0.01, 1.0, 30);
  CHECK(report.degenerate);
  CHECK(report.slope == 0.0);
  CHECK(report.r_squared == 0.0);
}

TEST_CASE("window and grid validation") {
  const Trajectory traj = power_law_trajectory(2.0, -1.0, 0.01, 0.1, 40);
  CHECK_THROWS_AS(loglog_slope(traj, 0.01, 0.2, 40), std::out_of_range);
  CHECK_THROWS_AS(loglog_slope(traj, 0.05, 0.01, 40), std::invalid_argument);
  CHECK_THROWS_AS(loglog_slope(traj, 0.01, 0.1, 4), std::invalid_argument);
}

TEST_CASE("theorem-1 deviation vanishes on the asymptotic curve") {
  const double c = 0.7, gamma = 3.4466;
  const Trajectory traj = power_law_trajectory(2.0 * gamma / c, -2.0, 0.02, 0.4, 50);
  const ScalingReport report = check_theorem1(traj, c, gamma, {0.02, 0.4}, 50);
  CHECK(report.max_abs_deviation < 1e-12);
  CHECK(report.level == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.target_slope == -2.0);
}

TEST_CASE("prop-2 deviation vanishes on 2s/t") {
  const std::int64_t s = 250;
  const Trajectory traj = power_law_trajectory(2.0 * double(s), -1.0, 0.001, 0.01, 40);
  const ScalingReport report = check_prop2(traj, s, {0.001, 0.01}, 40);
  CHECK(report.max_abs_deviation < 1e-12);
  CHECK(report.target_slope == -1.0);
}

TEST_CASE("heuristic species curve") {
  CHECK(heuristic_species_curve(1000, 1.0, 0.0) == 1000.0);
  CHECK(heuristic_species_curve(1000, 1.0, 0.1) ==
        doctest::Approx(19.6078431372549).epsilon(1e-12));
  CHECK(heuristic_species_curve(1000, 1.0, 1e6) < 0.01);
  CHECK_THROWS_AS(heuristic_species_curve(0, 1.0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(heuristic_species_curve(10, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("regime windows") {
  const RegimeWindows w = regime_windows(100, 10000);
  CHECK(w.early.t_lo == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(w.early.t_hi == doctest::Approx(2e-3).epsilon(1e-12));
  CHECK(w.late.t_lo == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(w.late.t_hi == 0.5);
  CHECK_THROWS_AS(regime_windows(100, 100), InsufficientSeparationError);
  // n >= 20 s holds but the early window collapses
  CHECK_THROWS_AS(regime_windows(100, 2000), InsufficientSeparationError);
}

TEST_CASE("two-phase detection on a synthetic knee") {
  // 2s/t early, continuous switch to t^-2 at the knee
  const double s = 100.0, knee = 0.01;
  Trajectory traj;
  traj.points.push_back({0.0, s, 2 * s / 2e-4});
  for (double t : geometric_grid(2e-4, 0.6, 4000)) {
    const double n = t <= knee ? 2 * s / t : 2 * s * knee / (t * t);
    traj.points.push_back({t, s, n});
  }
  NestedConfig cfg;
  cfg.species = 100;
  cfg.lineages = 10000;
  cfg.rate_c = 0.1;
  const auto [early, late] = two_phase_detect(traj, cfg);
  CHECK(early.slope == doctest::Approx(-1.0).epsilon(0.05));
  CHECK(late.slope == doctest::Approx(-2.0).epsilon(0.05));
  CHECK(early.target_slope == -1.0);
  CHECK(late.target_slope == -2.0);
}

TEST_CASE("reports are deterministic") {
  const Trajectory traj = power_law_trajectory(5.0, -1.5, 0.01, 0.5, 60);
  const ScalingReport a = loglog_slope(traj, 0.02, 0.4, 25);
  const ScalingReport b = loglog_slope(traj, 0.02, 0.4, 25);
  CHECK(a.slope == b.slope);
  CHECK(a.intercept == b.intercept);
  CHECK(a.r_squared == b.r_squared);
  REQUIRE(a.deviation_series.size() == b.deviation_series.size());
  for (std::size_t i = 0; i < a.deviation_series.size(); ++i) {
    CHECK(a.deviation_series[i].second == b.deviation_series[i].second);
  }
}

TEST_CASE("theorem-1 deviation shrinks as the species count grows") {
  const double c = 1.0, gamma = 3.4466;
  const int seeds = 20;
  const Window window{0.05, 0.3};
  auto max_dev = [&](std::int64_t s) {
    const auto trajs = parallel_map_indexed<Trajectory>(
        seeds, 1, [&](std::uint64_t r) {
          NestedConfig cfg;
          cfg.species = s;
          cfg.lineages = 1000;
          cfg.rate_c = c;
          cfg.seed = 606;
          cfg.stream = r;
          cfg.stop = StopRule::at_time(0.35);
          return simulate_nested(cfg);
        });
    return check_theorem1_multi(trajs, c, gamma, window).max_abs_deviation;
  };
  const double at_500 = max_dev(500);
  const double at_2000 = max_dev(2000);
  CHECK(at_2000 <= at_500 + 0.02);
}
