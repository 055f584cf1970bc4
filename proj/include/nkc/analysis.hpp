#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nkc/nested.hpp"
#include "nkc/trajectory.hpp"

namespace nkc {

struct Window {
  double t_lo;
  double t_hi;
};

struct ScalingReport {
  Window window{0, 0};
  int grid_points = 0;
  double slope = 0.0;
  double intercept = 0.0;  // of the ln N ~ ln t fit
  double r_squared = 0.0;
  double target_slope = 0.0;
  bool degenerate = false;  // N constant over the window
  std::vector<std::pair<double, double>> deviation_series;  // (t, dev)
  double max_abs_deviation = 0.0;
  double level = 0.0;  // 1 + mean deviation
};

// Geometric sampling grid over [t_lo, t_hi] with both endpoints included.
std::vector<double> geometric_grid(double t_lo, double t_hi, int grid_points);

// Least-squares fit of ln N against ln t over a geometric grid; the
// deviation series holds residuals from the fitted power law.
ScalingReport loglog_slope(const Trajectory& traj, double t_lo, double t_hi,
                           int grid_points);

// dev(t) = t^2 N(t) c / (2 gamma) - 1; summary is max |dev| over the grid.
ScalingReport check_theorem1(const Trajectory& traj, double c, double gamma,
                             Window window, int grid_points = 40);

// dev(t) = t N(t) / (2 s) - 1.
ScalingReport check_prop2(const Trajectory& traj, std::int64_t s, Window window,
                          int grid_points = 40);

// Multi-seed variants: deviation series (and ln N for the slope fit) are
// averaged pointwise over trajectories before summarizing.
ScalingReport loglog_slope_multi(std::span<const Trajectory> trajs, double t_lo,
                                 double t_hi, int grid_points);
ScalingReport check_theorem1_multi(std::span<const Trajectory> trajs, double c,
                                   double gamma, Window window,
                                   int grid_points = 40);
ScalingReport check_prop2_multi(std::span<const Trajectory> trajs,
                                std::int64_t s, Window window,
                                int grid_points = 40);

// Early-time species-count curve 2/(ct + 2/s).
double heuristic_species_curve(std::int64_t s, double c, double t);

// Operational scaling windows.  The asymptotic separation hypotheses carry
// no constants; the factor-of-five defaults below are configuration.
struct WindowFactors {
  double early_lo = 5.0;   // t_lo = early_lo / n
  double early_hi = 5.0;   // t_hi = 1 / (early_hi * s)
  double late_lo = 5.0;    // t_lo = late_lo / s
  double late_hi = 0.5;    // absolute
};

struct RegimeWindows {
  Window early;
  Window late;
};

struct InsufficientSeparationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Requires n >= 20 s and non-collapsing windows; throws
// InsufficientSeparationError otherwise.
RegimeWindows regime_windows(std::int64_t s, std::int64_t n,
                             const WindowFactors& factors = {});

std::pair<ScalingReport, ScalingReport> two_phase_detect(const Trajectory& traj,
                                                         const NestedConfig& cfg,
                                                         int grid_points = 40);
std::pair<ScalingReport, ScalingReport> two_phase_detect_multi(
    std::span<const Trajectory> trajs, const NestedConfig& cfg,
    int grid_points = 40);

// Plot data rows t,N,ref_curve,dev at full float precision.
void write_plot_csv(const std::string& path, std::span<const double> t,
                    std::span<const double> n, std::span<const double> ref,
                    std::span<const double> dev);

// Static log-log SVG: trajectory polyline plus slope -1 and -2 guides.
void write_loglog_svg(const std::string& path, std::span<const double> t,
                      std::span<const double> n, const std::string& title);

}  // namespace nkc
