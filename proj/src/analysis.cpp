#include "nkc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "nkc/parallel.hpp"

namespace nkc {

std::vector<double> geometric_grid(double t_lo, double t_hi, int grid_points) {
  if (!(t_lo > 0.0) || !(t_hi > t_lo)) {
    throw std::invalid_argument("grid: need 0 < t_lo < t_hi");
  }
  if (grid_points < 5) throw std::invalid_argument("grid: need at least 5 points");
  std::vector<double> grid(grid_points);
  const double log_lo = std::log(t_lo);
  const double step = (std::log(t_hi) - log_lo) / (grid_points - 1);
  for (int i = 0; i < grid_points; ++i) grid[i] = std::exp(log_lo + i * step);
  grid.front() = t_lo;
  grid.back() = t_hi;
  return grid;
}

namespace {

void require_window(const Trajectory& traj, double t_lo, double t_hi) {
  if (!(t_lo > 0.0) || !(t_hi > t_lo)) {
    throw std::invalid_argument("window: need 0 < t_lo < t_hi");
  }
  if (t_hi > traj.terminal().t) {
    throw std::out_of_range("window: t_hi beyond the trajectory terminal");
  }
}

// Mean over trajectories of N at each grid time.
std::vector<double> mean_lineages_on_grid(std::span<const Trajectory> trajs,
                                          std::span<const double> grid) {
  std::vector<double> mean(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    KahanSum acc;
    for (const Trajectory& traj : trajs) acc.add(traj.at_time(grid[g]).lineages);
    mean[g] = acc.value() / static_cast<double>(trajs.size());
  }
  return mean;
}

ScalingReport fit_loglog(std::span<const double> grid,
                         std::span<const double> n_values, double t_lo,
                         double t_hi) {
  ScalingReport report;
  report.window = {t_lo, t_hi};
  report.grid_points = static_cast<int>(grid.size());

  const std::size_t g = grid.size();
  std::vector<double> lx(g), ly(g);
  for (std::size_t i = 0; i < g; ++i) {
    lx[i] = std::log(grid[i]);
    ly[i] = std::log(n_values[i]);
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < g; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= g;
  my /= g;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < g; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (syy == 0.0) {
    report.degenerate = true;
    report.slope = 0.0;
    report.intercept = my;
    report.r_squared = 0.0;
  } else {
    report.slope = sxy / sxx;
    report.intercept = my - report.slope * mx;
    report.r_squared = (sxy * sxy) / (sxx * syy);
  }

  // Residuals from the fitted power law A t^slope.
  report.deviation_series.reserve(g);
  KahanSum dev_acc;
  for (std::size_t i = 0; i < g; ++i) {
    const double fitted = std::exp(report.intercept + report.slope * lx[i]);
    const double dev = n_values[i] / fitted - 1.0;
    report.deviation_series.emplace_back(grid[i], dev);
    report.max_abs_deviation = std::max(report.max_abs_deviation, std::abs(dev));
    dev_acc.add(dev);
  }
  report.level = 1.0 + dev_acc.value() / static_cast<double>(g);
  return report;
}

template <class RefFn>
ScalingReport deviation_report(std::span<const double> grid,
                               std::span<const double> n_values, Window window,
                               double target_slope, RefFn&& reference) {
  ScalingReport report;
  report.window = window;
  report.grid_points = static_cast<int>(grid.size());
  report.target_slope = target_slope;
  report.deviation_series.reserve(grid.size());
  KahanSum dev_acc;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double dev = n_values[i] / reference(grid[i]) - 1.0;
    report.deviation_series.emplace_back(grid[i], dev);
    report.max_abs_deviation = std::max(report.max_abs_deviation, std::abs(dev));
    dev_acc.add(dev);
  }
  report.level = 1.0 + dev_acc.value() / static_cast<double>(grid.size());

  // Slope of the sampled data over the same grid, for the report readout.
  const ScalingReport fit = fit_loglog(grid, n_values, window.t_lo, window.t_hi);
  report.slope = fit.slope;
  report.intercept = fit.intercept;
  report.r_squared = fit.r_squared;
  report.degenerate = fit.degenerate;
  return report;
}

}  // namespace

ScalingReport loglog_slope_multi(std::span<const Trajectory> trajs, double t_lo,
                                 double t_hi, int grid_points) {
  if (trajs.empty()) throw std::invalid_argument("loglog_slope: no trajectories");
  for (const Trajectory& traj : trajs) require_window(traj, t_lo, t_hi);
  const std::vector<double> grid = geometric_grid(t_lo, t_hi, grid_points);
  const std::vector<double> mean_n = mean_lineages_on_grid(trajs, grid);
  ScalingReport report = fit_loglog(grid, mean_n, t_lo, t_hi);
  report.target_slope = 0.0;
  return report;
}

ScalingReport loglog_slope(const Trajectory& traj, double t_lo, double t_hi,
                           int grid_points) {
  return loglog_slope_multi({&traj, 1}, t_lo, t_hi, grid_points);
}

ScalingReport check_theorem1_multi(std::span<const Trajectory> trajs, double c,
                                   double gamma, Window window, int grid_points) {
  if (trajs.empty()) throw std::invalid_argument("check_theorem1: no trajectories");
  if (!(gamma > 0.0)) throw std::invalid_argument("check_theorem1: gamma must be > 0");
  for (const Trajectory& traj : trajs) require_window(traj, window.t_lo, window.t_hi);
  const std::vector<double> grid = geometric_grid(window.t_lo, window.t_hi, grid_points);
  const std::vector<double> mean_n = mean_lineages_on_grid(trajs, grid);
  return deviation_report(grid, mean_n, window, -2.0,
                          [&](double t) { return 2.0 * gamma / (c * t * t); });
}

ScalingReport check_theorem1(const Trajectory& traj, double c, double gamma,
                             Window window, int grid_points) {
  return check_theorem1_multi({&traj, 1}, c, gamma, window, grid_points);
}

ScalingReport check_prop2_multi(std::span<const Trajectory> trajs, std::int64_t s,
                                Window window, int grid_points) {
  if (trajs.empty()) throw std::invalid_argument("check_prop2: no trajectories");
  for (const Trajectory& traj : trajs) require_window(traj, window.t_lo, window.t_hi);
  const std::vector<double> grid = geometric_grid(window.t_lo, window.t_hi, grid_points);
  const std::vector<double> mean_n = mean_lineages_on_grid(trajs, grid);
  const double ds = static_cast<double>(s);
  return deviation_report(grid, mean_n, window, -1.0,
                          [&](double t) { return 2.0 * ds / t; });
}

ScalingReport check_prop2(const Trajectory& traj, std::int64_t s, Window window,
                          int grid_points) {
  return check_prop2_multi({&traj, 1}, s, window, grid_points);
}

double heuristic_species_curve(std::int64_t s, double c, double t) {
  if (s < 1) throw std::invalid_argument("heuristic_species_curve: s must be >= 1");
  if (!(c > 0.0)) throw std::invalid_argument("heuristic_species_curve: c must be > 0");
  if (!(t >= 0.0)) throw std::invalid_argument("heuristic_species_curve: t must be >= 0");
  return 2.0 / (c * t + 2.0 / static_cast<double>(s));
}

RegimeWindows regime_windows(std::int64_t s, std::int64_t n,
                             const WindowFactors& factors) {
  if (n < 20 * s) {
    throw InsufficientSeparationError(
        "regime windows: need lineages >= 20 * species for two-phase analysis");
  }
  RegimeWindows windows;
  windows.early = {factors.early_lo / static_cast<double>(n),
                   1.0 / (factors.early_hi * static_cast<double>(s))};
  windows.late = {factors.late_lo / static_cast<double>(s), factors.late_hi};
  if (!(windows.early.t_lo < windows.early.t_hi) ||
      !(windows.late.t_lo < windows.late.t_hi)) {
    throw InsufficientSeparationError("regime windows: windows collapse");
  }
  return windows;
}

std::pair<ScalingReport, ScalingReport> two_phase_detect_multi(
    std::span<const Trajectory> trajs, const NestedConfig& cfg, int grid_points) {
  const RegimeWindows windows = regime_windows(cfg.species, cfg.lineages);
  ScalingReport early =
      loglog_slope_multi(trajs, windows.early.t_lo, windows.early.t_hi, grid_points);
  early.target_slope = -1.0;
  ScalingReport late =
      loglog_slope_multi(trajs, windows.late.t_lo, windows.late.t_hi, grid_points);
  late.target_slope = -2.0;
  return {std::move(early), std::move(late)};
}

std::pair<ScalingReport, ScalingReport> two_phase_detect(const Trajectory& traj,
                                                         const NestedConfig& cfg,
                                                         int grid_points) {
  return two_phase_detect_multi({&traj, 1}, cfg, grid_points);
}

void write_plot_csv(const std::string& path, std::span<const double> t,
                    std::span<const double> n, std::span<const double> ref,
                    std::span<const double> dev) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "t,N,ref_curve,dev\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << format_double(t[i]) << ',' << format_double(n[i]) << ','
        << format_double(ref[i]) << ',' << format_double(dev[i]) << '\n';
  }
}

void write_loglog_svg(const std::string& path, std::span<const double> t,
                      std::span<const double> n, const std::string& title) {
  if (t.empty() || t.size() != n.size()) {
    throw std::invalid_argument("svg: empty or mismatched series");
  }
  const double width = 640, height = 480, margin = 56;
  double lx_min = std::log10(t.front()), lx_max = std::log10(t.back());
  double ly_min = std::log10(n.front()), ly_max = ly_min;
  for (double v : n) {
    ly_min = std::min(ly_min, std::log10(v));
    ly_max = std::max(ly_max, std::log10(v));
  }
  if (lx_max == lx_min) lx_max = lx_min + 1;
  if (ly_max == ly_min) ly_max = ly_min + 1;
  auto px = [&](double lt) {
    return margin + (lt - lx_min) / (lx_max - lx_min) * (width - 2 * margin);
  };
  auto py = [&](double ln) {
    return height - margin - (ln - ly_min) / (ly_max - ly_min) * (height - 2 * margin);
  };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << width / 2 << "' y='24' text-anchor='middle' "
      << "font-family='sans-serif' font-size='14'>" << title << "</text>\n";
  // axes
  out << "<line x1='" << margin << "' y1='" << height - margin << "' x2='"
      << width - margin << "' y2='" << height - margin
      << "' stroke='black'/>\n";
  out << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin
      << "' y2='" << height - margin << "' stroke='black'/>\n";
  // decade ticks
  for (int d = static_cast<int>(std::ceil(lx_min)); d <= std::floor(lx_max); ++d) {
    out << "<line x1='" << px(d) << "' y1='" << height - margin << "' x2='"
        << px(d) << "' y2='" << margin << "' stroke='#dddddd'/>\n"
        << "<text x='" << px(d) << "' y='" << height - margin + 18
        << "' text-anchor='middle' font-family='sans-serif' font-size='11'>1e"
        << d << "</text>\n";
  }
  for (int d = static_cast<int>(std::ceil(ly_min)); d <= std::floor(ly_max); ++d) {
    out << "<line x1='" << margin << "' y1='" << py(d) << "' x2='"
        << width - margin << "' y2='" << py(d) << "' stroke='#dddddd'/>\n"
        << "<text x='" << margin - 6 << "' y='" << py(d) + 4
        << "' text-anchor='end' font-family='sans-serif' font-size='11'>1e" << d
        << "</text>\n";
  }
  // slope guides through the first sample
  for (double slope : {-1.0, -2.0}) {
    const double x0 = lx_min, x1 = lx_max;
    const double y0 = std::log10(n.front());
    out << "<line x1='" << px(x0) << "' y1='" << py(y0) << "' x2='" << px(x1)
        << "' y2='" << py(y0 + slope * (x1 - x0))
        << "' stroke='#cc3333' stroke-dasharray='6,4'/>\n";
  }
  out << "<polyline fill='none' stroke='#2255cc' stroke-width='1.5' points='";
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << px(std::log10(t[i])) << ',' << py(std::log10(n[i])) << ' ';
  }
  out << "'/>\n</svg>\n";
}

}  // namespace nkc
