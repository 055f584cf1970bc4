#include "nkc/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace nkc {

DecimationPolicy DecimationPolicy::all_events() {
  return {DecimationKind::AllEvents, 0.0, 1};
}

DecimationPolicy DecimationPolicy::geometric(double ratio) {
  if (!(ratio > 1.0)) {
    throw std::invalid_argument("decimation: geometric ratio must be > 1");
  }
  return {DecimationKind::GeometricGrid, ratio, 1};
}

DecimationPolicy DecimationPolicy::every_kth(std::uint64_t k) {
  if (k < 1) throw std::invalid_argument("decimation: every-kth k must be >= 1");
  return {DecimationKind::EveryKth, 0.0, k};
}

DecimationPolicy DecimationPolicy::parse(const std::string& text) {
  if (text == "all") return all_events();
  const auto colon = text.find(':');
  const std::string head = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  try {
    if (head == "geometric") return geometric(arg.empty() ? 1.02 : std::stod(arg));
    if (head == "every") return every_kth(std::stoull(arg));
  } catch (const std::invalid_argument&) {
  } catch (const std::out_of_range&) {
  }
  throw std::invalid_argument("decimation: expected all | geometric:<ratio> | every:<k>, got '" +
                              text + "'");
}

std::string DecimationPolicy::to_string() const {
  switch (kind) {
    case DecimationKind::AllEvents:
      return "all";
    case DecimationKind::GeometricGrid:
      return "geometric:" + format_double(ratio);
    case DecimationKind::EveryKth:
      return "every:" + std::to_string(every);
  }
  return "all";
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const TrajectoryPoint& Trajectory::at_time(double t) const {
  if (points.empty()) throw std::out_of_range("trajectory is empty");
  if (t < points.front().t || t > points.back().t) {
    throw std::out_of_range("query time outside [0, terminal]");
  }
  auto it = std::upper_bound(points.begin(), points.end(), t,
                             [](double q, const TrajectoryPoint& p) { return q < p.t; });
  return *(it - 1);
}

std::vector<std::pair<double, double>> Trajectory::sample_counts_at(
    std::span<const double> times) const {
  std::vector<std::pair<double, double>> out;
  out.reserve(times.size());
  for (double t : times) {
    const TrajectoryPoint& p = at_time(t);
    out.emplace_back(p.species, p.lineages);
  }
  return out;
}

void Trajectory::write_csv(std::ostream& out) const {
  out << "t,S,N\n";
  for (const auto& p : points) {
    out << format_double(p.t) << ',' << static_cast<long long>(std::llround(p.species))
        << ',' << static_cast<long long>(std::llround(p.lineages)) << '\n';
  }
}

void Trajectory::write_csv_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  write_csv(out);
}

}  // namespace nkc
