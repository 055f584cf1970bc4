#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace nkc {

enum class DecimationKind { AllEvents, GeometricGrid, EveryKth };

// Which simulation events are retained as trajectory points.  The geometric
// grid additionally keeps every point where the species count changes.
struct DecimationPolicy {
  DecimationKind kind = DecimationKind::GeometricGrid;
  double ratio = 1.02;     // GeometricGrid
  std::uint64_t every = 1; // EveryKth

  static DecimationPolicy all_events();
  static DecimationPolicy geometric(double ratio);
  static DecimationPolicy every_kth(std::uint64_t k);

  // "all" | "geometric:<ratio>" | "every:<k>"
  static DecimationPolicy parse(const std::string& text);
  std::string to_string() const;
};

struct TrajectoryPoint {
  double t;
  double species;   // S
  double lineages;  // N
};

// Right-continuous step function of (t, S, N).  Points have strictly
// increasing times, start at t=0 and end at the terminal state; the value at
// a query time is the last point at or before it.
struct Trajectory {
  std::vector<TrajectoryPoint> points;
  DecimationPolicy decimation;
  std::uint64_t lineage_merges = 0;
  std::uint64_t species_merges = 0;

  const TrajectoryPoint& terminal() const { return points.back(); }

  // Step-function evaluation; throws std::out_of_range outside [0, terminal].
  const TrajectoryPoint& at_time(double t) const;

  std::vector<std::pair<double, double>> sample_counts_at(
      std::span<const double> times) const;

  // CSV with header t,S,N; t at full round-trip precision, S and N integral.
  void write_csv(std::ostream& out) const;
  void write_csv_file(const std::string& path) const;
};

// 17-significant-digit decimal formatting used for all CSV floats.
std::string format_double(double v);

}  // namespace nkc
