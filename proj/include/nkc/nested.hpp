#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nkc/rng.hpp"
#include "nkc/trajectory.hpp"

namespace nkc {

// Prefix-sum (Fenwick) tree over non-negative double weights with O(log n)
// point update and weighted search.
class FenwickTree {
 public:
  explicit FenwickTree(std::size_t capacity);

  void set(std::size_t i, double weight);
  double weight(std::size_t i) const { return weights_[i]; }
  double total() const { return total_; }
  std::size_t capacity() const { return weights_.size(); }

  // Smallest i whose inclusive prefix sum exceeds `target`, followed by a
  // linear fix-up to the nearest positive-weight leaf so that boundary
  // rounding can never select an empty slot.  Requires total() > 0.
  std::size_t find(double target) const;

 private:
  std::vector<double> tree_;     // 1-based internal nodes
  std::vector<double> weights_;  // raw leaf weights
  double total_ = 0.0;
  std::size_t top_mask_ = 0;
};

// Live multiset of per-species lineage counts with cached rate aggregates.
// Slot order is not meaningful; species mergers compact with swap-remove.
class SpeciesState {
 public:
  static SpeciesState uniform(std::int64_t species, std::int64_t lineages_each);
  static SpeciesState from_counts(std::vector<std::int64_t> counts);

  std::int64_t species_count() const { return static_cast<std::int64_t>(counts_.size()); }
  std::int64_t lineage_count() const { return total_lineages_; }
  double time() const { return time_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }

  // Cached sum of n_i(n_i-1)/2 over live species.
  double lineage_rate_total() const { return lineage_rate_total_; }
  double recompute_lineage_rate() const;

  // Species index drawn with probability proportional to n_i(n_i-1).
  // Requires lineage_rate_total() > 0.
  std::size_t sample_weighted_species(RngStream& rng) const;

  void apply_lineage_merge(std::size_t i);
  void apply_species_merge(std::size_t a, std::size_t b);
  void advance_time(double dt) { time_ += dt; }

  // Cached-vs-recomputed audit, rerun internally every million events.
  // Throws std::logic_error if the relative error exceeds 1e-9.
  void audit_cache() const;

 private:
  SpeciesState(std::vector<std::int64_t> counts);
  void maybe_audit();

  std::vector<std::int64_t> counts_;
  FenwickTree weights_;  // per-species n_i(n_i-1)
  double lineage_rate_total_ = 0.0;
  std::int64_t total_lineages_ = 0;
  double time_ = 0.0;
  std::uint64_t events_since_audit_ = 0;
};

struct TotalRates {
  double lineage;  // sum n_i(n_i-1)/2
  double species;  // c * S(S-1)/2
  double total() const { return lineage + species; }
};

TotalRates total_rates(const SpeciesState& state, double c);

struct EventRecord {
  enum class Kind { LineageMerge, SpeciesMerge };
  Kind kind;
  double dt;
  std::size_t species_a;  // merged species (lineage) or surviving slot (species)
  std::size_t species_b;  // absorbed slot for species mergers
};

// One exact transition.  Draw order is fixed: holding time, then event
// category, then target.  Throws std::logic_error on an absorbed (N=1) or
// frozen (total rate zero) state.
EventRecord nested_step(SpeciesState& state, double c, RngStream& rng);

struct StopRule {
  enum class Kind { ToAbsorption, TMax };
  Kind kind = Kind::ToAbsorption;
  double t_max = 0.0;

  static StopRule to_absorption() { return {Kind::ToAbsorption, 0.0}; }
  static StopRule at_time(double t) { return {Kind::TMax, t}; }
};

struct NestedConfig {
  std::int64_t species = 1;
  std::int64_t lineages = 1;  // per species
  double rate_c = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  StopRule stop = StopRule::to_absorption();
  DecimationPolicy decimation;

  // Throws std::invalid_argument naming the offending field.  The overflow
  // guard rejects configs with species*lineages^2/2 > 1e15.
  void validate() const;
};

// Exact event-driven nested coalescent run; deterministic given the config.
Trajectory simulate_nested(const NestedConfig& cfg);

}  // namespace nkc
