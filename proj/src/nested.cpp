#include "nkc/nested.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace nkc {

namespace {
constexpr std::uint64_t kAuditPeriod = 1'000'000;
constexpr double kAuditRelTol = 1e-9;
constexpr double kRateOverflowGuard = 1e15;

double species_weight(std::int64_t n) {
  return static_cast<double>(n) * static_cast<double>(n - 1);
}
}  // namespace

FenwickTree::FenwickTree(std::size_t capacity)
    : tree_(capacity + 1, 0.0), weights_(capacity, 0.0) {
  top_mask_ = 1;
  while (top_mask_ * 2 <= capacity) top_mask_ *= 2;
}

void FenwickTree::set(std::size_t i, double weight) {
  const double delta = weight - weights_[i];
  if (delta == 0.0) return;
  weights_[i] = weight;
  total_ += delta;
  for (std::size_t node = i + 1; node < tree_.size(); node += node & (0 - node)) {
    tree_[node] += delta;
  }
}

std::size_t FenwickTree::find(double target) const {
  std::size_t idx = 0;  // 1-based cursor into tree_
  double remaining = target;
  for (std::size_t mask = top_mask_; mask > 0; mask >>= 1) {
    const std::size_t next = idx + mask;
    if (next < tree_.size() && tree_[next] <= remaining) {
      idx = next;
      remaining -= tree_[next];
    }
  }
  // idx leaves have cumulative weight <= target; the answer is leaf idx,
  // nudged to a positive-weight neighbour if rounding landed on a hole.
  std::size_t leaf = idx;
  const std::size_t cap = weights_.size();
  while (leaf < cap && weights_[leaf] <= 0.0) ++leaf;
  if (leaf >= cap) {
    leaf = std::min(idx, cap - 1);
    while (leaf > 0 && weights_[leaf] <= 0.0) --leaf;
  }
  return leaf;
}

SpeciesState::SpeciesState(std::vector<std::int64_t> counts)
    : counts_(std::move(counts)), weights_(counts_.size()) {
  if (counts_.empty()) throw std::invalid_argument("SpeciesState: no species");
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    if (counts_[i] < 1) throw std::invalid_argument("SpeciesState: count < 1");
    weights_.set(i, species_weight(counts_[i]));
    total_lineages_ += counts_[i];
  }
  lineage_rate_total_ = 0.5 * weights_.total();
}

SpeciesState SpeciesState::uniform(std::int64_t species, std::int64_t lineages_each) {
  if (species < 1) throw std::invalid_argument("SpeciesState: species must be >= 1");
  if (lineages_each < 1) throw std::invalid_argument("SpeciesState: lineages must be >= 1");
  return SpeciesState(std::vector<std::int64_t>(static_cast<std::size_t>(species),
                                                lineages_each));
}

SpeciesState SpeciesState::from_counts(std::vector<std::int64_t> counts) {
  return SpeciesState(std::move(counts));
}

double SpeciesState::recompute_lineage_rate() const {
  double sum = 0.0;
  for (std::int64_t n : counts_) sum += 0.5 * species_weight(n);
  return sum;
}

void SpeciesState::audit_cache() const {
  const double expected = recompute_lineage_rate();
  const double scale = std::max(1.0, std::abs(expected));
  if (std::abs(lineage_rate_total_ - expected) > kAuditRelTol * scale) {
    throw std::logic_error("SpeciesState: cached lineage rate drifted from recomputation");
  }
}

void SpeciesState::maybe_audit() {
  if (++events_since_audit_ >= kAuditPeriod) {
    events_since_audit_ = 0;
    audit_cache();
  }
}

std::size_t SpeciesState::sample_weighted_species(RngStream& rng) const {
  const double total = weights_.total();
  if (!(total > 0.0)) {
    throw std::logic_error("sample_weighted_species: no species has a mergeable pair");
  }
  return weights_.find(rng.uniform_open01() * total);
}

void SpeciesState::apply_lineage_merge(std::size_t i) {
  const std::int64_t n = counts_[i];
  if (n < 2) throw std::logic_error("apply_lineage_merge: species has no pair");
  counts_[i] = n - 1;
  weights_.set(i, species_weight(n - 1));
  lineage_rate_total_ += 0.5 * (species_weight(n - 1) - species_weight(n));
  --total_lineages_;
  maybe_audit();
}

void SpeciesState::apply_species_merge(std::size_t a, std::size_t b) {
  if (a == b || a >= counts_.size() || b >= counts_.size()) {
    throw std::logic_error("apply_species_merge: bad pair");
  }
  const std::int64_t na = counts_[a];
  const std::int64_t nb = counts_[b];
  counts_[a] = na + nb;
  weights_.set(a, species_weight(na + nb));
  lineage_rate_total_ +=
      0.5 * (species_weight(na + nb) - species_weight(na) - species_weight(nb));
  // Swap-remove slot b to keep live species dense.
  const std::size_t last = counts_.size() - 1;
  if (b != last) {
    counts_[b] = counts_[last];
    weights_.set(b, weights_.weight(last));
  }
  weights_.set(last, 0.0);
  counts_.pop_back();
  maybe_audit();
}

TotalRates total_rates(const SpeciesState& state, double c) {
  const double s = static_cast<double>(state.species_count());
  return {state.lineage_rate_total(), c * 0.5 * s * (s - 1.0)};
}

EventRecord nested_step(SpeciesState& state, double c, RngStream& rng) {
  if (state.lineage_count() <= 1) {
    throw std::logic_error("nested_step: state is absorbed (N = 1)");
  }
  const TotalRates rates = total_rates(state, c);
  const double total = rates.total();
  if (!(total > 0.0)) {
    throw std::logic_error("nested_step: state is frozen (total rate zero)");
  }
  EventRecord ev{};
  ev.dt = rng.exponential(total);
  const double category = rng.uniform_open01() * total;
  if (category < rates.lineage) {
    ev.kind = EventRecord::Kind::LineageMerge;
    ev.species_a = state.sample_weighted_species(rng);
    ev.species_b = ev.species_a;
    state.apply_lineage_merge(ev.species_a);
  } else {
    ev.kind = EventRecord::Kind::SpeciesMerge;
    const std::uint64_t s = static_cast<std::uint64_t>(state.species_count());
    ev.species_a = static_cast<std::size_t>(rng.uniform_below(s));
    std::size_t other = static_cast<std::size_t>(rng.uniform_below(s - 1));
    if (other >= ev.species_a) ++other;
    ev.species_b = other;
    state.apply_species_merge(ev.species_a, ev.species_b);
  }
  state.advance_time(ev.dt);
  return ev;
}

void NestedConfig::validate() const {
  if (species < 1) throw std::invalid_argument("config: species must be >= 1");
  if (lineages < 1) throw std::invalid_argument("config: lineages must be >= 1");
  if (!(rate_c >= 0.0) || std::isnan(rate_c)) {
    throw std::invalid_argument("config: rate_c must be >= 0");
  }
  if (stop.kind == StopRule::Kind::TMax && !(stop.t_max >= 0.0)) {
    throw std::invalid_argument("config: t_max must be >= 0");
  }
  const double guard = 0.5 * static_cast<double>(species) *
                       static_cast<double>(lineages) * static_cast<double>(lineages);
  if (guard > kRateOverflowGuard) {
    throw std::invalid_argument("config: species*lineages^2/2 exceeds the 1e15 rate guard");
  }
  if (decimation.kind == DecimationKind::GeometricGrid && !(decimation.ratio > 1.0)) {
    throw std::invalid_argument("config: decimation ratio must be > 1");
  }
  if (decimation.kind == DecimationKind::EveryKth && decimation.every < 1) {
    throw std::invalid_argument("config: decimation k must be >= 1");
  }
}

Trajectory simulate_nested(const NestedConfig& cfg) {
  cfg.validate();
  SpeciesState state = SpeciesState::uniform(cfg.species, cfg.lineages);
  RngStream rng(cfg.seed, cfg.stream);

  Trajectory traj;
  traj.decimation = cfg.decimation;
  const double t_max =
      cfg.stop.kind == StopRule::Kind::TMax ? cfg.stop.t_max : 0.0;
  const bool bounded = cfg.stop.kind == StopRule::Kind::TMax;

  auto record = [&traj](double t, double s, double n) {
    if (!traj.points.empty() && traj.points.back().t == t) {
      traj.points.back() = {t, s, n};  // exact tie: keep the latest state
      return;
    }
    traj.points.push_back({t, s, n});
  };

  record(0.0, static_cast<double>(state.species_count()),
         static_cast<double>(state.lineage_count()));

  double next_grid_time = 0.0;
  std::uint64_t event_index = 0;
  double live_s = static_cast<double>(state.species_count());
  double live_n = static_cast<double>(state.lineage_count());
  double live_t = 0.0;
  for (;;) {
    if (state.lineage_count() <= 1) break;
    if (total_rates(state, cfg.rate_c).total() <= 0.0) {
      if (!bounded) {
        throw std::invalid_argument(
            "config: state frozen before absorption (rate_c = 0 with singleton species)");
      }
      break;
    }
    const EventRecord ev = nested_step(state, cfg.rate_c, rng);
    if (bounded && state.time() > t_max) break;  // event past the horizon: state discarded
    ++event_index;
    if (ev.kind == EventRecord::Kind::LineageMerge) {
      ++traj.lineage_merges;
    } else {
      ++traj.species_merges;
    }
    live_s = static_cast<double>(state.species_count());
    live_n = static_cast<double>(state.lineage_count());
    live_t = state.time();

    bool keep = false;
    switch (cfg.decimation.kind) {
      case DecimationKind::AllEvents:
        keep = true;
        break;
      case DecimationKind::EveryKth:
        keep = event_index % cfg.decimation.every == 0;
        break;
      case DecimationKind::GeometricGrid:
        keep = ev.kind == EventRecord::Kind::SpeciesMerge || live_t >= next_grid_time;
        if (live_t >= next_grid_time) {
          next_grid_time = live_t * cfg.decimation.ratio;
        }
        break;
    }
    if (keep) record(live_t, live_s, live_n);
  }

  // Terminal point: the state at t_max for bounded runs, else the last event.
  if (bounded) {
    if (t_max >= traj.points.back().t) record(t_max, live_s, live_n);
  } else {
    record(live_t, live_s, live_n);
  }
  return traj;
}

}  // namespace nkc
