#include "doctest.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "nkc/nested.hpp"

using namespace nkc;

TEST_CASE("total rates") {
  auto rates = total_rates(SpeciesState::from_counts({1, 1, 1}), 2.0);
  CHECK(rates.lineage == 0.0);
  CHECK(rates.species == 6.0);

  rates = total_rates(SpeciesState::from_counts({4}), 1.0);
  CHECK(rates.lineage == 6.0);
  CHECK(rates.species == 0.0);

  rates = total_rates(SpeciesState::from_counts({2, 3}), 0.5);
  CHECK(rates.lineage == 4.0);
  CHECK(rates.species == 0.5);
}

TEST_CASE("forced event kinds") {
  RngStream rng(1, 0);
  SpeciesState singletons = SpeciesState::from_counts({1, 1});
  CHECK(nested_step(singletons, 3.0, rng).kind == EventRecord::Kind::SpeciesMerge);
  CHECK(singletons.species_count() == 1);
  CHECK(singletons.lineage_count() == 2);

  SpeciesState lone = SpeciesState::from_counts({2});
  CHECK(nested_step(lone, 3.0, rng).kind == EventRecord::Kind::LineageMerge);
  CHECK(lone.lineage_count() == 1);

  SpeciesState absorbed = SpeciesState::from_counts({1});
  CHECK_THROWS_AS(nested_step(absorbed, 1.0, rng), std::logic_error);
}

TEST_CASE("species merge probability is 1/3 for counts {2,2} at c=1") {
  const int reps = 100000;
  int species_first = 0;
  for (int i = 0; i < reps; ++i) {
    SpeciesState state = SpeciesState::from_counts({2, 2});
    RngStream rng(2024, i);
    if (nested_step(state, 1.0, rng).kind == EventRecord::Kind::SpeciesMerge) {
      ++species_first;
    }
  }
  const double p = 1.0 / 3.0;
  const double sigma = std::sqrt(p * (1 - p) / reps);
  CHECK(std::abs(double(species_first) / reps - p) < 3 * sigma);
}

TEST_CASE("weighted species selection matches the n(n-1) law") {
  const SpeciesState state = SpeciesState::from_counts({2, 3, 5});
  RngStream rng(7, 0);
  int hits[3] = {0, 0, 0};
  const int reps = 100000;
  for (int i = 0; i < reps; ++i) ++hits[state.sample_weighted_species(rng)];
  const double probs[3] = {2 / 28.0, 6 / 28.0, 20 / 28.0};
  for (int i = 0; i < 3; ++i) {
    const double sigma = std::sqrt(probs[i] * (1 - probs[i]) / reps);
    CHECK(std::abs(double(hits[i]) / reps - probs[i]) < 3 * sigma);
  }
}

TEST_CASE("absorbing start yields a single-point trajectory") {
  NestedConfig cfg;
  cfg.species = 1;
  cfg.lineages = 1;
  const Trajectory traj = simulate_nested(cfg);
  REQUIRE(traj.points.size() == 1);
  CHECK(traj.points[0].t == 0.0);
  CHECK(traj.points[0].species == 1.0);
  CHECK(traj.points[0].lineages == 1.0);
  CHECK(traj.lineage_merges == 0);
  CHECK(traj.species_merges == 0);
}

TEST_CASE("two singleton species merge then coalesce") {
  NestedConfig cfg;
  cfg.species = 2;
  cfg.lineages = 1;
  cfg.rate_c = 1.0;
  cfg.seed = 7;
  cfg.decimation = DecimationPolicy::all_events();
  const Trajectory traj = simulate_nested(cfg);
  REQUIRE(traj.points.size() == 3);
  CHECK(traj.points[1].species == 1.0);
  CHECK(traj.points[1].lineages == 2.0);
  CHECK(traj.points[2].lineages == 1.0);
  CHECK(traj.species_merges == 1);
  CHECK(traj.lineage_merges == 1);
}

TEST_CASE("event counts conserve lineages and species exactly") {
  RngStream pick(99, 0);
  for (int rep = 0; rep < 20; ++rep) {
    NestedConfig cfg;
    cfg.species = 1 + std::int64_t(pick.uniform_below(6));
    cfg.lineages = 1 + std::int64_t(pick.uniform_below(6));
    cfg.rate_c = 0.5 + pick.uniform_open01();
    cfg.seed = 1000 + rep;
    const Trajectory traj = simulate_nested(cfg);
    CHECK(traj.terminal().lineages == 1.0);
    CHECK(traj.terminal().species == 1.0);
    CHECK(traj.lineage_merges == std::uint64_t(cfg.species * cfg.lineages - 1));
    CHECK(traj.species_merges == std::uint64_t(cfg.species - 1));
  }
}

TEST_CASE("structural invariants along a run") {
  NestedConfig cfg;
  cfg.species = 50;
  cfg.lineages = 20;
  cfg.rate_c = 0.8;
  cfg.seed = 5;
  cfg.decimation = DecimationPolicy::all_events();
  const Trajectory traj = simulate_nested(cfg);
  for (std::size_t i = 1; i < traj.points.size(); ++i) {
    CHECK(traj.points[i].t > traj.points[i - 1].t);
    CHECK(traj.points[i].species <= traj.points[i - 1].species);
    CHECK(traj.points[i].lineages < traj.points[i - 1].lineages + 1);
    CHECK(traj.points[i].lineages >= traj.points[i].species);
  }
}

TEST_CASE("reruns are bit-identical") {
  NestedConfig cfg;
  cfg.species = 30;
  cfg.lineages = 40;
  cfg.rate_c = 1.3;
  cfg.seed = 12345;
  const Trajectory a = simulate_nested(cfg);
  const Trajectory b = simulate_nested(cfg);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].t == b.points[i].t);
    CHECK(a.points[i].species == b.points[i].species);
    CHECK(a.points[i].lineages == b.points[i].lineages);
  }
}

TEST_CASE("decimation policies") {
  NestedConfig cfg;
  cfg.species = 20;
  cfg.lineages = 10;
  cfg.rate_c = 1.0;
  cfg.seed = 31;

  cfg.decimation = DecimationPolicy::all_events();
  const Trajectory all = simulate_nested(cfg);
  CHECK(all.points.size() == std::size_t(all.lineage_merges + all.species_merges) + 1);

  cfg.decimation = DecimationPolicy::every_kth(4);
  const Trajectory fourth = simulate_nested(cfg);
  CHECK(fourth.points.size() < all.points.size());

  cfg.decimation = DecimationPolicy::geometric(1.05);
  const Trajectory geo = simulate_nested(cfg);
  CHECK(geo.points.size() <= all.points.size());
  // every species-count change must be retained
  std::size_t s_changes = 0;
  for (std::size_t i = 1; i < geo.points.size(); ++i) {
    if (geo.points[i].species != geo.points[i - 1].species) ++s_changes;
  }
  CHECK(s_changes == geo.species_merges);
  CHECK(geo.terminal().lineages == 1.0);
}

TEST_CASE("decimation parsing") {
  CHECK(DecimationPolicy::parse("all").kind == DecimationKind::AllEvents);
  CHECK(DecimationPolicy::parse("geometric:1.1").ratio == doctest::Approx(1.1));
  CHECK(DecimationPolicy::parse("every:100").every == 100);
  CHECK_THROWS_AS(DecimationPolicy::parse("nope"), std::invalid_argument);
  CHECK_THROWS_AS(DecimationPolicy::parse("geometric:0.5"), std::invalid_argument);
}

TEST_CASE("step-function queries") {
  NestedConfig cfg;
  cfg.species = 2;
  cfg.lineages = 1;
  cfg.rate_c = 2.0;
  cfg.seed = 3;
  cfg.decimation = DecimationPolicy::all_events();
  const Trajectory traj = simulate_nested(cfg);
  REQUIRE(traj.points.size() == 3);
  const double t1 = traj.points[1].t;

  const auto at0 = traj.sample_counts_at(std::vector<double>{0.0});
  CHECK(at0[0].first == 2.0);
  CHECK(at0[0].second == 2.0);

  const auto straddle =
      traj.sample_counts_at(std::vector<double>{t1 * 0.5, t1});
  CHECK(straddle[0].second == 2.0);
  CHECK(straddle[1].first == 1.0);  // exactly at the species merge

  CHECK_THROWS_AS(traj.at_time(traj.terminal().t + 1.0), std::out_of_range);
  CHECK_THROWS_AS(traj.at_time(-0.1), std::out_of_range);
}

TEST_CASE("bounded runs stop at t_max with the pre-horizon state") {
  NestedConfig cfg;
  cfg.species = 10;
  cfg.lineages = 5;
  cfg.rate_c = 1.0;
  cfg.seed = 17;
  cfg.stop = StopRule::at_time(0.02);
  cfg.decimation = DecimationPolicy::all_events();
  const Trajectory traj = simulate_nested(cfg);
  CHECK(traj.terminal().t == 0.02);
  // replay to absorption: the bounded run must agree on the shared prefix
  NestedConfig full = cfg;
  full.stop = StopRule::to_absorption();
  const Trajectory whole = simulate_nested(full);
  for (std::size_t i = 0; i + 1 < traj.points.size(); ++i) {
    CHECK(traj.points[i].t == whole.points[i].t);
    CHECK(traj.points[i].lineages == whole.points[i].lineages);
  }
  CHECK(traj.terminal().lineages == whole.at_time(0.02).lineages);
}

TEST_CASE("config validation") {
  NestedConfig cfg;
  cfg.species = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.species = 1;
  cfg.lineages = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.lineages = 1;
  cfg.rate_c = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.rate_c = 1.0;
  cfg.species = 1000000;
  cfg.lineages = 1000000;  // rate guard: s n^2 / 2 = 5e17
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("frozen configs") {
  NestedConfig cfg;
  cfg.species = 3;
  cfg.lineages = 1;
  cfg.rate_c = 0.0;
  CHECK_THROWS_AS(simulate_nested(cfg), std::invalid_argument);
  cfg.stop = StopRule::at_time(0.5);
  const Trajectory traj = simulate_nested(cfg);
  CHECK(traj.terminal().t == 0.5);
  CHECK(traj.terminal().lineages == 3.0);
}

TEST_CASE("suppressed species mergers reduce to independent Kingman runs") {
  const std::int64_t s = 100, n = 500;
  const double t = 0.05;
  double sum = 0;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    NestedConfig cfg;
    cfg.species = s;
    cfg.lineages = n;
    cfg.rate_c = 0.0;
    cfg.seed = 777;
    cfg.stream = rep;
    cfg.stop = StopRule::at_time(t);
    sum += simulate_nested(cfg).terminal().lineages / double(s);
  }
  const double oracle = 2.0 / (t + 2.0 / double(n));
  CHECK(std::abs(sum / reps / oracle - 1.0) < 0.05);
}

TEST_CASE("small-instance convolution oracle") {
  // s=2, n=1: N(t) = 2 until Exp(c) + Exp(1), then 1, so
  // E[N(t)] = 1 + (c e^{-t} - e^{-ct})/(c - 1).
  const double c = 2.0;
  const int reps = 30000;
  const double times[3] = {0.5, 1.0, 2.0};
  double sums[3] = {0, 0, 0};
  for (int rep = 0; rep < reps; ++rep) {
    NestedConfig cfg;
    cfg.species = 2;
    cfg.lineages = 1;
    cfg.rate_c = c;
    cfg.seed = 4242;
    cfg.stream = rep;
    cfg.decimation = DecimationPolicy::all_events();
    const Trajectory traj = simulate_nested(cfg);
    for (int i = 0; i < 3; ++i) {
      sums[i] += times[i] <= traj.terminal().t
                     ? traj.at_time(times[i]).lineages
                     : 1.0;  // absorbed before the query time
    }
  }
  for (int i = 0; i < 3; ++i) {
    const double t = times[i];
    const double expected = 1.0 + (c * std::exp(-t) - std::exp(-c * t)) / (c - 1.0);
    const double mean = sums[i] / reps;
    const double p = expected - 1.0;
    const double sigma = std::sqrt(p * (1 - p) / reps);
    CHECK(std::abs(mean - expected) < 3.5 * sigma);
  }
}

TEST_CASE("cache audit stays within 1e-9 after many events") {
  SpeciesState state = SpeciesState::uniform(100, 50);
  RngStream rng(8, 0);
  for (int i = 0; i < 4000; ++i) nested_step(state, 1.0, rng);
  CHECK_NOTHROW(state.audit_cache());
  CHECK(state.lineage_rate_total() ==
        doctest::Approx(state.recompute_lineage_rate()).epsilon(1e-9));
}

TEST_CASE("trajectory CSV round-trips t at full precision") {
  NestedConfig cfg;
  cfg.species = 4;
  cfg.lineages = 3;
  cfg.rate_c = 1.0;
  cfg.seed = 21;
  cfg.decimation = DecimationPolicy::all_events();
  const Trajectory traj = simulate_nested(cfg);
  std::ostringstream out;
  traj.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,S,N");
  std::size_t row = 0;
  while (std::getline(in, line)) {
    const auto c1 = line.find(',');
    const double t = std::strtod(line.substr(0, c1).c_str(), nullptr);
    CHECK(t == traj.points[row].t);
    ++row;
  }
  CHECK(row == traj.points.size());
}
