#include "nkc/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "nkc/analysis.hpp"
#include "nkc/kingman.hpp"
#include "nkc/nested.hpp"
#include "nkc/parallel.hpp"
#include "nkc/rde.hpp"
#include "nkc/rng.hpp"

namespace nkc {

namespace {

std::string fmt(const char* pattern, double a, double b = 0, double c = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

struct MeanVar {
  double mean = 0;
  double sd = 0;
};

MeanVar mean_sd(const std::vector<double>& xs) {
  KahanSum s;
  for (double x : xs) s.add(x);
  const double mean = s.value() / xs.size();
  KahanSum q;
  for (double x : xs) q.add((x - mean) * (x - mean));
  return {mean, std::sqrt(q.value() / std::max<std::size_t>(1, xs.size() - 1))};
}

}  // namespace

std::vector<PropertyResult> verify_core(std::uint64_t seed) {
  std::vector<PropertyResult> out;

  {  // strictly decreasing block counts, one event per merge
    RngStream rng(seed, 1);
    bool ok = true;
    for (int rep = 0; rep < 20 && ok; ++rep) {
      const auto run = simulate_block_trajectory(2 + rep * 7, rng);
      std::int64_t prev = run.trajectory.start;
      for (const auto& ev : run.trajectory.events) {
        ok = ok && ev.count == prev - 1;
        prev = ev.count;
      }
      ok = ok && static_cast<std::int64_t>(run.trajectory.events.size()) ==
                     run.trajectory.start - run.trajectory.final_count();
    }
    out.push_back({"block counts decrease by exactly one per event", ok, ""});
  }

  {  // empirical mean of K_n(t) non-decreasing in n
    const double t = 0.05;
    const int reps = 10000;
    double prev_mean = 0, prev_sd = 0;
    bool ok = true;
    std::string detail;
    int which = 0;
    for (std::int64_t n : {50, 100, 200}) {
      RngStream rng(seed, 10 + which);
      std::vector<double> draws(reps);
      for (double& d : draws) d = static_cast<double>(sample_block_count(n, t, rng));
      const MeanVar mv = mean_sd(draws);
      if (which > 0) {
        const double slack = 3.0 * std::hypot(mv.sd, prev_sd) / std::sqrt(reps);
        ok = ok && mv.mean + slack >= prev_mean;
      }
      detail += fmt("%.3f ", mv.mean);
      prev_mean = mv.mean;
      prev_sd = mv.sd;
      ++which;
    }
    out.push_back({"mean K_n(t) non-decreasing in n (3 sigma)", ok,
                   "means(n=50,100,200): " + detail});
  }

  {  // m tau_m concentration against the analytic mean 2/m - 2/n
    const std::int64_t n = 10000, m = 100;
    const int reps = 10000;
    RngStream rng(seed, 20);
    KahanSum acc;
    for (int rep = 0; rep < reps; ++rep) {
      const auto run = simulate_block_trajectory(n, rng, 1.0, m);
      acc.add(run.hitting_times.at(m));
    }
    const double mean = acc.value() / reps;
    const double oracle = 2.0 / m - 2.0 / n;
    const double rel = std::abs(mean / oracle - 1.0);
    out.push_back({"m*tau_m mean within 10% of 2/m - 2/n", rel < 0.10,
                   fmt("m*mean=%.4f target=%.4f rel=%.4f", m * mean, m * oracle, rel)});
  }

  {  // Corollary-1-style deviation frequency
    const std::int64_t n = 10000;
    const double t = 0.02, eps = 0.3;
    const int reps = 10000;
    const double threshold = 2.0 * (1.0 - eps) / t;
    RngStream rng(seed, 30);
    int below = 0;
    for (int rep = 0; rep < reps; ++rep) {
      if (static_cast<double>(sample_block_count(n, t, rng)) < threshold) ++below;
    }
    const double freq = static_cast<double>(below) / reps;
    out.push_back({"P(K_n(t) < 2(1-eps)/t) below 5%", freq < 0.05,
                   fmt("freq=%.5f", freq)});
  }

  {  // Yule time change: normalized durations are Exp(1)
    const std::int64_t start = 200, m = 20;
    const double c = 1.0;
    const int reps = 1000;
    RngStream rng(seed, 40);
    std::vector<double> durations;
    durations.reserve(reps * (start - m + 1));
    for (int rep = 0; rep < reps; ++rep) {
      const auto run = simulate_block_trajectory(start, rng, c, m - 1);
      const auto report = yule_timechange_statistic(run.trajectory, m, c);
      durations.insert(durations.end(), report.normalized_durations.begin(),
                       report.normalized_durations.end());
    }
    const MeanVar mv = mean_sd(durations);
    const double sigma = 1.0 / std::sqrt(static_cast<double>(durations.size()));
    const double ks = ks_distance_exp1(durations);
    const double ks_limit = 1.95 / std::sqrt(static_cast<double>(durations.size()));
    const bool ok = std::abs(mv.mean - 1.0) < 3.0 * sigma && ks < ks_limit;
    out.push_back({"Yule time-change durations are Exp(1)", ok,
                   fmt("mean=%.5f (3sig=%.5f) ks=%.5f", mv.mean, 3.0 * sigma, ks)});
  }

  return out;
}

std::vector<PropertyResult> verify_nested(std::uint64_t seed) {
  std::vector<PropertyResult> out;

  {  // exact event-count conservation on randomized configs
    RngStream pick(seed, 1);
    bool ok = true;
    for (int rep = 0; rep < 100 && ok; ++rep) {
      NestedConfig cfg;
      cfg.species = 1 + static_cast<std::int64_t>(pick.uniform_below(8));
      cfg.lineages = 1 + static_cast<std::int64_t>(pick.uniform_below(8));
      cfg.rate_c = 0.25 + 3.75 * pick.uniform_open01();
      cfg.seed = seed;
      cfg.stream = 100 + rep;
      cfg.stop = StopRule::to_absorption();
      cfg.decimation = DecimationPolicy::all_events();
      const Trajectory traj = simulate_nested(cfg);
      const auto& end = traj.terminal();
      ok = ok &&
           traj.lineage_merges ==
               static_cast<std::uint64_t>(cfg.species * cfg.lineages -
                                          static_cast<std::int64_t>(end.lineages)) &&
           traj.species_merges ==
               static_cast<std::uint64_t>(cfg.species -
                                          static_cast<std::int64_t>(end.species)) &&
           end.lineages == 1.0 && end.species == 1.0;
    }
    out.push_back({"event counts conserve lineages and species exactly", ok, ""});
  }

  {  // cached lineage rate matches recomputation after a long run
    SpeciesState state = SpeciesState::uniform(200, 500);
    RngStream rng(seed, 2);
    for (int i = 0; i < 90000; ++i) nested_step(state, 1.0, rng);
    const double cached = state.lineage_rate_total();
    const double exact = state.recompute_lineage_rate();
    bool ok = true;
    try {
      state.audit_cache();
    } catch (const std::logic_error&) {
      ok = false;
    }
    const double rel = std::abs(cached - exact) / std::max(1.0, std::abs(exact));
    out.push_back({"cached lineage rate within 1e-9 of recomputation", ok && rel <= 1e-9,
                   fmt("rel=%.3g", rel)});
  }

  {  // weighted species selection frequencies on a frozen state
    const SpeciesState state = SpeciesState::from_counts({2, 3, 5});
    const int reps = 100000;
    RngStream rng(seed, 3);
    int hits[3] = {0, 0, 0};
    for (int i = 0; i < reps; ++i) ++hits[state.sample_weighted_species(rng)];
    const double probs[3] = {2.0 / 28.0, 6.0 / 28.0, 20.0 / 28.0};
    bool ok = true;
    std::string detail;
    for (int i = 0; i < 3; ++i) {
      const double freq = static_cast<double>(hits[i]) / reps;
      const double sigma = std::sqrt(probs[i] * (1 - probs[i]) / reps);
      ok = ok && std::abs(freq - probs[i]) < 3.0 * sigma;
      detail += fmt("%.4f/%.4f ", freq, probs[i]);
    }
    out.push_back({"weighted selection matches n_i(n_i-1) law (3 sigma)", ok, detail});
  }

  {  // bit-identical reruns
    NestedConfig cfg;
    cfg.species = 40;
    cfg.lineages = 25;
    cfg.rate_c = 0.7;
    cfg.seed = seed;
    cfg.decimation = DecimationPolicy::all_events();
    const Trajectory a = simulate_nested(cfg);
    const Trajectory b = simulate_nested(cfg);
    bool ok = a.points.size() == b.points.size() &&
              a.lineage_merges == b.lineage_merges &&
              a.species_merges == b.species_merges;
    for (std::size_t i = 0; ok && i < a.points.size(); ++i) {
      ok = a.points[i].t == b.points[i].t &&
           a.points[i].species == b.points[i].species &&
           a.points[i].lineages == b.points[i].lineages;
    }
    out.push_back({"identical configs give bit-identical trajectories", ok, ""});
  }

  {  // c = 0 degenerates to independent Kingman coalescents
    const std::int64_t s = 200, n = 1000;
    const double t = 0.05;
    const int reps = 100;
    KahanSum acc;
    for (int rep = 0; rep < reps; ++rep) {
      NestedConfig cfg;
      cfg.species = s;
      cfg.lineages = n;
      cfg.rate_c = 0.0;
      cfg.seed = seed;
      cfg.stream = 500 + rep;
      cfg.stop = StopRule::at_time(t);
      const Trajectory traj = simulate_nested(cfg);
      acc.add(traj.terminal().lineages / static_cast<double>(s));
    }
    const double mean = acc.value() / reps;
    const double oracle = expected_blocks(n, t);
    const double rel = std::abs(mean / oracle - 1.0);
    out.push_back({"c=0 mean N(t)/s within 5% of 2/(t+2/n)", rel < 0.05,
                   fmt("mean=%.3f oracle=%.3f rel=%.4f", mean, oracle, rel)});
  }

  return out;
}

namespace {

// Complete binary tree evaluated bottom-up with caller-provided leaves and
// shared uniforms; mirrors the sandwich recursion for coupling tests.
double eval_tree(const std::vector<double>& leaves,
                 const std::vector<double>& uniforms) {
  std::vector<double> level = leaves;
  std::size_t next_u = 0;
  while (level.size() > 1) {
    std::vector<double> parent(level.size() / 2);
    for (std::size_t i = 0; i < parent.size(); ++i) {
      const double a = level[2 * i], b = level[2 * i + 1];
      const double sum = (std::isinf(a) || std::isinf(b))
                             ? std::numeric_limits<double>::infinity()
                             : a + b;
      parent[i] = h_merge(uniforms[next_u++], sum);
    }
    level = std::move(parent);
  }
  return level[0];
}

}  // namespace

std::vector<PropertyResult> verify_rde(std::uint64_t seed) {
  std::vector<PropertyResult> out;

  {  // pathwise contraction bound for x, y >= 4
    RngStream rng(seed, 1);
    bool ok = true;
    double worst = 0;
    for (int i = 0; i < 100000 && ok; ++i) {
      const double u = rng.uniform_open01();
      const double x = 4.0 * std::exp(5.0 * rng.uniform_open01());
      const double y = 4.0 * std::exp(5.0 * rng.uniform_open01());
      const double lhs = std::abs(h_merge(u, x) - h_merge(u, y));
      const double bound = u / (4.0 * (1.0 - u / 2) * (1.0 - u / 2)) * std::abs(x - y);
      ok = lhs <= bound * (1.0 + 1e-12) + 1e-15;
      worst = std::max(worst, bound > 0 ? lhs / bound : 0.0);
    }
    out.push_back({"pathwise contraction bound", ok, fmt("max lhs/bound=%.6f", worst)});
  }

  {  // enlarging a leaf never decreases the root
    RngStream rng(seed, 2);
    bool ok = true;
    for (int rep = 0; rep < 200 && ok; ++rep) {
      const int depth = 1 + static_cast<int>(rng.uniform_below(6));
      const std::size_t n_leaves = std::size_t{1} << depth;
      std::vector<double> leaves(n_leaves);
      for (double& leaf : leaves) leaf = 2.0 + 10.0 * rng.uniform_open01();
      std::vector<double> uniforms(n_leaves - 1);
      for (double& u : uniforms) u = rng.uniform_open01();
      const double base = eval_tree(leaves, uniforms);
      const std::size_t bump = rng.uniform_below(n_leaves);
      leaves[bump] += 1.0 + 20.0 * rng.uniform_open01();
      ok = eval_tree(leaves, uniforms) >= base - 1e-12;
    }
    out.push_back({"monotone coupling: larger leaves, larger root", ok, ""});
  }

  {  // sandwich ordering at random depths
    RngStream rng(seed, 3);
    bool ok = true;
    for (int rep = 0; rep < 500 && ok; ++rep) {
      RngStream stream(seed, 1000 + rep);
      const SandwichPair pair =
          sandwich_replicate(static_cast<int>(rng.uniform_below(11)), stream);
      ok = pair.lower <= pair.upper && pair.lower >= 2.0;
    }
    out.push_back({"sandwich lower <= upper at every depth", ok, ""});
  }

  {  // mean of T(delta_2) equals 4 log 2
    RngStream rng(seed, 4);
    const auto cloud =
        apply_T(EmpiricalDistribution::point_mass(2.0, 1), 1000000, rng);
    const MeanVar mv = mean_sd(cloud.particles());
    const double target = 4.0 * std::log(2.0);
    const double stderr3 = 3.0 * mv.sd / std::sqrt(static_cast<double>(cloud.size()));
    out.push_back({"mean of T(delta_2) = 4 log 2 (3 sigma)",
                   std::abs(mv.mean - target) < stderr3,
                   fmt("mean=%.5f target=%.5f 3sig=%.5f", mv.mean, target, stderr3)});
  }

  {  // second iterate from delta_inf has a stable finite mean
    auto second_iterate_mean = [&](std::size_t particles, std::uint64_t stream) {
      RngStream rng(seed, stream);
      std::vector<double> first(particles);
      for (double& v : first) v = 2.0 / (1.0 - rng.uniform_open01());
      const auto second =
          apply_T(EmpiricalDistribution(std::move(first)), particles, rng);
      return second.mean();
    };
    const double m4 = second_iterate_mean(10000, 5);
    const double m5 = second_iterate_mean(100000, 6);
    const double rel = std::abs(m4 / m5 - 1.0);
    const bool ok = std::isfinite(m4) && std::isfinite(m5) && rel < 0.05;
    out.push_back({"T^2(delta_inf) mean finite and stable in particle count", ok,
                   fmt("m(1e4)=%.4f m(1e5)=%.4f rel=%.4f", m4, m5, rel)});
  }

  {  // estimate_gamma is worker-count independent, bitwise
    const GammaEstimate a = estimate_gamma(8, 20000, seed, 1);
    const GammaEstimate b = estimate_gamma(8, 20000, seed, 8);
    const bool ok = a.mean_lower == b.mean_lower && a.mean_upper == b.mean_upper &&
                    a.std_error == b.std_error && a.ci95_lo == b.ci95_lo &&
                    a.ci95_hi == b.ci95_hi && a.max_gap == b.max_gap;
    out.push_back({"estimate_gamma bit-identical for 1 and 8 workers", ok,
                   fmt("mean_lower=%.6f", a.mean_lower)});
  }

  return out;
}

}  // namespace nkc
