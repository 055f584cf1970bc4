#include "nkc/rde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nkc/lambert.hpp"
#include "nkc/parallel.hpp"

namespace nkc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2 = 0.69314718055994531;
}  // namespace

EmpiricalDistribution::EmpiricalDistribution(std::vector<double> particles)
    : particles_(std::move(particles)) {
  if (particles_.empty()) {
    throw std::invalid_argument("EmpiricalDistribution: empty particle set");
  }
  std::sort(particles_.begin(), particles_.end());
  if (!(particles_.front() >= 2.0)) {
    throw std::invalid_argument("EmpiricalDistribution: particles must be >= 2");
  }
}

EmpiricalDistribution EmpiricalDistribution::point_mass(double value,
                                                        std::size_t count) {
  return EmpiricalDistribution(std::vector<double>(count, value));
}

bool EmpiricalDistribution::has_infinite() const {
  return std::isinf(particles_.back());
}

double EmpiricalDistribution::mean() const {
  if (has_infinite()) return kInf;
  KahanSum acc;
  for (double p : particles_) acc.add(p);
  return acc.value() / static_cast<double>(particles_.size());
}

double h_merge(double u, double x) {
  if (!(u >= 0.0) || u >= 1.0) throw std::domain_error("h_merge: u must be in [0,1)");
  if (!(x >= 2.0)) throw std::domain_error("h_merge: x must be >= 2");
  if (std::isinf(x)) return 2.0 / (1.0 - u);
  return 2.0 / ((1.0 - u) + 2.0 * u / x);
}

namespace {

// h with the infinity branch but no domain re-checks, for hot loops.
inline double h_fast(double u, double x) {
  if (std::isinf(x)) return 2.0 / (1.0 - u);
  return 2.0 / ((1.0 - u) + 2.0 * u / x);
}

// Sum of two extended reals >= 2 without arithmetic on infinities.
inline double ext_sum(double a, double b) {
  if (std::isinf(a) || std::isinf(b)) return kInf;
  return a + b;
}

}  // namespace

EmpiricalDistribution apply_T(const EmpiricalDistribution& mu,
                              std::size_t out_count, RngStream& rng) {
  if (out_count < 1) throw std::invalid_argument("apply_T: out_count must be >= 1");
  const auto& src = mu.particles();
  const std::uint64_t n = src.size();
  std::vector<double> out(out_count);
  for (double& value : out) {
    const double u = rng.uniform_open01();
    const double w1 = src[rng.uniform_below(n)];
    const double w2 = src[rng.uniform_below(n)];
    value = h_fast(u, ext_sum(w1, w2));
  }
  return EmpiricalDistribution(std::move(out));
}

double wasserstein1(const EmpiricalDistribution& a,
                    const EmpiricalDistribution& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("wasserstein1: particle counts differ");
  }
  if (a.has_infinite() || b.has_infinite()) {
    throw std::invalid_argument("wasserstein1: infinite particle");
  }
  KahanSum acc;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc.add(std::abs(a.particles()[i] - b.particles()[i]));
  }
  return acc.value() / static_cast<double>(a.size());
}

NonConvergenceError::NonConvergenceError(std::vector<double> distances)
    : std::runtime_error("fixed-point iteration did not converge"),
      distance_sequence(std::move(distances)) {}

FixedPointResult iterate_to_fixed_point(EmpiricalDistribution initial, double tol,
                                        int max_iter, RngStream& rng) {
  if (initial.size() < 1000) {
    throw std::invalid_argument("iterate_to_fixed_point: need at least 1000 particles");
  }
  if (!(tol > 0.0)) throw std::invalid_argument("iterate_to_fixed_point: tol must be > 0");
  if (max_iter < 1) throw std::invalid_argument("iterate_to_fixed_point: max_iter must be >= 1");

  EmpiricalDistribution state = std::move(initial);
  std::vector<double> distances;
  double best = kInf;
  int stalled = 0;
  for (int iter = 1; iter <= max_iter; ++iter) {
    EmpiricalDistribution next = apply_T(state, state.size(), rng);
    const double d = wasserstein1(state, next);
    distances.push_back(d);
    state = std::move(next);
    stalled = distances.size() > 1 && d >= distances[distances.size() - 2]
                  ? stalled + 1
                  : 0;
    best = std::min(best, d);
    const bool converged = d <= tol;
    const bool plateaued = stalled >= 3;
    if (converged || plateaued) {
      const double gamma_hat = state.mean();
      return {std::move(state), gamma_hat, std::move(distances), iter,
              converged,        plateaued, best};
    }
  }
  throw NonConvergenceError(std::move(distances));
}

FixedPointResult iterate_to_fixed_point(std::size_t particle_count, double tol,
                                        int max_iter, FixedPointInit init,
                                        RngStream& rng) {
  std::vector<double> start(particle_count);
  if (init == FixedPointInit::Delta2) {
    std::fill(start.begin(), start.end(), 2.0);
  } else {
    // First iterate of delta_inf drawn analytically: T(delta_inf) ~ 2/(1-U).
    for (double& v : start) v = 2.0 / (1.0 - rng.uniform_open01());
  }
  return iterate_to_fixed_point(EmpiricalDistribution(std::move(start)), tol,
                                max_iter, rng);
}

SandwichPair sandwich_replicate(int depth, RngStream& rng) {
  if (depth < 0) throw std::invalid_argument("sandwich_replicate: depth must be >= 0");
  if (depth > 30) throw std::invalid_argument("sandwich_replicate: depth capped at 30");
  if (depth == 0) return {2.0, kInf};

  const std::size_t leaves = std::size_t{1} << depth;
  std::vector<double> lower(leaves, 2.0);
  std::vector<double> upper(leaves, kInf);
  // Shared uniforms, one per internal node, drawn level by level from the
  // leaves up and left to right within each level.
  for (std::size_t width = leaves / 2; width >= 1; width /= 2) {
    for (std::size_t i = 0; i < width; ++i) {
      const double u = rng.uniform_open01();
      lower[i] = h_fast(u, ext_sum(lower[2 * i], lower[2 * i + 1]));
      upper[i] = h_fast(u, ext_sum(upper[2 * i], upper[2 * i + 1]));
    }
  }
  return {lower[0], upper[0]};
}

GammaEstimate estimate_gamma(int depth, std::uint64_t replicates,
                             std::uint64_t seed, unsigned workers) {
  if (replicates < 1) throw std::invalid_argument("estimate_gamma: replicates must be >= 1");
  if (depth < 0 || depth > 30) {
    throw std::invalid_argument("estimate_gamma: depth must be in [0, 30]");
  }

  struct BlockStats {
    KahanSum lower, upper, lower_sq;
    std::uint64_t violations = 0;
    double max_gap = 0.0;
    bool upper_infinite = false;
  };
  constexpr std::uint64_t kBlock = 1 << 14;
  const std::uint64_t n_blocks = (replicates + kBlock - 1) / kBlock;
  std::vector<BlockStats> blocks(n_blocks);

  parallel_blocks(replicates, workers, kBlock,
                  [&](std::uint64_t b, std::uint64_t lo, std::uint64_t hi) {
                    BlockStats& st = blocks[b];
                    for (std::uint64_t r = lo; r < hi; ++r) {
                      RngStream rng(seed, r);
                      const SandwichPair pair = sandwich_replicate(depth, rng);
                      st.lower.add(pair.lower);
                      st.lower_sq.add(pair.lower * pair.lower);
                      if (std::isinf(pair.upper)) {
                        st.upper_infinite = true;
                      } else {
                        st.upper.add(pair.upper);
                        st.max_gap = std::max(st.max_gap, pair.upper - pair.lower);
                      }
                      if (pair.lower > pair.upper) ++st.violations;
                    }
                  });

  KahanSum lower, upper, lower_sq;
  std::uint64_t violations = 0;
  double max_gap = 0.0;
  bool upper_infinite = false;
  for (const BlockStats& st : blocks) {
    lower.add(st.lower.value());
    upper.add(st.upper.value());
    lower_sq.add(st.lower_sq.value());
    violations += st.violations;
    max_gap = std::max(max_gap, st.max_gap);
    upper_infinite |= st.upper_infinite;
  }

  const double n = static_cast<double>(replicates);
  GammaEstimate est{};
  est.mean_lower = lower.value() / n;
  est.mean_upper = upper_infinite ? kInf : upper.value() / n;
  const double variance =
      replicates > 1
          ? std::max(0.0, (lower_sq.value() - n * est.mean_lower * est.mean_lower) /
                              (n - 1.0))
          : 0.0;
  est.std_error = std::sqrt(variance / n);
  est.ci95_lo = est.mean_lower - 2.0 * est.std_error;
  est.ci95_hi = est.mean_upper + 2.0 * est.std_error;
  est.depth = depth;
  est.replicates = replicates;
  est.seed = seed;
  est.order_violations = violations;
  est.max_gap = upper_infinite ? kInf : max_gap;
  return est;
}

double conditional_mean_w(double w1, double w2) {
  if (!(w1 >= 2.0) || !(w2 >= 2.0)) {
    throw std::domain_error("conditional_mean_w: arguments must be >= 2");
  }
  const double s = w1 + w2;
  if (s == 2.0) return 2.0;  // h(u,2) is identically 2
  const double ratio = 2.0 / s;
  return 2.0 / (ratio - 1.0) * std::log(ratio);
}

GammaBounds gamma_analytic_bounds() {
  GammaBounds bounds{};
  bounds.lower = 4.0 * kLog2;
  const double arg = -0.5 / std::sqrt(std::exp(1.0));  // -1/(2 sqrt e)
  bounds.upper = -2.0 * lambert_w_m1(arg);
  const double g = bounds.upper;
  bounds.residual = std::abs(g - 2.0 / (1.0 / g - 1.0) * std::log(1.0 / g));
  return bounds;
}

}  // namespace nkc
