#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "nkc/rng.hpp"

namespace nkc {

// Sorted particle cloud on [2, +inf]; +inf particles are allowed and handled
// analytically (no floating-point arithmetic is ever performed on them).
class EmpiricalDistribution {
 public:
  explicit EmpiricalDistribution(std::vector<double> particles);
  static EmpiricalDistribution point_mass(double value, std::size_t count);

  const std::vector<double>& particles() const { return particles_; }
  std::size_t size() const { return particles_.size(); }
  bool has_infinite() const;
  double mean() const;  // +inf if any particle is infinite

 private:
  std::vector<double> particles_;
};

// h(u, x) = 2 / ((1-u) + 2u/x), defined for u in [0,1) and x in [2, +inf];
// h(u, +inf) = 2/(1-u).  Always >= 2, non-decreasing in both arguments.
double h_merge(double u, double x);

// One particle application of the transport map: each output is
// h(U, W1 + W2) with U ~ Uniform(0,1) open and W1, W2 resampled with
// replacement from mu.  Output is sorted and entirely finite.
EmpiricalDistribution apply_T(const EmpiricalDistribution& mu,
                              std::size_t out_count, RngStream& rng);

// Mean absolute difference of equally-sized sorted samples (the optimal
// 1-d coupling).  Throws on count mismatch or infinite particles.
double wasserstein1(const EmpiricalDistribution& a,
                    const EmpiricalDistribution& b);

enum class FixedPointInit { Delta2, DeltaInf };

struct FixedPointResult {
  EmpiricalDistribution final_state;
  double gamma_hat;  // mean of final_state
  std::vector<double> distance_sequence;  // successive Wasserstein-1 gaps
  int iterations;
  bool converged;  // last distance <= tol
  bool plateaued;  // stopped on the sampling-noise plateau
  double plateau_level;  // smallest observed distance
};

struct NonConvergenceError : std::runtime_error {
  explicit NonConvergenceError(std::vector<double> distances);
  std::vector<double> distance_sequence;
};

// Repeated application of T until successive iterates are within tol in
// Wasserstein-1 or the distances stop decreasing for three steps in a row
// (particle iteration cannot contract below Monte Carlo resolution).
// The DeltaInf start generates its first iterate analytically as 2/(1-U),
// so every represented state is finite.  Throws NonConvergenceError when
// max_iter passes without either stop.
FixedPointResult iterate_to_fixed_point(std::size_t particle_count, double tol,
                                        int max_iter, FixedPointInit init,
                                        RngStream& rng);
FixedPointResult iterate_to_fixed_point(EmpiricalDistribution initial,
                                        double tol, int max_iter,
                                        RngStream& rng);

struct SandwichPair {
  double lower;  // >= 2
  double upper;  // >= lower; +inf only at depth 0
};

// One recursive-tree replicate of depth d: a complete binary tree evaluated
// bottom-up twice with shared uniforms, once from all-2 leaves and once from
// all-infinite leaves.  Uniforms are drawn level by level from the leaves
// up, left to right.  Guarded to d <= 30.
SandwichPair sandwich_replicate(int depth, RngStream& rng);

struct GammaEstimate {
  double mean_lower;
  double mean_upper;
  double std_error;  // from the sample variance of the lower values
  double ci95_lo;    // mean_lower - 2*std_error
  double ci95_hi;    // mean_upper + 2*std_error
  int depth;
  std::uint64_t replicates;
  std::uint64_t seed;
  std::uint64_t order_violations;  // replicates with lower > upper (expect 0)
  double max_gap;                  // largest upper - lower seen
};

// Replicate r uses stream index r of `seed`; block-wise compensated
// reduction in replicate order makes the result bit-identical for every
// worker count.
GammaEstimate estimate_gamma(int depth, std::uint64_t replicates,
                             std::uint64_t seed, unsigned workers = 1);

// Exact conditional mean of h(U, w1+w2) over U; equals 4 log 2 at (2,2).
double conditional_mean_w(double w1, double w2);

struct GammaBounds {
  double lower;     // 4 log 2
  double upper;     // -2 W_{-1}(-1/(2 sqrt e))
  double residual;  // |upper - (2/(1/upper - 1)) log(1/upper)|
};

GammaBounds gamma_analytic_bounds();

}  // namespace nkc
