#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "nkc/lambert.hpp"
#include "nkc/rde.hpp"
#include "nkc/rng.hpp"

using namespace nkc;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFourLogTwo = 2.7725887222397811;

// Composite Simpson quadrature, the independent oracle for conditional means.
double simpson01(double (*f)(double, double), double x, int intervals) {
  const double h = 1.0 / intervals;
  double sum = f(0.0, x) + f(1.0 - 1e-12, x);
  for (int i = 1; i < intervals; ++i) {
    sum += f(i * h, x) * (i % 2 == 1 ? 4.0 : 2.0);
  }
  return sum * h / 3.0;
}

double h_at(double u, double x) { return 2.0 / ((1.0 - u) + 2.0 * u / x); }
}  // namespace

TEST_CASE("h_merge values and domain") {
  CHECK(h_merge(0.0, 7.0) == 2.0);
  CHECK(h_merge(0.9, 2.0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(h_merge(0.5, kInf) == 4.0);
  CHECK_THROWS_AS(h_merge(1.0, 5.0), std::domain_error);
  CHECK_THROWS_AS(h_merge(-0.1, 5.0), std::domain_error);
  CHECK_THROWS_AS(h_merge(0.5, 1.9), std::domain_error);

  RngStream rng(1, 0);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform_open01();
    const double x = 2.0 + 50.0 * rng.uniform_open01();
    CHECK(h_merge(u, x) >= 2.0);
    CHECK(h_merge(u, x) <= h_merge(u, x + 1.0) + 1e-12);          // monotone in x
    CHECK(h_merge(u * 0.5, x) <= h_merge(u, x) + 1e-12);          // monotone in u
  }
}

TEST_CASE("pathwise contraction bound for x, y >= 4") {
  RngStream rng(2, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform_open01();
    const double x = 4.0 * std::exp(6.0 * rng.uniform_open01());
    const double y = 4.0 * std::exp(6.0 * rng.uniform_open01());
    const double lhs = std::abs(h_merge(u, x) - h_merge(u, y));
    const double bound = u / (4.0 * (1 - u / 2) * (1 - u / 2)) * std::abs(x - y);
    CHECK(lhs <= bound * (1 + 1e-12) + 1e-15);
  }
}

TEST_CASE("conditional mean of W") {
  CHECK(conditional_mean_w(2.0, 2.0) == doctest::Approx(kFourLogTwo).epsilon(1e-14));
  // quadrature oracle for (3,3): integral of h(u,6) du equals 3 ln 3
  const double quad = simpson01(h_at, 6.0, 20000);
  CHECK(conditional_mean_w(3.0, 3.0) == doctest::Approx(quad).epsilon(1e-7));
  CHECK(conditional_mean_w(3.0, 3.0) ==
        doctest::Approx(3.0 * std::log(3.0)).epsilon(1e-12));
  CHECK(conditional_mean_w(4.0, 4.0) > conditional_mean_w(2.0, 2.0));
  CHECK_THROWS_AS(conditional_mean_w(1.9, 3.0), std::domain_error);
}

TEST_CASE("apply_T from delta_2 has mean 4 log 2") {
  RngStream rng(3, 0);
  const auto cloud = apply_T(EmpiricalDistribution::point_mass(2.0, 1), 1000000, rng);
  CHECK(cloud.particles().front() >= 2.0);
  CHECK(std::is_sorted(cloud.particles().begin(), cloud.particles().end()));
  double sum = 0, sq = 0;
  for (double w : cloud.particles()) {
    sum += w;
    sq += w * w;
  }
  const double n = double(cloud.size());
  const double mean = sum / n;
  const double sd = std::sqrt((sq - n * mean * mean) / (n - 1));
  CHECK(std::abs(mean - kFourLogTwo) < 3.0 * sd / std::sqrt(n));
}

TEST_CASE("apply_T from delta_inf is 2/(1-U) with median 4") {
  RngStream rng(4, 0);
  const auto cloud = apply_T(EmpiricalDistribution::point_mass(kInf, 1), 1000000, rng);
  CHECK(std::isfinite(cloud.particles().back()));
  const double median = cloud.particles()[cloud.size() / 2];
  CHECK(std::abs(median - 4.0) < 0.03);
}

TEST_CASE("wasserstein distance") {
  CHECK(wasserstein1(EmpiricalDistribution({2, 5, 9}), EmpiricalDistribution({2, 5, 9})) == 0.0);
  CHECK(wasserstein1(EmpiricalDistribution({2}), EmpiricalDistribution({4})) == 2.0);
  CHECK(wasserstein1(EmpiricalDistribution({2, 4}), EmpiricalDistribution({3, 7})) == 2.0);
  CHECK_THROWS_AS(wasserstein1(EmpiricalDistribution({2, 3}), EmpiricalDistribution({2})),
                  std::invalid_argument);
  CHECK_THROWS_AS(wasserstein1(EmpiricalDistribution({2, kInf}),
                               EmpiricalDistribution({2, 3})),
                  std::invalid_argument);
}

TEST_CASE("sorted pairing is the optimal coupling (brute force)") {
  RngStream rng(5, 0);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng.uniform_below(4);
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = 2.0 + 20.0 * rng.uniform_open01();
    for (auto& v : b) v = 2.0 + 20.0 * rng.uniform_open01();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = kInf;
    do {
      double cost = 0;
      for (std::size_t i = 0; i < n; ++i) cost += std::abs(a[i] - b[perm[i]]);
      best = std::min(best, cost / n);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(wasserstein1(EmpiricalDistribution(a), EmpiricalDistribution(b)) ==
          doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("lambert W lower branch") {
  CHECK(lambert_w_m1(-std::exp(-1.0)) == -1.0);
  CHECK(lambert_w_m1(-2.0 * std::exp(-2.0)) == doctest::Approx(-2.0).epsilon(1e-10));
  CHECK(lambert_w_m1(-0.5 / std::sqrt(std::exp(1.0))) ==
        doctest::Approx(-1.7564312).epsilon(1e-6));
  CHECK_THROWS_AS(lambert_w_m1(-0.4), std::domain_error);
  CHECK_THROWS_AS(lambert_w_m1(0.0), std::domain_error);
  CHECK_THROWS_AS(lambert_w_m1(0.1), std::domain_error);

  // residual property across the domain
  for (int i = 1; i <= 1000; ++i) {
    const double y = -std::exp(-1.0 - 0.03 * i);
    const double w = lambert_w_m1(y);
    CHECK(w <= -1.0);
    CHECK(std::abs(w * std::exp(w) - y) <= 1e-12 * std::abs(y));
  }
}

TEST_CASE("analytic gamma bounds") {
  const GammaBounds bounds = gamma_analytic_bounds();
  CHECK(bounds.lower == doctest::Approx(kFourLogTwo).epsilon(1e-15));
  CHECK(bounds.upper == doctest::Approx(3.512862).epsilon(1e-4 / 3.5));
  CHECK(bounds.residual < 1e-10);
}

TEST_CASE("sandwich replicate structure") {
  RngStream rng(6, 0);
  const SandwichPair d0 = sandwich_replicate(0, rng);
  CHECK(d0.lower == 2.0);
  CHECK(std::isinf(d0.upper));

  // depth 1 uses exactly one uniform: (h(u,4), 2/(1-u))
  RngStream a(9, 3), b(9, 3);
  const double u = b.uniform_open01();
  const SandwichPair d1 = sandwich_replicate(1, a);
  CHECK(d1.lower == doctest::Approx(h_at(u, 4.0)).epsilon(1e-15));
  CHECK(d1.upper == doctest::Approx(2.0 / (1.0 - u)).epsilon(1e-15));

  CHECK_THROWS_AS(sandwich_replicate(31, rng), std::invalid_argument);
  CHECK_THROWS_AS(sandwich_replicate(-1, rng), std::invalid_argument);

  for (int rep = 0; rep < 1000; ++rep) {
    RngStream stream(11, rep);
    const SandwichPair pair = sandwich_replicate(1 + rep % 10, stream);
    CHECK(pair.lower >= 2.0);
    CHECK(pair.lower <= pair.upper);
  }
}

TEST_CASE("estimate_gamma at depth 0 is exactly 2") {
  const GammaEstimate est = estimate_gamma(0, 1000, 1);
  CHECK(est.mean_lower == 2.0);
  CHECK(est.std_error == 0.0);
  CHECK(std::isinf(est.mean_upper));
  CHECK(est.order_violations == 0);
}

TEST_CASE("estimate_gamma is worker-count independent") {
  const GammaEstimate a = estimate_gamma(6, 20000, 42, 1);
  const GammaEstimate b = estimate_gamma(6, 20000, 42, 8);
  CHECK(a.mean_lower == b.mean_lower);
  CHECK(a.mean_upper == b.mean_upper);
  CHECK(a.std_error == b.std_error);
  CHECK(a.ci95_lo == b.ci95_lo);
  CHECK(a.ci95_hi == b.ci95_hi);
  CHECK(a.max_gap == b.max_gap);
  CHECK(a.ci95_lo == a.mean_lower - 2 * a.std_error);
  CHECK(a.ci95_hi == a.mean_upper + 2 * a.std_error);
  CHECK(a.mean_lower >= 2.0);
  CHECK(a.mean_lower <= a.mean_upper);
}

TEST_CASE("fixed point iteration brackets gamma") {
  RngStream rng(13, 0);
  const FixedPointResult fp =
      iterate_to_fixed_point(5000, 1e-3, 60, FixedPointInit::Delta2, rng);
  CHECK(fp.gamma_hat >= 2.7726);
  CHECK(fp.gamma_hat <= 3.5129);
  CHECK((fp.converged || fp.plateaued));
  CHECK(!fp.distance_sequence.empty());
  CHECK(fp.final_state.particles().front() >= 2.0);

  RngStream rng2(13, 1);
  const FixedPointResult from_inf =
      iterate_to_fixed_point(5000, 1e-3, 60, FixedPointInit::DeltaInf, rng2);
  CHECK(std::isfinite(from_inf.gamma_hat));
  CHECK(std::abs(from_inf.gamma_hat - fp.gamma_hat) < 0.2);
}

TEST_CASE("fixed point error paths") {
  RngStream rng(14, 0);
  CHECK_THROWS_AS(
      iterate_to_fixed_point(500, 1e-3, 60, FixedPointInit::Delta2, rng),
      std::invalid_argument);
  try {
    RngStream rng2(14, 1);
    iterate_to_fixed_point(1000, 1e-12, 2, FixedPointInit::Delta2, rng2);
    FAIL("expected NonConvergenceError");
  } catch (const NonConvergenceError& err) {
    CHECK(err.distance_sequence.size() == 2);
  }
}

TEST_CASE("empirical distribution validation") {
  CHECK_THROWS_AS(EmpiricalDistribution({}), std::invalid_argument);
  CHECK_THROWS_AS(EmpiricalDistribution({1.5, 3.0}), std::invalid_argument);
  const EmpiricalDistribution with_inf({2.0, kInf});
  CHECK(with_inf.has_infinite());
  CHECK(std::isinf(with_inf.mean()));
  CHECK(EmpiricalDistribution({2.0, 4.0}).mean() == 3.0);
}
