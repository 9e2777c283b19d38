#pragma once

// Higher-level equation on P({0,1}) = [0,1], solved by population dynamics:
// a pool of M values eta in [0,1] is pushed through the multilinear
// extensions of the family's maps.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rtp/core_model.hpp"
#include "rtp/rng.hpp"

namespace rtp {

/// Multilinear extension of g: {0,1}^k -> {0,1},
///   g_hat(eta) = sum_{x: g(x)=1} prod_i eta_i^{x_i} (1-eta_i)^{1-x_i}.
class HigherMap {
 public:
  explicit HigherMap(const LocalMap& g);

  const std::string& name() const noexcept { return name_; }
  std::size_t arity() const noexcept { return arity_; }
  /// Monomial coefficients indexed by subset mask; bit (k-1-i) stands for
  /// coordinate i, so that masks line up with LocalMap input codes.
  std::span<const double> coefficients() const noexcept { return coeffs_; }

  /// Value clamped to [0,1]. Exact for {0,1} inputs; a coordinate at exactly
  /// 0 contributes nothing beyond the terms that avoid it.
  double operator()(std::span<const double> eta) const;

  /// g_hat(eta) and 1 - g_hat(eta) from the inputs and their complements,
  /// each as a sum of nonnegative products, so neither loses precision near 1.
  std::pair<double, double> evaluate_pair(std::span<const double> eta, std::span<const double> comp) const;

 private:
  std::string name_;
  std::size_t arity_;
  std::vector<double> coeffs_;
  std::vector<std::uint32_t> support_;  // masks with nonzero coefficient
  std::vector<char> table_;             // g by input code
};

/// Throws Unsupported unless g is over {0,1}.
HigherMap hat_map(const LocalMap& g);

struct SamplePool {
  std::vector<double> values;
  std::uint64_t generation = 0;
  Seed seed = kDefaultSeed;
  /// 1 - values, carried separately because doubles near 1 saturate: a
  /// value 1 - 1e-20 is stored as 1.0 but its complement is exact. Empty
  /// means 1 - values.
  std::vector<double> complements;
};

/// One application of the higher-level operator to the empirical measure:
/// each output picks an entry with probability rate/|r| and applies its hat
/// map to k values drawn with replacement from the pre-sweep pool. Output i
/// uses the stream keyed by (seed, generation, i).
SamplePool pool_sweep(const SamplePool& pool, const MapFamily& family, unsigned threads = 1);

/// Rescales eta -> eta^gamma so that the pool mean equals `target`. Exact 0
/// and 1 values are untouched. Returns gamma (1 when no change is possible).
double pin_mean(SamplePool& pool, double target);

struct HLRun {
  SamplePool pool;
  bool converged = false;
  std::size_t sweeps = 0;
  /// Exponent applied by the mean pinning after the last sweep.
  double last_gamma = 1.0;
};

/// Minimal solution on the middle branch for coop(alpha), alpha > 4: starts
/// from the constant pool z_mid and iterates pool_sweep. The middle scalar
/// fixed point is repelling for the mean, so the pool mean is pinned to z_mid
/// after every sweep. Converged when mean, m2 and atom0 each stay within
/// 2/sqrt(M) of their average over the last 10 sweeps.
HLRun solve_hl_rde(double alpha, std::size_t pool_size, std::size_t sweeps, Seed seed, unsigned threads = 1);

inline constexpr std::size_t kCdfGridPoints = 1001;

struct PoolStats {
  double mean;
  double m2;
  double atom0;
  double atom1;
  double mean_se;
  double m2_se;
  double atom0_se;
  double atom1_se;
  /// F(j/1000) = fraction of values <= j/1000.
  std::vector<double> cdf;
};

PoolStats pool_stats(const SamplePool& pool);

/// `eta,F` on the 1001-point grid.
void write_cdf_csv(std::ostream& out, const PoolStats& stats);

/// Moment measure rho^(n)[x] = E[prod_i eta^{x_i}(1-eta)^{1-x_i}] over
/// {0,1}^n, first coordinate most significant. Needs 1 <= n <= 4.
Dist moment_measure(const SamplePool& pool, std::size_t n);

struct ConvexOrderResult {
  bool leq;
  /// Largest E_A[phi] - E_B[phi] over the test functions.
  double max_violation;
  /// Standard error of that difference.
  double violation_se;
};

/// Necessary-condition diagnostic for A <=_cv B: tests E_A[phi] <= E_B[phi]
/// + 3 se for phi in {eta, -eta} and hinges max(eta-c,0), max(c-eta,0) at
/// n_hinges evenly spaced c in [0,1].
ConvexOrderResult convex_order_compare(const SamplePool& a, const SamplePool& b, std::size_t n_hinges = 101);

}  // namespace rtp
