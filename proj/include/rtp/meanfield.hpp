#pragma once

// Exact push-forward operators T_g and T on a finite state space, and the
// mean-field equation d(mu)/dt = |r| (T(mu) - mu).

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "rtp/core_model.hpp"

namespace rtp {

inline constexpr std::size_t kDefaultEnumerationCap = 10'000'000;

/// Law of g(X_1,...,X_k) for X_i i.i.d. with law mu, by full enumeration.
Dist apply_Tg(const LocalMap& g, const Dist& mu, std::size_t cap = kDefaultEnumerationCap);

/// Rate-weighted mixture of apply_Tg over the family.
Dist apply_T(const MapFamily& family, const Dist& mu, std::size_t cap = kDefaultEnumerationCap);

/// Unnormalized variants used inside integrators, where stage vectors may sit
/// slightly off the simplex.
void apply_Tg_raw(const LocalMap& g, std::span<const double> mu, std::span<double> out,
                  std::size_t cap = kDefaultEnumerationCap);
void apply_T_raw(const MapFamily& family, std::span<const double> mu, std::span<double> out,
                 std::size_t cap = kDefaultEnumerationCap);

struct Trajectory {
  std::vector<double> times;
  std::vector<Dist> dists;

  const Dist& back() const { return dists.back(); }
  /// `t,state_0,...,state_{n-1}` at 17 significant digits.
  void write_csv(std::ostream& out) const;
};

/// 1e-3 * min(1, 1/|r|).
double default_dt(const MapFamily& family);

/// Classical RK4 with fixed step; every step is stored. The last step is
/// shortened so that the final time is exactly t_end.
Trajectory solve_ode(const MapFamily& family, const Dist& mu0, double t_end, double dt);

/// Same integration, keeping only the final state.
Dist evolve(const MapFamily& family, const Dist& mu0, double t_end, double dt);

/// Fixed points of dp/dt = alpha p^2 (1-p) - p, in increasing order.
std::vector<double> coop_fixed_points(double alpha);

struct FixedPointResult {
  Dist limit;
  bool converged;
  double time;
};

/// Integrates in unit-time blocks until successive blocks differ by less than
/// `tolerance` in total variation, or until t_max.
FixedPointResult find_fixed_point(const MapFamily& family, const Dist& mu0, double t_max = 1000.0,
                                  double tolerance = 1e-10);

double tv_distance(const Dist& mu, const Dist& nu);

struct ContractionCheck {
  bool holds;
  double initial_distance;
  double final_distance;
  double ratio;  // final / initial, 0 when the initial distance is 0
  double bound;  // e^{Kt}
};

ContractionCheck verify_contraction(const MapFamily& family, const Dist& mu, const Dist& nu, double t);

}  // namespace rtp
