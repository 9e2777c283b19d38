#pragma once

// n-variate lifting g^(n)(x^1,...,x^n) = (g(x^1),...,g(x^n)) and the
// bivariate equation of the cooperative branching model in (p, r) coordinates.

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "rtp/core_model.hpp"
#include "rtp/meanfield.hpp"

namespace rtp {

/// Diagonal action of g on n-tuples. The lifted space has n_S^n states; a
/// tuple (s_1,...,s_n) is encoded with s_1 as the most significant digit.
LocalMap lift_map(const LocalMap& g, std::size_t n, std::size_t cap = kDefaultEnumerationCap);

/// Every map lifted; the lifted space carries the product order when the base
/// space is ordered.
MapFamily lift_family(const MapFamily& family, std::size_t n, std::size_t cap = kDefaultEnumerationCap);

/// (p, r) with p = P[first = 1], r = P[(first, second) != (0,0)].
struct PRPoint {
  double p;
  double r;
};

/// Law on {0,1}^2 ordered (0,0), (0,1), (1,0), (1,1).
class PairDist {
 public:
  explicit PairDist(std::array<double, 4> weights);

  static PairDist from_pr(PRPoint pr);
  static PairDist from_dist(const Dist& d);
  static PairDist product(double p1, double p2);

  double operator[](std::size_t i) const { return w_[i]; }
  const std::array<double, 4>& weights() const noexcept { return w_; }
  bool symmetric(double tol = 1e-12) const;
  PRPoint to_pr() const;
  Dist to_dist() const;

 private:
  std::array<double, 4> w_;
};

/// T^(2) by exact enumeration of the lifted maps.
PairDist apply_T2(const MapFamily& family, const PairDist& mu2);

/// Drift functions of the coop (p, r) system.
double p_drift(double alpha, double p);
double r_drift(double alpha, double p, double r);

bool in_pr_domain(PRPoint x, double tol = 1e-12);

struct PRTrajectory {
  std::vector<double> times;
  std::vector<PRPoint> points;

  const PRPoint& back() const { return points.back(); }
  /// `t,p,r` at 17 significant digits.
  void write_csv(std::ostream& out) const;
};

/// RK4 on the (p, r) system, clipped into {0<=p<=1, p<=r<=min(1,2p)}.
PRTrajectory bivariate_ode(double alpha, PRPoint start, double t_end, double dt);

/// Middle root of R_{alpha, z_mid}(r) = 0 for alpha >= 4, found by dividing
/// out the known root r = z_mid and taking the smaller quadratic root.
double r_mid(double alpha);

/// Fixed points of the (p, r) system inside its domain, sorted by (p, r).
std::vector<PRPoint> bivariate_fixed_points(double alpha);

struct EndogenyPoint {
  double z;
  double r_limit;
  bool endogenous;
};

struct EndogenyReport {
  std::vector<EndogenyPoint> points;
  bool low = false;
  std::optional<bool> mid;
  std::optional<bool> upp;
};

/// For each scalar fixed point z, integrate the r-equation with p held at z
/// from the product coupling r = 2z - z^2; endogenous iff the limit is z.
EndogenyReport classify_endogeny(double alpha);

}  // namespace rtp
