#include "rtp/variate.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "rtp/error.hpp"
#include "rtp/util.hpp"

namespace rtp {

LocalMap lift_map(const LocalMap& g, std::size_t n, std::size_t cap) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "lift order must be >= 1");
  const std::size_t base = g.n_states();
  const std::size_t k = g.arity();
  const std::size_t lifted_states = checked_power(base, n, cap);
  checked_power(lifted_states, k, cap);
  const LocalMap tuple_codec("tuple", base, n, std::vector<State>(lifted_states, 0));

  std::vector<State> column(k);
  std::vector<std::vector<State>> inputs(k, std::vector<State>(n));
  std::vector<State> outputs(n);
  return LocalMap::from_function(g.name(), lifted_states, k, [&](std::span<const State> y) {
    for (std::size_t i = 0; i < k; ++i) tuple_codec.decode(y[i], inputs[i]);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < k; ++i) column[i] = inputs[i][j];
      outputs[j] = g(column);
    }
    return static_cast<State>(tuple_codec.encode(outputs));
  });
}

MapFamily lift_family(const MapFamily& family, std::size_t n, std::size_t cap) {
  const StateSpace& base = family.space();
  const std::size_t m = checked_power(base.size(), n, cap);
  StateSpace lifted(m);
  if (base.has_order()) {
    const LocalMap codec("tuple", base.size(), n, std::vector<State>(m, 0));
    std::vector<State> a(n), b(n);
    std::vector<std::pair<State, State>> rel;
    for (State x = 0; x < m; ++x) {
      codec.decode(x, a);
      for (State y = 0; y < m; ++y) {
        codec.decode(y, b);
        bool le = true;
        for (std::size_t j = 0; j < n && le; ++j) le = base.leq(a[j], b[j]);
        if (le && x != y) rel.emplace_back(x, y);
      }
    }
    lifted = lifted.with_order(rel);
  }
  std::vector<MapEntry> entries;
  for (const auto& e : family.entries()) entries.push_back({lift_map(e.map, n, cap), e.rate});
  return MapFamily(std::move(lifted), std::move(entries));
}

// ---------------------------------------------------------------------------

PairDist::PairDist(std::array<double, 4> weights) : w_(weights) {
  const Dist normalized(std::vector<double>(w_.begin(), w_.end()));
  std::copy(normalized.weights().begin(), normalized.weights().end(), w_.begin());
}

PairDist PairDist::from_pr(PRPoint pr) {
  if (!in_pr_domain(pr, 1e-12)) throw Error(ErrorKind::InvalidArgument, "(p, r) outside its domain");
  const double off = pr.r - pr.p;
  return PairDist({1.0 - pr.r, off, off, 2.0 * pr.p - pr.r});
}

PairDist PairDist::from_dist(const Dist& d) {
  if (d.size() != 4) throw Error(ErrorKind::InvalidArgument, "pair law needs 4 weights");
  return PairDist({d[0], d[1], d[2], d[3]});
}

PairDist PairDist::product(double p1, double p2) {
  return PairDist({(1 - p1) * (1 - p2), (1 - p1) * p2, p1 * (1 - p2), p1 * p2});
}

bool PairDist::symmetric(double tol) const { return std::abs(w_[1] - w_[2]) <= tol; }

PRPoint PairDist::to_pr() const { return {w_[2] + w_[3], w_[1] + w_[2] + w_[3]}; }

Dist PairDist::to_dist() const { return Dist(std::vector<double>(w_.begin(), w_.end())); }

PairDist apply_T2(const MapFamily& family, const PairDist& mu2) {
  if (family.space().size() != 2) throw Error(ErrorKind::Unsupported, "bivariate operator needs S = {0,1}");
  return PairDist::from_dist(apply_T(lift_family(family, 2), mu2.to_dist()));
}

// ---------------------------------------------------------------------------

double p_drift(double alpha, double p) { return alpha * p * p * (1.0 - p) - p; }

double r_drift(double alpha, double p, double r) {
  const double d = r - p;
  return alpha * (r * r - 2.0 * d * d) * (1.0 - r) - r;
}

bool in_pr_domain(PRPoint x, double tol) {
  return x.p >= -tol && x.p <= 1.0 + tol && x.r >= x.p - tol && x.r <= std::min(1.0, 2.0 * x.p) + tol;
}

void PRTrajectory::write_csv(std::ostream& out) const {
  out << "t,p,r\n";
  for (std::size_t i = 0; i < times.size(); ++i)
    out << format_double(times[i]) << ',' << format_double(points[i].p) << ',' << format_double(points[i].r)
        << "\n";
}

namespace {

constexpr double kDomainSlack = 1e-6;

PRPoint clip_to_domain(PRPoint x) {
  if (!in_pr_domain(x, kDomainSlack))
    throw Error(ErrorKind::StepTooLarge,
                "(p, r) integrator left its domain at (" + format_double(x.p) + ", " + format_double(x.r) + ")");
  x.p = std::clamp(x.p, 0.0, 1.0);
  x.r = std::clamp(x.r, x.p, std::min(1.0, 2.0 * x.p));
  return x;
}

PRPoint pr_rk4_step(double alpha, PRPoint x, double h) {
  auto f = [alpha](PRPoint y) { return PRPoint{p_drift(alpha, y.p), r_drift(alpha, y.p, y.r)}; };
  const PRPoint k1 = f(x);
  const PRPoint k2 = f({x.p + 0.5 * h * k1.p, x.r + 0.5 * h * k1.r});
  const PRPoint k3 = f({x.p + 0.5 * h * k2.p, x.r + 0.5 * h * k2.r});
  const PRPoint k4 = f({x.p + h * k3.p, x.r + h * k3.r});
  return {x.p + h / 6.0 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p),
          x.r + h / 6.0 * (k1.r + 2 * k2.r + 2 * k3.r + k4.r)};
}

double r_rk4_step(double alpha, double p, double r, double h) {
  const double k1 = r_drift(alpha, p, r);
  const double k2 = r_drift(alpha, p, r + 0.5 * h * k1);
  const double k3 = r_drift(alpha, p, r + 0.5 * h * k2);
  const double k4 = r_drift(alpha, p, r + h * k3);
  return r + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
}

}  // namespace

PRTrajectory bivariate_ode(double alpha, PRPoint start, double t_end, double dt) {
  if (!(alpha >= 0.0)) throw Error(ErrorKind::NegativeRate, "alpha must be >= 0");
  if (!(t_end >= 0.0) || !(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "need t_end >= 0 and dt > 0");
  if (!in_pr_domain(start, 1e-12)) throw Error(ErrorKind::InvalidArgument, "start point outside (p, r) domain");
  PRTrajectory traj;
  PRPoint x = clip_to_domain(start);
  traj.times.push_back(0.0);
  traj.points.push_back(x);
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  for (std::size_t i = 1; i <= steps; ++i) {
    const double t_prev = static_cast<double>(i - 1) * dt;
    const double t_next = i == steps ? t_end : static_cast<double>(i) * dt;
    x = clip_to_domain(pr_rk4_step(alpha, x, t_next - t_prev));
    traj.times.push_back(t_next);
    traj.points.push_back(x);
  }
  return traj;
}

double r_mid(double alpha) {
  if (!(alpha >= 4.0)) throw Error(ErrorKind::InvalidArgument, "r_mid exists only for alpha >= 4");
  const double z = coop_fixed_points(alpha)[1];
  // R(r) = a r^3 + b r^2 + c r + d
  const double a = alpha;
  const double b = -alpha * (1.0 + 4.0 * z);
  const double c = alpha * (4.0 * z + 2.0 * z * z) - 1.0;
  // Synthetic division by (r - z): quotient a r^2 + b1 r + c1.
  const double b1 = b + a * z;
  const double c1 = c + b1 * z;
  const double disc = std::max(0.0, b1 * b1 - 4.0 * a * c1);
  // Smaller root without cancellation: b1 < 0 here, so -b1 + sqrt is safe.
  const double q = -0.5 * (b1 - std::sqrt(disc));
  const double root_small = c1 / q;
  const double root_large = q / a;
  return std::min(root_small, root_large);
}

std::vector<PRPoint> bivariate_fixed_points(double alpha) {
  const auto z = coop_fixed_points(alpha);
  std::vector<PRPoint> out{{0.0, 0.0}};
  if (z.size() == 2) {
    out.push_back({z[1], z[1]});
  } else if (z.size() == 3) {
    out.push_back({z[1], z[1]});
    out.push_back({z[1], r_mid(alpha)});
    out.push_back({z[2], z[2]});
  }
  return out;
}

EndogenyReport classify_endogeny(double alpha) {
  EndogenyReport report;
  const auto zs = coop_fixed_points(alpha);
  for (double z : zs) {
    double r = 2.0 * z - z * z;
    // p is frozen at a fixed point of the p-equation, so only r evolves.
    const double rate = std::abs(alpha * (2.0 * z - 3.0 * z * z) - 1.0);
    const double t_end = 200.0 / std::max(rate, 1e-3);
    const double h = std::min(0.01, 0.1 / std::max(rate, 1e-12));
    const double step = std::min(h, 0.05);
    const auto steps = static_cast<std::size_t>(std::ceil(t_end / step));
    for (std::size_t i = 0; i < steps; ++i) {
      r = r_rk4_step(alpha, z, r, step);
      r = std::clamp(r, z, std::min(1.0, 2.0 * z));
    }
    report.points.push_back({z, r, std::abs(r - z) < 1e-6});
  }
  report.low = report.points.front().endogenous;
  if (report.points.size() == 2) {
    report.mid = report.points[1].endogenous;
    report.upp = report.points[1].endogenous;
  } else if (report.points.size() == 3) {
    report.mid = report.points[1].endogenous;
    report.upp = report.points[2].endogenous;
  }
  return report;
}

}  // namespace rtp
