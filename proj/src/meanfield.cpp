#include "rtp/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "rtp/error.hpp"
#include "rtp/util.hpp"

namespace rtp {

void apply_Tg_raw(const LocalMap& g, std::span<const double> mu, std::span<double> out, std::size_t cap) {
  const std::size_t n = mu.size();
  const std::size_t k = g.arity();
  const std::size_t count = checked_power(n, k, cap);
  std::fill(out.begin(), out.end(), 0.0);
  if (k == 0) {
    out[g.at(0)] = 1.0;
    return;
  }
  // prefix[i] = product of mu over the first i digits of the current input.
  std::vector<State> digits(k, 0);
  std::vector<double> prefix(k + 1, 1.0);
  for (std::size_t i = 0; i < k; ++i) prefix[i + 1] = prefix[i] * mu[0];
  for (std::size_t code = 0;;) {
    out[g.at(code)] += prefix[k];
    if (++code == count) break;
    std::size_t i = k;
    while (i-- > 0) {
      if (++digits[i] < n) break;
      digits[i] = 0;
    }
    for (std::size_t j = i; j < k; ++j) prefix[j + 1] = prefix[j] * mu[digits[j]];
  }
}

void apply_T_raw(const MapFamily& family, std::span<const double> mu, std::span<double> out, std::size_t cap) {
  std::vector<double> part(mu.size());
  std::fill(out.begin(), out.end(), 0.0);
  const double total = family.total_rate();
  for (const auto& e : family.entries()) {
    apply_Tg_raw(e.map, mu, part, cap);
    const double w = e.rate / total;
    for (std::size_t s = 0; s < out.size(); ++s) out[s] += w * part[s];
  }
}

Dist apply_Tg(const LocalMap& g, const Dist& mu, std::size_t cap) {
  if (g.n_states() != mu.size()) throw Error(ErrorKind::InvalidArgument, "map and distribution spaces differ");
  std::vector<double> out(mu.size());
  apply_Tg_raw(g, mu.weights(), out, cap);
  return Dist(std::move(out));
}

Dist apply_T(const MapFamily& family, const Dist& mu, std::size_t cap) {
  if (family.space().size() != mu.size())
    throw Error(ErrorKind::InvalidArgument, "family and distribution spaces differ");
  std::vector<double> out(mu.size());
  apply_T_raw(family, mu.weights(), out, cap);
  return Dist(std::move(out));
}

void Trajectory::write_csv(std::ostream& out) const {
  const std::size_t n = dists.empty() ? 0 : dists.front().size();
  out << "t";
  for (std::size_t s = 0; s < n; ++s) out << ",state_" << s;
  out << "\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    out << format_double(times[i]);
    for (double w : dists[i].weights()) out << ',' << format_double(w);
    out << "\n";
  }
}

double default_dt(const MapFamily& family) { return 1e-3 * std::min(1.0, 1.0 / family.total_rate()); }

namespace {

constexpr double kSimplexSlack = 1e-6;

class Rk4 {
 public:
  explicit Rk4(const MapFamily& family)
      : family_(family), n_(family.space().size()), k1_(n_), k2_(n_), k3_(n_), k4_(n_), tmp_(n_), t_(n_) {}

  void step(std::vector<double>& x, double h) {
    drift(x, k1_);
    stage(x, k1_, 0.5 * h);
    drift(tmp_, k2_);
    stage(x, k2_, 0.5 * h);
    drift(tmp_, k3_);
    stage(x, k3_, h);
    drift(tmp_, k4_);
    double total = 0.0;
    for (std::size_t s = 0; s < n_; ++s) {
      x[s] += h / 6.0 * (k1_[s] + 2.0 * k2_[s] + 2.0 * k3_[s] + k4_[s]);
      if (x[s] < -kSimplexSlack) fail(x[s]);
      if (x[s] < 0.0) x[s] = 0.0;
      total += x[s];
    }
    for (double& v : x) v /= total;
  }

 private:
  void drift(const std::vector<double>& x, std::vector<double>& out) {
    apply_T_raw(family_, x, t_);
    const double r = family_.total_rate();
    for (std::size_t s = 0; s < n_; ++s) out[s] = r * (t_[s] - x[s]);
  }

  void stage(const std::vector<double>& x, const std::vector<double>& k, double h) {
    for (std::size_t s = 0; s < n_; ++s) {
      tmp_[s] = x[s] + h * k[s];
      if (tmp_[s] < -kSimplexSlack) fail(tmp_[s]);
    }
  }

  [[noreturn]] static void fail(double value) {
    throw Error(ErrorKind::StepTooLarge, "integrator left the simplex (entry " + format_double(value) + ")");
  }

  const MapFamily& family_;
  std::size_t n_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_, t_;
};

void check_step(double t_end, double dt) {
  if (!(t_end >= 0.0)) throw Error(ErrorKind::InvalidArgument, "t_end must be >= 0");
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be > 0");
}

template <typename OnStep>
void integrate(const MapFamily& family, std::vector<double>& x, double t_end, double dt, OnStep&& on_step) {
  Rk4 rk(family);
  const auto steps = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
  for (std::size_t i = 1; i <= steps; ++i) {
    const double t_prev = static_cast<double>(i - 1) * dt;
    const double t_next = i == steps ? t_end : static_cast<double>(i) * dt;
    rk.step(x, t_next - t_prev);
    on_step(t_next, x);
  }
}

}  // namespace

Trajectory solve_ode(const MapFamily& family, const Dist& mu0, double t_end, double dt) {
  check_step(t_end, dt);
  if (mu0.size() != family.space().size())
    throw Error(ErrorKind::InvalidArgument, "initial law is over a different state space");
  Trajectory traj;
  traj.times.push_back(0.0);
  traj.dists.push_back(mu0);
  std::vector<double> x(mu0.weights().begin(), mu0.weights().end());
  integrate(family, x, t_end, dt, [&](double t, const std::vector<double>& state) {
    traj.times.push_back(t);
    traj.dists.emplace_back(state);
  });
  return traj;
}

Dist evolve(const MapFamily& family, const Dist& mu0, double t_end, double dt) {
  check_step(t_end, dt);
  if (mu0.size() != family.space().size())
    throw Error(ErrorKind::InvalidArgument, "initial law is over a different state space");
  std::vector<double> x(mu0.weights().begin(), mu0.weights().end());
  integrate(family, x, t_end, dt, [](double, const std::vector<double>&) {});
  return Dist(std::move(x));
}

std::vector<double> coop_fixed_points(double alpha) {
  if (!(alpha >= 0.0)) throw Error(ErrorKind::NegativeRate, "alpha must be >= 0");
  if (alpha < 4.0) return {0.0};
  const double root = std::sqrt(0.25 - 1.0 / alpha);
  if (root == 0.0) return {0.0, 0.5};
  return {0.0, 0.5 - root, 0.5 + root};
}

FixedPointResult find_fixed_point(const MapFamily& family, const Dist& mu0, double t_max, double tolerance) {
  const double dt = default_dt(family);
  Dist current = mu0;
  double t = 0.0;
  while (t < t_max) {
    Dist next = evolve(family, current, 1.0, dt);
    t += 1.0;
    const double change = tv_distance(current, next);
    current = std::move(next);
    if (change < tolerance) return {current, true, t};
  }
  return {current, false, t};
}

double tv_distance(const Dist& mu, const Dist& nu) {
  if (mu.size() != nu.size()) throw Error(ErrorKind::InvalidArgument, "distributions over different spaces");
  double sum = 0.0;
  for (std::size_t s = 0; s < mu.size(); ++s) sum += std::abs(mu[s] - nu[s]);
  return 0.5 * sum;
}

ContractionCheck verify_contraction(const MapFamily& family, const Dist& mu, const Dist& nu, double t) {
  const double dt = default_dt(family);
  const Dist mu_t = evolve(family, mu, t, dt);
  const Dist nu_t = evolve(family, nu, t, dt);
  ContractionCheck c{};
  c.initial_distance = tv_distance(mu, nu);
  c.final_distance = tv_distance(mu_t, nu_t);
  c.bound = std::exp(constants(family).K * t);
  c.ratio = c.initial_distance > 0.0 ? c.final_distance / c.initial_distance : 0.0;
  c.holds = c.final_distance <= c.bound * c.initial_distance + 1e-12;
  return c;
}

}  // namespace rtp
