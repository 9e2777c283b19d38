#include "rtp/higher_level.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <ostream>
#include <tuple>

#include "rtp/error.hpp"
#include "rtp/meanfield.hpp"
#include "rtp/util.hpp"

namespace rtp {

HigherMap::HigherMap(const LocalMap& g) : name_(g.name()), arity_(g.arity()) {
  if (g.n_states() != 2) throw Error(ErrorKind::Unsupported, "hat maps need S = {0,1}");
  if (arity_ > 20) throw Error(ErrorKind::ArityOverflow, "hat map arity too large");
  const std::size_t count = std::size_t{1} << arity_;
  // Moebius inversion over subsets; a mask is also the LocalMap input code.
  coeffs_.resize(count);
  table_.resize(count);
  for (std::size_t m = 0; m < count; ++m) table_[m] = static_cast<char>(g.at(m));
  for (std::size_t m = 0; m < count; ++m) coeffs_[m] = static_cast<double>(g.at(m));
  for (std::size_t bit = 0; bit < arity_; ++bit)
    for (std::size_t m = 0; m < count; ++m)
      if (m & (std::size_t{1} << bit)) coeffs_[m] -= coeffs_[m ^ (std::size_t{1} << bit)];
  for (std::size_t m = 0; m < count; ++m)
    if (coeffs_[m] != 0.0) support_.push_back(static_cast<std::uint32_t>(m));
}

double HigherMap::operator()(std::span<const double> eta) const {
  double sum = 0.0;
  for (std::uint32_t m : support_) {
    double term = coeffs_[m];
    for (std::size_t i = 0; i < arity_ && term != 0.0; ++i)
      if (m & (std::uint32_t{1} << (arity_ - 1 - i))) term *= eta[i];
    sum += term;
  }
  return std::clamp(sum, 0.0, 1.0);
}

std::pair<double, double> HigherMap::evaluate_pair(std::span<const double> eta, std::span<const double> comp) const {
  double one = 0.0, zero = 0.0;
  for (std::size_t code = 0; code < table_.size(); ++code) {
    double w = 1.0;
    for (std::size_t i = 0; i < arity_ && w != 0.0; ++i)
      w *= (code >> (arity_ - 1 - i)) & 1u ? eta[i] : comp[i];
    (table_[code] ? one : zero) += w;
  }
  // eta_i + comp_i = 1 only up to rounding; renormalizing stops the
  // discrepancy from compounding over sweeps.
  const double total = one + zero;
  return {one / total, zero / total};
}

HigherMap hat_map(const LocalMap& g) { return HigherMap(g); }

namespace {

constexpr std::uint64_t kPoolTag = 0x9001ull;

void check_pool(const SamplePool& pool) {
  if (pool.values.empty()) throw Error(ErrorKind::InvalidArgument, "pool is empty");
  if (!pool.complements.empty() && pool.complements.size() != pool.values.size())
    throw Error(ErrorKind::InvalidArgument, "pool complements do not match its values");
}

std::vector<double> complements_of(const SamplePool& pool) {
  if (!pool.complements.empty()) return pool.complements;
  std::vector<double> c(pool.values.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 1.0 - pool.values[i];
  return c;
}

}  // namespace

SamplePool pool_sweep(const SamplePool& pool, const MapFamily& family, unsigned threads) {
  check_pool(pool);
  std::vector<HigherMap> hats;
  for (const auto& e : family.entries()) hats.push_back(hat_map(e.map));
  const std::size_t m = pool.values.size();
  const std::vector<double> comp = complements_of(pool);
  SamplePool next{std::vector<double>(m), pool.generation + 1, pool.seed, std::vector<double>(m)};
  const std::uint64_t gen_key = combine(kPoolTag, pool.generation);
  const std::size_t chunk = 4096;
  const std::size_t chunks = (m + chunk - 1) / chunk;
  parallel_for(chunks, threads, [&](std::size_t c) {
    std::vector<double> args(family.max_arity()), args_comp(family.max_arity());
    const std::size_t end = std::min(m, (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) {
      CounterStream rng(pool.seed, combine(gen_key, i));
      const HigherMap& h = hats[family.choose(rng.uniform())];
      for (std::size_t j = 0; j < h.arity(); ++j) {
        const std::size_t pick = rng.below(m);
        args[j] = pool.values[pick];
        args_comp[j] = comp[pick];
      }
      std::tie(next.values[i], next.complements[i]) = h.evaluate_pair(
          std::span<const double>(args.data(), h.arity()), std::span<const double>(args_comp.data(), h.arity()));
    }
  });
  return next;
}

double pin_mean(SamplePool& pool, double target) {
  check_pool(pool);
  const double m = static_cast<double>(pool.values.size());
  if (pool.complements.empty()) pool.complements = complements_of(pool);
  // log(eta) from whichever of eta, 1 - eta is the accurate one
  auto log_eta = [&](std::size_t i) {
    return pool.values[i] < 0.5 ? std::log(pool.values[i]) : std::log1p(-pool.complements[i]);
  };
  std::vector<double> logs;
  double fixed = 0.0;  // contribution of the exact ones
  for (std::size_t i = 0; i < pool.values.size(); ++i) {
    if (pool.complements[i] <= 0.0) fixed += 1.0;
    else if (pool.values[i] > 0.0) logs.push_back(log_eta(i));
  }
  fixed /= m;
  if (logs.empty()) return 1.0;
  // mean(gamma) is strictly decreasing and convex in gamma; Newton from 1.
  double gamma = 1.0;
  for (int iter = 0; iter < 50; ++iter) {
    double f = 0.0, df = 0.0;
    for (double l : logs) {
      const double e = std::exp(gamma * l);
      f += e;
      df += e * l;
    }
    f = f / m + fixed - target;
    df /= m;
    if (df >= 0.0) break;
    const double step = f / df;
    double next = gamma - step;
    if (next <= 0.0) next = 0.5 * gamma;
    const bool done = std::abs(next - gamma) < 1e-14 * gamma;
    gamma = next;
    if (done) break;
  }
  for (std::size_t i = 0; i < pool.values.size(); ++i) {
    const double c = pool.complements[i];
    if (pool.values[i] <= 0.0 || c <= 0.0) continue;
    const double l = gamma * log_eta(i);
    pool.values[i] = std::exp(l);
    pool.complements[i] = -std::expm1(l);
  }
  return gamma;
}

HLRun solve_hl_rde(double alpha, std::size_t pool_size, std::size_t sweeps, Seed seed, unsigned threads) {
  const auto zs = coop_fixed_points(alpha);
  if (zs.size() < 3) throw Error(ErrorKind::InvalidArgument, "middle branch needs alpha > 4");
  if (pool_size < 2) throw Error(ErrorKind::InvalidArgument, "pool needs at least two values");
  const double z = zs[1];
  const MapFamily family = presets::coop(alpha);
  HLRun run;
  run.pool = SamplePool{std::vector<double>(pool_size, z), 0, seed, std::vector<double>(pool_size, 1.0 - z)};

  constexpr std::size_t kWindow = 10;
  std::vector<std::array<double, 3>> history;
  for (std::size_t s = 0; s < sweeps; ++s) {
    run.pool = pool_sweep(run.pool, family, threads);
    run.last_gamma = pin_mean(run.pool, z);
    const PoolStats st = pool_stats(run.pool);
    history.push_back({st.mean, st.m2, st.atom0});
  }
  run.sweeps = sweeps;
  if (history.size() >= kWindow) {
    const double tol = 2.0 / std::sqrt(static_cast<double>(pool_size));
    run.converged = true;
    for (std::size_t q = 0; q < 3; ++q) {
      double avg = 0.0;
      for (std::size_t i = history.size() - kWindow; i < history.size(); ++i) avg += history[i][q];
      avg /= kWindow;
      for (std::size_t i = history.size() - kWindow; i < history.size(); ++i)
        if (std::abs(history[i][q] - avg) > tol) run.converged = false;
    }
  }
  return run;
}

PoolStats pool_stats(const SamplePool& pool) {
  check_pool(pool);
  const std::size_t m = pool.values.size();
  const double n = static_cast<double>(m);
  double s1 = 0.0, s2 = 0.0, s4 = 0.0, zeros = 0.0, ones = 0.0;
  const bool has_comp = !pool.complements.empty();
  for (std::size_t i = 0; i < m; ++i) {
    const double v = pool.values[i];
    s1 += v;
    s2 += v * v;
    s4 += v * v * v * v;
    zeros += v == 0.0 ? 1.0 : 0.0;
    ones += (has_comp ? pool.complements[i] == 0.0 : v == 1.0) ? 1.0 : 0.0;
  }
  PoolStats st{};
  st.mean = s1 / n;
  st.m2 = s2 / n;
  st.atom0 = zeros / n;
  st.atom1 = ones / n;
  st.mean_se = std::sqrt(std::max(0.0, st.m2 - st.mean * st.mean) / n);
  st.m2_se = std::sqrt(std::max(0.0, s4 / n - st.m2 * st.m2) / n);
  st.atom0_se = std::sqrt(st.atom0 * (1.0 - st.atom0) / n);
  st.atom1_se = std::sqrt(st.atom1 * (1.0 - st.atom1) / n);

  std::vector<double> sorted = pool.values;
  std::sort(sorted.begin(), sorted.end());
  st.cdf.resize(kCdfGridPoints);
  for (std::size_t j = 0; j < kCdfGridPoints; ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(kCdfGridPoints - 1);
    st.cdf[j] = static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) / n;
  }
  return st;
}

void write_cdf_csv(std::ostream& out, const PoolStats& stats) {
  out << "eta,F\n";
  for (std::size_t j = 0; j < stats.cdf.size(); ++j) {
    const double x = static_cast<double>(j) / static_cast<double>(stats.cdf.size() - 1);
    out << format_double(x) << ',' << format_double(stats.cdf[j]) << "\n";
  }
}

Dist moment_measure(const SamplePool& pool, std::size_t n) {
  check_pool(pool);
  if (n < 1 || n > 4) throw Error(ErrorKind::InvalidArgument, "moment measures need 1 <= n <= 4");
  const std::size_t count = std::size_t{1} << n;
  std::vector<double> w(count, 0.0);
  for (double v : pool.values) {
    for (std::size_t code = 0; code < count; ++code) {
      const int ones = std::popcount(code);
      w[code] += std::pow(v, ones) * std::pow(1.0 - v, static_cast<int>(n) - ones);
    }
  }
  for (double& x : w) x /= static_cast<double>(pool.values.size());
  return Dist(std::move(w));
}

ConvexOrderResult convex_order_compare(const SamplePool& a, const SamplePool& b, std::size_t n_hinges) {
  check_pool(a);
  check_pool(b);
  if (n_hinges < 2) throw Error(ErrorKind::InvalidArgument, "need at least two hinge points");
  auto moments = [](const SamplePool& p, auto&& phi) {
    double s = 0.0, s2 = 0.0;
    for (double v : p.values) {
      const double f = phi(v);
      s += f;
      s2 += f * f;
    }
    const double n = static_cast<double>(p.values.size());
    const double mean = s / n;
    return std::pair{mean, std::max(0.0, s2 / n - mean * mean) / n};
  };
  ConvexOrderResult res{true, -1.0, 0.0};
  auto test = [&](auto&& phi) {
    const auto [ma, va] = moments(a, phi);
    const auto [mb, vb] = moments(b, phi);
    const double diff = ma - mb;
    const double se = std::sqrt(va + vb);
    if (diff > 3.0 * se + 1e-15) res.leq = false;
    if (diff > res.max_violation) {
      res.max_violation = diff;
      res.violation_se = se;
    }
  };
  test([](double v) { return v; });
  test([](double v) { return -v; });
  for (std::size_t j = 0; j < n_hinges; ++j) {
    const double c = static_cast<double>(j) / static_cast<double>(n_hinges - 1);
    test([c](double v) { return std::max(v - c, 0.0); });
    test([c](double v) { return std::max(c - v, 0.0); });
  }
  return res;
}

}  // namespace rtp
