#include "rtp/particle_sim.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>

#include "rtp/error.hpp"
#include "rtp/meanfield.hpp"
#include "rtp/util.hpp"

namespace rtp {

namespace {
constexpr std::uint64_t kInitTag = 0x1217ull;
constexpr std::uint64_t kEventTag = 0xE7E7ull;
}  // namespace

SystemState iid_state(std::size_t n_sites, const Dist& mu, Seed seed, std::uint64_t stream) {
  CounterStream rng(seed, combine(combine(kInitTag, stream), n_sites));
  SystemState st;
  st.sites.resize(n_sites);
  for (auto& s : st.sites) {
    const double u = rng.uniform();
    double acc = 0.0;
    State v = static_cast<State>(mu.size() - 1);
    for (std::size_t k = 0; k + 1 < mu.size(); ++k) {
      acc += mu[k];
      if (u < acc) {
        v = static_cast<State>(k);
        break;
      }
    }
    s = v;
  }
  return st;
}

Dist empirical(const SystemState& state, std::size_t n_states) {
  if (state.sites.empty()) throw Error(ErrorKind::InvalidArgument, "empty system");
  std::vector<double> w(n_states, 0.0);
  for (State s : state.sites) w.at(s) += 1.0;
  return Dist(std::move(w));
}

namespace {

// Site-averaged law of the replica tuple at the current time.
Dist joint_law(const std::vector<std::vector<State>>& reps, std::size_t n_states) {
  const std::size_t n = reps.size();
  const std::size_t codes = checked_power(n_states, n, std::size_t{1} << 20);
  std::vector<double> w(codes, 0.0);
  for (std::size_t i = 0; i < reps.front().size(); ++i) {
    std::size_t code = 0;
    for (const auto& r : reps) code = code * n_states + r[i];
    w[code] += 1.0;
  }
  return Dist(std::move(w));
}

struct EngineResult {
  std::vector<double> times;
  std::vector<Dist> laws;
  std::vector<std::uint64_t> events_at;
  std::vector<std::uint64_t> touched_at;
  std::uint64_t events = 0;
  std::uint64_t noops = 0;
  bool order_preserved = true;
};

EngineResult simulate(const StructuredFamily& family, std::vector<std::vector<State>>& reps, double start,
                      double t_rescaled, Seed seed, std::span<const double> checkpoints,
                      const std::vector<std::size_t>& relabel) {
  if (!(t_rescaled >= 0.0)) throw Error(ErrorKind::InvalidArgument, "t_rescaled must be >= 0");
  const std::size_t n = reps.front().size();
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "system needs at least one site");
  for (const auto& r : reps)
    if (r.size() != n) throw Error(ErrorKind::InvalidArgument, "coupled replicas differ in size");
  const std::size_t n_states = family.space().size();
  for (const auto& r : reps)
    for (State s : r)
      if (s >= n_states) throw Error(ErrorKind::InvalidArgument, "site state outside the state space");
  if (!relabel.empty()) {
    std::vector<char> seen(n, 0);
    if (relabel.size() != n) throw Error(ErrorKind::InvalidArgument, "site relabeling must be a permutation of [N]");
    for (std::size_t j : relabel) {
      if (j >= n || seen[j]) throw Error(ErrorKind::InvalidArgument, "site relabeling must be a permutation of [N]");
      seen[j] = 1;
    }
  }
  std::vector<double> cps(checkpoints.begin(), checkpoints.end());
  std::sort(cps.begin(), cps.end());
  for (double c : cps)
    if (c < 0.0 || c > t_rescaled) throw Error(ErrorKind::InvalidArgument, "checkpoint outside [0, t]");

  // Pairs (i, j) that start ordered with i <= j sitewise.
  const StateSpace& space = family.space();
  std::vector<std::pair<std::size_t, std::size_t>> ordered;
  if (space.has_order()) {
    for (std::size_t i = 0; i < reps.size(); ++i)
      for (std::size_t j = 0; j < reps.size(); ++j) {
        if (i == j) continue;
        bool le = true;
        for (std::size_t s = 0; s < n && le; ++s) le = space.leq(reps[i][s], reps[j][s]);
        if (le) ordered.emplace_back(i, j);
      }
  }

  // Identity components cannot change anything and are skipped.
  std::vector<std::vector<std::size_t>> active(family.size());
  for (std::size_t e = 0; e < family.size(); ++e) {
    for (std::size_t c = 0; c < family[e].lambda(); ++c) {
      const Component& comp = family[e].components[c];
      const bool identity = comp.depends_on.size() == 1 && comp.depends_on[0] == c &&
                            comp.map.restrict_to(comp.depends_on).is_identity();
      if (!identity) active[e].push_back(c);
    }
  }

  EngineResult res;
  CounterStream rng(seed, combine(kEventTag, n));
  const double rate = family.total_rate();
  const double t_end = start + static_cast<double>(n) * t_rescaled;
  std::size_t next_cp = 0;
  std::uint64_t touched = 0;
  auto record = [&] {
    res.times.push_back(cps[next_cp]);
    res.laws.push_back(joint_law(reps, n_states));
    res.events_at.push_back(res.events);
    res.touched_at.push_back(touched);
    ++next_cp;
  };

  std::vector<std::size_t> sites(family.max_lambda());
  std::vector<State> in(family.max_lambda()), out(family.max_lambda());
  double time = start;
  for (;;) {
    const double next = time + rng.exponential(rate);
    while (next_cp < cps.size() && start + static_cast<double>(n) * cps[next_cp] < next) record();
    if (next > t_end) break;
    time = next;
    ++res.events;
    const std::size_t e = family.choose(rng.uniform());
    const StructuredEntry& entry = family[e];
    const std::size_t lambda = entry.lambda();
    if (lambda > n) {
      ++res.noops;
      continue;
    }
    for (std::size_t a = 0; a < lambda; ++a) {
      for (;;) {
        const auto draw = static_cast<std::size_t>(rng.below(n));
        bool fresh = true;
        for (std::size_t b = 0; b < a && fresh; ++b) fresh = sites[b] != draw;
        if (fresh) {
          sites[a] = draw;
          break;
        }
      }
    }
    if (!relabel.empty())
      for (std::size_t a = 0; a < lambda; ++a) sites[a] = relabel[sites[a]];
    touched += lambda;
    for (auto& r : reps) {
      for (std::size_t a = 0; a < lambda; ++a) in[a] = r[sites[a]];
      for (std::size_t c : active[e])
        out[c] = entry.components[c].map(std::span<const State>(in.data(), lambda));
      for (std::size_t c : active[e]) r[sites[c]] = out[c];
    }
    for (const auto& [i, j] : ordered)
      for (std::size_t c : active[e])
        if (!space.leq(reps[i][sites[c]], reps[j][sites[c]])) res.order_preserved = false;
  }
  while (next_cp < cps.size()) record();
  return res;
}

}  // namespace

void RunResult::write_csv(std::ostream& out) const {
  const std::size_t n = laws.empty() ? 0 : laws.front().size();
  out << "t_rescaled";
  if (n == 2) out << ",p";
  else
    for (std::size_t s = 0; s < n; ++s) out << ",state_" << s;
  out << "\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    out << format_double(times[i]);
    if (n == 2) out << ',' << format_double(laws[i][1]);
    else
      for (double w : laws[i].weights()) out << ',' << format_double(w);
    out << "\n";
  }
}

RunResult run(const StructuredFamily& family, SystemState init, double t_rescaled, Seed seed,
              std::span<const double> checkpoints, const RunOptions& options) {
  std::vector<std::vector<State>> reps{std::move(init.sites)};
  EngineResult e = simulate(family, reps, init.model_time, t_rescaled, seed, checkpoints, options.site_relabel);
  RunResult r;
  r.times = std::move(e.times);
  r.laws = std::move(e.laws);
  r.events_at = std::move(e.events_at);
  r.touched_at = std::move(e.touched_at);
  r.events = e.events;
  r.noop_events = e.noops;
  r.final_state.sites = std::move(reps.front());
  r.final_state.model_time = init.model_time + static_cast<double>(r.final_state.sites.size()) * t_rescaled;
  return r;
}

void CoupledResult::write_csv(std::ostream& out) const {
  if (!joint.empty() && joint.front().size() != 4)
    throw Error(ErrorKind::Unsupported, "(p, r) output needs two binary replicas");
  out << "t_rescaled,p,r\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    const Dist& d = joint[i];
    out << format_double(times[i]) << ',' << format_double(d[2] + d[3]) << ','
        << format_double(d[1] + d[2] + d[3]) << "\n";
  }
}

CoupledResult run_coupled(const StructuredFamily& family, std::vector<SystemState> inits, double t_rescaled,
                          Seed seed, std::span<const double> checkpoints) {
  if (inits.empty()) throw Error(ErrorKind::InvalidArgument, "need at least one replica");
  const double start = inits.front().model_time;
  std::vector<std::vector<State>> reps;
  for (auto& s : inits) reps.push_back(std::move(s.sites));
  EngineResult e = simulate(family, reps, start, t_rescaled, seed, checkpoints, {});
  CoupledResult r;
  r.times = std::move(e.times);
  r.joint = std::move(e.laws);
  r.events_at = std::move(e.events_at);
  r.events = e.events;
  r.order_preserved = e.order_preserved;
  for (auto& rep : reps) {
    const double end = start + static_cast<double>(rep.size()) * t_rescaled;
    r.final_states.push_back({std::move(rep), end});
  }
  return r;
}

SweepResult convergence_sweep(const StructuredFamily& family, const Dist& mu0, std::span<const std::size_t> n_list,
                              std::span<const double> checkpoints, std::size_t n_seeds, Seed seed, unsigned threads) {
  if (n_list.empty() || n_seeds == 0) throw Error(ErrorKind::InvalidArgument, "empty sweep");
  if (!std::is_sorted(n_list.begin(), n_list.end()))
    throw Error(ErrorKind::InvalidArgument, "N list must be increasing");
  std::vector<double> cps(checkpoints.begin(), checkpoints.end());
  std::sort(cps.begin(), cps.end());
  const double t_end = cps.empty() ? 0.0 : cps.back();

  // Identity-only families have zero drift.
  std::vector<Dist> reference;
  std::optional<MapFamily> flat;
  try {
    flat.emplace(flatten(family));
  } catch (const Error& err) {
    if (err.kind() != ErrorKind::EmptyFamily) throw;
  }
  for (double c : cps) reference.push_back(flat ? evolve(*flat, mu0, c, default_dt(*flat)) : mu0);

  const std::size_t cells = n_list.size() * n_seeds;
  std::vector<double> errors(cells);
  parallel_for(cells, threads, [&](std::size_t cell) {
    const std::size_t n = n_list[cell / n_seeds];
    const Seed s = seed + cell % n_seeds;
    const RunResult r = run(family, iid_state(n, mu0, s), t_end, s, cps);
    double worst = 0.0;
    for (std::size_t i = 0; i < cps.size(); ++i) worst = std::max(worst, tv_distance(r.laws[i], reference[i]));
    errors[cell] = worst;
  });

  SweepResult out;
  for (std::size_t k = 0; k < n_list.size(); ++k) {
    SweepRow row{n_list[k], {}, 0.0};
    for (std::size_t j = 0; j < n_seeds; ++j) row.errors.push_back(errors[k * n_seeds + j]);
    for (double e : row.errors) row.mean_error += e;
    row.mean_error /= static_cast<double>(n_seeds);
    out.rows.push_back(std::move(row));
  }
  std::size_t inversions = 0;
  for (std::size_t k = 1; k < out.rows.size(); ++k)
    if (out.rows[k].mean_error > out.rows[k - 1].mean_error) ++inversions;
  out.monotone_ok = inversions <= 1;
  return out;
}

}  // namespace rtp
