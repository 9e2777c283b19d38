#pragma once

// Finite-N particle system on the complete graph. Events arrive at total rate
// |q| in unrescaled time; each picks an entry with probability q/|q| and a
// uniform tuple of lambda distinct sites, then applies the vector map. Runs
// to unrescaled time N*t so that rescaled time t matches the mean-field ODE.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "rtp/core_model.hpp"
#include "rtp/rng.hpp"

namespace rtp {

struct SystemState {
  std::vector<State> sites;
  double model_time = 0.0;  // unrescaled
};

/// Sites i.i.d. with law mu; `stream` separates independent initial states
/// drawn from the same seed.
SystemState iid_state(std::size_t n_sites, const Dist& mu, Seed seed, std::uint64_t stream = 0);

/// Empirical law (1/N) sum delta_{x_i}.
Dist empirical(const SystemState& state, std::size_t n_states);

struct RunOptions {
  /// Optional permutation of [N] applied to every drawn site index.
  std::vector<std::size_t> site_relabel;
};

struct RunResult {
  std::vector<double> times;  // rescaled checkpoints
  std::vector<Dist> laws;     // empirical law at each checkpoint
  /// Events (no-ops included) up to each checkpoint.
  std::vector<std::uint64_t> events_at;
  /// Sum of lambda over events up to each checkpoint; bounds how many site
  /// values can have changed.
  std::vector<std::uint64_t> touched_at;
  std::uint64_t events = 0;
  std::uint64_t noop_events = 0;
  SystemState final_state;

  /// `t_rescaled,p` for S = {0,1}, otherwise `t_rescaled,state_0,...`.
  void write_csv(std::ostream& out) const;
};

/// Checkpoints must lie in [0, t_rescaled]; they are sorted internally.
RunResult run(const StructuredFamily& family, SystemState init, double t_rescaled, Seed seed,
              std::span<const double> checkpoints, const RunOptions& options = {});

struct CoupledResult {
  std::vector<double> times;
  /// Site-averaged joint law of the replica tuple; tuple codes put replica 0
  /// in the most significant digit.
  std::vector<Dist> joint;
  std::vector<std::uint64_t> events_at;
  std::uint64_t events = 0;
  std::vector<SystemState> final_states;
  /// Every pair of replicas that started sitewise ordered stayed ordered
  /// after every event. Trivially true on unordered spaces.
  bool order_preserved = true;

  /// `t_rescaled,p,r` for two binary replicas.
  void write_csv(std::ostream& out) const;
};

/// Every replica is driven by the same event stream as `run` would draw for
/// the first replica alone.
CoupledResult run_coupled(const StructuredFamily& family, std::vector<SystemState> inits, double t_rescaled,
                          Seed seed, std::span<const double> checkpoints);

struct SweepRow {
  std::size_t n_sites;
  /// Max over checkpoints of TV(empirical, ODE), per seed.
  std::vector<double> errors;
  double mean_error;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  /// Mean errors decrease along the N list with at most one inversion.
  bool monotone_ok;
};

/// Mean-field limit check: i.i.d. mu0 starts, seeds 0..n_seeds-1 offset from
/// `seed`, ODE reference from flatten(family).
SweepResult convergence_sweep(const StructuredFamily& family, const Dist& mu0, std::span<const std::size_t> n_list,
                              std::span<const double> checkpoints, std::size_t n_seeds, Seed seed,
                              unsigned threads = 1);

}  // namespace rtp
