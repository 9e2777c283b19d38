#pragma once

// Finite state spaces, local maps g: S^k -> S, rate-weighted map families and
// the structured (vector-valued) families that drive the particle system.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rtp {

using State = std::uint32_t;

/// States are 0..size-1. An optional partial order is stored as a dense
/// size x size relation matrix.
class StateSpace {
 public:
  explicit StateSpace(std::size_t size);

  /// {0,1} with 0 <= 1.
  static StateSpace binary();
  /// {0,...,n-1} with the usual total order.
  static StateSpace chain(std::size_t n);

  /// Attach a partial order given by its (a <= b) pairs; the reflexive and
  /// transitive closure is taken, antisymmetry is checked.
  StateSpace with_order(std::span<const std::pair<State, State>> relations) const;

  std::size_t size() const noexcept { return size_; }
  bool has_order() const noexcept { return !order_.empty(); }
  bool leq(State a, State b) const;

  /// True if the order has 0 as least and size-1 as greatest element.
  bool has_bounds() const;

  bool operator==(const StateSpace& other) const = default;

 private:
  std::size_t size_;
  std::vector<char> order_;
};

/// g: S^k -> S as a dense table in lexicographic input order: the first
/// argument is the most significant digit of the mixed-radix code.
class LocalMap {
 public:
  LocalMap(std::string name, std::size_t n_states, std::size_t arity, std::vector<State> table);

  static LocalMap from_function(std::string name, std::size_t n_states, std::size_t arity,
                                const std::function<State(std::span<const State>)>& fn);

  const std::string& name() const noexcept { return name_; }
  std::size_t arity() const noexcept { return arity_; }
  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t input_count() const noexcept { return table_.size(); }
  std::span<const State> table() const noexcept { return table_; }

  State at(std::size_t code) const { return table_[code]; }
  State operator()(std::span<const State> x) const { return table_[encode(x)]; }

  std::size_t encode(std::span<const State> x) const;
  void decode(std::size_t code, std::span<State> out) const;

  bool is_identity() const;
  bool depends_on(std::size_t coordinate) const;
  bool is_monotone(const StateSpace& space) const;

  /// Projection of a map that ignores every coordinate outside `coordinates`
  /// onto those coordinates (kept in increasing order).
  LocalMap restrict_to(std::span<const std::size_t> coordinates) const;

  bool operator==(const LocalMap& other) const = default;

 private:
  std::string name_;
  std::size_t n_states_;
  std::size_t arity_;
  std::vector<State> table_;
};

namespace maps {
/// x1 v (x2 ^ x3)
LocalMap cob();
/// constant 0, arity 0
LocalMap dth();
/// constant 1, arity 0
LocalMap bth();
/// x1 v x2
LocalMap bra();
LocalMap identity(std::size_t n_states = 2);

/// Looks up one of cob, dth, bth, bra, identity.
std::optional<LocalMap> builtin(const std::string& name, std::size_t n_states = 2);
}  // namespace maps

struct MapEntry {
  LocalMap map;
  double rate;
};

/// Finite family of (map, rate) atoms. Zero-rate entries are pruned.
class MapFamily {
 public:
  MapFamily(StateSpace space, std::vector<MapEntry> entries);

  const StateSpace& space() const noexcept { return space_; }
  std::span<const MapEntry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const MapEntry& operator[](std::size_t i) const { return entries_[i]; }

  double total_rate() const noexcept { return total_rate_; }
  double mean_arity() const noexcept { return mean_arity_; }
  std::size_t max_arity() const noexcept { return max_arity_; }

  /// Entry index with probability rate/|r|, for u uniform in [0,1).
  std::size_t choose(double u) const noexcept;

  /// Space carries a bounded order and every map is monotone.
  bool is_monotone() const;

 private:
  StateSpace space_;
  std::vector<MapEntry> entries_;
  std::vector<double> cumulative_;
  double total_rate_ = 0.0;
  double mean_arity_ = 0.0;
  std::size_t max_arity_ = 0;
};

struct FamilyConstants {
  double K;  // sum rate * (arity - 1)
  double L;  // sum rate * (arity + 1)
  bool subcritical;
};

FamilyConstants constants(const MapFamily& family);

/// One coordinate map gamma_i of a vector map: a lambda-ary table that may
/// only depend on the coordinates listed in `depends_on` (0-based).
struct Component {
  LocalMap map;
  std::vector<std::size_t> depends_on;
};

struct StructuredEntry {
  double rate;
  std::vector<Component> components;

  std::size_t lambda() const noexcept { return components.size(); }
};

class StructuredFamily {
 public:
  StructuredFamily(StateSpace space, std::vector<StructuredEntry> entries);

  const StateSpace& space() const noexcept { return space_; }
  std::span<const StructuredEntry> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  const StructuredEntry& operator[](std::size_t i) const { return entries_[i]; }
  double total_rate() const noexcept { return total_rate_; }
  std::size_t max_lambda() const noexcept { return max_lambda_; }

  std::size_t choose(double u) const noexcept;

 private:
  StateSpace space_;
  std::vector<StructuredEntry> entries_;
  std::vector<double> cumulative_;
  double total_rate_ = 0.0;
  std::size_t max_lambda_ = 0;
};

/// One flat entry per non-identity component; identity components are kept
/// only when requested. Throws EmptyFamily if nothing remains.
MapFamily flatten(const StructuredFamily& structured, bool keep_identity = false);

/// Canonical vector form of a flat family: an arity-k map acts on the first
/// max(k,1) selected sites and writes its value to the first one.
StructuredFamily wrap(const MapFamily& family);

namespace presets {
MapFamily coop(double alpha);
MapFamily coop_birth(double alpha, double beta);
MapFamily moran(double gamma, double s, double u, double nu0, double nu1);
}  // namespace presets

/// Probability vector on a finite space, renormalized on construction.
class Dist {
 public:
  explicit Dist(std::vector<double> weights);

  static Dist delta(std::size_t n_states, State s);
  static Dist bernoulli(double p);
  static Dist uniform(std::size_t n_states);

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t s) const { return w_[s]; }
  std::span<const double> weights() const noexcept { return w_; }

 private:
  std::vector<double> w_;
};

/// Key-value family config:
///   states = 2
///   map.<name> = <builtin>  |  map.<name> = table <arity> v0 v1 ...
///   rate.<name> = 4.5
///   order = 0<1 ...          (optional)
/// Entries appear in the order of their rate lines.
MapFamily parse_family(std::istream& in);
MapFamily load_family(const std::string& path);
std::string format_family(const MapFamily& family);

}  // namespace rtp
