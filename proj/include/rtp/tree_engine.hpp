#pragma once

// Marked branching trees S_t with attached maps, the concatenated map G_U,
// Monte Carlo estimation of T_t(mu), root-determining and open subtrees.
//
// A tree is a deterministic function of (seed, replica): every node owns a
// 64-bit key derived from its word (the path of child indices from the root),
// and its lifetime and map are drawn from the counter-based stream at that key.
// Truncations at different horizons are therefore nested, and the lazily
// evaluated implicit tree agrees with the materialized one node for node.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtp/core_model.hpp"
#include "rtp/rng.hpp"
#include "rtp/util.hpp"

namespace rtp {

inline constexpr std::size_t kDefaultNodeBudget = 1'000'000;
inline constexpr std::size_t kDefaultLazyBudget = 100'000'000;
inline constexpr std::size_t kBruteForceCap = std::size_t{1} << 20;
inline constexpr std::size_t kOneSetCap = 10'000;

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = 0xFFFFFFFFu;

struct TreeNode {
  std::uint64_t key;
  NodeId parent;
  std::int32_t map_index;  // -1 on the boundary
  NodeId first_child;
  std::uint32_t child_count;
  std::uint32_t depth;
  std::uint32_t slot;  // 1-based position among siblings; 0 for the root
  double birth;
  double death;

  bool is_leaf() const noexcept { return map_index < 0; }
};

/// Arena of nodes in breadth-first order; children of a node are contiguous
/// and always have larger ids than their parent.
class MarkedTree {
 public:
  std::span<const TreeNode> nodes() const noexcept { return nodes_; }
  const TreeNode& node(NodeId id) const { return nodes_[id]; }
  std::size_t size() const noexcept { return nodes_.size(); }
  NodeId root() const noexcept { return 0; }
  double horizon() const noexcept { return horizon_; }

  /// Boundary nodes (alive at the horizon) in id order.
  std::span<const NodeId> leaves() const noexcept { return leaves_; }
  /// Position of a boundary node inside leaves(), or -1.
  std::int64_t leaf_position(NodeId id) const { return leaf_pos_[id]; }
  std::size_t internal_count() const noexcept { return nodes_.size() - leaves_.size(); }

  NodeId child(NodeId id, std::size_t j) const { return nodes_[id].first_child + static_cast<NodeId>(j); }

  /// 1-based child indices from the root.
  std::vector<std::uint32_t> word(NodeId id) const;
  std::string word_string(NodeId id) const;
  std::optional<NodeId> find(std::span<const std::uint32_t> word) const;
  std::optional<NodeId> find(std::string_view digits) const;

  /// `id,parent,map_name,tau_birth,tau_death,is_leaf`, one node per line.
  void write_dump(std::ostream& out, const MapFamily& family) const;

 private:
  friend class TreeBuilder;
  std::vector<TreeNode> nodes_;
  std::vector<NodeId> leaves_;
  std::vector<std::int64_t> leaf_pos_;
  double horizon_ = 0.0;
};

std::uint64_t root_key(std::uint64_t replica) noexcept;
std::uint64_t child_key(std::uint64_t parent_key, std::size_t slot) noexcept;

/// Samples S_t: each individual lives an Exp(|r|) time, then picks entry i
/// with probability rate_i/|r| and is replaced by arity_i children.
MarkedTree sample_tree(const MapFamily& family, double t, Seed seed, std::uint64_t replica = 0,
                       std::size_t budget = kDefaultNodeBudget);

/// Hand-built tree from nested notation such as `cob(dth,*,cob(dth,*,*))`,
/// where `*` is a boundary node and names refer to the family's maps.
/// Internal nodes die before the horizon 1; boundary nodes die at 2.
MarkedTree tree_from_notation(const MapFamily& family, std::string_view notation);

/// Leaf states aligned with tree.leaves().
using LeafAssignment = std::vector<State>;

/// G_t evaluated bottom-up; returns the root state.
State evaluate(const MarkedTree& tree, const MapFamily& family, std::span<const State> assignment);

/// A subtree U: a set of internal nodes that contains the root and is closed
/// under taking parents. Its boundary consists of the non-members whose
/// parent is a member.
class Subtree {
 public:
  Subtree() = default;
  static Subtree all_internal(const MarkedTree& tree);

  bool contains(NodeId id) const { return id < member_.size() && member_[id] != 0; }
  void insert(NodeId id) { member_[id] = 1; }
  void erase(NodeId id) { member_[id] = 0; }
  std::vector<NodeId> members() const;
  std::vector<NodeId> boundary(const MarkedTree& tree) const;
  std::size_t count() const;

 private:
  std::vector<char> member_;
};

/// G_U with every boundary node set to `value`.
State evaluate_constant_boundary(const MarkedTree& tree, const MapFamily& family, const Subtree& u, State value);

bool is_root_determining(const MarkedTree& tree, const MapFamily& family);
bool is_root_determining(const MarkedTree& tree, const MapFamily& family, const Subtree& u);
/// Enumerates all boundary assignments regardless of monotonicity.
bool is_root_determining_brute_force(const MarkedTree& tree, const MapFamily& family, const Subtree& u,
                                     std::size_t cap = kBruteForceCap);

/// Greedy pruning: repeatedly drop the deepest (then lowest id) member whose
/// children are all outside U while U stays root determining.
std::optional<Subtree> find_minimal_root_determining(const MarkedTree& tree, const MapFamily& family);

/// At every cob node of U: child 1 in U and exactly one of children 2, 3 in U.
bool satisfies_coop_minroot(const MarkedTree& tree, const MapFamily& family, const Subtree& u);

struct Estimate {
  Dist dist;
  std::vector<double> stderrs;
  std::size_t samples;

  /// `state,probability,stderr`.
  void write_csv(std::ostream& out) const;
};

struct ParallelOptions {
  unsigned threads = 1;
  std::size_t budget = kDefaultNodeBudget;
};

/// Empirical law of G_t with i.i.d. mu0 boundary values over n sampled trees.
Estimate mc_estimate_Tt(const MapFamily& family, const Dist& mu0, double t, std::size_t n_samples, Seed seed,
                        ParallelOptions options = {});

struct SampleMean {
  double mean;
  double stderr;
};

/// Mean boundary size |S_t boundary| over n sampled trees.
SampleMean boundary_growth(const MapFamily& family, double t, std::size_t n_samples, Seed seed,
                           ParallelOptions options = {});

/// Evaluates G_t on the implicit tree of (seed, replica) with every boundary
/// node at `boundary`, sampling only the nodes the evaluation actually needs
/// (children are visited in order and skipped once the map is determined).
class LazyEvaluator {
 public:
  LazyEvaluator(const MapFamily& family, Seed seed, std::size_t budget = kDefaultLazyBudget);

  State evaluate(std::uint64_t replica, double t, State boundary);
  /// Nodes sampled by the last call.
  std::size_t visited() const noexcept { return visited_; }

 private:
  State visit(std::uint64_t key, double birth, double t, State boundary);

  const MapFamily& family_;
  Seed seed_;
  std::size_t budget_;
  std::size_t visited_ = 0;
  // prefix_const_[entry][j][code]: value of the map when the first j inputs
  // equal `code`, or -1 if it still depends on the rest.
  std::vector<std::vector<std::vector<std::int32_t>>> prefix_const_;
  std::vector<char> absorbing_;
};

struct UniquenessScan {
  std::vector<double> times;
  std::vector<double> fraction;
  std::vector<double> stderrs;
};

/// Fraction of replicas whose G_t is constant, per horizon. Replicas are the
/// same trees at every horizon, so each replica's indicator is monotone in t.
UniquenessScan uniqueness_scan(const MapFamily& family, std::span<const double> t_grid, std::size_t n_samples,
                               Seed seed, ParallelOptions options = {});

/// Minimal elements of g^{-1}(1) for a monotone map on {0,1}.
std::vector<std::vector<State>> minimal_one_inputs(const LocalMap& g);

struct OpenSubtreeReport {
  bool exists;
  bool exists_finite;
  /// Minimal boundary sets (positions into tree.leaves()) whose all-one
  /// assignment forces the root to 1.
  std::vector<std::vector<std::size_t>> minimal_one_sets;
};

OpenSubtreeReport open_subtrees(const MarkedTree& tree, const MapFamily& family, bool enumerate = true,
                                std::size_t cap = kOneSetCap);

struct DualityPoint {
  double t;
  double nu_upp_1;
  double nu_upp_se;
  double nu_low_1;
  double nu_low_se;
};

/// P[open subtree of S_t exists] (nonincreasing in t) and P[finite open
/// subtree of S_t exists] (nondecreasing in t) on a grid of horizons.
std::vector<DualityPoint> duality_estimate(const MapFamily& family, std::span<const double> t_grid,
                                           std::size_t n_samples, Seed seed, ParallelOptions options = {});

}  // namespace rtp
