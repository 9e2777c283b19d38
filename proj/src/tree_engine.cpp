#include "rtp/tree_engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <memory>
#include <ostream>
#include <set>
#include <stdexcept>

#include "rtp/error.hpp"

namespace rtp {

namespace {
constexpr std::uint64_t kRootTag = 0x5EED0F7EE5ull;
constexpr std::uint64_t kLeafTag = 0x1EAFull;
}  // namespace

std::uint64_t root_key(std::uint64_t replica) noexcept { return combine(kRootTag, replica); }

std::uint64_t child_key(std::uint64_t parent_key, std::size_t slot) noexcept {
  return combine(parent_key, static_cast<std::uint64_t>(slot) + 1);
}

// ---------------------------------------------------------------------------
// Building

class TreeBuilder {
 public:
  static void finish(MarkedTree& tree, double horizon) {
    tree.horizon_ = horizon;
    tree.leaf_pos_.assign(tree.nodes_.size(), -1);
    for (NodeId id = 0; id < tree.nodes_.size(); ++id) {
      if (tree.nodes_[id].is_leaf()) {
        tree.leaf_pos_[id] = static_cast<std::int64_t>(tree.leaves_.size());
        tree.leaves_.push_back(id);
      }
    }
  }
  static std::vector<TreeNode>& nodes(MarkedTree& tree) { return tree.nodes_; }
};

MarkedTree sample_tree(const MapFamily& family, double t, Seed seed, std::uint64_t replica, std::size_t budget) {
  if (!(t >= 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be >= 0");
  MarkedTree tree;
  auto& nodes = TreeBuilder::nodes(tree);
  nodes.push_back({root_key(replica), kNoNode, -1, 0, 0, 0, 0, 0.0, 0.0});
  const double rate = family.total_rate();
  for (NodeId id = 0; id < nodes.size(); ++id) {
    CounterStream rng(seed, nodes[id].key);
    const double death = nodes[id].birth + rng.exponential(rate);
    nodes[id].death = death;
    if (death > t) continue;
    const std::size_t entry = family.choose(rng.uniform());
    const std::size_t k = family[entry].map.arity();
    if (nodes.size() + k > budget)
      throw Error(ErrorKind::BudgetExceeded,
                  "tree at horizon " + format_double(t) + " exceeds " + std::to_string(budget) + " nodes");
    nodes[id].map_index = static_cast<std::int32_t>(entry);
    nodes[id].first_child = static_cast<NodeId>(nodes.size());
    nodes[id].child_count = static_cast<std::uint32_t>(k);
    const std::uint64_t key = nodes[id].key;
    const std::uint32_t depth = nodes[id].depth + 1;
    for (std::size_t j = 0; j < k; ++j)
      nodes.push_back({child_key(key, j), id, -1, 0, 0, depth, static_cast<std::uint32_t>(j + 1), death, 0.0});
  }
  TreeBuilder::finish(tree, t);
  return tree;
}

namespace {

struct ParsedNode {
  std::int32_t map_index = -1;
  std::vector<std::unique_ptr<ParsedNode>> children;
};

class NotationParser {
 public:
  NotationParser(const MapFamily& family, std::string_view text) : family_(family), text_(text) {}

  std::unique_ptr<ParsedNode> parse() {
    auto node = parse_node();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    return node;
  }

 private:
  std::unique_ptr<ParsedNode> parse_node() {
    skip_space();
    auto node = std::make_unique<ParsedNode>();
    if (peek() == '*') {
      ++pos_;
      return node;
    }
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string name(text_.substr(start, pos_ - start));
    if (name.empty()) fail("expected a map name or '*'");
    for (std::size_t i = 0; i < family_.size(); ++i)
      if (family_[i].map.name() == name) node->map_index = static_cast<std::int32_t>(i);
    if (node->map_index < 0) fail("map '" + name + "' is not in the family");
    const std::size_t arity = family_[node->map_index].map.arity();
    skip_space();
    if (peek() == '(') {
      ++pos_;
      for (;;) {
        node->children.push_back(parse_node());
        skip_space();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        if (peek() == ')') {
          ++pos_;
          break;
        }
        fail("expected ',' or ')'");
      }
    }
    if (node->children.size() != arity)
      fail("map '" + name + "' needs " + std::to_string(arity) + " children");
    return node;
  }

  char peek() const { return pos_ < text_.size() ? text_[pos_] : '\0'; }
  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::InvalidArgument, "tree notation at offset " + std::to_string(pos_) + ": " + msg);
  }

  const MapFamily& family_;
  std::string_view text_;
  std::size_t pos_ = 0;
};

std::uint32_t max_depth(const ParsedNode& n, std::uint32_t d) {
  std::uint32_t best = d;
  for (const auto& c : n.children) best = std::max(best, max_depth(*c, d + 1));
  return best;
}

}  // namespace

MarkedTree tree_from_notation(const MapFamily& family, std::string_view notation) {
  const auto parsed = NotationParser(family, notation).parse();
  const double span = static_cast<double>(max_depth(*parsed, 0) + 1);
  MarkedTree tree;
  auto& nodes = TreeBuilder::nodes(tree);
  std::deque<const ParsedNode*> queue{parsed.get()};
  nodes.push_back({root_key(0), kNoNode, -1, 0, 0, 0, 0, 0.0, 0.0});
  for (NodeId id = 0; id < nodes.size(); ++id) {
    const ParsedNode* p = queue.front();
    queue.pop_front();
    TreeNode& n = nodes[id];
    n.map_index = p->map_index;
    if (n.is_leaf()) {
      n.death = 2.0;
      continue;
    }
    n.death = (n.depth + 1) / span;
    n.first_child = static_cast<NodeId>(nodes.size());
    n.child_count = static_cast<std::uint32_t>(p->children.size());
    const TreeNode parent = n;
    for (std::size_t j = 0; j < p->children.size(); ++j) {
      nodes.push_back({child_key(parent.key, j), id, -1, 0, 0, parent.depth + 1,
                       static_cast<std::uint32_t>(j + 1), parent.death, 0.0});
      queue.push_back(p->children[j].get());
    }
  }
  TreeBuilder::finish(tree, 1.0);
  return tree;
}

// ---------------------------------------------------------------------------
// Words and dumps

std::vector<std::uint32_t> MarkedTree::word(NodeId id) const {
  std::vector<std::uint32_t> w;
  for (NodeId cur = id; cur != root(); cur = nodes_[cur].parent) w.push_back(nodes_[cur].slot);
  std::reverse(w.begin(), w.end());
  return w;
}

std::string MarkedTree::word_string(NodeId id) const {
  std::string s;
  for (std::uint32_t letter : word(id)) {
    if (!s.empty() && letter > 9) s += '.';
    s += std::to_string(letter);
  }
  return s.empty() ? "root" : s;
}

std::optional<NodeId> MarkedTree::find(std::span<const std::uint32_t> w) const {
  NodeId cur = root();
  for (std::uint32_t letter : w) {
    const TreeNode& n = nodes_[cur];
    if (letter == 0 || letter > n.child_count) return std::nullopt;
    cur = n.first_child + letter - 1;
  }
  return cur;
}

std::optional<NodeId> MarkedTree::find(std::string_view digits) const {
  std::vector<std::uint32_t> w;
  for (char c : digits) {
    if (c < '1' || c > '9') return std::nullopt;
    w.push_back(static_cast<std::uint32_t>(c - '0'));
  }
  return find(w);
}

void MarkedTree::write_dump(std::ostream& out, const MapFamily& family) const {
  out << "id,parent,map_name,tau_birth,tau_death,is_leaf\n";
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    const TreeNode& n = nodes_[id];
    out << id << ',';
    if (n.parent == kNoNode) out << -1;
    else out << n.parent;
    out << ',' << (n.is_leaf() ? std::string() : family[n.map_index].map.name()) << ','
        << format_double(n.birth) << ',' << format_double(n.death) << ',' << (n.is_leaf() ? 1 : 0) << "\n";
  }
}

// ---------------------------------------------------------------------------
// Evaluation

State evaluate(const MarkedTree& tree, const MapFamily& family, std::span<const State> assignment) {
  if (assignment.size() != tree.leaves().size())
    throw Error(ErrorKind::InvalidArgument, "assignment must cover every boundary node");
  std::vector<State> value(tree.size());
  std::vector<State> args(family.max_arity());
  for (NodeId id = static_cast<NodeId>(tree.size()); id-- > 0;) {
    const TreeNode& n = tree.node(id);
    if (n.is_leaf()) {
      value[id] = assignment[static_cast<std::size_t>(tree.leaf_position(id))];
      continue;
    }
    const LocalMap& g = family[n.map_index].map;
    for (std::uint32_t j = 0; j < n.child_count; ++j) args[j] = value[n.first_child + j];
    value[id] = g(std::span<const State>(args.data(), n.child_count));
  }
  return value[tree.root()];
}

Subtree Subtree::all_internal(const MarkedTree& tree) {
  Subtree u;
  u.member_.assign(tree.size(), 0);
  for (NodeId id = 0; id < tree.size(); ++id) u.member_[id] = tree.node(id).is_leaf() ? 0 : 1;
  return u;
}

std::vector<NodeId> Subtree::members() const {
  std::vector<NodeId> out;
  for (NodeId id = 0; id < member_.size(); ++id)
    if (member_[id]) out.push_back(id);
  return out;
}

std::vector<NodeId> Subtree::boundary(const MarkedTree& tree) const {
  std::vector<NodeId> out;
  if (!contains(tree.root())) return {tree.root()};
  for (NodeId id = 1; id < tree.size(); ++id)
    if (!contains(id) && contains(tree.node(id).parent)) out.push_back(id);
  return out;
}

std::size_t Subtree::count() const { return static_cast<std::size_t>(std::count(member_.begin(), member_.end(), 1)); }

namespace {

// G_U with boundary values supplied by `boundary_value(id)`.
template <typename BoundaryFn>
State evaluate_subtree(const MarkedTree& tree, const MapFamily& family, const Subtree& u,
                       std::vector<State>& value, BoundaryFn&& boundary_value) {
  if (!u.contains(tree.root())) return boundary_value(tree.root());
  std::vector<State> args(family.max_arity());
  for (NodeId id = static_cast<NodeId>(tree.size()); id-- > 0;) {
    if (!u.contains(id)) {
      if (id != tree.root() && u.contains(tree.node(id).parent)) value[id] = boundary_value(id);
      continue;
    }
    const TreeNode& n = tree.node(id);
    for (std::uint32_t j = 0; j < n.child_count; ++j) args[j] = value[n.first_child + j];
    value[id] = family[n.map_index].map(std::span<const State>(args.data(), n.child_count));
  }
  return value[tree.root()];
}

}  // namespace

State evaluate_constant_boundary(const MarkedTree& tree, const MapFamily& family, const Subtree& u, State v) {
  std::vector<State> value(tree.size());
  return evaluate_subtree(tree, family, u, value, [v](NodeId) { return v; });
}

bool is_root_determining_brute_force(const MarkedTree& tree, const MapFamily& family, const Subtree& u,
                                     std::size_t cap) {
  const std::vector<NodeId> boundary = u.boundary(tree);
  const std::size_t n = family.space().size();
  const std::size_t count = [&] {
    try {
      return checked_power(n, boundary.size(), cap);
    } catch (const Error&) {
      throw Error(ErrorKind::EnumerationCap, std::to_string(boundary.size()) +
                                                 " boundary nodes exceed the brute-force enumeration cap");
    }
  }();
  std::vector<State> value(tree.size());
  std::vector<State> assign(tree.size(), 0);
  std::vector<State> digits(boundary.size(), 0);
  std::optional<State> first;
  for (std::size_t code = 0; code < count; ++code) {
    for (std::size_t i = 0; i < boundary.size(); ++i) assign[boundary[i]] = digits[i];
    const State out = evaluate_subtree(tree, family, u, value, [&](NodeId id) { return assign[id]; });
    if (!first) first = out;
    else if (*first != out) return false;
    for (std::size_t i = 0; i < digits.size(); ++i) {
      if (++digits[i] < n) break;
      digits[i] = 0;
    }
  }
  return true;
}

bool is_root_determining(const MarkedTree& tree, const MapFamily& family, const Subtree& u) {
  if (family.is_monotone()) {
    const auto top = static_cast<State>(family.space().size() - 1);
    return evaluate_constant_boundary(tree, family, u, 0) == evaluate_constant_boundary(tree, family, u, top);
  }
  return is_root_determining_brute_force(tree, family, u);
}

bool is_root_determining(const MarkedTree& tree, const MapFamily& family) {
  return is_root_determining(tree, family, Subtree::all_internal(tree));
}

bool satisfies_coop_minroot(const MarkedTree& tree, const MapFamily& family, const Subtree& u) {
  for (NodeId id : u.members()) {
    const TreeNode& n = tree.node(id);
    if (family[n.map_index].map.name() != "cob") continue;
    const bool first = u.contains(n.first_child);
    const int others = static_cast<int>(u.contains(n.first_child + 1)) + static_cast<int>(u.contains(n.first_child + 2));
    if (!first || others != 1) return false;
  }
  return true;
}

std::optional<Subtree> find_minimal_root_determining(const MarkedTree& tree, const MapFamily& family) {
  Subtree u = Subtree::all_internal(tree);
  if (!u.contains(tree.root()) || !is_root_determining(tree, family, u)) return std::nullopt;

  auto is_frontier = [&](NodeId id) {
    const TreeNode& n = tree.node(id);
    for (std::uint32_t j = 0; j < n.child_count; ++j)
      if (u.contains(n.first_child + j)) return false;
    return true;
  };
  // Ordered by depth descending, then id ascending.
  auto cmp = [&](NodeId a, NodeId b) {
    const auto da = tree.node(a).depth, db = tree.node(b).depth;
    return da != db ? da > db : a < b;
  };
  std::set<NodeId, decltype(cmp)> candidates(cmp);
  for (NodeId id : u.members())
    if (id != tree.root() && is_frontier(id)) candidates.insert(id);

  // Root determinism is inherited by supersets, so a node that cannot be
  // dropped now can never be dropped later.
  while (!candidates.empty()) {
    const NodeId id = *candidates.begin();
    candidates.erase(candidates.begin());
    u.erase(id);
    if (!is_root_determining(tree, family, u)) {
      u.insert(id);
      continue;
    }
    const NodeId parent = tree.node(id).parent;
    if (parent != tree.root() && is_frontier(parent)) candidates.insert(parent);
  }

  const bool coop_only = std::all_of(family.entries().begin(), family.entries().end(), [](const MapEntry& e) {
    return e.map.name() == "cob" || e.map.name() == "dth";
  });
  if (coop_only && !satisfies_coop_minroot(tree, family, u))
    throw std::logic_error("minimal root determining subtree violates the cob/dth characterization");
  return u;
}

// ---------------------------------------------------------------------------
// Monte Carlo over replicas

void Estimate::write_csv(std::ostream& out) const {
  out << "state,probability,stderr\n";
  for (std::size_t s = 0; s < dist.size(); ++s)
    out << s << ',' << format_double(dist[s]) << ',' << format_double(stderrs[s]) << "\n";
}

namespace {

State draw_state(const Dist& mu, Seed seed, std::uint64_t key) {
  CounterStream rng(seed, combine(key, kLeafTag));
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t s = 0; s + 1 < mu.size(); ++s) {
    acc += mu[s];
    if (u < acc) return static_cast<State>(s);
  }
  return static_cast<State>(mu.size() - 1);
}

double binomial_se(double p, std::size_t n) { return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(n)); }

}  // namespace

Estimate mc_estimate_Tt(const MapFamily& family, const Dist& mu0, double t, std::size_t n_samples, Seed seed,
                        ParallelOptions options) {
  if (n_samples == 0) throw Error(ErrorKind::InvalidArgument, "need at least one sample");
  if (mu0.size() != family.space().size()) throw Error(ErrorKind::InvalidArgument, "initial law space mismatch");
  std::vector<State> roots(n_samples);
  parallel_for(n_samples, options.threads, [&](std::size_t i) {
    const MarkedTree tree = sample_tree(family, t, seed, i, options.budget);
    LeafAssignment leaves(tree.leaves().size());
    for (std::size_t j = 0; j < leaves.size(); ++j) leaves[j] = draw_state(mu0, seed, tree.node(tree.leaves()[j]).key);
    roots[i] = evaluate(tree, family, leaves);
  });
  std::vector<double> counts(mu0.size(), 0.0);
  for (State s : roots) counts[s] += 1.0;
  std::vector<double> se(mu0.size());
  for (std::size_t s = 0; s < counts.size(); ++s) se[s] = binomial_se(counts[s] / static_cast<double>(n_samples), n_samples);
  return {Dist(std::move(counts)), std::move(se), n_samples};
}

SampleMean boundary_growth(const MapFamily& family, double t, std::size_t n_samples, Seed seed,
                           ParallelOptions options) {
  if (n_samples < 2) throw Error(ErrorKind::InvalidArgument, "need at least two samples");
  std::vector<double> sizes(n_samples);
  parallel_for(n_samples, options.threads, [&](std::size_t i) {
    sizes[i] = static_cast<double>(sample_tree(family, t, seed, i, options.budget).leaves().size());
  });
  double mean = 0.0;
  for (double s : sizes) mean += s;
  mean /= static_cast<double>(n_samples);
  double var = 0.0;
  for (double s : sizes) var += (s - mean) * (s - mean);
  var /= static_cast<double>(n_samples - 1);
  return {mean, std::sqrt(var / static_cast<double>(n_samples))};
}

// ---------------------------------------------------------------------------
// Lazy evaluation on the implicit tree

LazyEvaluator::LazyEvaluator(const MapFamily& family, Seed seed, std::size_t budget)
    : family_(family), seed_(seed), budget_(budget) {
  const std::size_t n = family.space().size();
  for (const auto& e : family.entries()) {
    const LocalMap& g = e.map;
    const std::size_t k = g.arity();
    std::vector<std::vector<std::int32_t>> levels(k + 1);
    levels[k].resize(g.input_count());
    for (std::size_t c = 0; c < g.input_count(); ++c) levels[k][c] = static_cast<std::int32_t>(g.at(c));
    for (std::size_t j = k; j-- > 0;) {
      levels[j].resize(levels[j + 1].size() / n);
      for (std::size_t c = 0; c < levels[j].size(); ++c) {
        std::int32_t v = levels[j + 1][c * n];
        for (std::size_t s = 1; s < n && v >= 0; ++s)
          if (levels[j + 1][c * n + s] != v) v = -1;
        levels[j][c] = v;
      }
    }
    prefix_const_.push_back(std::move(levels));
  }
  // v is absorbing when every map sends the constant tuple (v,...,v) to v;
  // then G_t with every boundary node at v is v on any tree.
  absorbing_.assign(n, 1);
  for (std::size_t v = 0; v < n; ++v) {
    for (const auto& e : family.entries()) {
      std::size_t code = 0;
      for (std::size_t j = 0; j < e.map.arity(); ++j) code = code * n + v;
      if (e.map.at(code) != v) absorbing_[v] = 0;
    }
  }
}

State LazyEvaluator::evaluate(std::uint64_t replica, double t, State boundary) {
  visited_ = 0;
  if (boundary < absorbing_.size() && absorbing_[boundary]) return boundary;
  return visit(root_key(replica), 0.0, t, boundary);
}

State LazyEvaluator::visit(std::uint64_t key, double birth, double t, State boundary) {
  if (++visited_ > budget_)
    throw Error(ErrorKind::BudgetExceeded, "lazy evaluation exceeded " + std::to_string(budget_) + " nodes");
  CounterStream rng(seed_, key);
  const double death = birth + rng.exponential(family_.total_rate());
  if (death > t) return boundary;
  const std::size_t entry = family_.choose(rng.uniform());
  const auto& levels = prefix_const_[entry];
  const std::size_t n = family_.space().size();
  std::size_t code = 0;
  for (std::size_t j = 0;; ++j) {
    if (const std::int32_t v = levels[j][code]; v >= 0) return static_cast<State>(v);
    code = code * n + visit(child_key(key, j), death, t, boundary);
  }
}

UniquenessScan uniqueness_scan(const MapFamily& family, std::span<const double> t_grid, std::size_t n_samples,
                               Seed seed, ParallelOptions options) {
  if (n_samples == 0) throw Error(ErrorKind::InvalidArgument, "need at least one sample");
  if (!std::is_sorted(t_grid.begin(), t_grid.end()))
    throw Error(ErrorKind::InvalidArgument, "time grid must be increasing");
  const std::size_t m = t_grid.size();
  std::vector<char> constant(n_samples * m, 0);
  const bool monotone = family.is_monotone();
  const auto top = static_cast<State>(family.space().size() - 1);
  parallel_for(n_samples, options.threads, [&](std::size_t i) {
    if (monotone) {
      LazyEvaluator lazy(family, seed, std::max(options.budget, kDefaultLazyBudget));
      for (std::size_t j = 0; j < m; ++j)
        constant[i * m + j] = lazy.evaluate(i, t_grid[j], 0) == lazy.evaluate(i, t_grid[j], top);
    } else {
      for (std::size_t j = 0; j < m; ++j)
        constant[i * m + j] = is_root_determining(sample_tree(family, t_grid[j], seed, i, options.budget), family);
    }
  });
  UniquenessScan scan;
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n_samples; ++i) hits += constant[i * m + j] ? 1 : 0;
    const double f = static_cast<double>(hits) / static_cast<double>(n_samples);
    scan.times.push_back(t_grid[j]);
    scan.fraction.push_back(f);
    scan.stderrs.push_back(binomial_se(f, n_samples));
  }
  return scan;
}

// ---------------------------------------------------------------------------
// Open subtrees

std::vector<std::vector<State>> minimal_one_inputs(const LocalMap& g) {
  if (g.n_states() != 2) throw Error(ErrorKind::Unsupported, "minimal one-sets need S = {0,1}");
  if (!g.is_monotone(StateSpace::binary())) throw Error(ErrorKind::InvalidArgument, "map '" + g.name() + "' is not monotone");
  std::vector<std::vector<State>> out;
  std::vector<State> x(g.arity());
  for (std::size_t code = 0; code < g.input_count(); ++code) {
    if (g.at(code) != 1) continue;
    // minimal iff lowering any single 1 gives 0 (enough by monotonicity)
    bool minimal = true;
    g.decode(code, x);
    for (std::size_t i = 0; i < x.size() && minimal; ++i) {
      if (x[i] == 0) continue;
      x[i] = 0;
      if (g(x) == 1) minimal = false;
      x[i] = 1;
    }
    if (minimal) out.push_back(x);
  }
  return out;
}

namespace {

using LeafSet = std::vector<std::size_t>;

void minimalize(std::vector<LeafSet>& sets) {
  std::sort(sets.begin(), sets.end(), [](const LeafSet& a, const LeafSet& b) {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  });
  sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
  std::vector<LeafSet> kept;
  for (auto& s : sets) {
    const bool dominated = std::any_of(kept.begin(), kept.end(), [&](const LeafSet& k) {
      return std::includes(s.begin(), s.end(), k.begin(), k.end());
    });
    if (!dominated) kept.push_back(std::move(s));
  }
  sets = std::move(kept);
}

[[noreturn]] void one_set_cap(std::size_t cap) {
  throw Error(ErrorKind::EnumerationCap, "more than " + std::to_string(cap) + " minimal one-sets");
}

std::vector<std::vector<std::vector<State>>> family_one_inputs(const MapFamily& family) {
  if (family.space().size() != 2) throw Error(ErrorKind::Unsupported, "open subtrees need S = {0,1}");
  std::vector<std::vector<std::vector<State>>> ys;
  for (const auto& e : family.entries()) ys.push_back(minimal_one_inputs(e.map));
  return ys;
}

struct OpenFlags {
  bool open;
  bool finite;
};

OpenFlags open_flags(const MarkedTree& tree, const std::vector<std::vector<std::vector<State>>>& ys) {
  std::vector<char> open(tree.size()), finite(tree.size());
  for (NodeId id = static_cast<NodeId>(tree.size()); id-- > 0;) {
    const TreeNode& n = tree.node(id);
    if (n.is_leaf()) {
      open[id] = 1;
      finite[id] = 0;
      continue;
    }
    bool any_open = false, any_finite = false;
    for (const auto& y : ys[n.map_index]) {
      bool o = true, f = true;
      for (std::size_t j = 0; j < y.size(); ++j) {
        if (!y[j]) continue;
        o = o && open[n.first_child + j];
        f = f && finite[n.first_child + j];
      }
      any_open = any_open || o;
      any_finite = any_finite || f;
    }
    open[id] = any_open;
    finite[id] = any_finite;
  }
  return {open[tree.root()] != 0, finite[tree.root()] != 0};
}

}  // namespace

OpenSubtreeReport open_subtrees(const MarkedTree& tree, const MapFamily& family, bool enumerate, std::size_t cap) {
  const auto ys = family_one_inputs(family);
  const OpenFlags flags = open_flags(tree, ys);
  OpenSubtreeReport report{flags.open, flags.finite, {}};
  if (!enumerate) return report;

  std::vector<std::vector<LeafSet>> sets(tree.size());
  for (NodeId id = static_cast<NodeId>(tree.size()); id-- > 0;) {
    const TreeNode& n = tree.node(id);
    if (n.is_leaf()) {
      sets[id] = {{static_cast<std::size_t>(tree.leaf_position(id))}};
      continue;
    }
    std::vector<LeafSet> acc_all;
    for (const auto& y : ys[n.map_index]) {
      std::vector<LeafSet> acc{{}};
      for (std::size_t j = 0; j < y.size() && !acc.empty(); ++j) {
        if (!y[j]) continue;
        const auto& child_sets = sets[n.first_child + j];
        if (acc.size() * child_sets.size() > cap * cap) one_set_cap(cap);
        std::vector<LeafSet> next;
        next.reserve(acc.size() * child_sets.size());
        for (const auto& a : acc) {
          for (const auto& b : child_sets) {
            LeafSet merged;
            std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(merged));
            next.push_back(std::move(merged));
          }
        }
        minimalize(next);
        if (next.size() > cap) one_set_cap(cap);
        acc = std::move(next);
      }
      for (auto& s : acc) acc_all.push_back(std::move(s));
    }
    minimalize(acc_all);
    if (acc_all.size() > cap) one_set_cap(cap);
    sets[id] = std::move(acc_all);
    for (std::uint32_t j = 0; j < n.child_count; ++j) {
      sets[n.first_child + j].clear();
      sets[n.first_child + j].shrink_to_fit();
    }
  }
  report.minimal_one_sets = std::move(sets[tree.root()]);
  return report;
}

std::vector<DualityPoint> duality_estimate(const MapFamily& family, std::span<const double> t_grid,
                                           std::size_t n_samples, Seed seed, ParallelOptions options) {
  if (n_samples == 0) throw Error(ErrorKind::InvalidArgument, "need at least one sample");
  if (!family.is_monotone()) throw Error(ErrorKind::InvalidArgument, "duality needs a monotone family");
  const auto ys = family_one_inputs(family);
  const std::size_t m = t_grid.size();
  std::vector<OpenFlags> flags(n_samples * m);
  parallel_for(n_samples, options.threads, [&](std::size_t i) {
    for (std::size_t j = 0; j < m; ++j)
      flags[i * m + j] = open_flags(sample_tree(family, t_grid[j], seed, i, options.budget), ys);
  });
  std::vector<DualityPoint> out;
  for (std::size_t j = 0; j < m; ++j) {
    std::size_t upp = 0, low = 0;
    for (std::size_t i = 0; i < n_samples; ++i) {
      upp += flags[i * m + j].open ? 1 : 0;
      low += flags[i * m + j].finite ? 1 : 0;
    }
    const double pu = static_cast<double>(upp) / static_cast<double>(n_samples);
    const double pl = static_cast<double>(low) / static_cast<double>(n_samples);
    out.push_back({t_grid[j], pu, binomial_se(pu, n_samples), pl, binomial_se(pl, n_samples)});
  }
  return out;
}

}  // namespace rtp
