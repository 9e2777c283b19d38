#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "rtp/error.hpp"
#include "rtp/meanfield.hpp"
#include "rtp/tree_engine.hpp"

using namespace rtp;

namespace {

// Root needs child 3 (child 1 is dead); 3 is forced to 0 through 31 and 33.
constexpr const char* kMinimalTree = "cob(dth,cob(cob(dth,dth,dth),*,*),cob(cob(dth,dth,*),cob(dth,*,*),cob(dth,*,dth)))";
// Root needs 2 and 3; 3 opens either through 31 (via the birth at 312) or through 32 and 33.
constexpr const char* kOpenTree = "cob(dth,cob(dth,*,*),cob(cob(dth,bth,*),cob(dth,*,*),cob(dth,*,bth)))";

std::set<std::string> words(const MarkedTree& tree, const std::vector<NodeId>& ids) {
  std::set<std::string> out;
  for (NodeId id : ids) out.insert(tree.word_string(id));
  return out;
}

std::set<std::set<std::string>> leaf_sets(const MarkedTree& tree, const std::vector<std::vector<std::size_t>>& sets) {
  std::set<std::set<std::string>> out;
  for (const auto& s : sets) {
    std::set<std::string> w;
    for (std::size_t pos : s) w.insert(tree.word_string(tree.leaves()[pos]));
    out.insert(w);
  }
  return out;
}

LeafAssignment constant(const MarkedTree& tree, State v) { return LeafAssignment(tree.leaves().size(), v); }

}  // namespace

TEST_CASE("horizon zero is a single boundary node") {
  const MarkedTree tree = sample_tree(presets::coop(4.5), 0.0, 1);
  CHECK(tree.size() == 1);
  REQUIRE(tree.leaves().size() == 1);
  const State x[] = {1};
  CHECK(evaluate(tree, presets::coop(4.5), x) == 1);
}

TEST_CASE("death only trees") {
  const MapFamily death(StateSpace::binary(), {{maps::dth(), 1.0}});
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    const MarkedTree tree = sample_tree(death, 1.0, 9, rep);
    CHECK(tree.size() == 1);
    if (tree.leaves().empty()) CHECK(evaluate(tree, death, {}) == 0);
  }
}

TEST_CASE("sampled trees respect their invariants") {
  const MapFamily f = presets::coop_birth(4.5, 0.5);
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    const MarkedTree tree = sample_tree(f, 0.8, 3, rep);
    for (NodeId id = 0; id < tree.size(); ++id) {
      const TreeNode& n = tree.node(id);
      CHECK(n.birth < n.death);
      if (n.is_leaf()) {
        CHECK(n.death > tree.horizon());
        CHECK(tree.leaf_position(id) >= 0);
      } else {
        CHECK(n.death <= tree.horizon());
        CHECK(n.child_count == f[n.map_index].map.arity());
        for (std::uint32_t j = 0; j < n.child_count; ++j) {
          const TreeNode& c = tree.node(tree.child(id, j));
          CHECK(c.parent == id);
          CHECK(c.birth == n.death);
          CHECK(c.depth == n.depth + 1);
        }
      }
    }
  }
}

TEST_CASE("truncations at different horizons are nested") {
  const MapFamily f = presets::coop(4.5);
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    const MarkedTree small = sample_tree(f, 0.3, 5, rep);
    const MarkedTree large = sample_tree(f, 0.6, 5, rep);
    for (NodeId id = 0; id < small.size(); ++id) {
      const auto other = large.find(small.word(id));
      REQUIRE(other.has_value());
      CHECK(large.node(*other).key == small.node(id).key);
      if (!small.node(id).is_leaf()) CHECK(large.node(*other).map_index == small.node(id).map_index);
    }
  }
}

TEST_CASE("sampling enforces the node budget") {
  try {
    (void)sample_tree(presets::coop(4.5), 5.0, 1, 0, 1000);
    FAIL("expected BudgetExceeded");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BudgetExceeded);
  }
}

TEST_CASE("evaluate examples") {
  const MapFamily f = presets::coop(4.5);
  const MarkedTree one = tree_from_notation(f, "cob(dth,*,*)");
  const State ones[] = {1, 1}, mixed[] = {1, 0};
  CHECK(evaluate(one, f, ones) == 1);
  CHECK(evaluate(one, f, mixed) == 0);
  const MarkedTree fig = tree_from_notation(f, "cob(dth,cob(cob(dth,dth,dth),*,*),cob(cob(dth,*,*),*,*))");
  CHECK(evaluate(fig, f, constant(fig, 1)) == 1);
  CHECK(evaluate(fig, f, constant(fig, 0)) == 0);
  CHECK_THROWS_AS(tree_from_notation(f, "cob(dth,*)"), Error);
  CHECK_THROWS_AS(tree_from_notation(f, "nosuch(*)"), Error);
}

TEST_CASE("node lookup by word") {
  const MapFamily f = presets::coop(4.5);
  const MarkedTree tree = tree_from_notation(f, kMinimalTree);
  const auto n31 = tree.find("31");
  REQUIRE(n31.has_value());
  CHECK(tree.word_string(*n31) == "31");
  CHECK(f[tree.node(*n31).map_index].map.name() == "cob");
  CHECK(tree.word_string(tree.root()) == "root");
  CHECK_FALSE(tree.find("4").has_value());
}

TEST_CASE("minimal root-determining subtree of a hand-built tree") {
  const MapFamily f = presets::coop(4.5);
  const MarkedTree tree = tree_from_notation(f, kMinimalTree);
  REQUIRE(is_root_determining(tree, f));
  const auto u = find_minimal_root_determining(tree, f);
  REQUIRE(u.has_value());
  const std::set<std::string> expect{"root", "1", "3", "31", "33", "311", "312", "331", "333"};
  CHECK(words(tree, u->members()) == expect);
  CHECK(satisfies_coop_minroot(tree, f, *u));
  CHECK(is_root_determining_brute_force(tree, f, *u));
  // dropping any member that has no member children breaks root determinism
  for (NodeId id : u->members()) {
    bool frontier = true;
    for (std::uint32_t j = 0; j < tree.node(id).child_count; ++j) frontier &= !u->contains(tree.child(id, j));
    if (!frontier || id == tree.root()) continue;
    Subtree smaller = *u;
    smaller.erase(id);
    CHECK_FALSE(is_root_determining_brute_force(tree, f, smaller));
  }
}

TEST_CASE("root-determining edge cases") {
  const MapFamily f = presets::coop(4.5);
  const MarkedTree open = tree_from_notation(f, "cob(dth,*,*)");
  CHECK_FALSE(is_root_determining(open, f));
  CHECK_FALSE(find_minimal_root_determining(open, f).has_value());
  const MarkedTree dead = tree_from_notation(f, "dth");
  const auto u = find_minimal_root_determining(dead, f);
  REQUIRE(u.has_value());
  CHECK(u->count() == 1);
}

TEST_CASE("monotone shortcut agrees with brute force") {
  const MapFamily f = presets::coop_birth(3.0, 0.3);
  int determined = 0;
  for (std::uint64_t rep = 0; rep < 500; ++rep) {
    const MarkedTree tree = sample_tree(f, 0.5, 13, rep);
    if (tree.leaves().size() > 16) continue;
    const Subtree all = Subtree::all_internal(tree);
    const bool fast = is_root_determining(tree, f);
    CHECK(fast == is_root_determining_brute_force(tree, f, all));
    determined += fast;
    if (fast) {
      const auto u = find_minimal_root_determining(tree, f);
      REQUIRE(u.has_value());
      CHECK(is_root_determining_brute_force(tree, f, *u));
    }
  }
  CHECK(determined > 0);
}

TEST_CASE("minimal one inputs") {
  using Sets = std::vector<std::vector<State>>;
  auto sorted = [](Sets s) {
    std::sort(s.begin(), s.end());
    return s;
  };
  CHECK(sorted(minimal_one_inputs(maps::cob())) == Sets{{0, 1, 1}, {1, 0, 0}});
  CHECK(minimal_one_inputs(maps::dth()).empty());
  CHECK(minimal_one_inputs(maps::bth()) == Sets{{}});
  CHECK(sorted(minimal_one_inputs(maps::bra())) == Sets{{0, 1}, {1, 0}});
}

TEST_CASE("open subtrees of a hand-built tree") {
  const MapFamily f = presets::coop_birth(4.5, 1.0);
  const MarkedTree tree = tree_from_notation(f, kOpenTree);
  const auto rep = open_subtrees(tree, f);
  CHECK(rep.exists);
  CHECK_FALSE(rep.exists_finite);
  const std::set<std::set<std::string>> expect{{"22", "23", "313"}, {"22", "23", "322", "323", "332"}};
  CHECK(leaf_sets(tree, rep.minimal_one_sets) == expect);

  const MarkedTree closed = tree_from_notation(f, "cob(bth,*,*)");
  const auto fin = open_subtrees(closed, f);
  CHECK(fin.exists_finite);
  REQUIRE(fin.minimal_one_sets.size() == 1);
  CHECK(fin.minimal_one_sets[0].empty());

  const MarkedTree dead = tree_from_notation(f, "dth");
  CHECK_FALSE(open_subtrees(dead, f).exists);
}

TEST_CASE("root value is 1 exactly when a minimal one-set is covered") {
  const MapFamily f = presets::coop_birth(4.5, 0.4);
  std::mt19937_64 gen(29);
  std::bernoulli_distribution coin(0.6);
  int checked = 0;
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    const MarkedTree tree = sample_tree(f, 0.4, 31, rep);
    OpenSubtreeReport report;
    try {
      report = open_subtrees(tree, f);
    } catch (const Error& e) {
      // large trees can have more minimal one-sets than the enumeration cap
      REQUIRE(e.kind() == ErrorKind::EnumerationCap);
      continue;
    }
    ++checked;
    CHECK(report.exists == (evaluate(tree, f, constant(tree, 1)) == 1));
    CHECK(report.exists_finite == (evaluate(tree, f, constant(tree, 0)) == 1));
    for (int k = 0; k < 50; ++k) {
      LeafAssignment x(tree.leaves().size());
      for (auto& v : x) v = coin(gen) ? 1 : 0;
      bool covered = false;
      for (const auto& s : report.minimal_one_sets)
        covered |= std::all_of(s.begin(), s.end(), [&](std::size_t p) { return x[p] == 1; });
      REQUIRE(covered == (evaluate(tree, f, x) == 1));
    }
  }
  CHECK(checked >= 180);
}

TEST_CASE("lazy evaluation matches the materialized tree") {
  const MapFamily f = presets::coop_birth(4.5, 0.2);
  LazyEvaluator lazy(f, 77);
  for (std::uint64_t rep = 0; rep < 300; ++rep) {
    const MarkedTree tree = sample_tree(f, 0.7, 77, rep);
    for (State v : {State{0}, State{1}}) CHECK(lazy.evaluate(rep, 0.7, v) == evaluate(tree, f, constant(tree, v)));
  }
}

TEST_CASE("uniqueness indicators are nested in t") {
  const MapFamily f = presets::coop(2.0);
  const double grid[] = {0.5, 1.0, 2.0, 4.0};
  const auto scan = uniqueness_scan(f, grid, 2000, 19);
  for (std::size_t j = 1; j < scan.fraction.size(); ++j) CHECK(scan.fraction[j] >= scan.fraction[j - 1]);
  const double grid0[] = {0.0};
  CHECK(uniqueness_scan(f, grid0, 100, 19).fraction[0] == 0.0);
  // non-monotone families take the brute-force path
  const LocalMap flip = LocalMap::from_function("flip", 2, 1, [](std::span<const State> x) { return State(1 - x[0]); });
  const MapFamily nm(StateSpace::binary(), {{flip, 1.0}, {maps::dth(), 1.0}});
  const double g1[] = {1.0};
  const auto nms = uniqueness_scan(nm, g1, 500, 4);
  // the tree is determined iff some death happened before the horizon on the single line
  CHECK(std::abs(nms.fraction[0] - (1 - std::exp(-1.0))) < 4 * nms.stderrs[0] + 1e-12);
}

TEST_CASE("Monte Carlo estimate of T_t") {
  const MapFamily f = presets::coop(4.5);
  const Estimate at0 = mc_estimate_Tt(f, Dist::bernoulli(0.3), 0.0, 1000, 5);
  CHECK(std::abs(at0.dist[1] - 0.3) < 4 * at0.stderrs[1]);
  const Estimate e = mc_estimate_Tt(f, Dist::bernoulli(0.6), 0.3, 20000, 5);
  const double ode = evolve(f, Dist::bernoulli(0.6), 0.3, 1e-4)[1];
  CHECK(std::abs(e.dist[1] - ode) < 4 * e.stderrs[1]);
  // stationary start stays put
  const Estimate st = mc_estimate_Tt(f, Dist::bernoulli(2.0 / 3), 0.3, 20000, 6);
  CHECK(std::abs(st.dist[1] - 2.0 / 3) < 4 * st.stderrs[1]);
}

TEST_CASE("results do not depend on the thread count") {
  const MapFamily f = presets::coop(4.5);
  const Estimate a = mc_estimate_Tt(f, Dist::bernoulli(0.5), 0.4, 3000, 8, {1});
  const Estimate b = mc_estimate_Tt(f, Dist::bernoulli(0.5), 0.4, 3000, 8, {3});
  CHECK(a.dist[1] == b.dist[1]);
  const double grid[] = {0.5, 1.0};
  const auto u1 = uniqueness_scan(f, grid, 500, 8, {1});
  const auto u2 = uniqueness_scan(f, grid, 500, 8, {2});
  CHECK(u1.fraction == u2.fraction);
}

TEST_CASE("boundary growth matches e^{Kt}") {
  const MapFamily f = presets::coop(1.5);
  const double k = constants(f).K;
  const SampleMean g = boundary_growth(f, 1.0, 20000, 3);
  CHECK(std::abs(g.mean - std::exp(k)) < 4 * g.stderr);
}

TEST_CASE("duality estimates") {
  const double grid[] = {0.5, 1.0, 2.0};
  const auto birth = duality_estimate(presets::coop_birth(0.0, 1.0), grid, 4000, 3);
  for (const auto& pt : birth) {
    // only births and deaths: the root is 1 iff its first event is a birth, or it survives with a 1 boundary
    const double p_event = 1 - std::exp(-2 * pt.t);
    CHECK(std::abs(pt.nu_low_1 - 0.5 * p_event) < 4 * pt.nu_low_se + 1e-12);
    CHECK(std::abs(pt.nu_upp_1 - (0.5 * p_event + (1 - p_event))) < 4 * pt.nu_upp_se + 1e-12);
  }
  const MapFamily death(StateSpace::binary(), {{maps::dth(), 1.0}});
  const auto dead = duality_estimate(death, grid, 1000, 3);
  CHECK(dead.back().nu_low_1 == 0.0);
  CHECK(std::abs(dead.back().nu_upp_1 - std::exp(-2.0)) < 4 * dead.back().nu_upp_se + 1e-12);

  const double g2[] = {0.25, 0.5};
  const auto coop = duality_estimate(presets::coop(4.5), g2, 3000, 3);
  for (const auto& pt : coop) {
    const double ode = evolve(presets::coop(4.5), Dist::bernoulli(1.0), pt.t, 1e-4)[1];
    CHECK(std::abs(pt.nu_upp_1 - ode) < 4 * pt.nu_upp_se);
    CHECK(pt.nu_low_1 == 0.0);
  }
}

TEST_CASE("tree dump") {
  const MapFamily f = presets::coop(4.5);
  const MarkedTree tree = tree_from_notation(f, "cob(dth,*,*)");
  std::ostringstream out;
  tree.write_dump(out, f);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "id,parent,map_name,tau_birth,tau_death,is_leaf");
  std::getline(in, line);
  CHECK(line.rfind("0,-1,cob,", 0) == 0);
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
}
