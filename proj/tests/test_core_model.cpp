#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "rtp/core_model.hpp"
#include "rtp/error.hpp"

using namespace rtp;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an rtp::Error");
  return ErrorKind::InvalidArgument;
}

StructuredFamily coop_structured(double alpha) {
  const LocalMap id3_2 = LocalMap::from_function("id", 2, 3, [](std::span<const State> x) { return x[1]; });
  const LocalMap id3_3 = LocalMap::from_function("id", 2, 3, [](std::span<const State> x) { return x[2]; });
  const LocalMap cob3 = maps::cob();
  const LocalMap dth1 = LocalMap::from_function("dth", 2, 1, [](std::span<const State>) { return State{0}; });
  return StructuredFamily(StateSpace::binary(),
                          {{alpha, {{cob3, {0, 1, 2}}, {id3_2, {1}}, {id3_3, {2}}}}, {1.0, {{dth1, {}}}}});
}

}  // namespace

TEST_CASE("state space orders") {
  const StateSpace b = StateSpace::binary();
  CHECK(b.leq(0, 1));
  CHECK_FALSE(b.leq(1, 0));
  CHECK(b.has_bounds());
  const std::pair<State, State> rel[] = {{0, 1}, {1, 2}};
  const StateSpace c = StateSpace(3).with_order(rel);
  CHECK(c.leq(0, 2));  // transitive closure
  CHECK(c == StateSpace::chain(3));
  const std::pair<State, State> cyc[] = {{0, 1}, {1, 0}};
  CHECK(kind_of([&] { (void)StateSpace(2).with_order(cyc); }) == ErrorKind::InvalidArgument);
  CHECK_FALSE(StateSpace(3).has_order());
}

TEST_CASE("local maps") {
  const LocalMap cob = maps::cob();
  CHECK(cob.input_count() == 8);
  const State x[] = {0, 1, 1};
  CHECK(cob(x) == 1);
  const State y[] = {0, 1, 0};
  CHECK(cob(y) == 0);
  CHECK(maps::dth().arity() == 0);
  CHECK(maps::dth().at(0) == 0);
  CHECK(maps::bth().at(0) == 1);
  CHECK(maps::identity().is_identity());
  CHECK(cob.is_monotone(StateSpace::binary()));
  for (std::size_t code = 0; code < 8; ++code) {
    State d[3];
    cob.decode(code, d);
    CHECK(cob.encode(d) == code);
  }
  CHECK(kind_of([] { LocalMap("bad", 2, 2, {0, 1, 1}); }) == ErrorKind::InvalidArgument);

  const LocalMap first = LocalMap::from_function("f", 2, 3, [](std::span<const State> v) { return v[0]; });
  CHECK(first.depends_on(0));
  CHECK_FALSE(first.depends_on(1));
  const std::size_t keep[] = {0};
  CHECK(first.restrict_to(keep).is_identity());
  const std::size_t wrong[] = {1};
  CHECK_THROWS_AS((void)first.restrict_to(wrong), Error);
}

TEST_CASE("flatten of the structured coop family") {
  const MapFamily flat = flatten(coop_structured(4.5));
  REQUIRE(flat.size() == 2);
  CHECK(flat[0].map.name() == "cob");
  CHECK(flat[0].map == maps::cob());
  CHECK(flat[0].rate == 4.5);
  CHECK(flat[1].map.arity() == 0);
  CHECK(flat[1].map.at(0) == 0);
  CHECK(flat[1].rate == 1.0);
}

TEST_CASE("flatten of an identity-only family is empty") {
  const LocalMap id = maps::identity();
  const StructuredFamily s(StateSpace::binary(), {{2.0, {{id, {0}}}}});
  CHECK(kind_of([&] { (void)flatten(s); }) == ErrorKind::EmptyFamily);
  const MapFamily kept = flatten(s, true);
  CHECK(kept.size() == 1);
}

TEST_CASE("flatten of a two-site branching event") {
  const LocalMap bra = maps::bra();
  const LocalMap id2 = LocalMap::from_function("id", 2, 2, [](std::span<const State> x) { return x[1]; });
  const StructuredFamily s(StateSpace::binary(), {{0.7, {{bra, {0, 1}}, {id2, {1}}}}});
  const MapFamily flat = flatten(s);
  REQUIRE(flat.size() == 1);
  CHECK(flat[0].map == maps::bra());
  CHECK(flat[0].rate == 0.7);
}

TEST_CASE("structured families reject undeclared dependencies") {
  const LocalMap bra = maps::bra();
  CHECK_THROWS_AS(StructuredFamily(StateSpace::binary(), {{1.0, {{bra, {0}}, {maps::identity(), {1}}}}}), Error);
}

TEST_CASE("wrap then flatten is the identity on effective entries") {
  for (const MapFamily& f : {presets::coop(4.5), presets::coop_birth(2, 0.3), presets::moran(1, 0.5, 0.2, 0.4, 0.6)}) {
    const MapFamily back = flatten(wrap(f));
    REQUIRE(back.size() == f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
      CHECK(back[i].map.table().size() == f[i].map.table().size());
      CHECK(std::equal(back[i].map.table().begin(), back[i].map.table().end(), f[i].map.table().begin()));
      CHECK(back[i].rate == f[i].rate);
    }
  }
}

TEST_CASE("presets") {
  const MapFamily coop = presets::coop(4.5);
  CHECK(coop.total_rate() == 5.5);
  const auto c = constants(coop);
  CHECK(c.K == 8.0);
  CHECK(c.L == 19.0);
  CHECK_FALSE(c.subcritical);

  const MapFamily dead = presets::coop(0.0);
  CHECK(dead.size() == 1);
  CHECK(dead[0].map.arity() == 0);

  const MapFamily m = presets::moran(0, 0.8, 0, 1, 0);
  REQUIRE(m.size() == 1);
  CHECK(m[0].map == maps::bra());

  CHECK(kind_of([] { (void)presets::coop(-1); }) == ErrorKind::NegativeRate);
  CHECK(kind_of([] { (void)presets::moran(1, 1, 1, 0.3, 0.3); }) == ErrorKind::InvalidArgument);
  CHECK(presets::coop_birth(1, 2).size() == 3);
}

TEST_CASE("subcriticality of coop is alpha <= 1/2") {
  for (double alpha : {0.0, 0.1, 0.25, 0.5, 0.5000001, 0.75, 4.5}) {
    const auto c = constants(presets::coop(alpha));
    CHECK(c.K == doctest::Approx(2 * alpha - 1));
    CHECK(c.subcritical == (alpha <= 0.5));
  }
  const MapFamily id(StateSpace::binary(), {{maps::identity(), 1.0}});
  CHECK(constants(id).K == 0.0);
  CHECK_FALSE(constants(id).subcritical);
}

TEST_CASE("K = L - 2|r| on random families") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> rate(0.0, 5.0);
  const LocalMap pool[] = {maps::cob(), maps::dth(), maps::bth(), maps::bra(), maps::identity()};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<MapEntry> entries;
    for (const auto& g : pool) entries.push_back({g, rate(gen)});
    const MapFamily f(StateSpace::binary(), entries);
    const auto c = constants(f);
    CHECK(c.K == doctest::Approx(c.L - 2 * f.total_rate()).epsilon(1e-14));
  }
}

TEST_CASE("coop with birth is monotone") {
  const MapFamily f = presets::coop_birth(3, 0.5);
  CHECK(f.is_monotone());
  for (const auto& e : f.entries()) CHECK(e.map.is_monotone(f.space()));
}

TEST_CASE("zero rates are pruned and choose follows rates") {
  const MapFamily f(StateSpace::binary(), {{maps::cob(), 3.0}, {maps::bth(), 0.0}, {maps::dth(), 1.0}});
  CHECK(f.size() == 2);
  CHECK(f.choose(0.0) == 0);
  CHECK(f.choose(0.74) == 0);
  CHECK(f.choose(0.76) == 1);
  CHECK(f.mean_arity() == doctest::Approx(9.0 / 4.0));
  CHECK(kind_of([] { MapFamily(StateSpace::binary(), {{maps::cob(), 0.0}}); }) == ErrorKind::EmptyFamily);
}

TEST_CASE("distributions renormalize") {
  const Dist d(std::vector<double>{2.0, 6.0});
  CHECK(d[0] == doctest::Approx(0.25));
  CHECK(d[1] == doctest::Approx(0.75));
  CHECK_THROWS_AS(Dist(std::vector<double>{-0.5, 1.0}), Error);
  CHECK(Dist::bernoulli(0.3)[1] == doctest::Approx(0.3));
  CHECK(Dist::delta(3, 2)[2] == 1.0);
}

TEST_CASE("family config round trip") {
  const MapFamily f = presets::moran(1.5, 0.5, 0.2, 0.25, 0.75);
  std::istringstream in(format_family(f));
  const MapFamily g = parse_family(in);
  REQUIRE(g.size() == f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    CHECK(g[i].map == f[i].map);
    CHECK(g[i].rate == f[i].rate);
  }
  CHECK(g.space() == f.space());

  std::istringstream table("states = 3\norder = 0<1 1<2\nmap.up = table 1 1 2 2\nrate.up = 2\n");
  const MapFamily t = parse_family(table);
  CHECK(t.space() == StateSpace::chain(3));
  CHECK(t[0].map.at(0) == 1);

  std::istringstream bad("states = 2\nrate.nosuch = 1\n");
  CHECK(kind_of([&] { (void)parse_family(bad); }) == ErrorKind::ConfigError);
}
