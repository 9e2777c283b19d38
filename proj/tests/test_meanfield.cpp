#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "rtp/error.hpp"
#include "rtp/meanfield.hpp"

using namespace rtp;

TEST_CASE("apply_Tg examples") {
  const Dist half = Dist::bernoulli(0.5);
  CHECK(apply_Tg(maps::cob(), half)[1] == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(apply_Tg(maps::dth(), Dist::bernoulli(0.9))[0] == 1.0);
  const Dist mu(std::vector<double>{0.2, 0.5, 0.3});
  const Dist same = apply_Tg(maps::identity(3), mu);
  for (std::size_t s = 0; s < 3; ++s) CHECK(same[s] == doctest::Approx(mu[s]));
}

TEST_CASE("apply_Tg matches the recursive push-forward oracle") {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> val(0, 2);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const LocalMap g = LocalMap::from_function("rand", 3, 4, [&](std::span<const State>) { return State(val(gen)); });
    std::vector<double> mu{w(gen), w(gen), w(gen)};
    const Dist d(mu);
    const auto expect = oracle::push_forward(g, std::vector<double>(d.weights().begin(), d.weights().end()));
    const Dist got = apply_Tg(g, d);
    for (std::size_t s = 0; s < 3; ++s) CHECK(got[s] == doctest::Approx(expect[s]).epsilon(1e-13));
  }
}

TEST_CASE("apply_Tg enforces the enumeration cap") {
  const LocalMap big = LocalMap::from_function("big", 2, 12, [](std::span<const State> x) { return x[0]; });
  try {
    (void)apply_Tg(big, Dist::bernoulli(0.5), 1000);
    FAIL("expected ArityOverflow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ArityOverflow);
  }
}

TEST_CASE("apply_T on coop") {
  CHECK(apply_T(presets::coop(4.5), Dist::delta(2, 0))[0] == 1.0);
  CHECK(apply_T(presets::coop(4.5), Dist::bernoulli(1.0 / 3))[1] == doctest::Approx(1.0 / 3).epsilon(1e-14));
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double alpha = 10 * u(gen), p = u(gen);
    const Dist out = apply_T(presets::coop(alpha), Dist::bernoulli(p));
    CHECK(out[1] == doctest::Approx(oracle::coop_T(alpha, p)).epsilon(1e-13));
    CHECK(std::abs(out[0] + out[1] - 1.0) < 1e-12);
  }
}

TEST_CASE("apply_T preserves the simplex") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const MapFamily f = presets::moran(1.3, 0.7, 0.4, 0.3, 0.7);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> raw{u(gen), u(gen)};
    const double total = raw[0] + raw[1];
    const Dist mu({raw[0] / total, raw[1] / total});
    std::vector<double> out(2);
    apply_T_raw(f, mu.weights(), out);
    CHECK(std::abs(out[0] + out[1] - 1.0) < 1e-12);
    CHECK(out[0] >= 0.0);
  }
}

TEST_CASE("apply_T is monotone for monotone families") {
  const MapFamily f = presets::coop_birth(3.0, 0.4);
  REQUIRE(f.is_monotone());
  for (int i = 0; i <= 20; ++i)
    for (int j = i; j <= 20; ++j)
      CHECK(apply_T(f, Dist::bernoulli(i / 20.0))[1] <= apply_T(f, Dist::bernoulli(j / 20.0))[1] + 1e-15);
}

TEST_CASE("ode attractors for coop(4.5)") {
  const MapFamily f = presets::coop(4.5);
  CHECK(evolve(f, Dist::bernoulli(0.5), 20, default_dt(f))[1] == doctest::Approx(2.0 / 3).epsilon(1e-6));
  CHECK(evolve(f, Dist::bernoulli(0.3), 20, default_dt(f))[1] < 1e-4);
  // scalar oracle at an intermediate time
  CHECK(evolve(f, Dist::bernoulli(0.5), 1.3, default_dt(f))[1] ==
        doctest::Approx(oracle::coop_p(4.5, 0.5, 1.3)).epsilon(1e-9));
}

TEST_CASE("death only decays exponentially") {
  const MapFamily f = presets::coop(0.0);
  const Trajectory traj = solve_ode(f, Dist::bernoulli(0.8), 3.0, 1e-3);
  CHECK(traj.times.front() == 0.0);
  CHECK(traj.times.back() == 3.0);
  for (std::size_t i = 0; i < traj.times.size(); i += 97)
    CHECK(std::abs(traj.dists[i][1] - 0.8 * std::exp(-traj.times[i])) < 1e-8);
  for (std::size_t i = 1; i < traj.times.size(); ++i) REQUIRE(traj.times[i] > traj.times[i - 1]);
}

TEST_CASE("rk4 converges with order about four") {
  const MapFamily f = presets::coop(4.5);
  const double exact = evolve(f, Dist::bernoulli(0.5), 1.0, 1e-4)[1];
  const double e1 = std::abs(evolve(f, Dist::bernoulli(0.5), 1.0, 0.02)[1] - exact);
  const double e2 = std::abs(evolve(f, Dist::bernoulli(0.5), 1.0, 0.01)[1] - exact);
  CHECK(std::log2(e1 / e2) >= 3.5);
}

TEST_CASE("oversized steps are reported") {
  try {
    const MapFamily death(StateSpace::binary(), {{maps::dth(), 1.0}});
    (void)evolve(death, Dist::bernoulli(0.5), 10.0, 3.0);
    FAIL("expected StepTooLarge");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::StepTooLarge);
  }
}

TEST_CASE("coop fixed points") {
  const auto z45 = coop_fixed_points(4.5);
  REQUIRE(z45.size() == 3);
  CHECK(z45[0] == 0.0);
  CHECK(std::abs(z45[1] - 1.0 / 3) < 1e-12);
  CHECK(std::abs(z45[2] - 2.0 / 3) < 1e-12);
  const auto z4 = coop_fixed_points(4.0);
  REQUIRE(z4.size() == 2);
  CHECK(z4[1] == 0.5);
  CHECK(coop_fixed_points(2.0).size() == 1);
  for (double alpha : {4.0, 4.1, 4.5, 7.0, 10.0, 100.0})
    for (double z : coop_fixed_points(alpha)) CHECK(std::abs(alpha * z * z * (1 - z) - z) < 1e-12);
}

TEST_CASE("find_fixed_point") {
  const auto up = find_fixed_point(presets::coop(4.5), Dist::bernoulli(0.9));
  CHECK(up.converged);
  CHECK(up.limit[1] == doctest::Approx(2.0 / 3).epsilon(1e-8));
  const auto low = find_fixed_point(presets::coop(2.0), Dist::bernoulli(0.99));
  CHECK(low.converged);
  CHECK(std::abs(low.limit[1]) < 1e-8);
  const MapFamily id(StateSpace(3), {{maps::identity(3), 1.0}});
  const Dist mu(std::vector<double>{0.1, 0.6, 0.3});
  const auto same = find_fixed_point(id, mu);
  CHECK(same.converged);
  CHECK(tv_distance(same.limit, mu) < 1e-14);
}

TEST_CASE("total variation") {
  CHECK(tv_distance(Dist::delta(2, 0), Dist::delta(2, 1)) == 1.0);
  CHECK(tv_distance(Dist::bernoulli(0.3), Dist::bernoulli(0.3)) == 0.0);
  CHECK(tv_distance(Dist(std::vector<double>{0.7, 0.3}), Dist::bernoulli(0.5)) == doctest::Approx(0.2));
}

TEST_CASE("contraction bound") {
  const auto sub = verify_contraction(presets::coop(0.25), Dist::bernoulli(0.9), Dist::bernoulli(0.1), 2.0);
  CHECK(sub.holds);
  CHECK(sub.ratio <= std::exp(-1.0));
  const auto same = verify_contraction(presets::coop(4.5), Dist::bernoulli(0.4), Dist::bernoulli(0.4), 1.0);
  CHECK(same.holds);
  CHECK(same.final_distance == 0.0);
  const auto super = verify_contraction(presets::coop(4.5), Dist::bernoulli(0.3), Dist::bernoulli(0.4), 5.0);
  CHECK(super.holds);
  CHECK(super.ratio > 1.0);
}

TEST_CASE("trajectory csv") {
  const Trajectory traj = solve_ode(presets::coop(1.0), Dist::bernoulli(0.5), 0.002, 1e-3);
  std::ostringstream out;
  traj.write_csv(out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "t,state_0,state_1");
  std::getline(in, line);
  CHECK(line == "0,0.5,0.5");
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
}
