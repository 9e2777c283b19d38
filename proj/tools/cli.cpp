#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "rtp/core_model.hpp"
#include "rtp/error.hpp"
#include "rtp/higher_level.hpp"
#include "rtp/meanfield.hpp"
#include "rtp/particle_sim.hpp"
#include "rtp/rng.hpp"
#include "rtp/tree_engine.hpp"
#include "rtp/util.hpp"
#include "rtp/variate.hpp"

namespace rtp::cli {

namespace {

// Bad flag values detected after parsing; reported with exit code 2.
struct ConfigFailure {
  std::string flag;
  std::string message;
};

template <typename F>
auto for_flag(const std::string& flag, F&& build) {
  try {
    return build();
  } catch (const Error& e) {
    throw ConfigFailure{flag, e.what()};
  }
}

std::string rational(std::string text) {
  const auto slash = text.find('/');
  auto number = [](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw CLI::ValidationError("'" + s + "' is not a number");
    }
    if (used != s.size()) throw CLI::ValidationError("'" + s + "' is not a number");
    return v;
  };
  if (slash == std::string::npos) return format_double(number(text));
  const double den = number(text.substr(slash + 1));
  if (den == 0.0) throw CLI::ValidationError("zero denominator in '" + text + "'");
  return format_double(number(text.substr(0, slash)) / den);
}

std::string fmt(const char* spec, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

std::string short_num(double x) { return fmt("%.6g", x); }

struct FamilyOptions {
  std::string preset = "coop";
  std::string file;
  double alpha = 4.5;
  double beta = 0.0;
  double gamma = 1.0;
  double s = 0.0;
  double u = 1.0;
  double nu0 = 1.0;
  double nu1 = 0.0;
};

struct Settings {
  FamilyOptions family;
  Seed seed = kDefaultSeed;
  unsigned threads = 1;
  std::string out;
  double t = 1.0;
  double dt = 0.0;
  double p0 = 0.5;
  double r0 = 0.75;
  double q0 = -1.0;
  std::vector<double> mu0;
  std::size_t samples = 10'000;
  std::size_t budget = kDefaultNodeBudget;
  std::vector<double> t_grid{1.0, 2.0, 4.0, 8.0};
  std::size_t pool = 200'000;
  std::size_t sweeps = 300;
  std::string stats;
  std::string tree_dump;
  std::string manifest;
  std::size_t n_sites = 10'000;
  std::vector<double> checkpoints;
};

void add_family(CLI::App* sub, FamilyOptions& f) {
  sub->add_option("--preset", f.preset, "Model family")
      ->check(CLI::IsMember({"coop", "coop-birth", "moran"}))
      ->capture_default_str();
  sub->add_option("--family", f.file, "Family config file (overrides --preset)");
  sub->add_option("--alpha", f.alpha, "Branching rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--beta", f.beta, "Birth rate (coop-birth)")->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--gamma", f.gamma, "Cooperative rate (moran)")->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--s", f.s, "Selection rate (moran)")->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--u", f.u, "Mutation rate (moran)")->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--nu0", f.nu0, "Mutation law at 0 (moran)")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  sub->add_option("--nu1", f.nu1, "Mutation law at 1 (moran)")->check(CLI::Range(0.0, 1.0))->capture_default_str();
}

void add_common(CLI::App* sub, Settings& s) {
  sub->add_option("--seed", s.seed, "Random seed")->capture_default_str();
  sub->add_option("--threads", s.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--out", s.out, "Output CSV path");
}

void add_initial(CLI::App* sub, Settings& s) {
  sub->add_option("--p0", s.p0, "Initial probability of state 1 (decimal or a/b)")
      ->transform(rational)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  sub->add_option("--mu0", s.mu0, "Initial law as comma separated weights (overrides --p0)")->delimiter(',');
}

MapFamily build_family(const FamilyOptions& f) {
  if (!f.file.empty()) return for_flag("--family", [&] { return load_family(f.file); });
  if (f.preset == "coop") return for_flag("--alpha", [&] { return presets::coop(f.alpha); });
  if (f.preset == "coop-birth") return for_flag("--beta", [&] { return presets::coop_birth(f.alpha, f.beta); });
  return for_flag("--nu0", [&] { return presets::moran(f.gamma, f.s, f.u, f.nu0, f.nu1); });
}

Dist initial_law(const Settings& s, const MapFamily& family) {
  if (!s.mu0.empty()) {
    if (s.mu0.size() != family.space().size())
      throw ConfigFailure{"--mu0", "needs " + std::to_string(family.space().size()) + " weights"};
    return for_flag("--mu0", [&] { return Dist(s.mu0); });
  }
  if (family.space().size() != 2) throw ConfigFailure{"--p0", "only valid for S = {0,1}; use --mu0"};
  return Dist::bernoulli(s.p0);
}

std::ofstream open_output(const std::string& path, const std::string& flag) {
  std::ofstream f(path);
  if (!f) throw ConfigFailure{flag, "cannot write '" + path + "'"};
  f.precision(17);
  return f;
}

void write_json(const std::string& path, const std::string& flag, const nlohmann::ordered_json& j) {
  auto f = open_output(path, flag);
  f << j.dump(2) << "\n";
}

std::string law_string(const Dist& d) {
  std::string s = "[";
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? "," : "") + short_num(d[i]);
  return s + "]";
}

void check_grid(const std::vector<double>& grid, const std::string& flag) {
  if (grid.empty()) throw ConfigFailure{flag, "must not be empty"};
  for (double t : grid)
    if (!(t >= 0.0)) throw ConfigFailure{flag, "times must be >= 0"};
  if (!std::is_sorted(grid.begin(), grid.end())) throw ConfigFailure{flag, "times must be increasing"};
}

// ---------------------------------------------------------------------------

int cmd_meanfield(const Settings& s, std::ostream& out) {
  const MapFamily family = build_family(s.family);
  const Dist mu0 = initial_law(s, family);
  if (!(s.t >= 0.0)) throw ConfigFailure{"--t", "must be >= 0"};
  if (s.dt < 0.0) throw ConfigFailure{"--dt", "must be > 0"};
  const double dt = s.dt > 0.0 ? s.dt : default_dt(family);
  const Trajectory traj = solve_ode(family, mu0, s.t, dt);
  if (!s.out.empty()) {
    auto f = open_output(s.out, "--out");
    traj.write_csv(f);
  }
  const Dist& last = traj.dists.back();
  if (last.size() == 2) out << "t=" << format_double(s.t) << " p=" << format_double(last[1]) << "\n";
  else out << "t=" << format_double(s.t) << " mu=" << law_string(last) << "\n";
  return 0;
}

int cmd_bivariate(const Settings& s, std::ostream& out) {
  if (s.family.alpha < 0.0) throw ConfigFailure{"--alpha", "must be >= 0"};
  const PRPoint start{s.p0, s.r0};
  if (!in_pr_domain(start)) throw ConfigFailure{"--r0", "(p0, r0) must satisfy p0 <= r0 <= min(1, 2 p0)"};
  if (!(s.t >= 0.0)) throw ConfigFailure{"--t", "must be >= 0"};
  const double dt = s.dt > 0.0 ? s.dt : 1e-3;
  const PRTrajectory traj = bivariate_ode(s.family.alpha, start, s.t, dt);
  if (!s.out.empty()) {
    auto f = open_output(s.out, "--out");
    traj.write_csv(f);
  }
  out << "t=" << format_double(s.t) << " p=" << format_double(traj.back().p) << " r=" << format_double(traj.back().r)
      << "\n";
  return 0;
}

int cmd_tree_estimate(const Settings& s, std::ostream& out) {
  const MapFamily family = build_family(s.family);
  const Dist mu0 = initial_law(s, family);
  if (!(s.t >= 0.0)) throw ConfigFailure{"--t", "must be >= 0"};
  if (s.samples == 0) throw ConfigFailure{"--samples", "must be >= 1"};
  const Estimate est = mc_estimate_Tt(family, mu0, s.t, s.samples, s.seed, {s.threads, s.budget});
  if (!s.out.empty()) {
    auto f = open_output(s.out, "--out");
    est.write_csv(f);
  }
  if (!s.tree_dump.empty()) {
    auto f = open_output(s.tree_dump, "--tree-dump");
    sample_tree(family, s.t, s.seed, 0, s.budget).write_dump(f, family);
  }
  if (est.dist.size() == 2)
    out << "P[G_t=1]=" << short_num(est.dist[1]) << "±" << short_num(est.stderrs[1]) << " samples=" << est.samples
        << "\n";
  else
    out << "law=" << law_string(est.dist) << " samples=" << est.samples << "\n";
  return 0;
}

int cmd_uniqueness(const Settings& s, std::ostream& out) {
  const MapFamily family = build_family(s.family);
  check_grid(s.t_grid, "--t-grid");
  if (s.samples == 0) throw ConfigFailure{"--samples", "must be >= 1"};
  const UniquenessScan scan = uniqueness_scan(family, s.t_grid, s.samples, s.seed, {s.threads, s.budget});
  if (!s.out.empty()) {
    auto f = open_output(s.out, "--out");
    f << "t,fraction,stderr\n";
    for (std::size_t i = 0; i < scan.times.size(); ++i)
      f << format_double(scan.times[i]) << ',' << format_double(scan.fraction[i]) << ','
        << format_double(scan.stderrs[i]) << "\n";
  }
  out << "t=" << format_double(scan.times.back()) << " P[constant]=" << short_num(scan.fraction.back()) << "±"
      << short_num(scan.stderrs.back()) << " samples=" << s.samples << "\n";
  return 0;
}

int cmd_hlrde(const Settings& s, std::ostream& out) {
  if (coop_fixed_points(s.family.alpha).size() < 3) throw ConfigFailure{"--alpha", "middle branch needs alpha > 4"};
  if (s.pool < 2) throw ConfigFailure{"--pool", "must be >= 2"};
  const HLRun run = solve_hl_rde(s.family.alpha, s.pool, s.sweeps, s.seed, s.threads);
  const PoolStats st = pool_stats(run.pool);
  if (!s.out.empty()) {
    auto f = open_output(s.out, "--out");
    write_cdf_csv(f, st);
  }
  if (!s.stats.empty()) {
    nlohmann::ordered_json j;
    j["alpha"] = s.family.alpha;
    j["M"] = s.pool;
    j["sweeps"] = s.sweeps;
    j["seed"] = s.seed;
    j["mean"] = st.mean;
    j["m2"] = st.m2;
    j["atom0"] = st.atom0;
    j["atom1"] = st.atom1;
    j["converged"] = run.converged;
    write_json(s.stats, "--stats", j);
  }
  out << "mean=" << short_num(st.mean) << "±" << short_num(st.mean_se) << ", m2=" << short_num(st.m2) << "±"
      << short_num(st.m2_se) << ", atom0=" << short_num(st.atom0) << "±" << short_num(st.atom0_se)
      << ", atom1=" << short_num(st.atom1) << "\n";
  if (!run.converged)
    throw Error(ErrorKind::NotConverged, "pool statistics still moving after " + std::to_string(s.sweeps) + " sweeps");
  return 0;
}

std::vector<double> checkpoint_grid(const Settings& s) {
  if (!(s.t >= 0.0)) throw ConfigFailure{"--t", "must be >= 0"};
  if (!s.checkpoints.empty()) {
    check_grid(s.checkpoints, "--checkpoints");
    if (s.checkpoints.back() > s.t) throw ConfigFailure{"--checkpoints", "must not exceed --t"};
    return s.checkpoints;
  }
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(s.t * i / 10.0);
  return grid;
}

nlohmann::ordered_json manifest_base(const Settings& s, const MapFamily& family, std::uint64_t events) {
  nlohmann::ordered_json j;
  j["seed"] = s.seed;
  j["N"] = s.n_sites;
  j["t_rescaled"] = s.t;
  nlohmann::ordered_json rates = nlohmann::ordered_json::array();
  for (const auto& e : family.entries()) rates.push_back({{"map", e.map.name()}, {"rate", e.rate}});
  j["rates"] = rates;
  j["event_count"] = events;
  return j;
}

int cmd_particle(const Settings& s, std::ostream& out) {
  const MapFamily family = build_family(s.family);
  const Dist mu0 = initial_law(s, family);
  if (s.n_sites == 0) throw ConfigFailure{"--N", "must be >= 1"};
  const auto grid = checkpoint_grid(s);
  const RunResult r = run(wrap(family), iid_state(s.n_sites, mu0, s.seed), s.t, s.seed, grid);
  if (!s.out.empty()) {
    auto f = open_output(s.out, "--out");
    r.write_csv(f);
  }
  if (!s.manifest.empty()) write_json(s.manifest, "--manifest", manifest_base(s, family, r.events));
  const Dist& last = r.laws.back();
  const double n = static_cast<double>(s.n_sites);
  if (last.size() == 2)
    out << "t=" << format_double(r.times.back()) << " p=" << short_num(last[1]) << "±"
        << short_num(std::sqrt(last[1] * (1 - last[1]) / n)) << " events=" << r.events << "\n";
  else
    out << "t=" << format_double(r.times.back()) << " mu=" << law_string(last) << " events=" << r.events << "\n";
  return 0;
}

int cmd_coupled(const Settings& s, std::ostream& out) {
  const MapFamily family = build_family(s.family);
  if (family.space().size() != 2) throw ConfigFailure{"--family", "coupled runs report (p, r) and need S = {0,1}"};
  if (s.n_sites == 0) throw ConfigFailure{"--N", "must be >= 1"};
  const double q0 = s.q0 < 0.0 ? s.p0 : s.q0;
  const auto grid = checkpoint_grid(s);
  std::vector<SystemState> inits{iid_state(s.n_sites, Dist::bernoulli(s.p0), s.seed, 1),
                                 iid_state(s.n_sites, Dist::bernoulli(q0), s.seed, 2)};
  const CoupledResult r = run_coupled(wrap(family), std::move(inits), s.t, s.seed, grid);
  if (!s.out.empty()) {
    auto f = open_output(s.out, "--out");
    r.write_csv(f);
  }
  if (!s.manifest.empty()) write_json(s.manifest, "--manifest", manifest_base(s, family, r.events));
  const PRPoint pr = PairDist::from_dist(r.joint.back()).to_pr();
  const double n = static_cast<double>(s.n_sites);
  out << "t=" << format_double(r.times.back()) << " p=" << short_num(pr.p) << "±"
      << short_num(std::sqrt(pr.p * (1 - pr.p) / n)) << " r=" << short_num(pr.r) << "±"
      << short_num(std::sqrt(pr.r * (1 - pr.r) / n)) << " events=" << r.events << "\n";
  return 0;
}

int cmd_duality(const Settings& s, std::ostream& out) {
  const MapFamily family = build_family(s.family);
  if (!family.is_monotone() || family.space().size() != 2)
    throw ConfigFailure{"--family", "duality needs a monotone family on {0,1}"};
  check_grid(s.t_grid, "--t-grid");
  if (s.samples == 0) throw ConfigFailure{"--samples", "must be >= 1"};
  const auto points = duality_estimate(family, s.t_grid, s.samples, s.seed, {s.threads, s.budget});
  if (!s.out.empty()) {
    auto f = open_output(s.out, "--out");
    f << "t,nu_upp_1,nu_upp_se,nu_low_1,nu_low_se\n";
    for (const auto& p : points)
      f << format_double(p.t) << ',' << format_double(p.nu_upp_1) << ',' << format_double(p.nu_upp_se) << ','
        << format_double(p.nu_low_1) << ',' << format_double(p.nu_low_se) << "\n";
  }
  const auto& last = points.back();
  out << "t=" << format_double(last.t) << " upper=" << short_num(last.nu_upp_1) << "±" << short_num(last.nu_upp_se)
      << " lower=" << short_num(last.nu_low_1) << "±" << short_num(last.nu_low_se) << "\n";
  return 0;
}

// Only the chosen subcommand; options left unset with no default are omitted
// so that reading the file back leaves them unset.
std::string dump_config(const CLI::App& sub) {
  std::ostringstream o;
  o << "[" << sub.get_name() << "]\n";
  for (const CLI::Option* opt : sub.get_options()) {
    if (!opt->get_configurable() || opt->get_lnames().empty()) continue;
    const std::string& key = opt->get_lnames().front();
    if (opt->count() == 0) {
      if (!opt->get_default_str().empty()) o << key << "=" << opt->get_default_str() << "\n";
      continue;
    }
    const auto& vals = opt->results();
    if (opt->get_items_expected_max() > 1) {
      o << key << "=[";
      for (std::size_t i = 0; i < vals.size(); ++i) o << (i ? "," : "") << vals[i];
      o << "]\n";
    } else {
      o << key << "=\"" << vals.back() << "\"\n";
    }
  }
  return o.str();
}

}  // namespace

int parse_and_run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean-field recursive tree processes: ODEs, tree Monte Carlo, population dynamics, particle systems"};
  app.name("rtp");
  app.require_subcommand(1, 1);
  app.fallthrough();
  app.set_config("--config", "", "Read flags from a config file (as written by --dump-config)");
  bool dump = false;
  app.add_flag("--dump-config", dump, "Print the effective configuration and exit")->configurable(false);

  Settings s;
  std::map<CLI::App*, std::function<int(const Settings&, std::ostream&)>> handlers;

  auto* mf = app.add_subcommand("meanfield", "Integrate the mean-field ODE");
  add_family(mf, s.family);
  add_common(mf, s);
  add_initial(mf, s);
  mf->add_option("--t", s.t, "End time")->capture_default_str();
  mf->add_option("--dt", s.dt, "RK4 step (default 1e-3 min(1, 1/|r|))");
  handlers[mf] = cmd_meanfield;

  auto* bv = app.add_subcommand("bivariate", "Integrate the (p, r) system of the cooperative model");
  bv->add_option("--alpha", s.family.alpha, "Branching rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  add_common(bv, s);
  bv->add_option("--p0", s.p0, "Initial p (decimal or a/b)")->transform(rational)->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  bv->add_option("--r0", s.r0, "Initial r (decimal or a/b)")->transform(rational)->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  bv->add_option("--t", s.t, "End time")->capture_default_str();
  bv->add_option("--dt", s.dt, "RK4 step (default 1e-3)");
  handlers[bv] = cmd_bivariate;

  auto* te = app.add_subcommand("tree-estimate", "Monte Carlo estimate of T_t(mu) on sampled trees");
  add_family(te, s.family);
  add_common(te, s);
  add_initial(te, s);
  te->add_option("--t", s.t, "Horizon")->capture_default_str();
  te->add_option("--samples", s.samples, "Number of trees")->capture_default_str();
  te->add_option("--budget", s.budget, "Node budget per tree")->capture_default_str();
  te->add_option("--tree-dump", s.tree_dump, "Write the first sampled tree as CSV");
  handlers[te] = cmd_tree_estimate;

  auto* us = app.add_subcommand("uniqueness-scan", "Fraction of trees whose G_t is constant");
  add_family(us, s.family);
  add_common(us, s);
  us->add_option("--t-grid", s.t_grid, "Horizons, comma separated")->delimiter(',')->capture_default_str();
  us->add_option("--samples", s.samples, "Number of trees")->capture_default_str();
  us->add_option("--budget", s.budget, "Node budget per tree")->capture_default_str();
  handlers[us] = cmd_uniqueness;

  auto* hl = app.add_subcommand("hlrde", "Population dynamics for the higher-level equation (middle branch)");
  hl->add_option("--preset", s.family.preset, "Model family")->check(CLI::IsMember({"coop"}))->capture_default_str();
  hl->add_option("--alpha", s.family.alpha, "Branching rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  add_common(hl, s);
  hl->add_option("--pool", s.pool, "Pool size M")->capture_default_str();
  hl->add_option("--sweeps", s.sweeps, "Number of sweeps")->capture_default_str();
  hl->add_option("--stats", s.stats, "Write summary statistics as JSON");
  handlers[hl] = cmd_hlrde;

  auto* pa = app.add_subcommand("particle", "Finite-N particle system on the complete graph");
  add_family(pa, s.family);
  add_common(pa, s);
  add_initial(pa, s);
  pa->add_option("--N", s.n_sites, "Number of sites")->capture_default_str();
  pa->add_option("--t", s.t, "Rescaled end time")->capture_default_str();
  pa->add_option("--checkpoints", s.checkpoints, "Rescaled times to record (default 11 evenly spaced)")
      ->delimiter(',');
  pa->add_option("--manifest", s.manifest, "Write a run manifest as JSON");
  handlers[pa] = cmd_particle;

  auto* cp = app.add_subcommand("coupled", "Two particle systems driven by one event stream");
  add_family(cp, s.family);
  add_common(cp, s);
  cp->add_option("--p0", s.p0, "Bernoulli parameter of replica 1 (decimal or a/b)")->transform(rational)
      ->check(CLI::Range(0.0, 1.0))->capture_default_str();
  cp->add_option("--q0", s.q0, "Bernoulli parameter of replica 2 (default: --p0)")->transform(rational)
      ->check(CLI::Range(0.0, 1.0));
  cp->add_option("--N", s.n_sites, "Number of sites")->capture_default_str();
  cp->add_option("--t", s.t, "Rescaled end time")->capture_default_str();
  cp->add_option("--checkpoints", s.checkpoints, "Rescaled times to record (default 11 evenly spaced)")
      ->delimiter(',');
  cp->add_option("--manifest", s.manifest, "Write a run manifest as JSON");
  handlers[cp] = cmd_coupled;

  auto* du = app.add_subcommand("duality", "Open-subtree estimates of the extremal fixed points");
  add_family(du, s.family);
  add_common(du, s);
  du->add_option("--t-grid", s.t_grid, "Horizons, comma separated")->delimiter(',')->capture_default_str();
  du->add_option("--samples", s.samples, "Number of trees")->capture_default_str();
  du->add_option("--budget", s.budget, "Node budget per tree")->capture_default_str();
  handlers[du] = cmd_duality;

  for (CLI::App* sub : app.get_subcommands({})) sub->configurable();
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "rtp: " << e.what() << "\n";
    return 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  if (dump) {
    out << dump_config(*chosen);
    return 0;
  }
  try {
    return handlers.at(chosen)(s, out);
  } catch (const ConfigFailure& e) {
    err << "rtp: " << e.flag << ": " << e.message << "\n";
    return 2;
  } catch (const Error& e) {
    err << "rtp: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "rtp: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace rtp::cli
