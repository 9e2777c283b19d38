#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::initializer_list<std::string> args) {
  std::vector<std::string> owned{"rtp"};
  owned.insert(owned.end(), args);
  std::vector<const char*> argv;
  for (const auto& a : owned) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = rtp::cli::parse_and_run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "rtp_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("meanfield prints the final state") {
  const Outcome o = invoke({"meanfield", "--alpha", "0", "--p0", "0.8", "--t", "1"});
  CHECK(o.code == 0);
  CHECK(o.out.rfind("t=1 p=0.29430355", 0) == 0);
}

TEST_CASE("rational inputs") {
  const Outcome o = invoke({"bivariate", "--alpha", "4.5", "--p0", "1/3", "--r0", "5/9", "--t", "40"});
  CHECK(o.code == 0);
  CHECK(o.out.find("p=0.33333") != std::string::npos);
  CHECK(o.out.find("r=0.42264") != std::string::npos);
}

TEST_CASE("configuration errors exit with 2") {
  CHECK(invoke({"meanfield", "--alpha", "-1"}).code == 2);
  CHECK(invoke({"meanfield", "--p0", "1.5"}).code == 2);
  CHECK(invoke({"nosuch"}).code == 2);
  CHECK(invoke({}).code == 2);
  CHECK(invoke({"bivariate", "--p0", "0.2", "--r0", "0.5"}).code == 2);
  CHECK(invoke({"hlrde", "--alpha", "3"}).code == 2);
  const Outcome o = invoke({"meanfield", "--mu0", "1,2,3"});
  CHECK(o.code == 2);
  CHECK(o.err.find("--mu0") != std::string::npos);
}

TEST_CASE("runtime errors exit with 1") {
  const Outcome o = invoke({"tree-estimate", "--alpha", "4.5", "--t", "5", "--samples", "10", "--budget", "100"});
  CHECK(o.code == 1);
  CHECK(o.err.find("BudgetExceeded") != std::string::npos);
}

TEST_CASE("csv output and config round trip") {
  const fs::path csv = scratch("mf.csv");
  const fs::path cfg = scratch("mf.toml");
  const Outcome dumped =
      invoke({"meanfield", "--alpha", "2.5", "--p0", "0.4", "--t", "0.5", "--out", csv.string(), "--dump-config"});
  REQUIRE(dumped.code == 0);
  CHECK(dumped.out.find("[meanfield]") != std::string::npos);
  std::ofstream(cfg) << dumped.out;

  const Outcome direct = invoke({"meanfield", "--alpha", "2.5", "--p0", "0.4", "--t", "0.5", "--out", csv.string()});
  REQUIRE(direct.code == 0);
  const std::string first = slurp(csv);
  CHECK(first.rfind("t,state_0,state_1\n", 0) == 0);

  fs::remove(csv);
  const Outcome loaded = invoke({"--config", cfg.string(), "meanfield"});
  REQUIRE(loaded.code == 0);
  CHECK(loaded.out == direct.out);
  CHECK(slurp(csv) == first);
}

TEST_CASE("output is independent of the thread count") {
  const fs::path a = scratch("te1.csv");
  const fs::path b = scratch("te2.csv");
  const Outcome one = invoke({"tree-estimate", "--alpha", "4.5", "--t", "0.4", "--samples", "2000", "--p0", "0.5",
                              "--threads", "1", "--out", a.string()});
  const Outcome two = invoke({"tree-estimate", "--alpha", "4.5", "--t", "0.4", "--samples", "2000", "--p0", "0.5",
                              "--threads", "2", "--out", b.string()});
  REQUIRE(one.code == 0);
  REQUIRE(two.code == 0);
  CHECK(one.out == two.out);
  CHECK(slurp(a) == slurp(b));
}

TEST_CASE("coupled runs write a manifest") {
  const fs::path csv = scratch("cp.csv");
  const fs::path man = scratch("cp.json");
  const Outcome o = invoke({"coupled", "--alpha", "4.5", "--p0", "0.5", "--q0", "0.6", "--N", "200", "--t", "0.5",
                            "--out", csv.string(), "--manifest", man.string()});
  REQUIRE(o.code == 0);
  CHECK(slurp(csv).rfind("t_rescaled,p,r\n", 0) == 0);
  CHECK(slurp(man).find("\"seed\"") != std::string::npos);
}
