#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "sievei/cli.hpp"
#include "sievei/mc.hpp"

using namespace sievei;

namespace {

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("sievei");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string kv_lookup(const std::string& csv, const std::string& key) {
  std::stringstream ss(csv);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.rfind(key + ",", 0) == 0) return line.substr(key.size() + 1);
  }
  return "";
}

// Synthetic NPQIV sample written once for the data-driven commands.
const std::string& demo_csv() {
  static const std::string path = [] {
    DGPSpec dgp;
    dgp.kind = ModelKind::NPQIV;
    dgp.gamma = 0.5;
    dgp.n = 300;
    dgp.seed = 123;
    RngStream rng(dgp.seed, 0);
    const Dataset d = gen_dgp(dgp, rng);
    Table t;
    t.columns = {"y1", "y2", "x"};
    for (Eigen::Index i = 0; i < d.n; ++i)
      t.add_row({Cell{d.y1(i)}, Cell{d.y2(i)}, Cell{d.x(i, 0)}});
    const std::string p = "/tmp/sievei_cli_demo.csv";
    write_table(t, p);
    return p;
  }();
  return path;
}

}  // namespace

TEST_CASE("fit writes a report and a curve file") {
  const int code = run({"fit", "--data", demo_csv(), "--model", "npiv",
                        "--qbasis", "pol:3", "--pbasis", "pol:5", "--lambda",
                        "1e-5", "--out", "/tmp/sievei_fit.csv"});
  CHECK(code == 0);
  const std::string rep = slurp("/tmp/sievei_fit.csv");
  CHECK(kv_lookup(rep, "converged") == "true");
  CHECK(!kv_lookup(rep, "qhat").empty());
  CHECK(!slurp("/tmp/sievei_fit.csv.curve.csv").empty());
}

TEST_CASE("missing --data exits with the config code") {
  CHECK(run({"fit", "--model", "npiv"}) == 2);
}

TEST_CASE("npqiv fit on synthetic data converges") {
  const int code = run({"fit", "--data", demo_csv(), "--model", "npqiv",
                        "--gamma", "0.5", "--qbasis", "pol:3", "--pbasis",
                        "pol:5", "--lambda", "2e-4", "--restarts", "2",
                        "--out", "/tmp/sievei_fit_q.csv"});
  CHECK(code == 0);
  CHECK(kv_lookup(slurp("/tmp/sievei_fit_q.csv"), "converged") == "true");
  CHECK(kv_lookup(slurp("/tmp/sievei_fit_q.csv"), "method") == "simplex");
}

TEST_CASE("sqlr test at the fitted value is not rejected") {
  // First fit to learn phi_hat, then test against it.
  REQUIRE(run({"fit", "--data", demo_csv(), "--model", "npqiv", "--qbasis",
               "pol:3", "--pbasis", "pol:5", "--lambda", "2e-4", "--restarts",
               "1", "--out", "/tmp/sievei_fit_phi.csv"}) == 0);
  const std::string beta0 =
      kv_lookup(slurp("/tmp/sievei_fit_phi.csv"), "beta_0");
  REQUIRE(!beta0.empty());
  const int code =
      run({"test", "--data", demo_csv(), "--model", "npqiv", "--qbasis",
           "pol:3", "--pbasis", "pol:5", "--lambda", "2e-4", "--restarts",
           "1", "--stat", "sqlr", "--functional", "eval:0", "--null", beta0,
           "--out", "/tmp/sievei_test_sqlr.csv"});
  CHECK(code == 0);
  const std::string rep = slurp("/tmp/sievei_test_sqlr.csv");
  CHECK(std::stod(kv_lookup(rep, "pvalue")) > 0.9);
}

TEST_CASE("wald on NPQIV without the numeric flag fails numerically") {
  const int code = run({"test", "--data", demo_csv(), "--model", "npqiv",
                        "--qbasis", "pol:3", "--pbasis", "pol:5", "--stat",
                        "wald", "--null", "0", "--restarts", "1", "--out",
                        "/tmp/sievei_test_wald.csv"});
  CHECK(code == 3);
}

TEST_CASE("seeded bootstrap sqlr reports are identical across runs") {
  const std::vector<std::string> args = {
      "test", "--data", demo_csv(), "--model", "npqiv", "--qbasis", "pol:3",
      "--pbasis", "pol:5", "--lambda", "2e-4", "--stat", "sqlr", "--null",
      "0", "--boot", "multinomial", "--B", "40", "--seed", "7", "--restarts",
      "0", "--out", "/tmp/sievei_test_boot.csv", "--boot-dist",
      "/tmp/sievei_boot_dist.csv"};
  REQUIRE(run(args) == 0);
  const std::string first = slurp("/tmp/sievei_test_boot.csv");
  const std::string dist1 = slurp("/tmp/sievei_boot_dist.csv");
  REQUIRE(run(args) == 0);
  CHECK(slurp("/tmp/sievei_test_boot.csv") == first);
  CHECK(slurp("/tmp/sievei_boot_dist.csv") == dist1);
  CHECK(!dist1.empty());
}

TEST_CASE("mc tables are reproducible and designs are validated") {
  const std::vector<std::string> args = {
      "mc", "--design", "npiv-ve", "--reps", "50", "--seed", "1",
      "--out", "/tmp/sievei_mc_a.csv"};
  REQUIRE(run(args) == 0);
  const std::string a = slurp("/tmp/sievei_mc_a.csv");
  std::vector<std::string> args2 = args;
  args2.back() = "/tmp/sievei_mc_b.csv";
  REQUIRE(run(args2) == 0);
  CHECK(slurp("/tmp/sievei_mc_b.csv") == a);

  CHECK(run({"mc", "--design", "bogus"}) == 2);
}

TEST_CASE("config files feed flags, reject unknown keys, and are overridden") {
  {
    std::ofstream cfg("/tmp/sievei_cfg_ok.cfg");
    cfg << "data=" << demo_csv() << "\n"
        << "model=npiv\nqbasis=pol:3\npbasis=pol:5\nlambda=1e-5\n";
  }
  CHECK(run({"fit", "--config", "/tmp/sievei_cfg_ok.cfg", "--out",
             "/tmp/sievei_fit_cfg.csv"}) == 0);
  CHECK(kv_lookup(slurp("/tmp/sievei_fit_cfg.csv"), "qbasis") == "Pol(3)");

  // command line overrides the file value
  CHECK(run({"fit", "--config", "/tmp/sievei_cfg_ok.cfg", "--qbasis", "pol:4",
             "--out", "/tmp/sievei_fit_cfg2.csv"}) == 0);
  CHECK(kv_lookup(slurp("/tmp/sievei_fit_cfg2.csv"), "qbasis") == "Pol(4)");

  {
    std::ofstream cfg("/tmp/sievei_cfg_bad.cfg");
    cfg << "data=" << demo_csv() << "\nnot_a_real_key=1\n";
  }
  CHECK(run({"fit", "--config", "/tmp/sievei_cfg_bad.cfg"}) == 2);
}
