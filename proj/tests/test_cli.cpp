#include "rsba/io.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("rsba_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args, std::string* out = nullptr) {
    const fs::path log = dir_ / "stdout.txt";
    const std::string cmd = std::string(RSBA_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    if (out) *out = slurp(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(Cli, SynthIsReproducible) {
  ASSERT_EQ(run("--seed 5 --out " + path("a.rsbal") + " synth"), 0);
  ASSERT_EQ(run("--seed 5 --out " + path("b.rsbal") + " synth"), 0);
  ASSERT_EQ(run("--seed 6 --out " + path("c.rsbal") + " synth"), 0);
  EXPECT_EQ(slurp(path("a.rsbal")), slurp(path("b.rsbal")));
  EXPECT_NE(slurp(path("a.rsbal")), slurp(path("c.rsbal")));
  EXPECT_EQ(slurp(path("a.rsbal.gt")), slurp(path("b.rsbal.gt")));
  const rsba::Problem p = rsba::read_problem(path("a.rsbal"));
  EXPECT_EQ(p.cameras.size(), 5u);
  EXPECT_EQ(p.points.size(), 56u);
  EXPECT_EQ(p.observations.size(), 280u);
}

TEST_F(Cli, SynthOptions) {
  ASSERT_EQ(run("--seed 1 --out " + path("s.rsbal") +
                " synth --cameras 3 --points 26 --readout 0,90,45 --layout ring --gt-out " +
                path("truth.rsbal")),
            0);
  const rsba::Problem p = rsba::read_problem(path("s.rsbal"));
  EXPECT_EQ(p.cameras.size(), 3u);
  EXPECT_EQ(p.points.size(), 26u);
  EXPECT_TRUE(fs::exists(path("truth.rsbal")));
}

TEST_F(Cli, SolveWritesReport) {
  ASSERT_EQ(run("--seed 3 --out " + path("p.rsbal") + " synth --noise 0"), 0);
  ASSERT_EQ(run("--out " + path("r.rsbal") + " solve " + path("p.rsbal") + " --gt " +
                path("p.rsbal.gt") + " --report " + path("rep.jsonl")),
            0);
  std::ifstream is(path("rep.jsonl"));
  std::string line, last;
  int lines = 0;
  while (std::getline(is, line)) {
    nlohmann::json j;
    EXPECT_NO_THROW(j = nlohmann::json::parse(line)) << line;
    last = line;
    ++lines;
  }
  EXPECT_GE(lines, 3);
  const nlohmann::json summary = nlohmann::json::parse(last);
  ASSERT_TRUE(summary.contains("metrics")) << last;
  EXPECT_LT(summary["metrics"]["e_point"].get<double>(), 1e-6);
  EXPECT_TRUE(fs::exists(path("r.rsbal")));
  EXPECT_NO_THROW(rsba::read_problem(path("r.rsbal")));
}

TEST_F(Cli, StaticNoiselessScene) {
  ASSERT_EQ(run("--out " + path("p.rsbal") +
                " synth --noise 0 --speed-ang 0 --speed-lin 0 --perturb-rot 0 --perturb-trans 0"
                " --perturb-vel 0 --perturb-point 0"),
            0);
  ASSERT_EQ(run("solve " + path("p.rsbal") + " --method nm --report " + path("rep.jsonl")), 0);
  std::ifstream is(path("rep.jsonl"));
  std::string line;
  while (std::getline(is, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    if (j["type"] == "iteration" && j["iteration"] == 0) {
      EXPECT_LT(j["cost"].get<double>(), 1e-24);
      return;
    }
  }
  ADD_FAILURE() << "no iteration 0 line";
}

TEST_F(Cli, BackendsShareCostTrace) {
  ASSERT_EQ(run("--seed 12 --out " + path("p.rsbal") + " synth"), 0);
  std::vector<std::vector<double>> traces;
  for (const char* b : {"dense", "schur2"}) {
    ASSERT_EQ(run("solve " + path("p.rsbal") + " --backend " + b + " --report " + path("r.jsonl")), 0);
    std::ifstream is(path("r.jsonl"));
    std::string line;
    traces.emplace_back();
    while (std::getline(is, line)) {
      const nlohmann::json j = nlohmann::json::parse(line);
      if (j["type"] == "iteration") traces.back().push_back(j["cost"].get<double>());
    }
  }
  ASSERT_EQ(traces[0].size(), traces[1].size());
  ASSERT_GT(traces[0].size(), 1u);
  for (std::size_t i = 0; i < traces[0].size(); ++i) {
    EXPECT_NEAR(traces[0][i], traces[1][i], 1e-8 * traces[0][i]);
  }
}

TEST_F(Cli, GsbaLosesOnFastMotion) {
  ASSERT_EQ(run("--seed 13 --out " + path("p.rsbal") + " synth --speed-ang 20 --speed-lin 2"), 0);
  double e[2];
  int k = 0;
  for (const char* m : {"gsba", "nw"}) {
    ASSERT_EQ(run("solve " + path("p.rsbal") + " --method " + m + " --gt " + path("p.rsbal.gt") +
                  " --report " + path("r.jsonl")),
              0);
    std::ifstream is(path("r.jsonl"));
    std::string line, last;
    while (std::getline(is, line)) last = line;
    e[k++] = nlohmann::json::parse(last)["metrics"]["e_point"].get<double>();
  }
  EXPECT_GT(e[0], 2.0 * e[1]) << "gsba " << e[0] << " nw " << e[1];
}

TEST_F(Cli, SolveEveryBackendAndMethod) {
  ASSERT_EQ(run("--seed 4 --out " + path("p.rsbal") + " synth"), 0);
  for (const char* m : {"gsba", "dm", "nm", "nw"}) {
    for (const char* b : {"dense", "schur1", "schur2"}) {
      EXPECT_EQ(run("solve " + path("p.rsbal") + " --method " + m + " --backend " + b), 0)
          << m << " " << b;
    }
  }
}

TEST_F(Cli, CheckJacobian) {
  std::string out;
  EXPECT_EQ(run("--seed 2 check-jacobian --trials 200", &out), 0) << out;
  EXPECT_NE(out.find("PASS"), std::string::npos) << out;
  EXPECT_EQ(run("--seed 2 check-jacobian --trials 200 --static", &out), 0) << out;
  EXPECT_EQ(run("--seed 2 check-jacobian --trials 200 --mutate flip-omega", &out), 4) << out;
  EXPECT_NE(out.find("FAIL"), std::string::npos) << out;
  EXPECT_NE(out.find("omega"), std::string::npos) << out;
}

TEST_F(Cli, SweepCsv) {
  ASSERT_EQ(run("--seed 9 --out " + path("s.csv") +
                " sweep --kind noise --coords 0,1 --trials 2 --methods nm,nw"),
            0);
  std::ifstream is(path("s.csv"));
  std::string line;
  int meta = 0, rows = 0;
  bool header = false;
  while (std::getline(is, line)) {
    if (line.rfind("#", 0) == 0) {
      ++meta;
    } else if (!header) {
      header = true;
      EXPECT_EQ(line.rfind("sweep_kind,method,backend", 0), 0u);
    } else {
      ++rows;
      EXPECT_NE(line.find(",ok"), std::string::npos) << line;
    }
  }
  EXPECT_GE(meta, 2);
  EXPECT_EQ(rows, 2 * 2 * 2);
}

TEST_F(Cli, BadInput) {
  {
    std::ofstream os(path("bad.rsbal"));
    os << "RSBAL v1 units=normalized-row\n1 1 1\n0 0 1\n";
  }
  std::string out;
  EXPECT_EQ(run("solve " + path("bad.rsbal"), &out), 2);
  EXPECT_NE(out.find("line 3"), std::string::npos) << out;
  EXPECT_EQ(run("solve " + path("missing.rsbal")), 2);
  EXPECT_EQ(run("solve"), 2);
  EXPECT_EQ(run("synth --cameras notanumber"), 2);
  EXPECT_EQ(run("sweep --kind bogus"), 2);
}

}  // namespace
