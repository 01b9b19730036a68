#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("stochflow_cli_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  int run(const std::string& args, std::string* stdout_text = nullptr) const {
    const fs::path out = dir_ / "stdout.txt";
    const std::string cmd = std::string(STOCHFLOW_CLI_PATH) + " " + args + " > " + out.string() + " 2> " +
                            (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    if (stdout_text) *stdout_text = read(out);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string stderr_text() const { return read(dir_ / "stderr.txt"); }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static std::vector<std::vector<std::string>> csv(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(read(p));
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> cells;
      std::istringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      rows.push_back(cells);
    }
    return rows;
  }

  static std::size_t column(const std::vector<std::string>& header, const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    ADD_FAILURE() << "missing column " << name;
    return 0;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, SimulateZeroFamilyIsConstantAndReproducible) {
  const auto cfg = write_config("sim.yaml", R"(kind: simulate
family: {name: zero, params: [1], dim: 2}
window: {t_end: 1}
base_steps: 8
space: {lower: [-1, -1], upper: [1, 1], grid_step: 1}
paths: 3
seed: 5
)");
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "a").string()), 0) << stderr_text();
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "b").string()), 0) << stderr_text();
  const auto rows = csv(dir_ / "a" / "trajectories.csv");
  ASSERT_GT(rows.size(), 1u);
  const auto& h = rows[0];
  EXPECT_EQ(h[0], "path");
  const std::size_t x0 = column(h, "x0_0"), x = column(h, "x_0"), y0 = column(h, "x0_1"), y = column(h, "x_1");
  EXPECT_EQ(rows.size(), 1u + 3u * 9u * 9u);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    EXPECT_EQ(rows[r][x0], rows[r][x]);
    EXPECT_EQ(rows[r][y0], rows[r][y]);
  }
  EXPECT_EQ(read(dir_ / "a" / "trajectories.csv"), read(dir_ / "b" / "trajectories.csv"));
  EXPECT_EQ(read(dir_ / "a" / "trajectories.csv").find('\r'), std::string::npos);
  const std::string manifest = read(dir_ / "a" / "manifest.json");
  for (const char* key : {"\"version\"", "\"seed\"", "\"wall_time_seconds\"", "\"config\""})
    EXPECT_NE(manifest.find(key), std::string::npos) << key;
}

TEST_F(CliTest, AssumptionsFailureIsAResult) {
  const auto cfg = write_config("assume.yaml", R"(kind: assumptions
family: {name: gbm, params: [0.1, 0.2]}
window: {t_end: 1}
space: {lower: [-10], upper: [10], grid_step: 0.5}
regularity: {n0: 0.01}
seed: 1
)");
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "out").string()), 0) << stderr_text();
  const auto rows = csv(dir_ / "out" / "assumptions.csv");
  ASSERT_GT(rows.size(), 1u);
  const std::size_t sat = column(rows[0], "satisfied");
  bool any_false = false;
  for (std::size_t r = 1; r < rows.size(); ++r) any_false |= rows[r][sat] == "false";
  EXPECT_TRUE(any_false);
  EXPECT_NE(read(dir_ / "out" / "manifest.json").find("\"assumptions_satisfied\": false"), std::string::npos);
}

TEST_F(CliTest, LimitDeterministicOde) {
  const auto cfg = write_config("limit.yaml", R"(kind: limit
family: {name: zero, params: [1]}
window: {t_end: 0.5}
base_steps: 10
space: {lower: [-1], upper: [1], grid_step: 0.25}
norms: {epsilon: 1, p: 1}
paths: 2
limit: {perturbation: drift_shift, ns: [1, 2, 5]}
seed: 3
)");
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "out").string()), 0) << stderr_text();
  const auto rows = csv(dir_ / "out" / "limit.csv");
  ASSERT_EQ(rows.size(), 4u);
  const auto& h = rows[0];
  const std::vector<std::string> leading{"n",           "coeff_distance",         "flow_distance_value",
                                         "flow_ci95",   "inverse_distance_value", "inverse_ci95"};
  for (std::size_t i = 0; i < leading.size(); ++i) EXPECT_EQ(h[i], leading[i]);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const double n = std::stod(rows[r][0]);
    EXPECT_NEAR(std::stod(rows[r][2]), 0.5 / n, 1e-14);
  }
}

TEST_F(CliTest, Validate) {
  const auto cfg = write_config("ok.yaml", "kind: spde\nfamily: {name: gbm, params: [0.1, 0.2]}\nwindow: {t_end: 1}\nseed: 1\n");
  std::string out;
  EXPECT_EQ(run("validate " + cfg.string(), &out), 0);
  EXPECT_EQ(out, "ok: spde (gbm, d=1)\n");
  const auto bad = write_config("bad.yaml", "kind: spde\nfamily: {name: gbm, params: [0.1, 0.2]}\nwindow: {t_end: 1}\nseed: 1\nfoo: 2\n");
  EXPECT_EQ(run("validate " + bad.string()), 1);
  EXPECT_NE(stderr_text().find("foo"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run("validate " + (dir_ / "missing.yaml").string()), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  const auto cfg = write_config("ok.yaml", "kind: simulate\nfamily: {name: zero}\nwindow: {t_end: 1}\nseed: 1\n");
  EXPECT_EQ(run("run " + cfg.string() + " --workers 0"), 1);
  // the SPDE solvers reject jump fields at run time
  const auto jumpy = write_config("jump.yaml", R"(kind: spde
family: {name: gbm, params: [0.1, 0.2]}
jump: {name: linjump, params: [-0.5]}
measure: [[0, 1]]
window: {t_end: 1}
seed: 1
)");
  EXPECT_EQ(run("run " + jumpy.string() + " --out " + (dir_ / "out").string()), 2);
  EXPECT_NE(stderr_text().find("JumpFieldRejected"), std::string::npos);
}

TEST_F(CliTest, SeedOverride) {
  const auto cfg = write_config("sim.yaml", R"(kind: simulate
family: {name: gbm, params: [0.1, 0.2]}
window: {t_end: 1}
base_steps: 4
space: {lower: [1], upper: [1]}
seed: 1
)");
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "a").string()), 0);
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "b").string() + " --seed-override 2"), 0);
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "c").string() + " --seed-override 1"), 0);
  EXPECT_NE(read(dir_ / "a" / "trajectories.csv"), read(dir_ / "b" / "trajectories.csv"));
  EXPECT_EQ(read(dir_ / "a" / "trajectories.csv"), read(dir_ / "c" / "trajectories.csv"));
}

TEST_F(CliTest, WorkerCountIsBitwiseInvisible) {
  const auto cfg = write_config("inv.yaml", R"(kind: invert
family: {name: gbm, params: [0.1, 0.2]}
jump: {name: linjump, params: [-0.5]}
measure: [[0, 2]]
window: {t_end: 1}
base_steps: 20
space: {lower: [-2], upper: [2], grid_step: 0.5}
paths: 6
seed: 9
)");
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "w1").string() + " --workers 1"), 0) << stderr_text();
  ASSERT_EQ(run("run " + cfg.string() + " --out " + (dir_ / "w8").string() + " --workers 8"), 0) << stderr_text();
  EXPECT_EQ(read(dir_ / "w1" / "inverse.csv"), read(dir_ / "w8" / "inverse.csv"));
}
