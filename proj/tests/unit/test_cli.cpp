#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "simsec/results_csv.hpp"

#ifdef SIMSEC_CLI_PATH

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SIMSEC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("simsec_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

const char* kConfig = R"(
scenario:
  antennas: 2
  users: 2
  layers: 2
  atoms_x: 2
  atoms_y: 2
optimizer:
  max_iterations: 20
  restarts: 1
experiment:
  kind: layers
  sweep: [2, 3]
  trials: 2
  schemes: [simhacl, random-all]
)";

}  // namespace

TEST_F(Cli, RunWritesValidFiles) {
  const auto cfg = write("c.yaml", kConfig);
  const auto out = dir_ / "out";
  ASSERT_EQ(run_cli("run --config " + cfg.string() + " --out " + out.string() + " --seed 5"), 0);
  const auto results = out / "layers_results.csv";
  ASSERT_TRUE(fs::exists(results));
  ASSERT_TRUE(fs::exists(out / "layers_summary.csv"));
  EXPECT_EQ(simsec::bench::read_results(results).rows.size(), 8u);
  EXPECT_EQ(simsec::bench::read_results(results).provenance.seed, 5u);
  EXPECT_EQ(run_cli("check-schema " + results.string() + " " + (out / "layers_summary.csv").string()), 0);
  EXPECT_EQ(run_cli("summarize " + results.string() + " --out " + (dir_ / "s.csv").string()), 0);
  EXPECT_EQ(run_cli("plot-data " + results.string()), 0);
}

TEST_F(Cli, OverridesTrialsAndSchemes) {
  const auto cfg = write("c.yaml", kConfig);
  const auto out = dir_ / "o";
  ASSERT_EQ(run_cli("run --config " + cfg.string() + " --out " + out.string() +
                    " --trials 1 --schemes random-all --experiment layers"),
            0);
  EXPECT_EQ(simsec::bench::read_results(out / "layers_results.csv").rows.size(), 2u);
}

TEST_F(Cli, ConfigErrorsExitWithTwo) {
  const auto bad = write("bad.yaml", "scenario:\n  users: 3\n");
  EXPECT_EQ(run_cli("validate-config --config " + bad.string()), 2);
  EXPECT_EQ(run_cli("run --config " + bad.string()), 2);
  EXPECT_EQ(run_cli("run --config " + (dir_ / "missing.yaml").string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("run"), 2);
  const auto good = write("good.yaml", kConfig);
  EXPECT_EQ(run_cli("validate-config --config " + good.string()), 0);
  EXPECT_EQ(run_cli("run --config " + good.string() + " --schemes bogus"), 2);
}

TEST_F(Cli, RuntimeFailuresExitWithThree) {
  // A regular file where the output directory should go.
  const auto cfg = write("c.yaml", kConfig);
  const auto blocker = write("blocker", "x");
  EXPECT_EQ(run_cli("run --config " + cfg.string() + " --trials 1 --out " + (blocker / "sub").string()), 3);
}

TEST_F(Cli, SchemaCheckFailsOnCorruptFile) {
  const auto f = write("r.csv", "garbage\n");
  EXPECT_NE(run_cli("check-schema " + f.string()), 0);
}

#endif
