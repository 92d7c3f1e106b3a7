#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "dasc/errors.hpp"
#include "test_support.hpp"

using dasc::testing::TempDir;

namespace {

int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " \"" DASC_CLI_PATH "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

void write_tiny_profile(const std::filesystem::path& path) {
  std::ofstream(path) << "embedding_size = 8\nconv_filters = 2,3,3,4,4\nconv_kernels = 3,3,3,3,3\n"
                         "conv_pool = 1,1,0,0,0\ndense_hidden = 6\nbatch_size = 8\nepochs = 1\n";
}

}  // namespace

TEST(Cli, UsageErrorsAreConfigErrors) {
  EXPECT_EQ(run(""), dasc::kExitConfig);
  EXPECT_EQ(run("nonsense"), dasc::kExitConfig);
  EXPECT_EQ(run("train --config C9 --store x --out y"), dasc::kExitConfig);
  EXPECT_EQ(run("--help"), dasc::kExitOk);
}

TEST(Cli, MissingStoreIsADataError) {
  TempDir dir("cli_missing");
  EXPECT_EQ(run("train --config C0 --store " + q(dir / "nope") + " --out " + q(dir / "m.ckpt")),
            dasc::kExitData);
}

TEST(Cli, BadThreadCountIsAConfigError) {
  EXPECT_EQ(run("gradcheck", "DASC_THREADS=zero"), dasc::kExitConfig);
  EXPECT_EQ(run("gradcheck", "DASC_THREADS=2"), dasc::kExitOk);
}

TEST(Cli, GenerateTrainAdaptEvaluate) {
  TempDir dir("cli_flow");
  const auto store = dir / "store";
  write_tiny_profile(dir / "tiny.profile");
  ASSERT_EQ(run("generate --scenes 3 --domains 2 --clips 10 --frames 8 --bands 8 --seed 3 --out " +
                q(store)),
            dasc::kExitOk);
  EXPECT_EQ(run("generate --out " + q(store)), dasc::kExitData);  // refuses a non-empty dir
  ASSERT_EQ(run("train --config C0 --store " + q(store) + " --profile " + q(dir / "tiny.profile") +
                " --out " + q(dir / "c0.ckpt") + " --log " + q(dir / "c0.log.csv")),
            dasc::kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir / "c0.log.csv"));
  ASSERT_EQ(run("adapt --store " + q(store) + " --out " + q(dir / "adapted")), dasc::kExitOk);
  EXPECT_TRUE(std::filesystem::exists(dir / "adapted" / "stats_source.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "adapted" / "stats_target.csv"));
  ASSERT_EQ(run("evaluate --ckpt " + q(dir / "c0.ckpt") + " --store " + q(dir / "adapted") +
                " --label C0-adapted --out " + q(dir / "r.csv")),
            dasc::kExitOk);
  std::ifstream in(dir / "r.csv");
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_TRUE(row.starts_with("C0-adapted,U,")) << row;

  // A truncated checkpoint is a format error.
  std::filesystem::resize_file(dir / "c0.ckpt", 10);
  EXPECT_EQ(run("evaluate --ckpt " + q(dir / "c0.ckpt") + " --store " + q(store) + " --out " +
                q(dir / "r2.csv")),
            dasc::kExitData);
}
