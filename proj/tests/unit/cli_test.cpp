#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(LPATTACK_CLI) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string golden(const std::string& name) {
  std::ifstream in(fs::path(LPATTACK_GOLDEN) / name);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kToy = std::string("--bundle ") + LPATTACK_TESTDATA + "/toy";

}  // namespace

TEST(Cli, InfluenceMatchesGolden) {
  const auto r = run("influence " + kToy + " --v v --u u7 --k 2");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out), nlohmann::json::parse(golden("influence_v_u7.json")));
}

TEST(Cli, ExactAttackMatchesGolden) {
  const auto r = run("attack " + kToy + " --target v --budget 1 --mode exact --target-label 1 --no-timing");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(nlohmann::json::parse(r.out), nlohmann::json::parse(golden("attack_toy_exact.json")));
}

TEST(Cli, InspectToy) {
  const auto r = run("inspect " + kToy);
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("num_nodes"), 10);
  EXPECT_EQ(j.at("num_edges"), 12);
  EXPECT_EQ(j.at("max_degree"), 4);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("attack --target v").code, 1);
  EXPECT_EQ(run("attack " + kToy + " --target v --mode fast").code, 1);
  EXPECT_EQ(run("attack " + kToy + " --target nobody").code, 1);
  EXPECT_EQ(run("sweep").code, 1);
  EXPECT_EQ(run("--config /nonexistent/missing.json sweep").code, 2);
  EXPECT_EQ(run("inspect --bundle /nonexistent").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, GenSbmThenTrainThenAttack) {
  const fs::path dir = fs::temp_directory_path() / "lpattack_cli_flow";
  fs::remove_all(dir);
  auto r = run("--seed 3 --out " + (dir / "g").string() + " gen-sbm --classes 2 --per-class 40 --p-in 0.1 --p-out 0.01 --feature-dim 4");
  ASSERT_EQ(r.code, 0);
  ASSERT_TRUE(fs::exists(dir / "g" / "edges.tsv"));
  r = run("--seed 3 --out " + (dir / "m").string() + " train-victim --bundle " + (dir / "g").string());
  ASSERT_EQ(r.code, 0);
  ASSERT_TRUE(fs::exists(dir / "m" / "model.json"));
  r = run("attack --bundle " + (dir / "g").string() + " --target 5 --budget 3 --model " + (dir / "m" / "model.json").string());
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_LE(j.at("edges_used").get<int>(), 3);
  EXPECT_TRUE(j.contains("wall_time_ms"));
  fs::remove_all(dir);
}

TEST(Cli, SweepWritesOutputs) {
  const fs::path dir = fs::temp_directory_path() / "lpattack_cli_sweep";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << R"({"sbm": {"classes": 2, "per_class": 50, "p_in": 0.1, "p_out": 0.01,
    "feature_dim": 4, "noise": 1.5, "seed": 2}, "budgets": [1, 2], "seed": 2, "train_per_class": 5, "num_targets": 5})";
  const auto r = run("--config " + (dir / "c.json").string() + " --out " + (dir / "out").string() + " sweep");
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "results.csv"));
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.json"));
  fs::remove_all(dir);
}
