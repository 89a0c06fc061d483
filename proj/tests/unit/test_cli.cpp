#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

namespace fs = std::filesystem;

namespace {

const std::string kCli = MMW_CLI_PATH;
const fs::path kTiny = fs::path(MMW_SOURCE_DIR) / "configs" / "tiny.toml";

fs::path work_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mmw_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + kCli + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string tiny() { return "--config \"" + kTiny.string() + "\""; }

}  // namespace

TEST(Cli, SimulateIsDeterministic) {
  const auto dir = work_dir("determinism");
  ASSERT_EQ(run("simulate " + tiny() + " --scheduler greedy --episodes 3 --seed 1 --out \"" +
                    (dir / "a").string() + "\"",
                dir / "a.log"),
            0)
      << slurp(dir / "a.log");
  ASSERT_EQ(run("simulate " + tiny() + " --scheduler greedy --episodes 3 --seed 1 --jobs 2 --out \"" +
                    (dir / "b").string() + "\"",
                dir / "b.log"),
            0);
  EXPECT_EQ(slurp(dir / "a" / "cdf_greedy.csv"), slurp(dir / "b" / "cdf_greedy.csv"));
  // Timing columns differ run to run; compare the PF column only.
  auto pf_column = [](const std::string& csv) {
    std::istringstream is(csv);
    std::string line, out;
    while (std::getline(is, line)) {
      std::istringstream ls(line);
      std::string cell;
      for (int k = 0; k < 3; ++k) std::getline(ls, cell, ',');
      out += cell + "\n";
    }
    return out;
  };
  const auto a = pf_column(slurp(dir / "a" / "episodes_greedy.csv"));
  EXPECT_EQ(a, pf_column(slurp(dir / "b" / "episodes_greedy.csv")));
  EXPECT_NE(a.find("pf_nats"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "a" / "summary.csv"));

  const auto manifest = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  EXPECT_EQ(manifest["command"], "simulate");
  EXPECT_EQ(manifest["seed"], 1);
  EXPECT_EQ(manifest["config_hash_fnv1a64"].get<std::string>().size(), 16u);
}

TEST(Cli, DifferentSeedsDiffer) {
  const auto dir = work_dir("seeds");
  ASSERT_EQ(run("simulate " + tiny() + " --episodes 2 --seed 1 --out \"" + (dir / "a").string() + "\"", dir / "a.log"), 0);
  ASSERT_EQ(run("simulate " + tiny() + " --episodes 2 --seed 2 --out \"" + (dir / "b").string() + "\"", dir / "b.log"), 0);
  EXPECT_NE(slurp(dir / "a" / "cdf_greedy.csv"), slurp(dir / "b" / "cdf_greedy.csv"));
}

TEST(Cli, ExhaustiveAtFullScaleIsRefused) {
  const auto dir = work_dir("exhaustive");
  const int code = run("simulate --config \"" + (fs::path(MMW_SOURCE_DIR) / "configs" / "paper.toml").string() +
                           "\" --scheduler exhaustive --episodes 1 --out \"" + dir.string() + "\"",
                       dir / "log");
  EXPECT_EQ(code, 2);
  EXPECT_NE(slurp(dir / "log").find("exhaustive_cap"), std::string::npos);
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  const auto dir = work_dir("config");
  EXPECT_EQ(run("simulate --config \"" + (dir / "missing.toml").string() + "\"", dir / "a.log"), 2);
  {
    std::ofstream os(dir / "bad.toml");
    os << "max_selected = 11\n";
  }
  EXPECT_EQ(run("simulate --config \"" + (dir / "bad.toml").string() + "\"", dir / "b.log"), 2);
  EXPECT_NE(slurp(dir / "b.log").find("max_selected"), std::string::npos);
  EXPECT_EQ(run("simulate --scheduler bogus", dir / "c.log"), 2);
  EXPECT_EQ(run("simulate " + tiny() + " --scheduler ml --out \"" + dir.string() + "\"", dir / "d.log"), 2);
  EXPECT_EQ(run("", dir / "e.log"), 2);
}

TEST(Cli, RuntimeErrorsExitWithThree) {
  const auto dir = work_dir("runtime");
  EXPECT_EQ(run("evaluate " + tiny() + " --model \"" + (dir / "nope.mmwnn").string() + "\" --out \"" +
                    dir.string() + "\"",
                dir / "log"),
            3);
}

TEST(Cli, TinyEndToEnd) {
  const auto dir = work_dir("e2e");
  const auto data = dir / "data";
  const auto model = dir / "model";
  ASSERT_EQ(run("gen-dataset " + tiny() + " --out \"" + data.string() + "\"", dir / "gen.log"), 0)
      << slurp(dir / "gen.log");
  ASSERT_TRUE(fs::exists(data / "dataset.mmwds"));
  const auto gen_manifest = nlohmann::json::parse(slurp(data / "manifest.json"));
  EXPECT_EQ(gen_manifest["details"]["samples"], 2 * 5);

  ASSERT_EQ(run("train " + tiny() + " --dataset \"" + (data / "dataset.mmwds").string() + "\" --out \"" +
                    model.string() + "\"",
                dir / "train.log"),
            0)
      << slurp(dir / "train.log");
  ASSERT_TRUE(fs::exists(model / "model.mmwnn"));
  const auto curve = slurp(model / "training_curve.csv");
  EXPECT_EQ(std::count(curve.begin(), curve.end(), '\n'), 3);

  ASSERT_EQ(run("train " + tiny() + " --dataset \"" + (data / "dataset.mmwds").string() + "\" --resume \"" +
                    (model / "model.mmwnn").string() + "\" --out \"" + (dir / "resumed").string() + "\"",
                dir / "resume.log"),
            0)
      << slurp(dir / "resume.log");

  const std::string m = "--model \"" + (model / "model.mmwnn").string() + "\"";
  ASSERT_EQ(run("evaluate " + tiny() + " " + m + " --out \"" + (dir / "eval").string() + "\"", dir / "eval.log"), 0)
      << slurp(dir / "eval.log");
  EXPECT_NE(slurp(dir / "eval.log").find("element accuracy"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "eval" / "summary.csv"));

  ASSERT_EQ(run("compare " + tiny() + " --schedulers greedy,adaptive,topN,top1,ml " + m + " --out \"" +
                    (dir / "cmp").string() + "\"",
                dir / "cmp.log"),
            0)
      << slurp(dir / "cmp.log");
  const auto summary = slurp(dir / "cmp" / "summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 6);
  EXPECT_TRUE(fs::exists(dir / "cmp" / "paired.csv"));
  EXPECT_TRUE(fs::exists(dir / "cmp" / "cdf_ml.csv"));
  EXPECT_TRUE(fs::exists(dir / "cmp" / "manifest.json"));

  ASSERT_EQ(run("simulate " + tiny() + " --scheduler ml " + m + " --per-slot --out \"" + (dir / "sim").string() + "\"",
                dir / "sim.log"),
            0)
      << slurp(dir / "sim.log");
  const auto perslot = slurp(dir / "sim" / "perslot_ml.csv");
  EXPECT_EQ(std::count(perslot.begin(), perslot.end(), '\n'), 1 + 2 * 5);
}

TEST(Cli, SingleSchedulerCompareHasOneRow) {
  const auto dir = work_dir("single");
  ASSERT_EQ(run("compare " + tiny() + " --schedulers top1 --out \"" + dir.string() + "\"", dir / "log"), 0);
  const auto summary = slurp(dir / "summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 2);
}
