#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(DRIVELAB_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const fs::path& root() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "drivelab_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "tiny.json")
        << R"({"schema":"experiment-config-v1","vocabulary":16,"corpus_size":120,)"
        << R"("kmeans_iters":10,"per_stratum":4,)"
        << R"("sft":{"demos_per_stratum":6,"steps":40,"hidden":8},)"
        << R"("rl":{"steps":2,"batch_scenarios":4}})";
    return d;
  }();
  return dir;
}

std::string tiny() { return "-c " + (root() / "tiny.json").string(); }

}  // namespace

TEST(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run("run --no-such-flag"), 1);
  EXPECT_EQ(run("run --algo ppo"), 1);
  EXPECT_EQ(run("bogus-command"), 1);
  EXPECT_EQ(run("compare only-one"), 1);
}

TEST(Cli, RuntimeErrorsExitTwo) {
  EXPECT_EQ(run("compare " + (root() / "missing_a").string() + " " + (root() / "missing_b").string()), 2);
  EXPECT_EQ(run("run " + tiny() + " --group-size 1 -o " + (root() / "bad").string()), 2);
}

TEST(Cli, HelpExitsZero) { EXPECT_EQ(run("--help"), 0); }

TEST(Cli, FitTokenizerIsReproducible) {
  const fs::path out = root() / "tok";
  ASSERT_EQ(run("fit-tokenizer " + tiny() + " -o " + out.string()), 0);
  const std::string first = slurp(out / "codebook.txt");
  ASSERT_FALSE(first.empty());
  ASSERT_EQ(run("fit-tokenizer " + tiny() + " -o " + out.string()), 0);
  EXPECT_EQ(slurp(out / "codebook.txt"), first);
}

TEST(Cli, RunCompareStats) {
  const fs::path a = root() / "a", b = root() / "b";
  ASSERT_EQ(run("run " + tiny() + " --algo drgrpo -j 2 -o " + a.string()), 0);
  ASSERT_EQ(run("run " + tiny() + " --algo grpo -j 1 -o " + b.string()), 0);
  EXPECT_TRUE(fs::exists(a / "summary.txt"));
  EXPECT_EQ(run("compare " + a.string() + " " + b.string()), 0);
  EXPECT_EQ(run("compare --csv " + a.string() + " " + a.string()), 0);
  EXPECT_EQ(run("stats " + a.string()), 0);

  // Rerunning from the stored config reproduces every CSV.
  const fs::path again = root() / "again";
  ASSERT_EQ(run("run -c " + (a / "config.json").string() + " -o " + again.string()), 0);
  for (const char* f : {"bins.csv", "history.csv", "stats.csv", "eval.csv", "summary.txt"}) {
    EXPECT_EQ(slurp(a / f), slurp(again / f)) << f;
  }

  const fs::path c = root() / "c";
  ASSERT_EQ(run("run " + tiny() + " --seed 77 -o " + c.string()), 0);
  EXPECT_EQ(run("compare " + a.string() + " " + c.string()), 2);
}
