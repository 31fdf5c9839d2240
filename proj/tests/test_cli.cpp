#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string output;
};

// Runs the CLI with stdout and stderr captured into one file.
Outcome cli(const std::string& args, const std::string& env = "") {
  const auto log = fs::temp_directory_path() / "neuroadapt-test-cli.log";
  const std::string cmd = env + " '" NEUROADAPT_CLI "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  Outcome o;
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(log);
  std::ostringstream ss;
  ss << is.rdbuf();
  o.output = ss.str();
  fs::remove(log);
  return o;
}

fs::path fresh_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("neuroadapt-test-cli-" + name);
  fs::remove_all(d);
  return d;
}

}  // namespace

TEST(Cli, RunThenAnalyze) {
  const auto dir = fresh_dir("run");
  const auto r = cli("run --trials 3 --seed 2 --out '" + dir.string() + "'");
  ASSERT_EQ(r.code, 0) << r.output;
  for (const char* f : {"steps.csv", "events.csv", "trials.csv", "costs.csv", "session.json", "records.jsonl"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  const auto a = cli("analyze '" + dir.string() + "'");
  EXPECT_EQ(a.code, 0) << a.output;
  EXPECT_TRUE(fs::exists(dir / "analysis" / "anova.csv"));
  fs::remove_all(dir);
}

TEST(Cli, OpenModeWritesNoCosts) {
  const auto dir = fresh_dir("open");
  ASSERT_EQ(cli("run --mode open --trials 1 --out '" + dir.string() + "'").code, 0);
  EXPECT_TRUE(fs::exists(dir / "trials.csv"));
  EXPECT_FALSE(fs::exists(dir / "costs.csv"));
  fs::remove_all(dir);
}

TEST(Cli, EnvironmentSelectsOutputWhenFlagAbsent) {
  const auto dir = fresh_dir("env");
  ASSERT_EQ(cli("run --mode open --trials 1", "NEUROADAPT_OUT='" + dir.string() + "'").code, 0);
  EXPECT_TRUE(fs::exists(dir / "trials.csv"));
  fs::remove_all(dir);
}

TEST(Cli, UnknownFlagIsUsageError) {
  const auto r = cli("run --bogus");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("Usage"), std::string::npos) << r.output;
}

TEST(Cli, BadModeIsUsageError) { EXPECT_EQ(cli("run --mode sideways").code, 2); }

TEST(Cli, AnalyzeEmptyDirectoryFails) {
  const auto dir = fresh_dir("empty");
  fs::create_directories(dir);
  const auto r = cli("analyze '" + dir.string() + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("no logs"), std::string::npos) << r.output;
  fs::remove_all(dir);
}

TEST(Cli, FastChecksPass) {
  const auto r = cli("check --only 1 2");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("[PASS]"), std::string::npos);
  EXPECT_EQ(r.output.find("[FAIL]"), std::string::npos);
}
