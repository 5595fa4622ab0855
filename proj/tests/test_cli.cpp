#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "test_support.hpp"
#include "vsg/cli.hpp"

namespace vsg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vsgame_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv(cli::kCaseDirEnv);
  }
  void TearDown() override {
    fs::remove_all(dir_);
    unsetenv(cli::kCaseDirEnv);
  }

  std::string cache() const { return (dir_ / "limits.json").string(); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

std::string slurp(const std::string& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TEST_F(CliTest, DeltaNineBus) {
  const Result r = run({"delta", "--case", testing::data_path("case9.json"), "--out", path("delta")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_NE(r.out.find("delta0 = 0.1935"), std::string::npos) << r.out;
  const json doc = json::parse(slurp(path("delta.json")));
  EXPECT_NEAR(doc["delta0"].get<double>(), 0.1935, 0.01);
  EXPECT_EQ(doc["tool"], "vsgame");
  EXPECT_EQ(doc["version"], cli::kVersion);
  EXPECT_EQ(doc["case_hash"], case_hash(testing::case9()));
  EXPECT_TRUE(doc.contains("config"));
  EXPECT_TRUE(doc.contains("tolerances"));
}

TEST_F(CliTest, MissingFileIsInputErrorNamingPath) {
  const Result r = run({"delta", "--case", "/no/such/case.json"});
  EXPECT_EQ(r.code, cli::kInputError);
  EXPECT_NE(r.err.find("/no/such/case.json"), std::string::npos) << r.err;
}

TEST_F(CliTest, BadFlagsAreInputErrors) {
  EXPECT_EQ(run({"solve", "--case", "case9.m", "--gamma-a", "-1"}).code, cli::kInputError);
  EXPECT_EQ(run({"solve", "--case", "case9.m", "--levels-a", "1"}).code, cli::kInputError);
  EXPECT_EQ(run({"solve", "--bogus"}).code, cli::kInputError);
  EXPECT_EQ(run({"sweep", "--case", "case9.m", "--no-cache", "--grid-a", "0.1:0.5"}).code, cli::kInputError);
  EXPECT_EQ(run({}).code, cli::kInputError);
}

TEST_F(CliTest, CaseDirectoryFromEnvironment) {
  fs::copy_file(testing::data_path("case9.m"), path("renamed.m"));
  EXPECT_EQ(run({"delta", "--case", "renamed.m"}).code, cli::kInputError);
  setenv(cli::kCaseDirEnv, dir_.c_str(), 1);
  const Result r = run({"delta", "--case", "renamed.m"});
  EXPECT_EQ(r.code, cli::kOk) << r.err;
}

TEST_F(CliTest, BundledCasesResolveByName) {
  EXPECT_EQ(run({"delta", "--case", "case39.m", "--format", "matpower"}).code, cli::kOk);
}

TEST_F(CliTest, LimitsCacheWrittenAndReused) {
  const Result first = run({"limits", "--case", "case9.m", "--limits-cache", cache()});
  ASSERT_TRUE(fs::exists(cache()));
  const Result second = run({"limits", "--case", "case9.m", "--limits-cache", cache()});
  EXPECT_EQ(first.code, second.code);
  EXPECT_EQ(first.out, second.out);
}

TEST_F(CliTest, LimitsNarrowBandIsWeaklySmaller) {
  const Result wide = run({"limits", "--case", "case9.m", "--no-cache", "--out", path("wide")});
  const Result narrow = run({"limits", "--case", "case9.m", "--no-cache", "--vmin", "0.95", "--out", path("narrow")});
  ASSERT_NE(wide.code, cli::kInputError) << wide.err;
  ASSERT_NE(narrow.code, cli::kInputError) << narrow.err;
  const json a = json::parse(slurp(path("wide.json")));
  const json b = json::parse(slurp(path("narrow.json")));
  ASSERT_EQ(a["loads"].size(), 6u);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_LE(b["loads"][k]["covert_limit"].get<double>(), a["loads"][k]["covert_limit"].get<double>() + 1e-12);
  }
}

TEST_F(CliTest, LimitsGrossCompensationFailsNamingBus) {
  const Result r = run({"limits", "--case", "case9.m", "--limits-cache", cache(), "--qd-max", "50"});
  EXPECT_EQ(r.code, cli::kVerificationFailed);
  EXPECT_NE(r.out.find("OUT OF BAND"), std::string::npos) << r.out;
}

TEST_F(CliTest, RankNineBusAttackerOrder) {
  const Result r = run({"rank", "--case", "case9.m", "--limits-cache", cache(), "--out", path("rank")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const json doc = json::parse(slurp(path("rank.json")));
  std::vector<int> order;
  for (const json& row : doc["ranking"]) order.push_back(row["attacker_load"].get<int>());
  EXPECT_EQ(order, (std::vector<int>{6, 9, 8, 4, 7, 5}));
}

TEST_F(CliTest, SolveCollapseCorner) {
  const Result r = run({"solve", "--case", "case9.m", "--limits-cache", cache(), "--gamma-a", "0.1", "--gamma-d",
                        "0.8", "--out", path("solve.json")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const json doc = json::parse(slurp(path("solve.json")));
  EXPECT_NEAR(doc["equilibrium"]["u_attacker"].get<double>(), 0.8065, 0.01);
  EXPECT_EQ(doc["equilibrium"]["d_levels"], "0/0/0/0/0/0");
  EXPECT_EQ(doc["config"]["gamma_d"].get<double>(), 0.8);
}

TEST_F(CliTest, ConfigFileSuppliesFlagsAndCommandLineWins) {
  std::ofstream(path("cfg.json")) << R"({"case": "case9.m", "gamma-a": 0.1, "gamma-d": 0.1, "limits-cache": ")"
                                  << cache() << R"("})";
  const Result from_file = run({"solve", "--config", path("cfg.json")});
  ASSERT_EQ(from_file.code, cli::kOk) << from_file.err;
  EXPECT_NE(from_file.out.find("U^a = 0.0000"), std::string::npos) << from_file.out;
  const Result overridden = run({"solve", "--config", path("cfg.json"), "--gamma-d", "0.8"});
  ASSERT_EQ(overridden.code, cli::kOk) << overridden.err;
  EXPECT_NE(overridden.out.find("U^a = 0.8065"), std::string::npos) << overridden.out;
}

TEST_F(CliTest, SweepOneByOneEqualsSolve) {
  const Result s = run({"sweep", "--case", "case9.m", "--limits-cache", cache(), "--grid-a", "0.1:0.1:0.1",
                        "--grid-d", "0.2:0.2:0.1", "--out", path("cell"), "--emit", "both"});
  ASSERT_EQ(s.code, cli::kOk) << s.err;
  const Result solve = run({"solve", "--case", "case9.m", "--limits-cache", cache(), "--gamma-a", "0.1",
                            "--gamma-d", "0.2", "--out", path("solve")});
  ASSERT_EQ(solve.code, cli::kOk);
  const json sweep = json::parse(slurp(path("cell.json")));
  const json eq = json::parse(slurp(path("solve.json")))["equilibrium"];
  ASSERT_EQ(sweep["cells"].size(), 1u);
  const json& cell = sweep["cells"][0];
  EXPECT_EQ(cell["u_attacker"], eq["u_attacker"]);
  EXPECT_EQ(cell["a_levels"], eq["a_levels"]);
  EXPECT_EQ(cell["d_levels"], eq["d_levels"]);
  EXPECT_TRUE(sweep.contains("provenance"));
  const std::string csv = slurp(path("cell.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
}

TEST_F(CliTest, SweepIsDeterministic) {
  const std::vector<std::string> args = {"sweep", "--case", "case9.m", "--limits-cache", cache(),
                                         "--grid-a", "0.1:0.5:0.2", "--grid-d", "0.1:0.9:0.4", "--no-io"};
  const Result a = run(args);
  const Result b = run(args);
  ASSERT_EQ(a.code, cli::kOk) << a.err;
  EXPECT_EQ(a.out, b.out);
}

TEST_F(CliTest, OracleToyPassesAndFaultIsCaught) {
  const std::vector<std::string> base = {"oracle", "--case", "case9.m", "--limits-cache", cache(),
                                         "--loads", "5,6", "--gamma-a", "0.3", "--gamma-d", "0.3"};
  const Result pass = run(base);
  EXPECT_EQ(pass.code, cli::kOk) << pass.err;
  EXPECT_NE(pass.out.find("oracle: pass"), std::string::npos);
  std::vector<std::string> faulty = base;
  faulty.push_back("--inject-fault");
  const Result fail = run(faulty);
  EXPECT_EQ(fail.code, cli::kVerificationFailed);
  EXPECT_NE(fail.err.find("oracle failure"), std::string::npos);
}

TEST_F(CliTest, OracleRefusesFullNineBus) {
  const Result r = run({"oracle", "--case", "case9.m", "--limits-cache", cache(), "--gamma-a", "0.1",
                        "--gamma-d", "0.1"});
  EXPECT_EQ(r.code, cli::kResourceCap);
  EXPECT_NE(r.err.find("exceeds cap"), std::string::npos) << r.err;
}

TEST_F(CliTest, ActionCapExitsWithSubsetAdvice) {
  const Result r = run({"solve", "--case", "case39.m", "--limits-cache", cache(), "--levels-a", "2", "--levels-d",
                        "2", "--gamma-a", "0.01", "--gamma-d", "0.01"});
  EXPECT_EQ(r.code, cli::kResourceCap) << r.err;
  EXPECT_NE(r.err.find("--subset"), std::string::npos);
}

TEST_F(CliTest, ConvertRoundTrips) {
  const Result r = run({"convert", "--case", "case9.m", "--to", path("c9.json")});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(load_case(path("c9.json")), testing::case9());
  EXPECT_EQ(slurp(path("c9.json")), slurp(testing::data_path("case9.json")));
}

TEST_F(CliTest, VersionAndHelp) {
  const Result v = run({"--version"});
  EXPECT_EQ(v.code, cli::kOk);
  EXPECT_NE(v.out.find(cli::kVersion), std::string::npos);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

}  // namespace
}  // namespace vsg
