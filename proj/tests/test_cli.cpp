#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "altphillips/cli.hpp"

using namespace altphillips;
namespace ac = altphillips::cli;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "altphillips_test_cli" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

int run_cli(const std::string& args) {
  const int rc = std::system(("\"" + std::string(ALTPHILLIPS_CLI) + "\" " + args + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::vector<std::string> issue_fields(const json& raw) {
  try {
    ac::validate(raw, fs::current_path());
  } catch (const ac::ManifestError& e) {
    std::vector<std::string> f;
    for (const auto& i : e.issues()) f.push_back(i.field);
    return f;
  }
  return {};
}

}  // namespace

TEST(Expression, ArithmeticAndPrecedence) {
  EXPECT_DOUBLE_EQ(Expression("1 + 2*3")(), 7.0);
  EXPECT_DOUBLE_EQ(Expression("(1 + 2)*3")(), 9.0);
  EXPECT_DOUBLE_EQ(Expression("2^3^2")(), 512.0);
  EXPECT_DOUBLE_EQ(Expression("-2^2")(), -4.0);
  EXPECT_DOUBLE_EQ(Expression("8/4/2")(), 1.0);
  EXPECT_DOUBLE_EQ(Expression("2*5^0.5 - 5")(), 2.0 * std::sqrt(5.0) - 5.0);
  EXPECT_DOUBLE_EQ(Expression("pi")(), std::numbers::pi);
  EXPECT_DOUBLE_EQ(Expression("1e-3*2")(), 2e-3);
}

TEST(Expression, CoordinatesAndFunctions) {
  const Expression e("max(x1 - 0.3, 0, x3) + sin(pi*x2) + cos(0) + exp(0)");
  EXPECT_EQ(e.max_coordinate(), 3);
  EXPECT_DOUBLE_EQ(e({0.5, 0.5, 0.1}), 0.2 + 1.0 + 2.0);
  EXPECT_EQ(Expression("3").max_coordinate(), 0);
  EXPECT_EQ(Expression("x2").max_coordinate(), 2);
}

TEST(Expression, ErrorsCarryTheOffset) {
  for (const char* bad : {"1 +", "foo(1)", "max(1)", "sin(1, 2)", "(1", "x4", "1 $ 2", ""}) {
    EXPECT_THROW(Expression{bad}, DomainError) << bad;
  }
  try {
    Expression("1 + * 2");
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 4"), std::string::npos) << e.what();
  }
}

TEST(Table, CsvQuotingAndNonFinite) {
  ac::Table t{{"a", "b", "c"}, {}};
  t.add({1.5, "x, y", true});
  t.add({std::nan(""), "say \"hi\"", 3});
  EXPECT_EQ(t.to_csv(), "a,b,c\n1.5,\"x, y\",true\nnan,\"say \"\"hi\"\"\",3\n");
}

TEST(Manifest, ReportsEveryIssueWithItsField) {
  const json raw = {{"subcommand", "hardy"},
                    {"colour", "blue"},
                    {"seed", -1},
                    {"parameters", {{"d", 3}, {"gamma", 5}, {"widen", json::array()}, {"extra", 1}}}};
  const auto f = issue_fields(raw);
  for (const char* want : {"colour", "seed", "parameters.gamma", "parameters.widen", "parameters.extra"})
    EXPECT_NE(std::find(f.begin(), f.end(), want), f.end()) << want;
}

TEST(Manifest, UnknownSubcommandAndMissingInputs) {
  EXPECT_EQ(issue_fields({{"subcommand", "teleport"}}), std::vector<std::string>{"subcommand"});
  const auto f = issue_fields({{"subcommand", "spectrum"},
                               {"parameters", {{"mode", "section"}}},
                               {"inputs", {{"profile", "/nonexistent/profile.json"}}}});
  EXPECT_NE(std::find(f.begin(), f.end(), "inputs.profile"), f.end());
}

TEST(Manifest, ConstantExpressionsAreAcceptedAsReals) {
  EXPECT_TRUE(issue_fields({{"subcommand", "hardy"}, {"parameters", {{"d", 7}, {"s", "2*5^0.5 - 5"}}}}).empty());
  const auto f = issue_fields({{"subcommand", "hardy"}, {"parameters", {{"d", 7}, {"s", "x1"}}}});
  EXPECT_EQ(f, std::vector<std::string>{"parameters.s"});
}

TEST(Manifest, ExpressionDimensionIsChecked) {
  const json raw = {{"subcommand", "minimize"},
                    {"parameters", {{"gamma", -1}, {"lo", {0}}, {"hi", {1}}, {"cells", {16}}, {"boundary", "x2"}}}};
  EXPECT_EQ(issue_fields(raw), std::vector<std::string>{"parameters.boundary"});
}

TEST(Run, ExponentsMatchClosedForms) {
  const auto out = scratch("exponents");
  const auto o = ac::execute({{"subcommand", "exponents"}, {"parameters", {{"gamma", -1}}}}, fs::current_path(), out);
  ASSERT_EQ(o.code, ac::kOk);
  const json r = json::parse(slurp(out / "result.json"));
  EXPECT_NEAR(r["pack"]["beta"].get<double>(), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r["pack"]["s"].get<double>(), -2.0 / 3.0, 1e-15);
  EXPECT_NEAR(r["pack"]["c_beta"].get<double>(), std::pow(2.0 / 3.0, -2.0 / 3.0), 1e-15);
  for (const char* f : {"identities.csv", "one_dim.csv", "windows.csv", "metadata.json"}) EXPECT_TRUE(fs::exists(out / f)) << f;
  const json meta = json::parse(slurp(out / "metadata.json"));
  EXPECT_EQ(meta["seed"], 0);
  EXPECT_EQ(meta["manifest"]["parameters"]["gamma"], -1);
  EXPECT_TRUE(meta.contains("timings"));
}

TEST(Run, HardyDefaultIsNearTheClassicalValue) {
  const auto out = scratch("hardy");
  const auto o = ac::execute({{"subcommand", "hardy"}, {"parameters", {{"d", 3}, {"s", 0}}}}, fs::current_path(), out);
  ASSERT_EQ(o.code, ac::kOk);
  EXPECT_NEAR(o.result["value"].get<double>(), 0.25, 0.02 * 0.25);
}

TEST(Run, RepeatedRunsAreByteIdentical) {
  const json raw = {{"subcommand", "sweep"}, {"parameters", {{"d", 4}, {"s_values", {-0.5, -0.9}}}}};
  const auto a = scratch("det_a"), b = scratch("det_b");
  ASSERT_EQ(ac::execute(raw, fs::current_path(), a).code, ac::kOk);
  ASSERT_EQ(ac::execute(raw, fs::current_path(), b).code, ac::kOk);
  for (const char* f : {"result.json", "sweep.csv", "sweep.svg"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Run, ProfileRoundTripFeedsTheSpectrum) {
  const auto shoot = scratch("shoot");
  ASSERT_EQ(ac::execute({{"subcommand", "cone-shoot"}, {"parameters", {{"d", 3}, {"gamma", -1}, {"theta0", "pi/2"}}}},
                        fs::current_path(), shoot)
                .code,
            ac::kOk);
  const auto c = ac::profile_from_json(json::parse(slurp(shoot / "profile_0.json")));
  EXPECT_EQ(c.d, 3);
  EXPECT_TRUE(c.complete());
  const auto spec = scratch("spec");
  const auto o = ac::execute({{"subcommand", "spectrum"},
                              {"parameters", {{"mode", "section"}}},
                              {"inputs", {{"profile", (shoot / "profile_0.json").string()}}}},
                             fs::current_path(), spec);
  ASSERT_EQ(o.code, ac::kOk) << o.message;
  // The shot half-space is close to, not exactly, the analytic one.
  EXPECT_NEAR(o.result["lambda"].get<double>(), 0.0, 1e-3);
}

TEST(Run, NumericalFailureWritesErrorJson) {
  const auto out = scratch("fail");
  const json raw = {{"subcommand", "minimize"},
                    {"parameters",
                     {{"gamma", -1}, {"lo", {0}}, {"hi", {1}}, {"cells", {64}}, {"boundary", "0.7*x1"}, {"max_iters", 1}}}};
  const auto o = ac::execute(raw, fs::current_path(), out);
  EXPECT_EQ(o.code, ac::kNumericalFailure);
  const json e = json::parse(slurp(out / "error.json"));
  EXPECT_EQ(e["error"], "numerical");
  EXPECT_TRUE(fs::exists(out / "result.json"));
}

TEST(Binary, ExitCodes) {
  const auto dir = scratch("binary");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << R"({"subcommand": "hardy", "parameters": {"d": "three"}})";
  std::ofstream(dir / "broken.json") << "{ not json";
  EXPECT_EQ(run_cli("run \"" + (dir / "bad.json").string() + "\" --out \"" + (dir / "bad").string() + "\""), 2);
  const json e = json::parse(slurp(dir / "bad" / "error.json"));
  EXPECT_EQ(e["error"], "manifest");
  EXPECT_FALSE(e["fields"].empty());
  EXPECT_EQ(run_cli("run \"" + (dir / "broken.json").string() + "\""), 2);
  EXPECT_EQ(run_cli("exponents --gamma -1 --out \"" + (dir / "ok").string() + "\""), 0);
  EXPECT_EQ(run_cli("hardy --d 3 --set nodes=2 --s 0 --out \"" + (dir / "nodes").string() + "\""), 2);
  EXPECT_EQ(run_cli("validate \"" + (dir / "bad.json").string() + "\""), 2);
}
