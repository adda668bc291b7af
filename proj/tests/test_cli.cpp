#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "pxap/cli.hpp"

namespace fs = std::filesystem;
using namespace pxap::cli;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& tag) {
  const fs::path d = fs::temp_directory_path() / ("pxap_cli_test_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = main_with_args(args, out, err);
  return {code, out.str(), err.str()};
}

// "key: value" lines of a summary; repeated keys keep the last value.
std::map<std::string, std::string> summary_map(const std::string& text) {
  std::map<std::string, std::string> m;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto c = line.find(": ");
    if (c != std::string::npos) m[line.substr(0, c)] = line.substr(c + 2);
  }
  return m;
}

std::vector<std::vector<double>> csv_rows(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(cell.empty() ? NAN : parse_number(cell, "cell"));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST(FormatNumber, TwelveSignificantDigits) {
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333333333");
  EXPECT_EQ(format_number(std::numbers::pi), "3.14159265359");
  EXPECT_EQ(format_number(2.5), "2.5");
  EXPECT_EQ(format_number(-1e-20), "-1e-20");
  EXPECT_EQ(format_number(123456789012345.0), "1.23456789012e+14");
  EXPECT_EQ(format_number(INFINITY), "inf");
  EXPECT_EQ(format_number(-INFINITY), "-inf");
  EXPECT_EQ(format_number(NAN), "nan");
}

TEST(FormatNumber, IgnoresGlobalLocale) {
  struct Comma : std::numpunct<char> {
    char do_decimal_point() const override { return ','; }
  };
  const auto saved = std::locale::global(std::locale(std::locale::classic(), new Comma));
  const std::string s = format_number(0.5);
  const double back = parse_number("0.25", "x");
  std::locale::global(saved);
  EXPECT_EQ(s, "0.5");
  EXPECT_EQ(back, 0.25);
}

TEST(ParseHelpers, Numbers) {
  EXPECT_EQ(parse_number(" 2.5 ", "x"), 2.5);
  EXPECT_EQ(parse_number("+1e-3", "x"), 1e-3);
  EXPECT_TRUE(std::isinf(parse_number("inf", "x")));
  EXPECT_THROW(parse_number("1,5", "x"), UsageError);
  EXPECT_THROW(parse_number("", "x"), UsageError);
  EXPECT_THROW(parse_number("abc", "x"), UsageError);
}

TEST(ParseHelpers, Grids) {
  EXPECT_EQ(parse_grid("0:1:3"), (std::vector<double>{0.0, 0.5, 1.0}));
  const auto lg = parse_grid("log:1:100:3");
  ASSERT_EQ(lg.size(), 3u);
  EXPECT_NEAR(lg[1], 10.0, 1e-12);
  EXPECT_EQ(lg[2], 100.0);
  EXPECT_EQ(parse_grid("0.1,2,7"), (std::vector<double>{0.1, 2.0, 7.0}));
  EXPECT_THROW(parse_grid("0:1"), UsageError);
  EXPECT_THROW(parse_grid("0:1:1"), UsageError);
  EXPECT_THROW(parse_grid("1:0:5"), UsageError);
  EXPECT_THROW(parse_grid("log:0:1:5"), UsageError);
  EXPECT_THROW(parse_grid("0:1:2.5"), UsageError);
}

TEST(ParseHelpers, Intervals) {
  const auto iv = parse_interval("0,2", "domain");
  EXPECT_EQ(iv.lo, 0.0);
  EXPECT_EQ(iv.hi, 2.0);
  EXPECT_THROW(parse_interval("2,0", "domain"), UsageError);
  EXPECT_THROW(parse_interval("0,1,2", "domain"), UsageError);
}

TEST(Cli, NormWritesBothFiles) {
  const auto d = fresh_dir("norm");
  const auto r = invoke({"--out-dir", d.string(), "norm", "--f", "x", "--p", "2"});
  EXPECT_EQ(r.code, kSuccess) << r.err;
  const auto csv = slurp(d / "norm.csv");
  const auto sum = slurp(d / "norm.summary.txt");
  EXPECT_EQ(csv.rfind("quantity,value\nluxemburg,0.57735026919\n", 0), 0u) << csv;
  const auto m = summary_map(sum);
  EXPECT_EQ(m.at("subcommand"), "norm");
  EXPECT_EQ(m.at("luxemburg_norm"), "0.57735026919");
  EXPECT_EQ(m.at("status"), "0");
}

TEST(Cli, NameOption) {
  const auto d = fresh_dir("name");
  EXPECT_EQ(invoke({"--out-dir", d.string(), "--name", "first", "norm", "--f", "1", "--p", "1"}).code, kSuccess);
  EXPECT_TRUE(fs::exists(d / "first.csv"));
  EXPECT_TRUE(fs::exists(d / "first.summary.txt"));
  EXPECT_EQ(summary_map(slurp(d / "first.summary.txt"))["luxemburg_norm"], "1");
}

TEST(Cli, StepanovNormKind) {
  RunConfig cfg;
  cfg.subcommand = "norm";
  cfg.f = "sin(x)";
  cfg.kind = "both";
  cfg.t_range = "0,10";
  cfg.t_step = 0.1;
  const auto out = execute(cfg);
  EXPECT_EQ(out.status, kSuccess);
  const auto m = summary_map(out.summary);
  ASSERT_TRUE(m.count("stepanov_norm"));
  EXPECT_NEAR(parse_number(m.at("stepanov_norm"), "s"), 0.959550, 1e-5);
}

TEST(Cli, ConfigFileAndOverride) {
  const auto d = fresh_dir("config");
  const auto ini = d / "run.ini";
  {
    std::ofstream os(ini);
    os << "# base run\nout-dir = " << d.string() << "\nname = cfg\n\n[norm]\nf = x^2\np = 3\ndomain = 0,2\n";
  }
  EXPECT_EQ(invoke({"--config", ini.string(), "norm"}).code, kSuccess);
  EXPECT_EQ(summary_map(slurp(d / "cfg.summary.txt"))["luxemburg_norm"], "2.63453502403");
  EXPECT_NEAR(2.63453502403, std::cbrt(128.0 / 7.0), 1e-11);

  EXPECT_EQ(invoke({"--config", ini.string(), "norm", "--p", "1"}).code, kSuccess);
  const auto m = summary_map(slurp(d / "cfg.summary.txt"));
  EXPECT_EQ(m.at("exponent"), "1");
  EXPECT_NEAR(parse_number(m.at("luxemburg_norm"), "n"), 8.0 / 3.0, 1e-10);
}

TEST(Cli, UsageErrors) {
  const auto d = fresh_dir("usage");
  const std::string od = d.string();
  EXPECT_EQ(invoke({}).code, kUsageError);
  EXPECT_EQ(invoke({"frobnicate"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", od, "norm", "--bogus", "1"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", od, "ap-scan", "--eps", "-1"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", od, "ap-scan", "--eps", "abc"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", od, "counterexample", "--lambda", "0.9"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", od, "norm", "--f", "csv:/nonexistent/f.csv"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", od, "norm", "--kind", "other"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", od, "norm", "--f", "x+"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", od, "specfun", "--function", "bessel"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", od, "operator", "--family", "Q"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", od, "solve-dfp", "--gamma", "1.5"}).code, kUsageError);
  EXPECT_EQ(invoke({"--config", (d / "missing.ini").string(), "norm"}).code, kUsageError);
  const auto r = invoke({"--out-dir", od, "norm", "--bogus", "1"});
  EXPECT_FALSE(r.err.empty());
}

TEST(Cli, HelpExitsZero) {
  const auto r = invoke({"--help"});
  EXPECT_EQ(r.code, kSuccess);
  EXPECT_NE(r.out.find("ap-scan"), std::string::npos);
  EXPECT_EQ(invoke({"operator", "--help"}).code, kSuccess);
}

TEST(Cli, ApScanVerdictAndExpect) {
  const auto d = fresh_dir("scan");
  const std::vector<std::string> base{"--out-dir", d.string(), "ap-scan", "--t-range", "0,20",  "--t-step",
                                      "0.1",       "--tau-range", "0,20", "--tau-step", "0.05"};
  auto with = [&](std::vector<std::string> extra) {
    auto a = base;
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  EXPECT_EQ(invoke(with({"--expect", "AP-consistent"})).code, kSuccess);
  const auto m = summary_map(slurp(d / "ap-scan.summary.txt"));
  EXPECT_EQ(m.at("verdict"), "AP-consistent");
  EXPECT_EQ(m.at("verification"), "passed");
  const auto rows = csv_rows(slurp(d / "ap-scan.csv"));
  EXPECT_EQ(rows.size(), 400u);
  EXPECT_EQ(rows.front()[0], 0.05);

  const auto bad = invoke(with({"--expect", "AP-violated"}));
  EXPECT_EQ(bad.code, kVerificationFailed);
  EXPECT_NE(bad.err.find("verification failed"), std::string::npos);
  EXPECT_EQ(summary_map(slurp(d / "ap-scan.summary.txt")).at("status"), "1");

  EXPECT_EQ(invoke(with({"--f", "x", "--expect", "AP-violated"})).code, kSuccess);
}

TEST(Cli, Counterexample) {
  const auto d = fresh_dir("ce");
  EXPECT_EQ(invoke({"--out-dir", d.string(), "counterexample"}).code, kSuccess);
  const auto rows = csv_rows(slurp(d / "counterexample.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_GE(rows[1][3], 2.0);
  EXPECT_GE(rows[2][3], 2.0);
  const auto m = summary_map(slurp(d / "counterexample.summary.txt"));
  EXPECT_LT(parse_number(m.at("sign_product"), "p"), 0.0);
  EXPECT_EQ(m.at("verification"), "passed");
  EXPECT_EQ(invoke({"--out-dir", d.string(), "counterexample", "--growth-rtol", "1e-6"}).code, kVerificationFailed);
  EXPECT_EQ(invoke({"--out-dir", d.string(), "counterexample", "--deltas", "1e-4,1e-3"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", d.string(), "counterexample", "--t", "1"}).code, kUsageError);
}

TEST(Cli, SpecfunTables) {
  const auto d = fresh_dir("specfun");
  EXPECT_EQ(invoke({"--out-dir", d.string(), "specfun", "--alpha", "1", "--grid", "0,1"}).code, kSuccess);
  auto rows = csv_rows(slurp(d / "specfun.csv"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0][1], 1.0);
  EXPECT_NEAR(rows[1][1], std::numbers::e, 1e-11);

  EXPECT_EQ(invoke({"--out-dir", d.string(), "specfun", "--function", "wright", "--gamma", "0.5"}).code, kSuccess);
  rows = csv_rows(slurp(d / "specfun.csv"));
  ASSERT_EQ(rows.size(), 101u);
  for (const auto& r : rows)
    EXPECT_NEAR(r[1], std::exp(-r[0] * r[0] / 4.0) / std::sqrt(std::numbers::pi), 1e-11) << r[0];
}

TEST(Cli, OperatorTablesAndConditionP) {
  const auto d = fresh_dir("operator");
  EXPECT_EQ(invoke({"--out-dir", d.string(), "operator", "--matrix", "-1,0;0,-2", "--grid", "0.5,1"}).code, kSuccess);
  const auto rows = csv_rows(slurp(d / "operator.csv"));
  ASSERT_EQ(rows.size(), 2u);
  ASSERT_EQ(rows[1].size(), 6u);
  EXPECT_NEAR(rows[1][1], std::exp(-1.0), 1e-9);
  EXPECT_NEAR(rows[1][4], std::exp(-2.0), 1e-9);
  EXPECT_NEAR(rows[1][2], 0.0, 1e-12);
  EXPECT_NEAR(rows[1][5], std::exp(-1.0), 1e-9);
  EXPECT_EQ(summary_map(slurp(d / "operator.summary.txt")).at("condition_p"), "not claimed");

  EXPECT_EQ(invoke({"--out-dir", d.string(), "operator", "--matrix", "diag(-1,-2)", "--c", "0.5", "--p-M", "1"}).code,
            kVerificationFailed);
  EXPECT_EQ(summary_map(slurp(d / "operator.summary.txt")).at("condition_p"), "failed");

  EXPECT_EQ(invoke({"--out-dir", d.string(), "operator", "--family", "S", "--gamma", "0.5", "--fit", "--grid",
                    "log:10:10000:13"})
                .code,
            kSuccess);
  const auto m = summary_map(slurp(d / "operator.summary.txt"));
  EXPECT_EQ(m.at("fit"), "passed");
  EXPECT_NEAR(parse_number(m.at("fit_slope"), "s"), -0.5, 0.1);
  EXPECT_EQ(invoke({"--out-dir", d.string(), "operator", "--family", "T", "--fit"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", d.string(), "operator", "--grid", "0,1"}).code, kUsageError);
}

TEST(Cli, ConvolveInfiniteAndFinite) {
  const auto d = fresh_dir("convolve");
  EXPECT_EQ(invoke({"--out-dir", d.string(), "convolve", "--grid", "0:6:7"}).code, kSuccess);
  auto rows = csv_rows(slurp(d / "convolve.csv"));
  ASSERT_EQ(rows.size(), 7u);
  for (const auto& r : rows) EXPECT_NEAR(r[1], (std::sin(r[0]) - std::cos(r[0])) / 2.0, 1e-7) << r[0];
  auto m = summary_map(slurp(d / "convolve.summary.txt"));
  EXPECT_EQ(m.at("mode"), "infinite");
  EXPECT_NEAR(parse_number(m.at("M"), "M"), 1.040182, 1e-4);

  EXPECT_EQ(invoke({"--out-dir", d.string(), "convolve", "--mode", "finite", "--grid", "0:6:7"}).code, kSuccess);
  rows = csv_rows(slurp(d / "convolve.csv"));
  ASSERT_EQ(rows.size(), 7u);
  for (const auto& r : rows)
    EXPECT_NEAR(r[1], (std::sin(r[0]) - std::cos(r[0]) + std::exp(-r[0])) / 2.0, 1e-8) << r[0];

  EXPECT_EQ(invoke({"--out-dir", d.string(), "convolve", "--mode", "sideways"}).code, kUsageError);
  EXPECT_EQ(invoke({"--out-dir", d.string(), "convolve", "--K", "0"}).code, kUsageError);
}

TEST(Cli, SolveDfpScalarRelaxation) {
  const auto d = fresh_dir("dfp");
  EXPECT_EQ(invoke({"--out-dir", d.string(), "solve-dfp", "--gamma", "0.5", "--grid", "0:1:1001"}).code, kSuccess);
  const auto rows = csv_rows(slurp(d / "solve-dfp.csv"));
  ASSERT_EQ(rows.size(), 1001u);
  for (std::size_t i = 0; i < rows.size(); i += 100) {
    const double t = rows[i][0];
    EXPECT_NEAR(rows[i][1], pxap::specfun::mittag_leffler(0.5, -std::sqrt(t)), 1e-6) << t;
  }
  EXPECT_EQ(rows[0].size(), 3u);
  EXPECT_EQ(rows[1].size(), 4u);
  const auto m = summary_map(slurp(d / "solve-dfp.summary.txt"));
  EXPECT_EQ(m.at("residual"), "passed");

  EXPECT_EQ(invoke({"--out-dir", d.string(), "solve-dfp", "--grid", "0:1:11"}).code, kSuccess);
  EXPECT_EQ(summary_map(slurp(d / "solve-dfp.summary.txt")).at("residual"), "not computed (grid step above 1e-3)");
  EXPECT_EQ(invoke({"--out-dir", d.string(), "solve-dfp", "--x0", "1,2"}).code, kUsageError);
}

TEST(Cli, EverySubcommandWritesItsFiles) {
  const auto d = fresh_dir("all");
  const std::string od = d.string();
  const std::vector<std::vector<std::string>> runs{
      {"norm"},
      {"ap-scan", "--t-range", "0,5", "--t-step", "0.25", "--tau-range", "0,8", "--tau-step", "0.1"},
      {"counterexample"},
      {"specfun", "--grid", "0:1:3"},
      {"operator", "--grid", "1,2"},
      {"convolve", "--grid", "0,1"},
      {"solve-dfp", "--grid", "0:1:11"}};
  for (auto args : runs) {
    const std::string name = args[0];
    args.insert(args.begin(), {"--out-dir", od});
    EXPECT_EQ(invoke(args).code, kSuccess) << name;
    EXPECT_TRUE(fs::is_regular_file(d / (name + ".csv"))) << name;
    const auto sum = slurp(d / (name + ".summary.txt"));
    EXPECT_EQ(sum.rfind("subcommand: " + name + "\n", 0), 0u) << name;
    EXPECT_NE(sum.find("\nstatus: 0\n"), std::string::npos) << name;
  }
}

TEST(Cli, BinaryOutputIsByteIdentical) {
  const std::string exe = PXAP_CLI_PATH;
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  const std::string args = " convolve --grid 0:10:21 --ap-eps 0.1 --t-range 0,20 --t-step 0.1 --tau-range 0,20";
  for (const auto& d : {a, b}) {
    const std::string cmd = "\"" + exe + "\" --out-dir \"" + d.string() + "\"" + args + " > /dev/null 2>&1";
    ASSERT_EQ(std::system(cmd.c_str()), 0) << cmd;
  }
  for (const char* f : {"convolve.csv", "convolve.summary.txt"}) {
    const auto x = slurp(a / f), y = slurp(b / f);
    EXPECT_FALSE(x.empty());
    EXPECT_EQ(x, y) << f;
  }
  const std::string bad = "\"" + exe + "\" norm --no-such-flag > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), kUsageError);
}
