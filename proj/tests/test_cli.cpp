#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "qoct/io.hpp"

using namespace qoct;
namespace fs = std::filesystem;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "qoct_test_cli";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string tmp(const std::string& name) { return (workdir() / name).string(); }

// Runs the CLI with stdout/stderr sent to files; returns the exit status.
int run(const std::string& args, std::string* out = nullptr, std::string* err = nullptr) {
  const std::string o = tmp("stdout.txt"), e = tmp("stderr.txt");
  const std::string cmd = std::string(QOCT_CLI_PATH) + " " + args + " >" + o + " 2>" + e;
  const int status = std::system(cmd.c_str());
  if (out) *out = read_text_file(o);
  if (err) *err = read_text_file(e);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

double value_at(const TraceFile& f, double tau_um) {
  for (std::size_t i = 0; i < f.tau_um.size(); ++i) {
    if (std::abs(f.tau_um[i] - tau_um) < 0.25) return f.counts[i];
  }
  ADD_FAILURE() << "no sample near " << tau_um;
  return 0.0;
}

}  // namespace

TEST(Cli, CountParams) {
  std::string out;
  EXPECT_EQ(run("count-params 2", &out), 0);
  EXPECT_EQ(out, "7\n");
  EXPECT_EQ(run("count-params 1", &out), 0);
  EXPECT_EQ(out, "1\n");
  EXPECT_EQ(run("count-params 10", &out), 0);
  EXPECT_EQ(out, "55\n");
  EXPECT_EQ(run("count-params 0"), 2);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("simulate"), 2);
  EXPECT_EQ(run("simulate --sample mirror --engine fast"), 2);
  EXPECT_EQ(run("simulate --sample no_such_sample"), 2);
  EXPECT_EQ(run("simulate --sample mirror --pump-nm -1"), 2);
  EXPECT_EQ(run("fit --trace " + tmp("missing.csv")), 2);
}

TEST(Cli, MirrorGivesFullDip) {
  const std::string path = tmp("mirror.csv");
  ASSERT_EQ(run("simulate --sample mirror --tau-span-um -40:40 --out " + path), 0);
  const TraceFile f = load_trace(path);
  EXPECT_NEAR(value_at(f, 0.0), 0.0, 1e-6);
  EXPECT_NEAR(value_at(f, 40.0), 1.0, 1e-6);
  EXPECT_EQ(f.meta.at("normalization"), "C/Gamma0");
  EXPECT_EQ(f.meta.at("pump_nm"), "404.5");
  EXPECT_TRUE(fs::exists(path + ".labels.json"));
}

TEST(Cli, CosineMinimumAndZeroOfCoverslip) {
  // the front/back artifact sits halfway, at c tau = c tau' = 281.1 um
  const std::string a = tmp("t1_404180.csv"), b = tmp("t1_404042.csv");
  ASSERT_EQ(run("simulate --sample table1_sample --pump-nm 404.180 --out " + a), 0);
  ASSERT_EQ(run("simulate --sample table1_sample --pump-nm 404.042 --out " + b), 0);
  const double dip = 1.0 - value_at(load_trace(a), 281.0);
  const double suppressed = 1.0 - value_at(load_trace(b), 281.0);
  EXPECT_GT(dip, 0.1);
  EXPECT_LT(std::abs(suppressed), 0.1 * dip);
}

TEST(Cli, ClosedFormRefusesMultilayer) {
  std::string err;
  EXPECT_EQ(run("simulate --sample tableSM_sample --engine closed-form", nullptr, &err), 2);
  EXPECT_NE(err.find("numeric"), std::string::npos);
  EXPECT_EQ(run("simulate --sample table1_sample --engine closed-form --out " + tmp("cf.csv")), 0);
  EXPECT_EQ(run("simulate --sample table1_sample --engine closed-form --filter-shape rectangular"), 2);
}

TEST(Cli, NumericalFailureExitsThree) {
  const std::string spec = tmp("resonant.yaml");
  write_text_file(spec,
                  "schema_version: 1\ninterfaces:\n  - R: 0.99999\n  - R: 0.99999\n"
                  "segments:\n  - optical_path_um: 4000\n");
  EXPECT_EQ(run("simulate --sample " + spec + " --tau-span-um 0:50 --out " + tmp("x.csv")), 3);
}

TEST(Cli, RerunFromMetadataIsBitExact) {
  const std::string path = tmp("noisy.csv");
  ASSERT_EQ(run("simulate --sample table1_sample --noise-counts 10000 --seed 77 --out " + path), 0);
  const std::string first = read_text_file(path);
  const TraceFile f = parse_trace(first);
  EXPECT_EQ(f.meta.at("seed"), "77");
  ASSERT_EQ(run(f.meta.at("command")), 0);
  EXPECT_EQ(read_text_file(path), first);
}

TEST(Cli, Label) {
  std::string out;
  ASSERT_EQ(run("label --sample table1_sample", &out), 0);
  const auto j = nlohmann::json::parse(out);
  EXPECT_EQ(j["features"][0]["label"], "I0");
  EXPECT_EQ(j["features"][1]["label"], "I1");
}

TEST(Cli, ArtifactMapCoverslip) {
  std::string out;
  ASSERT_EQ(run("artifact-map --sample table1_sample", &out), 0);
  const auto period = out.find("# period_nm: ");
  ASSERT_NE(period, std::string::npos);
  EXPECT_NEAR(std::stod(out.substr(period + 13)), 0.58, 0.01);
  const auto minima = out.find("# minima_nm: ");
  ASSERT_NE(minima, std::string::npos);
  EXPECT_NEAR(std::stod(out.substr(minima + 13)), 404.180, 1e-3);
  EXPECT_NE(out.find("pump_nm,cos\n404,"), std::string::npos);
  EXPECT_EQ(run("artifact-map --sample table1_sample --pair I0,I0"), 2);
  EXPECT_EQ(run("artifact-map --sample table1_sample --pair I0,I7"), 2);
}

TEST(Cli, ArtifactMapPressedCoverslipsZero) {
  std::string out;
  ASSERT_EQ(run("artifact-map --sample table2_sample", &out), 0);
  const auto zeros = out.find("# zeros_nm: ");
  ASSERT_NE(zeros, std::string::npos);
  std::istringstream line(out.substr(zeros + 12, out.find('\n', zeros) - zeros - 12));
  std::string item;
  double closest = 1e9;
  while (std::getline(line, item, ',')) closest = std::min(closest, std::abs(std::stod(item) - 404.096));
  EXPECT_LT(closest, 0.01);
}

TEST(Cli, FitFlatTraceReportsNoFeatures) {
  const std::string trace = tmp("flat.csv");
  std::string csv = "# qoct-trace v1\ntau_um,coincidence_norm\n";
  for (int t = -50; t <= 300; ++t) csv += std::to_string(t) + ",1\n";
  write_text_file(trace, csv);
  std::string out, err;
  ASSERT_EQ(run("fit --trace " + trace + " --n-range 2 --pop 30 --gens 5 --out -", &out, &err), 0);
  const auto j = nlohmann::json::parse(out);
  EXPECT_EQ(j["no_features_detected"], true);
  EXPECT_EQ(j["best_fitness"], 0.0);
  EXPECT_NE(err.find("no features"), std::string::npos);
}

TEST(Cli, FitRoundTripCoverslip) {
  const std::string trace = tmp("t1.csv"), report = tmp("t1_fit.json");
  ASSERT_EQ(run("simulate --sample table1_sample --out " + trace), 0);
  const std::string args = "fit --trace " + trace +
                           " --n-range 2 --signs 1,-1 --fix R1=0.31 --bounds d1=200:350 --pop 200 --gens 30 "
                           "--seed 3 --out " + report;
  ASSERT_EQ(run(args), 0);
  const auto j = nlohmann::json::parse(read_text_file(report));
  double d1 = 0.0, r2 = 0.0;
  for (const auto& p : j["parameters"]) {
    if (p["name"] == "d1") d1 = p["value"].get<double>();
    if (p["name"] == "R2") r2 = p["value"].get<double>();
  }
  EXPECT_NEAR(d1, 281.10719, 0.01 * 281.10719);
  EXPECT_NEAR(r2, 0.907, 0.02);
  EXPECT_TRUE(fs::exists(report + ".reconstruction.csv"));
  EXPECT_EQ(j["settings"]["pump_nm"], "404.5");
  EXPECT_EQ(j["signs"][1], -1);

  // same seed, same report
  const std::string again = tmp("t1_fit2.json");
  ASSERT_EQ(run(args.substr(0, args.find("--out")) + "--out " + again), 0);
  auto a = nlohmann::json::parse(read_text_file(report));
  auto b = nlohmann::json::parse(read_text_file(again));
  for (auto* x : {&a, &b}) {
    x->erase("settings");
    x->erase("reconstruction");
  }
  EXPECT_EQ(a, b);
}

TEST(Cli, FitRejectsMalformedSearchFlags) {
  const std::string trace = tmp("t1b.csv");
  ASSERT_EQ(run("simulate --sample table1_sample --out " + trace), 0);
  EXPECT_EQ(run("fit --trace " + trace + " --bounds d1=300:200"), 2);
  EXPECT_EQ(run("fit --trace " + trace + " --bounds d1"), 2);
  EXPECT_EQ(run("fit --trace " + trace + " --fix Q1=2"), 2);
  EXPECT_EQ(run("fit --trace " + trace + " --n-range 3:2"), 2);
  EXPECT_EQ(run("fit --trace " + trace + " --n-range 2 --signs 1,2"), 2);
  // a trace whose grid is not uniform
  std::string csv = read_text_file(trace);
  const auto pos = csv.find("\n-49,");
  ASSERT_NE(pos, std::string::npos);
  csv.replace(pos, 5, "\n-48.5,");
  write_text_file(tmp("bent.csv"), csv);
  EXPECT_EQ(run("fit --trace " + tmp("bent.csv") + " --n-range 2 --pop 4 --gens 1"), 2);
}
