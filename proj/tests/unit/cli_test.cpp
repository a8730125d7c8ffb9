#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cuebias/cli.hpp"
#include "cuebias/mlp.hpp"
#include "test_support.hpp"

namespace cuebias {
namespace {

using testing::TempDir;

struct Outcome {
  int code;
  std::string out;
  std::string err;
  nlohmann::json json() const { return nlohmann::json::parse(out); }
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "cuebias");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

TEST(Cli, UsageErrorsAreNonZero) {
  EXPECT_NE(cli({}).code, 0);
  EXPECT_NE(cli({"frobnicate"}).code, 0);
  EXPECT_NE(cli({"gen", "--kind", "symbol", "--bogus"}).code, 0);
  EXPECT_NE(cli({"gen", "--kind", "triangles"}).code, 0);
  EXPECT_NE(cli({"gen"}).code, 0);
}

TEST(Cli, HelpDocumentsDefaults) {
  const auto r = cli({"train", "--help"});
  EXPECT_EQ(r.code, 0);
  for (const char* flag : {"--batch", "--lr", "--max-epochs", "--patience", "--min-delta",
                           "--depth", "--width", "--seed", "--json"}) {
    EXPECT_NE(r.out.find(flag), std::string::npos) << flag;
  }
  EXPECT_NE(r.out.find("32"), std::string::npos);
  EXPECT_NE(r.out.find("0.001"), std::string::npos);
  EXPECT_NE(r.out.find("1000"), std::string::npos);
  for (const char* verb : {"gen", "eval", "reproduce", "sweep", "report"}) {
    EXPECT_EQ(cli({verb, "--help"}).code, 0) << verb;
  }
}

TEST(Cli, GenFullSizeManifests) {
  TempDir dir;
  const auto sym = cli({"gen", "--kind", "symbol", "--seed", "7", "--root", dir.path().string(), "--json"});
  ASSERT_EQ(sym.code, 0) << sym.err;
  const auto j = sym.json();
  EXPECT_EQ(j["samples"], 30000);
  EXPECT_EQ(j["class_counts"], nlohmann::json({{"I", 10000}, {"II", 10000}, {"III", 10000}}));
  EXPECT_EQ(j["train_count"], 22500);
  EXPECT_EQ(j["test_count"], 7500);

  const auto again = cli({"gen", "--kind", "symbol", "--seed", "7", "--root", dir.path().string(), "--json"});
  EXPECT_EQ(again.json()["payload_checksum_fnv1a64"], j["payload_checksum_fnv1a64"]);

  const auto dist = cli({"gen", "--kind", "dist-both-cues", "--seed", "7", "--root", dir.path().string(),
                         "--json"});
  ASSERT_EQ(dist.code, 0) << dist.err;
  EXPECT_EQ(dist.json()["distorted"], 6900);
  EXPECT_EQ(dist.json()["distorted_per_class"], nlohmann::json({{"I", 2300}, {"II", 2300}, {"III", 2300}}));

  const auto text = cli({"gen", "--kind", "pattern", "--seed", "7", "--samples-per-class", "20", "--out",
                         (dir / "p").string()});
  EXPECT_EQ(text.code, 0);
  EXPECT_NE(text.out.find("samples:    60"), std::string::npos) << text.out;
}

TEST(Cli, TrainEvalRoundTrip) {
  TempDir dir;
  const std::string stem = (dir / "pat").string();
  ASSERT_EQ(cli({"gen", "--kind", "pattern", "--samples-per-class", "40", "--out", stem}).code, 0);

  EXPECT_NE(cli({"train", "--data", stem, "--max-epochs", "0"}).code, 0);
  EXPECT_NE(cli({"train", "--data", (dir / "missing").string()}).code, 0);

  const std::string model = (dir / "m.model").string();
  const auto t = cli({"train", "--data", stem, "--width", "8", "--max-epochs", "5", "--lr", "0.05",
                      "--out", model, "--json", "-q"});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_EQ(t.json()["epochs"], 5);
  EXPECT_TRUE(std::filesystem::exists(model + ".epochs.csv"));

  const auto e = cli({"eval", "--model", model, "--data", stem, "--json"});
  ASSERT_EQ(e.code, 0) << e.err;
  const auto j = e.json();
  EXPECT_GE(j["accuracy"].get<double>(), 0.0);
  EXPECT_LE(j["accuracy"].get<double>(), 100.0);
  EXPECT_EQ(j["total"], 30);
  int sum = 0;
  for (const auto& row : j["confusion"]) {
    for (const auto& v : row) sum += v.get<int>();
  }
  EXPECT_EQ(sum, 30);

  const auto text = cli({"eval", "--model", model, "--data", stem});
  EXPECT_NE(text.out.find("accuracy: "), std::string::npos);
  EXPECT_NE(text.out.find("%"), std::string::npos);

  NetworkConfig small;
  small.input_dim = 10;
  small.hidden_layers = {2};
  save_model(zero_params<float>(small), dir / "small.model");
  EXPECT_NE(cli({"eval", "--model", (dir / "small.model").string(), "--data", stem}).code, 0);
}

TEST(Cli, ReproduceSweepAndReport) {
  TempDir dir;
  const std::vector<std::string> tiny{"--root", dir.path().string(), "--runs", "2",
                                      "--samples-per-class", "30", "--max-epochs", "3",
                                      "--lr", "0.05", "-q", "--json"};
  auto with = [&](std::vector<std::string> args) {
    args.insert(args.end(), tiny.begin(), tiny.end());
    return cli(args);
  };
  const auto t3 = with({"reproduce", "--scope", "table3"});
  ASSERT_EQ(t3.code, 0) << t3.err;
  EXPECT_EQ(t3.json()["cells"].size(), 16u);
  EXPECT_EQ(t3.json()["epochs"].size(), 4u);

  const auto t4 = with({"reproduce", "--scope", "table4"});
  ASSERT_EQ(t4.code, 0) << t4.err;
  EXPECT_EQ(t4.json()["cells"].size(), 12u);

  const auto text = cli({"reproduce", "--scope", "table3", "--root", dir.path().string(), "--runs", "2",
                         "--samples-per-class", "30", "--max-epochs", "3", "--lr", "0.05", "-q"});
  ASSERT_EQ(text.code, 0);
  EXPECT_NE(text.out.find("Dist. Both Cues"), std::string::npos);

  const auto sweep = with({"sweep", "--depths", "1,2", "--widths", "4", "--kinds", "pattern"});
  ASSERT_EQ(sweep.code, 0) << sweep.err;
  EXPECT_EQ(sweep.json()["cells"].size(), 8u);

  const auto report = cli({"report", "--root", dir.path().string(), "--json"});
  ASSERT_EQ(report.code, 0) << report.err;
  EXPECT_GE(report.json()["scenarios"].get<int>(), 5);

  EXPECT_NE(cli({"report", "--root", (dir / "empty").string()}).code, 0);
  EXPECT_NE(with({"reproduce", "--scope", "table9"}).code, 0);
}

TEST(Cli, RootComesFromTheEnvironment) {
  TempDir dir;
  ::setenv(cli::kRootEnv, dir.path().c_str(), 1);
  const auto r = cli({"gen", "--kind", "pattern", "--samples-per-class", "5", "--seed", "3"});
  ::unsetenv(cli::kRootEnv);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(std::filesystem::exists(dir / "data" / "pattern_seed3.manifest.json"));
}

TEST(Cli, BinaryReportsFailureThroughExitStatus) {
  const std::string bin = CUEBIAS_CLI_BINARY;
  EXPECT_EQ(std::system((bin + " --help > /dev/null").c_str()), 0);
  EXPECT_NE(std::system((bin + " frobnicate > /dev/null 2>&1").c_str()), 0);
}

}  // namespace
}  // namespace cuebias
