#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "app.hpp"
#include "config.hpp"
#include "propattest/common/binary_io.hpp"

namespace propattest::cli {
namespace {

namespace fs = std::filesystem;

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "propattest");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_app(static_cast<int>(argv.size()), argv.data());
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("propattest_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

TEST(Config, ParsesFileAndOverrides) {
  Config c;
  c.load_text("# comment\nout_dir = /tmp/x\nratio=0.3\nhidden=8, 4\n", "test");
  EXPECT_EQ(c.str("out_dir"), "/tmp/x");
  EXPECT_EQ(c.rational("ratio"), Rational(3, 10));
  EXPECT_EQ(c.counts("hidden"), (std::vector<std::size_t>{8, 4}));
  EXPECT_EQ(c.count("n"), 500u);
  EXPECT_THROW(c.set("nonsense", "1"), ConfigError);
  EXPECT_THROW(c.load_text("no equals sign", "test"), ConfigError);
  EXPECT_THROW(c.str("mode"), ConfigError);
  c.set("n", "-3");
  EXPECT_THROW(c.count("n"), ConfigError);
  c.set("mean_shift", "abc");
  EXPECT_THROW(c.real("mean_shift"), ConfigError);
}

TEST(Config, SeedsDeriveFromMasterAndEnvironment) {
  ::unsetenv("ATTEST_SEED");
  Config a, b;
  a.set("seed", "5");
  b.set("seed", "6");
  EXPECT_NE(a.seed("data_seed"), b.seed("data_seed"));
  EXPECT_NE(a.seed("data_seed"), a.seed("model_seed"));
  a.set("data_seed", "77");
  EXPECT_EQ(a.seed("data_seed"), 77u);
  ::setenv("ATTEST_SEED", "6", 1);
  a.apply_env();
  ::unsetenv("ATTEST_SEED");
  EXPECT_EQ(a.seed("seed"), 6u);
  EXPECT_EQ(a.seed("data_seed"), b.seed("data_seed"));
  EXPECT_NE(a.hash(), Config().hash());
}

TEST(Cli, ExitCodes) {
  auto dir = scratch("codes");
  EXPECT_EQ(run({"synth", "-s", "ratio=0.5"}), kExitConfig);
  EXPECT_EQ(run({"synth", "-s", "out_dir=" + dir.string(), "-s", "bogus=1"}), kExitConfig);
  EXPECT_EQ(run({"synth", "-s", "out_dir=" + dir.string(), "-s", "ratio=1.5"}), kExitConfig);
  EXPECT_EQ(run({"frobnicate"}), kExitConfig);
  EXPECT_EQ(run({"calibrate", "-s", "out_dir=" + dir.string()}), kExitIo);
  EXPECT_EQ(run({"synth", "-s", "out_dir=" + dir.string(), "-s", "ratio=0.5", "-s", "n=20"}), kExitOk);
  EXPECT_EQ(run({"attest", "-s", "out_dir=" + dir.string(), "-s", "mode=nope"}), kExitConfig);
  fs::remove_all(dir);
}

TEST(Cli, TrainingFailureMapsToItsExitCode) {
  auto dir = scratch("diverge");
  std::vector<std::string> common{"-s", "out_dir=" + dir.string(), "-s", "ratio=0.5", "-s", "n=40"};
  auto with = [&](std::vector<std::string> extra) {
    auto a = extra;
    a.insert(a.end(), common.begin(), common.end());
    return a;
  };
  ASSERT_EQ(run(with({"synth"})), kExitOk);
  ASSERT_EQ(run(with({"shadows", "-s", "per_value=2", "-s", "model_epochs=2"})), kExitOk);
  ASSERT_EQ(run(with({"train-attestor", "-s", "per_value=2", "-s", "att_epochs=2", "-s", "holdout_fraction=0.5"})),
            kExitOk);
  ASSERT_EQ(run(with({"calibrate", "-s", "holdout_fraction=0.5"})), kExitOk);
  EXPECT_EQ(run(with({"attest", "-s", "mode=infer", "-s", "model_lr=1e300", "-s", "holdout_fraction=0.5"})),
            kExitTraining);
  fs::remove_all(dir);
}

TEST(Cli, SynthIsByteReproducible) {
  auto a = scratch("det_a"), b = scratch("det_b");
  for (const auto& d : {a, b})
    ASSERT_EQ(run({"synth", "-s", "out_dir=" + d.string(), "-s", "ratio=0.3", "-s", "n=50", "-s", "seed=4"}), 0);
  EXPECT_EQ(read_file(a / "dataset.ads"), read_file(b / "dataset.ads"));
  EXPECT_EQ(read_file(a / "synth.json"), read_file(b / "synth.json"));
  Config ca, cb;
  ca.load_file(a / "synth.config");
  cb.load_file(b / "synth.config");
  EXPECT_EQ(ca.hash(), cb.hash());
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, EnvironmentSeedOverridesConfig) {
  auto a = scratch("env_a"), b = scratch("env_b");
  ASSERT_EQ(run({"synth", "-s", "out_dir=" + a.string(), "-s", "ratio=0.3", "-s", "n=50", "-s", "seed=4"}), 0);
  ::setenv("ATTEST_SEED", "9", 1);
  ASSERT_EQ(run({"synth", "-s", "out_dir=" + b.string(), "-s", "ratio=0.3", "-s", "n=50", "-s", "seed=4"}), 0);
  ::unsetenv("ATTEST_SEED");
  EXPECT_NE(read_file(a / "dataset.ads"), read_file(b / "dataset.ads"));
  fs::remove_all(a);
  fs::remove_all(b);
}

}  // namespace
}  // namespace propattest::cli
