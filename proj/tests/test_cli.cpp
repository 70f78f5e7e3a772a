#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "ecc/commands.hpp"
#include "ecc/io.hpp"
#include "support.hpp"

namespace {

namespace fs = std::filesystem;
namespace cli = ecc::cli;
namespace io = ecc::io;

struct Run {
  int code;
  std::string out;
};

/// Runs the ecc_lab binary; stderr is discarded.
Run lab(const std::string& args) {
  const std::string cmd = std::string(ECC_LAB_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string out;
  std::array<char, 4096> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) out.append(buf.data(), n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::size_t line_count(const std::string& text) { return static_cast<std::size_t>(std::ranges::count(text, '\n')); }

fs::path write_spec(const fs::path& dir, const ecc::SyntheticSpec& spec) {
  io::write_json(dir / "spec.json", io::spec_to_json(spec));
  return dir / "spec.json";
}

ecc::SyntheticSpec small_spec() {
  ecc::SyntheticSpec spec;
  spec.samples_per_class_train = 10;
  spec.samples_per_class_test = 10;
  return spec;
}

/// Dataset plus a short run config next to it.
fs::path prepare_run_inputs(const fs::path& dir, const std::string& preset, int epochs = 4) {
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_gen_data(write_spec(dir, small_spec()), dir / "data", out, err), cli::kSuccess) << err.str();
  io::json cfg{{"data_dir", "data"},         {"preset", preset},       {"batch_size", 32},
               {"epochs", epochs},           {"lr0", 0.01},            {"momentum", 0.9},
               {"lr_decay_every", 15},       {"lr_decay_factor", 0.1}, {"reset_counters_each_epoch", false},
               {"shuffle_seed", 1},          {"hidden_dims", {32}},    {"feature_dim", 16},
               {"model_seed", 7},            {"bank_seed", 11}};
  if (preset == "none") cfg["lambda_mcc"] = 0.0, cfg["lambda_clg"] = 0.0;
  io::write_json(dir / "config.json", cfg);
  return dir / "config.json";
}

TEST(GenData, WritesBalancedFiles) {
  const auto dir = ecc::testing::scratch_dir("gen");
  const auto r = lab("gen-data --spec " + write_spec(dir, small_spec()).string() + " --out " + (dir / "out").string());
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(line_count(io::read_file(dir / "out" / "train.csv")), 1 + 12u * 10);
  EXPECT_EQ(line_count(io::read_file(dir / "out" / "test.csv")), 1 + 12u * 10);
  EXPECT_TRUE(fs::exists(dir / "out" / "spec.json"));
}

TEST(GenData, RerunIsByteIdentical) {
  const auto dir = ecc::testing::scratch_dir("gen_rerun");
  const auto spec = write_spec(dir, small_spec()).string();
  ASSERT_EQ(lab("gen-data --spec " + spec + " --out " + (dir / "a").string()).code, 0);
  ASSERT_EQ(lab("gen-data --spec " + spec + " --out " + (dir / "b").string()).code, 0);
  for (const char* f : {"train.csv", "test.csv", "spec.json"}) {
    EXPECT_EQ(io::read_file(dir / "a" / f), io::read_file(dir / "b" / f)) << f;
  }
}

TEST(GenData, InvalidSpecExitsTwo) {
  const auto dir = ecc::testing::scratch_dir("gen_bad");
  auto j = io::spec_to_json(small_spec());
  j["sigma_sub"] = 20.0;
  io::write_json(dir / "spec.json", j);
  EXPECT_EQ(lab("gen-data --spec " + (dir / "spec.json").string() + " --out " + (dir / "out").string()).code, 2);
  EXPECT_EQ(lab("gen-data --spec " + (dir / "missing.json").string() + " --out " + (dir / "out").string()).code, 2);
}

TEST(Usage, BadArgumentsExitTwo) {
  EXPECT_EQ(lab("").code, 2);
  EXPECT_EQ(lab("frobnicate").code, 2);
  EXPECT_EQ(lab("train --config only.json").code, 2);
  EXPECT_EQ(lab("--help").code, 0);
}

TEST(Train, WritesRunDirectory) {
  const auto dir = ecc::testing::scratch_dir("train");
  const auto cfg = prepare_run_inputs(dir, "AIR");
  const auto r = lab("train --config " + cfg.string() + " --out " + (dir / "run").string());
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("test_accuracy=", 0), 0u) << r.out;
  EXPECT_EQ(line_count(r.out), 1u);
  const auto run = dir / "run";
  EXPECT_EQ(line_count(io::read_file(run / "train_log.csv")), 1 + 4u);
  for (const char* f : {"manifest.json", "model.json", "bank.json", "snapshots/epoch_000.csv",
                        "snapshots/epoch_004.csv", "reports/geometry.json", "reports/soft_labels.json",
                        "reports/projection.csv"}) {
    EXPECT_TRUE(fs::exists(run / f)) << f;
  }
  const auto manifest = io::read_json(run / "manifest.json");
  EXPECT_EQ(manifest.at("status"), "completed");
  EXPECT_EQ(manifest.at("resolved_config").at("lambda_mcc"), 1.4);
  EXPECT_EQ(manifest.at("seeds").at("data_seed"), 2024);
}

TEST(Train, ZeroWeightsLogZeroColumns) {
  const auto dir = ecc::testing::scratch_dir("train_ce");
  const auto cfg = prepare_run_inputs(dir, "none");
  ASSERT_EQ(lab("train --config " + cfg.string() + " --out " + (dir / "run").string()).code, 0);
  for (const auto& rec : io::train_log_from_csv(io::read_file(dir / "run" / "train_log.csv"))) {
    EXPECT_EQ(rec.mcc, 0.0);
    EXPECT_EQ(rec.clg, 0.0);
  }
}

TEST(Train, IdenticalInvocationsIdenticalLogs) {
  const auto dir = ecc::testing::scratch_dir("train_twice");
  const auto cfg = prepare_run_inputs(dir, "AIR");
  ASSERT_EQ(lab("train --config " + cfg.string() + " --out " + (dir / "a").string()).code, 0);
  ASSERT_EQ(lab("train --config " + cfg.string() + " --out " + (dir / "b").string()).code, 0);
  EXPECT_EQ(io::read_file(dir / "a" / "train_log.csv"), io::read_file(dir / "b" / "train_log.csv"));
  EXPECT_EQ(io::read_file(dir / "a" / "model.json"), io::read_file(dir / "b" / "model.json"));
}

TEST(Train, BadConfigExitsTwo) {
  const auto dir = ecc::testing::scratch_dir("train_bad");
  const auto cfg = prepare_run_inputs(dir, "AIR");
  auto j = io::read_json(cfg);
  j.erase("epochs");
  io::write_json(dir / "bad.json", j);
  EXPECT_EQ(lab("train --config " + (dir / "bad.json").string() + " --out " + (dir / "run").string()).code, 2);
  j = io::read_json(cfg);
  j["data_dir"] = "nowhere";
  io::write_json(dir / "bad.json", j);
  EXPECT_EQ(lab("train --config " + (dir / "bad.json").string() + " --out " + (dir / "run").string()).code, 2);
}

TEST(Train, DivergenceExitsThree) {
  const auto dir = ecc::testing::scratch_dir("train_nan");
  const auto cfg = prepare_run_inputs(dir, "AIR");
  auto j = io::read_json(cfg);
  j["lr0"] = 1000.0;
  io::write_json(dir / "hot.json", j);
  EXPECT_EQ(lab("train --config " + (dir / "hot.json").string() + " --out " + (dir / "run").string()).code, 3);
  EXPECT_EQ(io::read_json(dir / "run" / "manifest.json").at("status"), "numeric_failure");
}

TEST(GradCheck, DefaultSeedPasses) {
  const auto r = lab("grad-check --trials 100");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(line_count(r.out), 4u);
}

TEST(GradCheck, CorruptedGradientExitsFour) {
  std::ostringstream out, err;
  const auto corrupt = [](ecc::gradcheck::Component c, std::span<double> g) {
    if (c == ecc::gradcheck::Component::Clg && !g.empty()) g[0] += 1e-3;
  };
  EXPECT_EQ(cli::cmd_grad_check(20240601, 10, out, err, corrupt), cli::kGradCheckFailure);
  EXPECT_NE(out.str().find("clg"), std::string::npos);
  EXPECT_NE(out.str().find("FAIL"), std::string::npos);
}

TEST(GradCheck, ZeroTrialsExitsTwo) {
  EXPECT_EQ(lab("grad-check --trials 0").code, 2);
  EXPECT_EQ(lab("grad-check --trials -4").code, 2);
}

TEST(Inspect, WritesReportsAndIsRepeatable) {
  const auto dir = ecc::testing::scratch_dir("inspect");
  const auto cfg = prepare_run_inputs(dir, "AIR");
  const auto run = dir / "run";
  ASSERT_EQ(lab("train --config " + cfg.string() + " --out " + run.string()).code, 0);
  fs::remove_all(run / "reports");
  const auto first = lab("inspect " + run.string());
  ASSERT_EQ(first.code, 0);
  std::vector<std::string> contents;
  for (const char* f : {"geometry.json", "soft_labels.json", "projection.csv"}) {
    ASSERT_TRUE(fs::exists(run / "reports" / f)) << f;
    contents.push_back(io::read_file(run / "reports" / f));
  }
  const auto second = lab("inspect " + run.string());
  ASSERT_EQ(second.code, 0);
  EXPECT_EQ(first.out, second.out);
  std::size_t i = 0;
  for (const char* f : {"geometry.json", "soft_labels.json", "projection.csv"}) {
    EXPECT_EQ(io::read_file(run / "reports" / f), contents[i++]) << f;
  }
}

TEST(Inspect, MissingBankExitsFive) {
  const auto dir = ecc::testing::scratch_dir("inspect_missing");
  const auto cfg = prepare_run_inputs(dir, "AIR", 1);
  const auto run = dir / "run";
  ASSERT_EQ(lab("train --config " + cfg.string() + " --out " + run.string()).code, 0);
  fs::remove(run / "bank.json");
  EXPECT_EQ(lab("inspect " + run.string()).code, 5);
  EXPECT_EQ(lab("inspect " + (dir / "no_such_run").string()).code, 5);
}

}  // namespace
