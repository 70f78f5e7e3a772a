#ifndef ECC_COMMANDS_HPP_
#define ECC_COMMANDS_HPP_

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ecc/center_bank.hpp"
#include "ecc/error.hpp"
#include "ecc/grad_check.hpp"
#include "ecc/io.hpp"
#include "ecc/loss.hpp"
#include "ecc/metrics.hpp"
#include "ecc/mlp.hpp"
#include "ecc/parallel.hpp"
#include "ecc/synthetic.hpp"
#include "ecc/trainer.hpp"

namespace ecc::cli {

namespace fs = std::filesystem;
using io::json;

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int {
  kSuccess = 0,
  kBadInput = 2,
  kNumericFailure = 3,
  kGradCheckFailure = 4,
  kMissingArtifacts = 5,
};

/// File names inside a dataset directory and a run directory.
namespace layout {
inline constexpr const char* kTrainCsv = "train.csv";
inline constexpr const char* kTestCsv = "test.csv";
inline constexpr const char* kSpecJson = "spec.json";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kTrainLog = "train_log.csv";
inline constexpr const char* kModel = "model.json";
inline constexpr const char* kBank = "bank.json";
inline constexpr const char* kSnapshots = "snapshots";
inline constexpr const char* kReports = "reports";
inline constexpr const char* kGeometry = "geometry.json";
inline constexpr const char* kSoftLabels = "soft_labels.json";
inline constexpr const char* kProjection = "projection.csv";
}  // namespace layout

struct ModelConfig {
  std::vector<std::size_t> hidden_dims{64};
  std::size_t feature_dim = 32;
  std::uint64_t model_seed = 7;
  std::uint64_t bank_seed = 11;

  std::vector<std::size_t> layer_dims(std::size_t input_dim, std::size_t num_classes) const {
    std::vector<std::size_t> dims{input_dim};
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(feature_dim);
    dims.push_back(num_classes);
    return dims;
  }
};

/// Everything one `train` invocation needs. `data_dir` is resolved relative
/// to the config file's directory.
struct RunConfig {
  fs::path data_dir;
  TrainConfig train;
  ModelConfig model;
};

inline json run_config_to_json(const RunConfig& cfg) {
  json j = io::train_config_to_json(cfg.train);
  j["data_dir"] = cfg.data_dir.string();
  j["hidden_dims"] = cfg.model.hidden_dims;
  j["feature_dim"] = cfg.model.feature_dim;
  j["model_seed"] = cfg.model.model_seed;
  j["bank_seed"] = cfg.model.bank_seed;
  return j;
}

/// All fields are required, except that lambda_mcc / lambda_clg may be
/// omitted when a named preset supplies them.
inline RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  using io::detail::require;
  constexpr auto k = ErrorKind::InvalidArgument;
  RunConfig cfg;
  cfg.data_dir = require<std::string>(j, "data_dir", k);
  if (cfg.data_dir.is_relative()) cfg.data_dir = base_dir / cfg.data_dir;
  cfg.data_dir = fs::absolute(cfg.data_dir).lexically_normal();

  auto& t = cfg.train;
  t.preset = parse_preset(require<std::string>(j, "preset", k));
  const auto preset = preset_weights(t.preset);
  if (preset && !j.contains("lambda_mcc")) {
    t.weights.mcc = preset->mcc;
  } else {
    t.weights.mcc = require<double>(j, "lambda_mcc", k);
  }
  if (preset && !j.contains("lambda_clg")) {
    t.weights.clg = preset->clg;
  } else {
    t.weights.clg = require<double>(j, "lambda_clg", k);
  }
  t.batch_size = require<std::size_t>(j, "batch_size", k);
  t.epochs = require<std::size_t>(j, "epochs", k);
  t.lr0 = require<double>(j, "lr0", k);
  t.momentum = require<double>(j, "momentum", k);
  t.lr_decay_every = require<std::size_t>(j, "lr_decay_every", k);
  t.lr_decay_factor = require<double>(j, "lr_decay_factor", k);
  t.reset_counters_each_epoch = require<bool>(j, "reset_counters_each_epoch", k);
  t.shuffle_seed = require<std::uint64_t>(j, "shuffle_seed", k);
  t.validate();

  cfg.model.hidden_dims = require<std::vector<std::size_t>>(j, "hidden_dims", k);
  cfg.model.feature_dim = require<std::size_t>(j, "feature_dim", k);
  cfg.model.model_seed = require<std::uint64_t>(j, "model_seed", k);
  cfg.model.bank_seed = require<std::uint64_t>(j, "bank_seed", k);
  if (cfg.model.feature_dim < 1) throw Error(k, "feature_dim must be >= 1");
  return cfg;
}

inline DatasetPair load_dataset_dir(const fs::path& dir) {
  const SyntheticSpec spec = io::spec_from_json(io::read_json(dir / layout::kSpecJson));
  return DatasetPair{io::dataset_from_csv(io::read_file(dir / layout::kTrainCsv), spec, Split::Train),
                     io::dataset_from_csv(io::read_file(dir / layout::kTestCsv), spec, Split::Test)};
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

/// Geometry (train and test features), soft labels, and the 2-D PCA
/// projection of the test features.
inline void write_reports(const fs::path& run_dir, const MlpModel& model, const CenterBank& bank,
                          const DatasetPair& data, std::size_t threads) {
  const fs::path dir = run_dir / layout::kReports;
  const auto train_pass = model.forward(data.train.inputs, threads);
  const auto test_pass = model.forward(data.test.inputs, threads);
  const std::size_t n = model.num_classes();
  io::write_json(dir / layout::kGeometry,
                 json{{"train", io::geometry_to_json(geometry_report(train_pass.features(), data.train.labels, n))},
                      {"test", io::geometry_to_json(geometry_report(test_pass.features(), data.test.labels, n))}});
  io::write_json(dir / layout::kSoftLabels, io::soft_labels_to_json(soft_label_report(bank, build_similarity(bank))));
  const PcaResult pca = pca_project(test_pass.features(), 2);
  io::write_file(dir / layout::kProjection, io::projection_to_csv(pca.coordinates, data.test.labels));
}

/// `gen-data --spec <path> --out <dir>`
inline int cmd_gen_data(const fs::path& spec_path, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  SyntheticSpec spec;
  try {
    spec = io::spec_from_json(io::read_json(spec_path));
  } catch (const Error& e) {
    err << "gen-data: invalid spec: " << e.what() << "\n";
    return kBadInput;
  }
  try {
    const DatasetPair data = generate(spec);
    io::write_file(out_dir / layout::kTrainCsv, io::dataset_to_csv(data.train));
    io::write_file(out_dir / layout::kTestCsv, io::dataset_to_csv(data.test));
    io::write_json(out_dir / layout::kSpecJson, io::spec_to_json(spec));
    out << "wrote " << data.train.size() << " train and " << data.test.size() << " test samples to "
        << out_dir.string() << "\n";
  } catch (const Error& e) {
    err << "gen-data: " << e.what() << "\n";
    return kBadInput;
  }
  return kSuccess;
}

/// `train --config <path> --out <dir>`
inline int cmd_train(const fs::path& config_path, const fs::path& run_dir, std::ostream& out, std::ostream& err,
                     std::size_t threads = threads_from_env()) {
  RunConfig cfg;
  std::optional<DatasetPair> loaded;
  try {
    cfg = run_config_from_json(io::read_json(config_path), config_path.parent_path());
    loaded = load_dataset_dir(cfg.data_dir);
  } catch (const Error& e) {
    err << "train: " << e.what() << "\n";
    return kBadInput;
  }
  const DatasetPair& data = *loaded;

  const auto dims = cfg.model.layer_dims(data.train.input_dim(), data.train.num_classes());
  json manifest{{"tool_version", kToolVersion},
                {"config_path", fs::absolute(config_path).string()},
                {"output_dir", fs::absolute(run_dir).string()},
                {"resolved_config", run_config_to_json(cfg)},
                {"synthetic_spec", io::spec_to_json(data.train.spec)},
                {"layer_dims", dims},
                {"seeds",
                 {{"data_seed", data.train.spec.seed},
                  {"model_seed", cfg.model.model_seed},
                  {"bank_seed", cfg.model.bank_seed},
                  {"shuffle_seed", cfg.train.shuffle_seed}}},
                {"threads", threads},
                {"started_at", utc_now()},
                {"finished_at", nullptr},
                {"status", "running"}};
  try {
    fs::create_directories(run_dir);
    io::write_json(run_dir / layout::kManifest, manifest);
  } catch (const std::exception& e) {
    err << "train: " << e.what() << "\n";
    return kBadInput;
  }

  auto finalize = [&](const std::string& status) {
    manifest["finished_at"] = utc_now();
    manifest["status"] = status;
    io::write_json(run_dir / layout::kManifest, manifest);
  };

  try {
    TrainOptions options;
    options.test = &data.test;
    options.threads = threads;
    options.on_epoch = [&](const EpochRecord& r) {
      err << "epoch " << r.epoch << " lr=" << r.lr << " total=" << r.total << " train_acc=" << r.train_accuracy
          << " test_acc=" << r.test_accuracy << " drift=" << r.center_drift << " recovery=" << r.recovery_rate
          << "\n";
    };
    MlpModel model(dims, cfg.model.model_seed);
    model.standardize_inputs(data.train.inputs);
    TrainResult result = train(std::move(model), data.train,
                               init_bank(data.train.num_classes(), cfg.model.feature_dim, cfg.model.bank_seed),
                               cfg.train, options);

    io::write_file(run_dir / layout::kTrainLog, io::train_log_to_csv(result.log));
    io::write_json(run_dir / layout::kModel, io::model_to_json(result.model));
    io::write_json(run_dir / layout::kBank, io::bank_to_json(result.bank));
    for (const auto& snap : result.bank.snapshots()) {
      std::ostringstream name;
      name << "epoch_" << std::setw(3) << std::setfill('0') << snap.epoch() << ".csv";
      io::write_file(run_dir / layout::kSnapshots / name.str(), io::snapshot_to_csv(snap));
    }
    write_reports(run_dir, result.model, result.bank, data, threads);
    finalize("completed");
    out << "test_accuracy=" << io::format_double(result.log.back().test_accuracy) << "\n";
    return kSuccess;
  } catch (const Error& e) {
    err << "train: " << e.what() << "\n";
    const bool numeric = e.kind() == ErrorKind::NonFinite || e.kind() == ErrorKind::DegenerateNorm;
    try {
      finalize(numeric ? "numeric_failure" : "failed");
    } catch (...) {
    }
    return numeric ? kNumericFailure : kBadInput;
  }
}

/// `grad-check [--seed S] [--trials T]`
inline int cmd_grad_check(std::uint64_t seed, std::size_t trials, std::ostream& out, std::ostream& err,
                          gradcheck::Corruption corrupt = {}) {
  if (trials < 1) {
    err << "grad-check: --trials must be >= 1\n";
    return kBadInput;
  }
  gradcheck::Options opt;
  opt.seed = seed;
  opt.trials = trials;
  opt.corrupt = std::move(corrupt);
  gradcheck::Report report;
  try {
    report = gradcheck::run(opt);
  } catch (const Error& e) {
    err << "grad-check: " << e.what() << "\n";
    return kGradCheckFailure;
  }
  for (const auto& c : report.components) {
    const double tol = c.component == gradcheck::Component::Network ? opt.network_tolerance : opt.loss_tolerance;
    out << gradcheck::to_string(c.component) << ": max_relative_error=" << c.max_relative
        << " max_small_abs_error=" << c.max_small_abs << " tolerance=" << tol << " "
        << (c.passed ? "PASS" : "FAIL");
    if (!c.passed) out << " worst_seed=" << c.worst_seed;
    out << "\n";
  }
  if (!report.passed()) {
    err << "grad-check: analytic gradients disagree with finite differences (seed " << seed << ", " << trials
        << " trials)\n";
    return kGradCheckFailure;
  }
  return kSuccess;
}

/// `inspect <run-dir>`: regenerates the reports from the serialized model
/// and bank plus the dataset named in the manifest.
inline int cmd_inspect(const fs::path& run_dir, std::ostream& out, std::ostream& err,
                       std::size_t threads = threads_from_env()) {
  try {
    for (const char* name : {layout::kManifest, layout::kModel, layout::kBank}) {
      if (!fs::exists(run_dir / name)) throw Error(ErrorKind::Io, "missing " + (run_dir / name).string());
    }
    const json manifest = io::read_json(run_dir / layout::kManifest);
    const fs::path data_dir = io::detail::require<std::string>(manifest.at("resolved_config"), "data_dir",
                                                              ErrorKind::Io);
    const MlpModel model = io::model_from_json(io::read_json(run_dir / layout::kModel));
    const CenterBank bank = io::bank_from_json(io::read_json(run_dir / layout::kBank));
    const DatasetPair data = load_dataset_dir(data_dir);
    if (bank.num_classes() != model.num_classes() || bank.feature_dim() != model.feature_dim()) {
      throw Error(ErrorKind::Io, "bank and model shapes disagree");
    }
    write_reports(run_dir, model, bank, data, threads);

    const auto test_pass = model.forward(data.test.inputs, threads);
    const auto geometry = geometry_report(test_pass.features(), data.test.labels, model.num_classes());
    const auto sim = build_similarity(bank);
    const auto soft = soft_label_report(bank, sim);
    const auto oracle = class_affinity_oracle(data.train);
    out << "classes=" << model.num_classes() << " feature_dim=" << model.feature_dim() << "\n"
        << "test_accuracy=" << io::format_double(evaluate(model, data.test, threads).accuracy) << "\n"
        << "intra_class_variance=" << io::format_double(geometry.intra_class_variance) << "\n"
        << "nearest_nontarget_margin=" << io::format_double(geometry.nearest_nontarget_margin) << "\n"
        << "similar_class_recovery=" << io::format_double(recovery_rate(sim.most_similar, oracle)) << "\n"
        << "soft_label_similar_dominance=" << io::format_double(soft.similar_dominance_rate()) << "\n";
    return kSuccess;
  } catch (const std::exception& e) {
    err << "inspect: " << e.what() << "\n";
    return kMissingArtifacts;
  }
}

}  // namespace ecc::cli

#endif  // ECC_COMMANDS_HPP_
