#ifndef ECC_TRAINER_HPP_
#define ECC_TRAINER_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ecc/center_bank.hpp"
#include "ecc/error.hpp"
#include "ecc/linalg.hpp"
#include "ecc/loss.hpp"
#include "ecc/mlp.hpp"
#include "ecc/synthetic.hpp"

namespace ecc {

/// Named (λ₁, λ₂) pairs tuned per benchmark.
enum class Preset { None, AIR, CUB, CAR, NAB, iNat2018 };

inline std::string_view to_string(Preset preset) {
  switch (preset) {
    case Preset::None: return "none";
    case Preset::AIR: return "AIR";
    case Preset::CUB: return "CUB";
    case Preset::CAR: return "CAR";
    case Preset::NAB: return "NAB";
    case Preset::iNat2018: return "iNat2018";
  }
  return "none";
}

inline Preset parse_preset(std::string_view name) {
  for (Preset p : {Preset::None, Preset::AIR, Preset::CUB, Preset::CAR, Preset::NAB, Preset::iNat2018}) {
    if (name == to_string(p)) return p;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown preset '" + std::string(name) + "'");
}

inline std::optional<LossWeights> preset_weights(Preset preset) {
  switch (preset) {
    case Preset::AIR: return LossWeights{1.4, 0.2};
    case Preset::CUB: return LossWeights{1.7, 0.6};
    case Preset::CAR: return LossWeights{1.4, 0.3};
    case Preset::NAB: return LossWeights{0.7, 0.08};
    case Preset::iNat2018: return LossWeights{0.05, 0.001};
    case Preset::None: return std::nullopt;
  }
  return std::nullopt;
}

struct TrainConfig {
  LossWeights weights;
  std::size_t batch_size = 32;
  std::size_t epochs = 40;
  double lr0 = 0.05;
  double momentum = 0.9;
  std::size_t lr_decay_every = 15;
  double lr_decay_factor = 0.1;
  bool reset_counters_each_epoch = false;
  std::uint64_t shuffle_seed = 1;
  Preset preset = Preset::None;

  /// Config with the preset's λ pair and defaults everywhere else.
  static TrainConfig with_preset(Preset preset) {
    TrainConfig cfg;
    cfg.preset = preset;
    if (auto w = preset_weights(preset)) cfg.weights = *w;
    return cfg;
  }

  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); };
    if (!(weights.mcc >= 0.0) || !(weights.clg >= 0.0)) fail("lambda_mcc and lambda_clg must be >= 0");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (epochs < 1) fail("epochs must be >= 1");
    if (!(lr0 > 0.0)) fail("lr0 must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
    if (lr_decay_every < 1) fail("lr_decay_every must be >= 1");
    if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) fail("lr_decay_factor must lie in (0, 1)");
    if (auto w = preset_weights(preset)) {
      if (w->mcc != weights.mcc || w->clg != weights.clg) {
        fail("preset " + std::string(to_string(preset)) + " pins lambda_mcc/lambda_clg to its own values");
      }
    }
  }

  /// Step decay: lr0 · factor^floor((epoch − 1) / every), epochs 1-based.
  double learning_rate(std::size_t epoch) const {
    const auto decays = static_cast<double>((epoch - 1) / lr_decay_every);
    return lr0 * std::pow(lr_decay_factor, decays);
  }
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double ce = 0.0;
  double mcc = 0.0;
  double clg = 0.0;
  double total = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  double center_drift = 0.0;
  double recovery_rate = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

using TrainLog = std::vector<EpochRecord>;

struct Evaluation {
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

inline std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

/// Argmax-of-logits accuracy and confusion counts.
inline Evaluation evaluate(const MlpModel& model, const Dataset& data, std::size_t threads = 1) {
  if (data.input_dim() != model.input_dim() || data.num_classes() != model.num_classes()) {
    throw Error(ErrorKind::ShapeMismatch, "dataset shape does not match the model");
  }
  const auto pass = model.forward(data.inputs, threads);
  const std::size_t n = model.num_classes();
  Evaluation ev{0.0, std::vector<std::vector<std::size_t>>(n, std::vector<std::size_t>(n, 0))};
  std::size_t correct = 0;
  for (std::size_t k = 0; k < data.size(); ++k) {
    const std::size_t predicted = argmax(pass.logits().row(k));
    ++ev.confusion[data.labels[k]][predicted];
    if (predicted == data.labels[k]) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return ev;
}

inline double recovery_rate(const std::vector<std::size_t>& most_similar, const std::vector<std::size_t>& oracle) {
  if (most_similar.size() != oracle.size()) throw Error(ErrorKind::ShapeMismatch, "recovery_rate size mismatch");
  std::size_t hits = 0;
  for (std::size_t y = 0; y < oracle.size(); ++y) hits += most_similar[y] == oracle[y];
  return static_cast<double>(hits) / static_cast<double>(oracle.size());
}

/// Seen by TrainOptions::before_loss, with the bank exactly as the batch's
/// loss will read it.
struct BatchEvent {
  std::size_t epoch;
  std::size_t batch;
  const CenterBank& bank;
  std::span<const std::size_t> sample_indices;
};

struct TrainOptions {
  const Dataset* test = nullptr;
  std::size_t threads = 1;
  std::function<void(const BatchEvent&)> before_loss;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  MlpModel model;
  CenterBank bank;
  TrainLog log;
};

/// Mini-batch training under CE + λ₁·MCC + λ₂·CLG.
///
/// Per batch: forward, similarity from the current bank, loss, backprop,
/// momentum step, and only then one center update per sample in batch order
/// using the forward-pass features/logits. Centers are snapshotted at epoch 0
/// and at the end of every epoch.
inline TrainResult train(MlpModel model, const Dataset& data, CenterBank bank, const TrainConfig& cfg,
                         const TrainOptions& options = {}) {
  cfg.validate();
  if (data.input_dim() != model.input_dim()) throw Error(ErrorKind::ShapeMismatch, "dataset input_dim != model");
  if (bank.num_classes() != model.num_classes() || bank.feature_dim() != model.feature_dim()) {
    throw Error(ErrorKind::ShapeMismatch, "center bank shape does not match the model's (N, D)");
  }
  if (data.num_classes() != model.num_classes()) throw Error(ErrorKind::ShapeMismatch, "dataset classes != model");

  const auto oracle = class_affinity_oracle(data);
  SgdMomentum optimizer(model.params(), cfg.momentum);
  std::mt19937_64 shuffle_rng(cfg.shuffle_seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  if (bank.snapshots().empty()) bank.take_snapshot(0);
  TrainLog log;
  const std::size_t d = data.input_dim();
  const bool needs_similarity = cfg.weights.mcc > 0.0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.reset_counters_each_epoch && epoch > 1) bank.reset_counters();
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    const double lr = cfg.learning_rate(epoch);
    double sum_ce = 0.0, sum_mcc = 0.0, sum_clg = 0.0, sum_total = 0.0;
    std::size_t batches = 0;

    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++batches) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + begin, end - begin);
      const std::string where = "epoch " + std::to_string(epoch) + " batch " + std::to_string(batches);
      try {
        std::vector<double> rows;
        rows.reserve(idx.size() * d);
        std::vector<std::size_t> labels;
        labels.reserve(idx.size());
        for (std::size_t i : idx) {
          const auto r = data.inputs.row(i);
          rows.insert(rows.end(), r.begin(), r.end());
          labels.push_back(data.labels[i]);
        }
        const auto pass = model.forward(DenseMatrix(idx.size(), d, std::move(rows)), options.threads);
        Batch batch{pass.features(), pass.logits(), std::move(labels)};

        if (options.before_loss) options.before_loss(BatchEvent{epoch, batches, bank, idx});
        const SimilarityMatrix sim = needs_similarity
                                         ? build_similarity(bank)
                                         : SimilarityMatrix{DenseMatrix(bank.num_classes(), bank.num_classes()),
                                                            std::vector<std::size_t>(bank.num_classes(), 0)};
        const LossResult loss = final_loss(batch, bank, sim, cfg.weights);
        sum_ce += loss.ce;
        sum_mcc += loss.mcc;
        sum_clg += loss.clg;
        sum_total += loss.total;

        const ParamSet grads = model.backward(pass, loss.grad_features, loss.grad_logits);
        optimizer.step(model.params(), grads, lr);
        if (!model.all_params_finite()) throw Error(ErrorKind::NonFinite, "a model parameter left the finite range");

        for (std::size_t k = 0; k < batch.size(); ++k) {
          bank.update(batch.labels[k], batch.features.row(k), batch.logits.row(k));
        }
      } catch (const Error& e) {
        throw Error(e.kind(), where + ": " + e.detail());
      }
    }

    const std::size_t previous = bank.snapshots().size() - 1;
    bank.take_snapshot(epoch);
    const auto& snaps = bank.snapshots();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.ce = sum_ce / static_cast<double>(batches);
    rec.mcc = sum_mcc / static_cast<double>(batches);
    rec.clg = sum_clg / static_cast<double>(batches);
    rec.total = sum_total / static_cast<double>(batches);
    rec.train_accuracy = evaluate(model, data, options.threads).accuracy;
    if (options.test != nullptr) rec.test_accuracy = evaluate(model, *options.test, options.threads).accuracy;
    rec.center_drift = center_drift(snaps[previous], snaps.back()).mean;
    rec.recovery_rate = recovery_rate(build_similarity(bank).most_similar, oracle);
    log.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  return TrainResult{std::move(model), std::move(bank), std::move(log)};
}

}  // namespace ecc

#endif  // ECC_TRAINER_HPP_
