#ifndef ECC_IO_HPP_
#define ECC_IO_HPP_

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

#include "ecc/center_bank.hpp"
#include "ecc/error.hpp"
#include "ecc/linalg.hpp"
#include "ecc/metrics.hpp"
#include "ecc/mlp.hpp"
#include "ecc/synthetic.hpp"
#include "ecc/trainer.hpp"

namespace ecc::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text) {
  if (text == "nan") return std::nan("");
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::Io, "cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

inline std::size_t parse_index(std::string_view text) {
  std::size_t v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::Io, "cannot parse index '" + std::string(text) + "'");
  }
  return v;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << contents;
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

inline json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::vector<std::string_view> lines(std::string_view text) {
  std::vector<std::string_view> out;
  for (auto l : split(text, '\n')) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    if (!l.empty()) out.push_back(l);
  }
  return out;
}

template <typename T>
T require(const json& j, const char* key, ErrorKind kind) {
  if (!j.contains(key)) throw Error(kind, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(kind, std::string("field '") + key + "': " + e.what());
  }
}

inline json matrix_to_json(const DenseMatrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

inline DenseMatrix matrix_from_json(const json& j) {
  try {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw Error(ErrorKind::Io, "empty matrix");
    std::vector<double> values;
    for (const auto& r : rows) {
      if (r.size() != rows.front().size()) throw Error(ErrorKind::Io, "ragged matrix");
      values.insert(values.end(), r.begin(), r.end());
    }
    return DenseMatrix(rows.size(), rows.front().size(), std::move(values));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Io, std::string("matrix: ") + e.what());
  }
}

}  // namespace detail

// --- synthetic data -------------------------------------------------------

inline json spec_to_json(const SyntheticSpec& spec) {
  return json{{"num_superclusters", spec.num_superclusters},
              {"subclasses_per_cluster", spec.subclasses_per_cluster},
              {"input_dim", spec.input_dim},
              {"samples_per_class_train", spec.samples_per_class_train},
              {"samples_per_class_test", spec.samples_per_class_test},
              {"sigma_super", spec.sigma_super},
              {"sigma_sub", spec.sigma_sub},
              {"sigma_noise", spec.sigma_noise},
              {"seed", spec.seed}};
}

/// Every field is required. Throws InvalidSpec naming the first problem.
inline SyntheticSpec spec_from_json(const json& j) {
  using detail::require;
  constexpr auto k = ErrorKind::InvalidSpec;
  SyntheticSpec spec;
  spec.num_superclusters = require<std::size_t>(j, "num_superclusters", k);
  spec.subclasses_per_cluster = require<std::size_t>(j, "subclasses_per_cluster", k);
  spec.input_dim = require<std::size_t>(j, "input_dim", k);
  spec.samples_per_class_train = require<std::size_t>(j, "samples_per_class_train", k);
  spec.samples_per_class_test = require<std::size_t>(j, "samples_per_class_test", k);
  spec.sigma_super = require<double>(j, "sigma_super", k);
  spec.sigma_sub = require<double>(j, "sigma_sub", k);
  spec.sigma_noise = require<double>(j, "sigma_noise", k);
  spec.seed = require<std::uint64_t>(j, "seed", k);
  spec.validate();
  return spec;
}

/// Header `label,x0,...,x{dim-1}`, one row per sample.
inline std::string dataset_to_csv(const Dataset& data) {
  std::string out = "label";
  for (std::size_t i = 0; i < data.input_dim(); ++i) out += ",x" + std::to_string(i);
  out += '\n';
  for (std::size_t r = 0; r < data.size(); ++r) {
    out += std::to_string(data.labels[r]);
    for (double v : data.inputs.row(r)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline Dataset dataset_from_csv(std::string_view text, const SyntheticSpec& spec, Split split) {
  const auto rows = detail::lines(text);
  if (rows.size() < 2) throw Error(ErrorKind::Io, "dataset CSV has no samples");
  const auto header = detail::split(rows.front(), ',');
  if (header.empty() || header.front() != "label") throw Error(ErrorKind::Io, "dataset CSV header must start with 'label'");
  const std::size_t dim = header.size() - 1;
  if (dim != spec.input_dim) throw Error(ErrorKind::Io, "dataset CSV width disagrees with its spec");
  std::vector<double> values;
  values.reserve((rows.size() - 1) * dim);
  std::vector<std::size_t> labels;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto cells = detail::split(rows[r], ',');
    if (cells.size() != dim + 1) throw Error(ErrorKind::Io, "dataset CSV row " + std::to_string(r) + " is ragged");
    const std::size_t label = parse_index(cells[0]);
    if (label >= spec.num_classes()) throw Error(ErrorKind::Io, "dataset CSV label out of range");
    labels.push_back(label);
    for (std::size_t i = 1; i < cells.size(); ++i) values.push_back(parse_double(cells[i]));
  }
  return Dataset{DenseMatrix(labels.size(), dim, std::move(values)), std::move(labels), split, spec};
}

// --- model and bank -------------------------------------------------------

inline json model_to_json(const MlpModel& model) {
  json layers = json::array();
  for (const auto& p : model.params()) {
    layers.push_back(json{{"weights", detail::matrix_to_json(p.weights)}, {"bias", p.bias}});
  }
  return json{{"layer_dims", model.layer_dims()},
              {"init_seed", model.init_seed()},
              {"input_shift", model.input_shift()},
              {"input_scale", model.input_scale()},
              {"layers", std::move(layers)}};
}

inline MlpModel model_from_json(const json& j) {
  using detail::require;
  constexpr auto k = ErrorKind::Io;
  auto dims = require<std::vector<std::size_t>>(j, "layer_dims", k);
  const auto seed = require<std::uint64_t>(j, "init_seed", k);
  if (!j.contains("layers") || !j.at("layers").is_array()) throw Error(k, "missing field 'layers'");
  ParamSet params;
  for (const auto& layer : j.at("layers")) {
    params.push_back({detail::matrix_from_json(layer.at("weights")), require<std::vector<double>>(layer, "bias", k)});
  }
  MlpModel model(std::move(dims), seed, std::move(params));
  model.set_input_transform(require<std::vector<double>>(j, "input_shift", k),
                            require<std::vector<double>>(j, "input_scale", k));
  return model;
}

inline json bank_to_json(const CenterBank& bank) {
  return json{{"num_classes", bank.num_classes()},
              {"feature_dim", bank.feature_dim()},
              {"seed", bank.seed()},
              {"counters", bank.counters()},
              {"center_features", detail::matrix_to_json(bank.center_features())},
              {"center_logits", detail::matrix_to_json(bank.center_logits())}};
}

inline CenterBank bank_from_json(const json& j) {
  using detail::require;
  constexpr auto k = ErrorKind::Io;
  if (!j.contains("center_features") || !j.contains("center_logits")) throw Error(k, "bank JSON lacks center tables");
  CenterBank bank(detail::matrix_from_json(j.at("center_features")), detail::matrix_from_json(j.at("center_logits")),
                  require<std::vector<std::uint64_t>>(j, "counters", k), require<std::uint64_t>(j, "seed", k));
  if (bank.num_classes() != require<std::size_t>(j, "num_classes", k) ||
      bank.feature_dim() != require<std::size_t>(j, "feature_dim", k)) {
    throw Error(k, "bank JSON shape fields disagree with its tables");
  }
  return bank;
}

// --- training -------------------------------------------------------------

inline json train_config_to_json(const TrainConfig& cfg) {
  return json{{"preset", std::string(to_string(cfg.preset))},
              {"lambda_mcc", cfg.weights.mcc},
              {"lambda_clg", cfg.weights.clg},
              {"batch_size", cfg.batch_size},
              {"epochs", cfg.epochs},
              {"lr0", cfg.lr0},
              {"momentum", cfg.momentum},
              {"lr_decay_every", cfg.lr_decay_every},
              {"lr_decay_factor", cfg.lr_decay_factor},
              {"reset_counters_each_epoch", cfg.reset_counters_each_epoch},
              {"shuffle_seed", cfg.shuffle_seed}};
}

inline constexpr const char* kTrainLogHeader =
    "epoch,lr,ce,mcc,clg,total,train_accuracy,test_accuracy,center_drift,recovery_rate";

inline std::string train_log_to_csv(const TrainLog& log) {
  std::string out = std::string(kTrainLogHeader) + "\n";
  for (const auto& r : log) {
    out += std::to_string(r.epoch);
    for (double v : {r.lr, r.ce, r.mcc, r.clg, r.total, r.train_accuracy, r.test_accuracy, r.center_drift,
                     r.recovery_rate}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline TrainLog train_log_from_csv(std::string_view text) {
  const auto rows = detail::lines(text);
  if (rows.empty() || rows.front() != kTrainLogHeader) throw Error(ErrorKind::Io, "unexpected train log header");
  TrainLog log;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto c = detail::split(rows[r], ',');
    if (c.size() != 10) throw Error(ErrorKind::Io, "train log row " + std::to_string(r) + " is ragged");
    log.push_back(EpochRecord{parse_index(c[0]), parse_double(c[1]), parse_double(c[2]), parse_double(c[3]),
                              parse_double(c[4]), parse_double(c[5]), parse_double(c[6]), parse_double(c[7]),
                              parse_double(c[8]), parse_double(c[9])});
  }
  return log;
}

/// One row per class: class index followed by its D center values.
inline std::string snapshot_to_csv(const CenterSnapshot& snapshot) {
  std::string out;
  const auto& f = snapshot.center_features();
  for (std::size_t y = 0; y < f.rows(); ++y) {
    out += std::to_string(y);
    for (double v : f.row(y)) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

// --- reports --------------------------------------------------------------

inline json geometry_to_json(const GeometryReport& g) {
  return json{{"intra_class_variance", g.intra_class_variance},
              {"nearest_nontarget_margin", g.nearest_nontarget_margin},
              {"per_class_variance", g.per_class_variance},
              {"per_class_margin", g.per_class_margin},
              {"nearest_class", g.nearest_class}};
}

inline json soft_labels_to_json(const SoftLabelReport& report) {
  json classes = json::array();
  for (std::size_t y = 0; y < report.classes.size(); ++y) {
    const auto& c = report.classes[y];
    classes.push_back(json{{"class", y},
                           {"most_similar", c.most_similar},
                           {"similar_confidence", c.similar_confidence},
                           {"other_confidence", c.other_confidence},
                           {"soft_label", c.soft_label}});
  }
  return json{{"similar_dominance_rate", report.similar_dominance_rate()}, {"classes", std::move(classes)}};
}

/// Header `label,pc1,pc2`.
inline std::string projection_to_csv(const DenseMatrix& coords, const std::vector<std::size_t>& labels) {
  if (coords.rows() != labels.size() || coords.cols() < 2) {
    throw Error(ErrorKind::ShapeMismatch, "projection needs one 2-D row per label");
  }
  std::string out = "label,pc1,pc2\n";
  for (std::size_t r = 0; r < labels.size(); ++r) {
    out += std::to_string(labels[r]) + ',' + format_double(coords(r, 0)) + ',' + format_double(coords(r, 1)) + '\n';
  }
  return out;
}

}  // namespace ecc::io

#endif  // ECC_IO_HPP_
