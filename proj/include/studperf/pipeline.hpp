#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "studperf/dataset.hpp"
#include "studperf/error.hpp"
#include "studperf/nn.hpp"
#include "studperf/stats.hpp"
#include "studperf/training.hpp"

namespace studperf::pipeline {

using training::TrainConfig;

/// End-to-end settings. Serialized as a flat JSON object; see README for the keys.
struct PipelineConfig {
  std::string data_path;
  std::string scheme_version{EncodingScheme::kAlphabeticalV1};
  GradeBins bins;
  double train_ratio = 0.7;
  double validation_ratio = 0.2;
  TrainConfig train;  // train.seed also seeds the split and the weight initialization
  std::size_t selected_k = 7;
  std::vector<double> dropout_rates{0.2, 0.2, 0.2, 0.2};
  std::string out_dir = "out";

  [[nodiscard]] std::uint64_t seed() const noexcept { return train.seed; }

  void validate() const {
    EncodingScheme::by_version(scheme_version);
    bins.validate();
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) fail(ErrorKind::RatioOutOfRange, "train_ratio must lie in (0, 1)");
    if (!(validation_ratio >= 0.0 && validation_ratio < 1.0)) {
      fail(ErrorKind::RatioOutOfRange, "validation_ratio must lie in [0, 1)");
    }
    train.validate();
    if (dropout_rates.size() != 4) fail(ErrorKind::InvalidConfig, "dropout_rates needs 4 entries");
    for (double r : dropout_rates) {
      if (!(r >= 0.0 && r < 1.0)) fail(ErrorKind::InvalidConfig, "dropout rates must lie in [0, 1)");
    }
    if (selected_k < 1) fail(ErrorKind::InvalidConfig, "selected_k must be >= 1");
  }

  /// Overlays the keys present in `doc` onto this config.
  void merge_json(const nlohmann::json& doc) {
    static const std::set<std::string> known = {
        "data",       "scheme_version", "grade_edges", "class_names",   "train_ratio", "validation_ratio",
        "seed",       "batch_size",     "max_epochs",  "learning_rate", "early_stop",  "loss_threshold",
        "patience",   "scaling",        "features",    "selected_k",    "dropout_rates", "out"};
    if (!doc.is_object()) fail(ErrorKind::InvalidConfig, "config must be a JSON object");
    try {
      for (const auto& [key, value] : doc.items()) {
        if (!known.contains(key)) fail(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
      }
      if (doc.contains("data")) data_path = doc["data"].get<std::string>();
      if (doc.contains("scheme_version")) scheme_version = doc["scheme_version"].get<std::string>();
      if (doc.contains("grade_edges")) bins.edges = doc["grade_edges"].get<std::vector<int>>();
      if (doc.contains("class_names")) bins.names = doc["class_names"].get<std::vector<std::string>>();
      if (doc.contains("train_ratio")) train_ratio = doc["train_ratio"].get<double>();
      if (doc.contains("validation_ratio")) validation_ratio = doc["validation_ratio"].get<double>();
      if (doc.contains("seed")) train.seed = doc["seed"].get<std::uint64_t>();
      if (doc.contains("batch_size")) train.batch_size = doc["batch_size"].get<std::size_t>();
      if (doc.contains("max_epochs")) train.max_epochs = doc["max_epochs"].get<std::size_t>();
      if (doc.contains("learning_rate")) train.learning_rate = doc["learning_rate"].get<double>();
      if (doc.contains("early_stop")) set_early_stop(doc["early_stop"].get<std::string>());
      if (doc.contains("loss_threshold")) train.early_stop.threshold = doc["loss_threshold"].get<double>();
      if (doc.contains("patience")) train.early_stop.patience = doc["patience"].get<std::size_t>();
      if (doc.contains("scaling")) train.scaling = doc["scaling"].get<bool>();
      if (doc.contains("features")) set_features(doc["features"].get<std::string>());
      if (doc.contains("selected_k")) selected_k = doc["selected_k"].get<std::size_t>();
      if (doc.contains("dropout_rates")) dropout_rates = doc["dropout_rates"].get<std::vector<double>>();
      if (doc.contains("out")) out_dir = doc["out"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::InvalidConfig, std::string("bad config value: ") + e.what());
    }
  }

  void set_early_stop(const std::string& kind) {
    using K = training::EarlyStop::Kind;
    if (kind == "none") {
      train.early_stop.kind = K::None;
    } else if (kind == "loss_threshold") {
      train.early_stop.kind = K::LossThreshold;
    } else if (kind == "patience") {
      train.early_stop.kind = K::Patience;
    } else {
      fail(ErrorKind::InvalidConfig, "early_stop must be none, loss_threshold or patience");
    }
  }

  void set_features(const std::string& mode) {
    if (mode == "all") {
      train.features = TrainConfig::Features::All;
    } else if (mode == "selected") {
      train.features = TrainConfig::Features::Selected;
    } else {
      fail(ErrorKind::InvalidConfig, "features must be 'all' or 'selected'");
    }
  }
};

inline PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidConfig, "cannot open config file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  PipelineConfig cfg;
  cfg.merge_json(doc);
  return cfg;
}

inline std::vector<RawStudentRecord> load_records(const std::filesystem::path& path, ParseOptions options = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::InvalidConfig, "cannot open dataset " + path.string());
  return parse_csv(in, std::nullopt, options);
}

// ---------------------------------------------------------------------------
// Feature choice
// ---------------------------------------------------------------------------

/// Signed correlation with G3 over the integer-valued raw attributes; top k.
inline stats::FeatureRanking rank_numeric_features(const DataMatrix& encoded, std::size_t k) {
  const auto corr = stats::correlation_matrix(encoded.select_columns(numeric_schema_columns()));
  const std::vector<std::string> targets{"G3"};
  const std::vector<std::string> other_grades{"G1", "G2"};
  return stats::select_features(corr, targets, stats::RankMode::SignedDesc, stats::Aggregation::SingleTarget, k,
                                other_grades);
}

inline std::vector<std::string> feature_columns(const DataMatrix& encoded, const PipelineConfig& cfg) {
  std::vector<std::string> cols;
  if (cfg.train.features == TrainConfig::Features::Selected) {
    for (const auto& f : rank_numeric_features(encoded, cfg.selected_k).ranked) cols.push_back(f.name);
  } else {
    for (const auto& c : encoded.columns()) {
      if (!is_grade_column(c)) cols.push_back(c);
    }
  }
  return cols;
}

// ---------------------------------------------------------------------------
// Data preparation and model bundles
// ---------------------------------------------------------------------------

struct PreparedData {
  DataMatrix encoded;
  SplitDataset split;  // features already scaled when scaling is on
  std::vector<std::string> feature_columns;
  std::optional<MinMaxScaler> scaler;
};

inline SplitDataset apply_scaler(SplitDataset s, const MinMaxScaler& scaler) {
  s.train = s.train.with_features(scaler.transform(s.train.features()));
  s.validation = s.validation.with_features(scaler.transform(s.validation.features()));
  s.test = s.test.with_features(scaler.transform(s.test.features()));
  return s;
}

inline PreparedData prepare(std::span<const RawStudentRecord> records, const PipelineConfig& cfg) {
  cfg.validate();
  PreparedData p;
  p.encoded = encode(records, EncodingScheme::by_version(cfg.scheme_version));
  p.feature_columns = feature_columns(p.encoded, cfg);
  const auto labeled = make_labeled(p.encoded, cfg.bins, p.feature_columns);
  p.split = split(labeled, cfg.train_ratio, cfg.validation_ratio, cfg.seed());
  if (cfg.train.scaling) {
    p.scaler = MinMaxScaler::fit(p.split.train.features().values());
    p.split = apply_scaler(std::move(p.split), *p.scaler);
  }
  return p;
}

/// A trained network plus everything needed to turn raw rows into its inputs.
struct ModelBundle {
  nn::Network network;
  std::vector<std::string> feature_columns;
  std::optional<MinMaxScaler> scaler;
  GradeBins bins;
  std::string scheme_version;
  // split that produced the training rows, so evaluation can find the same test rows
  std::uint64_t split_seed = 0;
  double train_ratio = 0.7;
  double validation_ratio = 0.2;
};

inline std::string save_bundle(const ModelBundle& b) {
  auto doc = nn::to_json(b.network);
  nlohmann::json pre = {{"scheme_version", b.scheme_version},
                        {"feature_columns", b.feature_columns},
                        {"grade_edges", b.bins.edges},
                        {"class_names", b.bins.names},
                        {"split", {{"seed", b.split_seed},
                                   {"train_ratio", b.train_ratio},
                                   {"validation_ratio", b.validation_ratio}}}};
  if (b.scaler) {
    pre["scaler"] = {{"min", b.scaler->min}, {"max", b.scaler->max}};
  } else {
    pre["scaler"] = nullptr;
  }
  doc["pipeline"] = std::move(pre);
  return doc.dump(1) + "\n";
}

inline ModelBundle load_bundle(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptPayload, std::string("model payload is not valid JSON: ") + e.what());
  }
  ModelBundle b;
  b.network = nn::network_from_json(doc);
  try {
    const auto& pre = doc.at("pipeline");
    b.scheme_version = pre.at("scheme_version").get<std::string>();
    b.feature_columns = pre.at("feature_columns").get<std::vector<std::string>>();
    b.bins.edges = pre.at("grade_edges").get<std::vector<int>>();
    b.bins.names = pre.at("class_names").get<std::vector<std::string>>();
    const auto& sp = pre.at("split");
    b.split_seed = sp.at("seed").get<std::uint64_t>();
    b.train_ratio = sp.at("train_ratio").get<double>();
    b.validation_ratio = sp.at("validation_ratio").get<double>();
    if (!pre.at("scaler").is_null()) {
      MinMaxScaler s;
      s.min = pre["scaler"].at("min").get<std::vector<double>>();
      s.max = pre["scaler"].at("max").get<std::vector<double>>();
      b.scaler = std::move(s);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::CorruptPayload, std::string("model lacks preprocessing metadata: ") + e.what());
  }
  if (!std::is_sorted(b.bins.edges.begin(), b.bins.edges.end(), std::less_equal<>{}) ||
      (!b.bins.edges.empty() && (b.bins.edges.front() <= kMinGrade || b.bins.edges.back() > kMaxGrade))) {
    fail(ErrorKind::CorruptPayload, "model grade edges must be strictly increasing within (0, 20]");
  }
  if (b.feature_columns.size() != b.network.input_width() ||
      (b.scaler && b.scaler->min.size() != b.feature_columns.size())) {
    fail(ErrorKind::ShapeMismatch, "model preprocessing does not match the network input width");
  }
  if (b.bins.num_classes() != b.network.output_width() || b.bins.names.size() != b.network.output_width()) {
    fail(ErrorKind::ShapeMismatch, "class names do not match the network output width");
  }
  return b;
}

inline ModelBundle load_bundle_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::InvalidConfig, "cannot open model file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_bundle(ss.str());
}

/// Network inputs for raw records under the bundle's encoding, feature list and scaling.
inline Matrix bundle_inputs(const ModelBundle& b, std::span<const RawStudentRecord> records) {
  const auto encoded = encode(records, EncodingScheme::by_version(b.scheme_version));
  auto features = encoded.select_columns(b.feature_columns);
  if (b.scaler) features = b.scaler->transform(features);
  return features.values();
}

inline std::vector<int> bundle_predict(const ModelBundle& b, std::span<const RawStudentRecord> records) {
  return nn::predict_classes(b.network, bundle_inputs(b, records));
}

struct TrainOutcome {
  ModelBundle bundle;
  training::TrainingHistory history;
  PreparedData data;
};

inline TrainOutcome run_training(std::span<const RawStudentRecord> records, const PipelineConfig& cfg) {
  TrainOutcome out;
  out.data = prepare(records, cfg);
  const auto specs = nn::student_mlp_specs(out.data.feature_columns.size(), cfg.dropout_rates);
  auto net = nn::init_network(specs, cfg.seed());
  auto result = training::train(std::move(net), out.data.split, cfg.train);
  out.history = std::move(result.history);
  out.bundle = {std::move(result.network), out.data.feature_columns, out.data.scaler, cfg.bins,
                cfg.scheme_version, cfg.seed(), cfg.train_ratio, cfg.validation_ratio};
  return out;
}

/// Scores the bundle on the test partition of `records` under the bundle's own split settings.
inline training::EvalReport evaluate_bundle(const ModelBundle& b, std::span<const RawStudentRecord> records) {
  const auto encoded = encode(records, EncodingScheme::by_version(b.scheme_version));
  const auto labeled = make_labeled(encoded, b.bins, b.feature_columns);
  auto s = split(labeled, b.train_ratio, b.validation_ratio, b.split_seed);
  if (b.scaler) s = apply_scaler(std::move(s), *b.scaler);
  return training::evaluate(b.network, s.test);
}

}  // namespace studperf::pipeline
