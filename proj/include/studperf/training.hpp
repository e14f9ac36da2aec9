#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "studperf/dataset.hpp"
#include "studperf/error.hpp"
#include "studperf/format.hpp"
#include "studperf/nn.hpp"
#include "studperf/rng.hpp"

namespace studperf::training {

struct EarlyStop {
  enum class Kind { None, LossThreshold, Patience };
  Kind kind = Kind::None;
  double threshold = 0.0;    // LossThreshold: stop once train loss < threshold
  std::size_t patience = 0;  // Patience: stop after this many epochs without a new best val loss
};

/// Training regime. `scaling` and `features` are consumed when the data is prepared; the loop
/// itself only reads the optimisation fields.
struct TrainConfig {
  enum class Features { All, Selected };

  std::size_t batch_size = 8;
  std::size_t max_epochs = 500;
  double learning_rate = 0.01;
  std::uint64_t seed = 42;
  EarlyStop early_stop;
  bool scaling = true;
  Features features = Features::All;

  void validate() const {
    if (batch_size < 1) fail(ErrorKind::InvalidConfig, "batch_size must be >= 1");
    if (max_epochs < 1) fail(ErrorKind::InvalidConfig, "max_epochs must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      fail(ErrorKind::NonPositiveLearningRate, "learning_rate must be finite and >= 0");
    }
    if (early_stop.kind == EarlyStop::Kind::LossThreshold && !(early_stop.threshold > 0.0)) {
      fail(ErrorKind::InvalidConfig, "loss threshold must be > 0");
    }
    if (early_stop.kind == EarlyStop::Kind::Patience && early_stop.patience < 1) {
      fail(ErrorKind::InvalidConfig, "patience must be >= 1");
    }
  }
};

enum class StopReason { EpochCap, LossThreshold, Patience };

constexpr std::string_view to_string(StopReason r) noexcept {
  switch (r) {
    case StopReason::EpochCap: return "epoch_cap";
    case StopReason::LossThreshold: return "loss_threshold";
    case StopReason::Patience: return "patience";
  }
  return "unknown";
}

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_mae = 0.0;
  std::optional<double> val_loss;  // absent when the validation partition is empty
  std::optional<double> val_mae;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  StopReason stop_reason = StopReason::EpochCap;
  std::size_t updates = 0;  // mini-batch steps taken
};

struct TrainResult {
  nn::Network network;
  TrainingHistory history;
};

/// Mini-batch SGD on the MSE between network output and one-hot targets.
///
/// Each epoch shuffles the training rows (Fisher-Yates), walks them in batches of
/// `batch_size` (the last batch may be short), and then records loss/MAE from separate
/// infer-mode passes over the training and validation partitions. Deterministic in
/// (network weights, cfg.seed).
inline TrainResult train(nn::Network net, const SplitDataset& split, const TrainConfig& cfg) {
  cfg.validate();
  const auto& train_set = split.train;
  if (train_set.empty()) fail(ErrorKind::EmptyTrainingSet, "training partition is empty");
  if (train_set.features().cols() != net.input_width()) {
    fail(ErrorKind::WidthMismatch, "features have " + std::to_string(train_set.features().cols()) +
                                       " columns, network expects " + std::to_string(net.input_width()));
  }
  if (train_set.num_classes() != net.output_width()) {
    fail(ErrorKind::WidthMismatch, std::to_string(train_set.num_classes()) + " classes but network emits " +
                                       std::to_string(net.output_width()));
  }
  const bool has_val = !split.validation.empty();
  if (cfg.early_stop.kind == EarlyStop::Kind::Patience && !has_val) {
    fail(ErrorKind::InvalidConfig, "patience early stopping needs a validation partition");
  }

  const Matrix& x_train = train_set.features().values();
  const Matrix y_train = train_set.one_hot();
  const Matrix y_val = split.validation.one_hot();
  const std::size_t n = train_set.size();

  Rng rng(cfg.seed, rng_stream::kTrain);
  TrainResult res;
  auto& hist = res.history;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto order = permutation(n, rng);
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, n - start));
      const Matrix xb = x_train.gather_rows(idx);
      const Matrix yb = y_train.gather_rows(idx);
      const auto fwd = nn::forward(net, xb, nn::Mode::Train, rng);
      const auto grads = nn::backward(net, fwd.cache, yb);
      if (cfg.learning_rate > 0.0) nn::sgd_update(net, grads, cfg.learning_rate);
      ++hist.updates;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const Matrix pred_train = nn::infer(net, x_train);
    rec.train_loss = nn::mse(pred_train, y_train);
    rec.train_mae = nn::mae(pred_train, y_train);
    if (has_val) {
      const Matrix pred_val = nn::infer(net, split.validation.features().values());
      rec.val_loss = nn::mse(pred_val, y_val);
      rec.val_mae = nn::mae(pred_val, y_val);
    }
    hist.epochs.push_back(rec);

    if (cfg.early_stop.kind == EarlyStop::Kind::LossThreshold && rec.train_loss < cfg.early_stop.threshold) {
      hist.stop_reason = StopReason::LossThreshold;
      break;
    }
    if (cfg.early_stop.kind == EarlyStop::Kind::Patience) {
      if (*rec.val_loss < best_val) {
        best_val = *rec.val_loss;
        since_best = 0;
      } else if (++since_best >= cfg.early_stop.patience) {
        hist.stop_reason = StopReason::Patience;
        break;
      }
    }
  }
  res.network = std::move(net);
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalReport {
  std::size_t n = 0;
  double accuracy = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // rows: true class, cols: predicted
  std::vector<double> precision;
  std::vector<double> recall;
  double majority_baseline = 0.0;
};

inline double accuracy_from_confusion(const std::vector<std::vector<std::size_t>>& confusion) {
  std::size_t diag = 0, total = 0;
  for (std::size_t i = 0; i < confusion.size(); ++i) {
    for (std::size_t j = 0; j < confusion[i].size(); ++j) {
      total += confusion[i][j];
      if (i == j) diag += confusion[i][j];
    }
  }
  return total ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;
}

inline EvalReport evaluate_predictions(std::span<const int> truth, std::span<const int> predicted,
                                       std::size_t num_classes) {
  if (truth.empty()) fail(ErrorKind::EmptyTestSet, "nothing to evaluate");
  if (truth.size() != predicted.size()) fail(ErrorKind::LengthMismatch, "truth and predictions differ in length");
  EvalReport r;
  r.n = truth.size();
  r.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto t = static_cast<std::size_t>(truth[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (t >= num_classes || p >= num_classes) fail(ErrorKind::ShapeMismatch, "class index out of range");
    ++r.confusion[t][p];
  }
  r.accuracy = accuracy_from_confusion(r.confusion);

  std::size_t majority = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    std::size_t actual = 0, claimed = 0;
    for (std::size_t k = 0; k < num_classes; ++k) {
      actual += r.confusion[c][k];
      claimed += r.confusion[k][c];
    }
    const double tp = static_cast<double>(r.confusion[c][c]);
    r.precision.push_back(claimed ? tp / static_cast<double>(claimed) : 0.0);
    r.recall.push_back(actual ? tp / static_cast<double>(actual) : 0.0);
    majority = std::max(majority, actual);
  }
  r.majority_baseline = static_cast<double>(majority) / static_cast<double>(r.n);
  return r;
}

inline EvalReport evaluate(const nn::Network& net, const LabeledDataset& test) {
  if (test.empty()) fail(ErrorKind::EmptyTestSet, "test partition is empty");
  const auto predicted = nn::predict_classes(net, test.features().values());
  return evaluate_predictions(test.labels(), predicted, test.num_classes());
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"n", r.n},
          {"accuracy", r.accuracy},
          {"majority_baseline", r.majority_baseline},
          {"confusion", r.confusion},
          {"precision", r.precision},
          {"recall", r.recall}};
}

// ---------------------------------------------------------------------------
// History export
// ---------------------------------------------------------------------------

inline constexpr std::string_view kHistoryHeader = "epoch,train_loss,train_mae,val_loss,val_mae";

/// CSV with one row per epoch. Missing validation metrics are written as empty fields.
inline void export_history(const TrainingHistory& history, std::ostream& out) {
  if (history.epochs.empty()) fail(ErrorKind::EmptyHistory, "history has no epochs");
  const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  out << kHistoryHeader << '\n';
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.train_mae) << ','
        << opt(e.val_loss) << ',' << opt(e.val_mae) << '\n';
  }
}

inline std::string export_history(const TrainingHistory& history) {
  std::ostringstream out;
  export_history(history, out);
  return out.str();
}

inline std::vector<EpochRecord> parse_history(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kHistoryHeader) {
    fail(ErrorKind::MalformedRow, "history CSV header mismatch");
  }
  std::vector<EpochRecord> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto cells = detail::split_delimited(line, ',');
    if (cells.size() != 5) fail(ErrorKind::MalformedRow, "history row needs 5 fields: " + line);
    EpochRecord r;
    const auto epoch = parse_integer(cells[0]);
    const auto tl = parse_double(cells[1]);
    const auto tm = parse_double(cells[2]);
    if (!epoch || !tl || !tm) fail(ErrorKind::MalformedRow, "bad history row: " + line);
    r.epoch = static_cast<std::size_t>(*epoch);
    r.train_loss = *tl;
    r.train_mae = *tm;
    if (!cells[3].empty()) r.val_loss = parse_double(cells[3]);
    if (!cells[4].empty()) r.val_mae = parse_double(cells[4]);
    out.push_back(r);
  }
  return out;
}

}  // namespace studperf::training
