// studperf command-line front end. See README.md for usage.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "studperf/pipeline.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace studperf;

namespace {

enum Exit { kOk = 0, kParse = 2, kBadArgument = 3, kStatistics = 4, kModel = 5, kEmptyPartition = 6 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::EmptyInput:
    case ErrorKind::MalformedRow:
    case ErrorKind::UnknownCategory:
    case ErrorKind::GradeOutOfRange:
    case ErrorKind::CorruptPayload:
    case ErrorKind::NonFiniteInput:
      return kParse;
    case ErrorKind::TooFewSamples:
    case ErrorKind::ConstantColumn:
    case ErrorKind::ConstantInput:
    case ErrorKind::LengthMismatch:
    case ErrorKind::TooFewRows:
      return kStatistics;
    case ErrorKind::ShapeMismatch:
    case ErrorKind::VersionMismatch:
    case ErrorKind::WidthMismatch:
    case ErrorKind::StaleCache:
      return kModel;
    case ErrorKind::DatasetTooSmall:
    case ErrorKind::EmptyTrainingSet:
    case ErrorKind::EmptyTestSet:
    case ErrorKind::EmptyHistory:
      return kEmptyPartition;
    default:
      return kBadArgument;
  }
}

void diagnostic(std::string_view kind, std::string_view message) {
  std::string line(message);
  for (char& c : line) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  std::cerr << "studperf:error:" << kind << ": " << line << '\n';
}

/// Flags shared by every subcommand. Unset flags fall back to the config file, then defaults.
struct CommonFlags {
  std::string data;
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App& cmd, CommonFlags& f) {
  cmd.add_option("--data", f.data, "student CSV (comma or semicolon separated)");
  cmd.add_option("--config", f.config, "JSON config file");
  cmd.add_option("--out", f.out, "output directory");
  cmd.add_option("--seed", f.seed, "seed for splitting, initialization and shuffling");
}

pipeline::PipelineConfig resolve(const CommonFlags& f) {
  auto cfg = f.config.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(f.config);
  if (!f.data.empty()) cfg.data_path = f.data;
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.seed) cfg.train.seed = *f.seed;
  return cfg;
}

std::vector<RawStudentRecord> read_data(const pipeline::PipelineConfig& cfg) {
  if (cfg.data_path.empty()) fail(ErrorKind::InvalidConfig, "no dataset given (use --data or the config key 'data')");
  return pipeline::load_records(cfg.data_path);
}

fs::path out_dir(const pipeline::PipelineConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::InvalidConfig, "cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) fail(ErrorKind::InvalidConfig, "cannot write " + path.string());
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

json moments_json(const stats::MomentSummary& m) {
  return {{"n", m.n},
          {"mean", m.mean},
          {"std", m.std},
          {"skewness", m.skewness},
          {"excess_kurtosis", m.excess_kurtosis},
          {"estimator_variant", stats::to_string(m.estimator_variant)}};
}

stats::EstimatorVariant parse_estimator(const std::string& s) {
  if (s == "biased") return stats::EstimatorVariant::Biased;
  if (s == "bias_corrected") return stats::EstimatorVariant::BiasCorrected;
  fail(ErrorKind::InvalidConfig, "estimator must be 'biased' or 'bias_corrected'");
}

// ---------------------------------------------------------------------------

struct StatsArgs {
  CommonFlags common;
  std::vector<std::string> columns;
  std::string estimator{stats::to_string(stats::kDefaultEstimator)};
};

int cmd_stats(const StatsArgs& a) {
  const auto cfg = resolve(a.common);
  const auto variant = parse_estimator(a.estimator);
  const auto records = read_data(cfg);
  const auto encoded = encode(records, EncodingScheme::by_version(cfg.scheme_version));
  const auto columns = a.columns.empty() ? numeric_schema_columns() : a.columns;
  for (const auto& c : columns) (void)encoded.column_index(c);

  json doc = json::object();
  for (const auto& c : columns) doc[c] = moments_json(stats::moments(encoded.column(c), variant));
  write_file(out_dir(cfg) / "stats.json", dump(doc));
  std::cout << dump(doc);
  return kOk;
}

struct ProbplotArgs {
  CommonFlags common;
  std::string column;
};

int cmd_probplot(const ProbplotArgs& a) {
  const auto cfg = resolve(a.common);
  const auto records = read_data(cfg);
  const auto encoded = encode(records, EncodingScheme::by_version(cfg.scheme_version));
  const auto p = stats::probplot(encoded.column(a.column));

  std::ostringstream csv;
  csv << "theoretical_quantile,ordered_value\n";
  for (std::size_t i = 0; i < p.ordered_sample.size(); ++i) {
    csv << format_double(p.theoretical_quantiles[i]) << ',' << format_double(p.ordered_sample[i]) << '\n';
  }
  const json side = {{"column", a.column},
                     {"n", p.ordered_sample.size()},
                     {"plotting_positions", "filliben"},
                     {"slope", p.slope},
                     {"intercept", p.intercept},
                     {"r", p.r}};
  const auto dir = out_dir(cfg);
  write_file(dir / ("probplot_" + a.column + ".csv"), csv.str());
  write_file(dir / ("probplot_" + a.column + ".json"), dump(side));
  std::cout << dump(side);
  return kOk;
}

struct CorrArgs {
  CommonFlags common;
  std::string columns = "all";
};

DataMatrix corr_input(const DataMatrix& encoded, const std::string& which) {
  if (which == "all") return encoded;
  if (which == "numeric") return encoded.select_columns(numeric_schema_columns());
  fail(ErrorKind::InvalidConfig, "--columns must be 'all' or 'numeric'");
}

int cmd_corr(const CorrArgs& a) {
  const auto cfg = resolve(a.common);
  const auto records = read_data(cfg);
  const auto encoded = encode(records, EncodingScheme::by_version(cfg.scheme_version));
  const auto corr = stats::correlation_matrix(corr_input(encoded, a.columns));

  std::ostringstream csv;
  for (const auto& l : corr.labels) csv << ',' << l;
  csv << '\n';
  json values = json::array();
  for (std::size_t i = 0; i < corr.labels.size(); ++i) {
    csv << corr.labels[i];
    json row = json::array();
    for (std::size_t j = 0; j < corr.labels.size(); ++j) {
      csv << ',' << format_double(corr.values(i, j));
      row.push_back(corr.values(i, j));
    }
    csv << '\n';
    values.push_back(std::move(row));
  }
  const json doc = {{"labels", corr.labels}, {"constant_columns", corr.constant_columns}, {"values", values}};
  const auto dir = out_dir(cfg);
  write_file(dir / "correlation.csv", csv.str());
  write_file(dir / "correlation.json", dump(doc));
  std::cout << "wrote " << (dir / "correlation.csv").string() << " (" << corr.labels.size() << " columns)\n";
  return kOk;
}

struct SelectArgs {
  CommonFlags common;
  std::string mode = "signed";
  std::string aggregation;
  std::vector<std::string> targets;
  std::size_t k = 7;
  std::string candidates = "numeric";
  bool keep_grades = false;
};

int cmd_select(const SelectArgs& a) {
  const auto cfg = resolve(a.common);
  stats::RankMode mode;
  if (a.mode == "signed" || a.mode == "signed_desc") {
    mode = stats::RankMode::SignedDesc;
  } else if (a.mode == "absolute" || a.mode == "absolute_desc") {
    mode = stats::RankMode::AbsoluteDesc;
  } else {
    fail(ErrorKind::InvalidConfig, "--mode must be 'signed' or 'absolute'");
  }
  const auto targets = a.targets.empty() ? std::vector<std::string>{"G3"} : a.targets;
  stats::Aggregation agg;
  const std::string agg_name = a.aggregation.empty() ? (targets.size() == 1 ? "single_target" : "max") : a.aggregation;
  if (agg_name == "max") {
    agg = stats::Aggregation::Max;
  } else if (agg_name == "mean") {
    agg = stats::Aggregation::Mean;
  } else if (agg_name == "single_target" || agg_name == "single") {
    agg = stats::Aggregation::SingleTarget;
  } else {
    fail(ErrorKind::InvalidConfig, "--aggregation must be 'max', 'mean' or 'single_target'");
  }

  const auto records = read_data(cfg);
  const auto encoded = encode(records, EncodingScheme::by_version(cfg.scheme_version));
  const auto corr = stats::correlation_matrix(corr_input(encoded, a.candidates));
  std::vector<std::string> exclude;
  if (!a.keep_grades) {
    for (const auto* g : {"G1", "G2", "G3"}) {
      if (std::find(targets.begin(), targets.end(), g) == targets.end()) exclude.emplace_back(g);
    }
  }
  const auto ranking = stats::select_features(corr, targets, mode, agg, a.k, exclude);
  const std::size_t candidates = corr.labels.size() - targets.size() -
                                 static_cast<std::size_t>(std::count_if(exclude.begin(), exclude.end(), [&](const auto& e) {
                                   return std::find(corr.labels.begin(), corr.labels.end(), e) != corr.labels.end();
                                 }));
  const auto full = stats::select_features(corr, targets, mode, agg, candidates, exclude);

  const auto to_list = [](const stats::FeatureRanking& r) {
    json list = json::array();
    for (const auto& f : r.ranked) list.push_back({{"name", f.name}, {"score", f.score}});
    return list;
  };
  const auto& reference = stats::reference_feature_set();
  const json doc = {{"mode", stats::to_string(mode)},
                    {"aggregation", stats::to_string(agg)},
                    {"targets", targets},
                    {"candidates", a.candidates},
                    {"excluded", exclude},
                    {"k", a.k},
                    {"entries", ranking.entries()},
                    {"ranking", to_list(ranking)},
                    {"full_ranking", to_list(full)},
                    {"reference_features", reference},
                    {"reference_overlap", stats::overlap(ranking, reference)}};
  write_file(out_dir(cfg) / "selection.json", dump(doc));
  std::cout << dump(doc);
  return kOk;
}

struct TrainArgs {
  CommonFlags common;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch;
  std::optional<double> lr;
  std::string features;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = resolve(a.common);
  if (a.epochs) cfg.train.max_epochs = *a.epochs;
  if (a.batch) cfg.train.batch_size = *a.batch;
  if (a.lr) cfg.train.learning_rate = *a.lr;
  if (!a.features.empty()) cfg.set_features(a.features);
  cfg.validate();

  const auto records = read_data(cfg);
  const auto outcome = pipeline::run_training(records, cfg);
  const auto dir = out_dir(cfg);
  write_file(dir / "model.json", pipeline::save_bundle(outcome.bundle));
  write_file(dir / "history.csv", training::export_history(outcome.history));
  write_file(dir / "split.json", dump(split_manifest(outcome.data.split)));
  std::ostringstream enc;
  write_csv(outcome.data.encoded, enc);
  write_file(dir / "encoded.csv", enc.str());

  const auto& h = outcome.history;
  std::cout << "epochs " << h.epochs.size() << " (" << training::to_string(h.stop_reason) << "), updates "
            << h.updates << '\n'
            << "train_loss first " << format_double(h.epochs.front().train_loss) << " last "
            << format_double(h.epochs.back().train_loss) << '\n'
            << "wrote " << (dir / "model.json").string() << '\n';
  return kOk;
}

struct EvaluateArgs {
  CommonFlags common;
  std::string model;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const auto cfg = resolve(a.common);
  const fs::path model = a.model.empty() ? fs::path(cfg.out_dir) / "model.json" : fs::path(a.model);
  auto bundle = pipeline::load_bundle_file(model);
  if (a.common.seed) bundle.split_seed = *a.common.seed;
  const auto records = read_data(cfg);
  const auto report = pipeline::evaluate_bundle(bundle, records);

  json doc = training::to_json(report);
  doc["class_names"] = bundle.bins.names;
  doc["split_seed"] = bundle.split_seed;
  write_file(out_dir(cfg) / "eval.json", dump(doc));
  std::cout << "accuracy " << format_double(report.accuracy) << '\n'
            << "majority_baseline " << format_double(report.majority_baseline) << '\n'
            << "n " << report.n << '\n';
  return kOk;
}

struct PredictArgs {
  CommonFlags common;
  std::string model;
  std::string input;
};

int cmd_predict(const PredictArgs& a) {
  const auto cfg = resolve(a.common);
  const fs::path model = a.model.empty() ? fs::path(cfg.out_dir) / "model.json" : fs::path(a.model);
  const auto bundle = pipeline::load_bundle_file(model);
  const std::string input = a.input.empty() ? cfg.data_path : a.input;
  if (input.empty()) fail(ErrorKind::InvalidConfig, "no input rows given (use --input or --data)");
  const auto records = pipeline::load_records(input, {.require_grades = false});
  const auto classes = pipeline::bundle_predict(bundle, records);

  std::ostringstream csv;
  csv << "row,class,label\n";
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto& name = bundle.bins.names[static_cast<std::size_t>(classes[i])];
    csv << i << ',' << classes[i] << ',' << name << '\n';
    std::cout << name << '\n';
  }
  write_file(out_dir(cfg) / "predictions.csv", csv.str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Student performance statistics and MLP pipeline"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  StatsArgs stats_args;
  auto* stats_cmd = app.add_subcommand("stats", "moments of dataset columns");
  add_common(*stats_cmd, stats_args.common);
  stats_cmd->add_option("--col", stats_args.columns, "column to summarize (repeatable; default: all numeric)");
  stats_cmd->add_option("--estimator", stats_args.estimator, "biased or bias_corrected");

  ProbplotArgs pp_args;
  auto* pp_cmd = app.add_subcommand("probplot", "normal probability plot data for one column");
  add_common(*pp_cmd, pp_args.common);
  pp_cmd->add_option("--col", pp_args.column, "column")->required();

  CorrArgs corr_args;
  auto* corr_cmd = app.add_subcommand("corr", "Pearson correlation matrix");
  add_common(*corr_cmd, corr_args.common);
  corr_cmd->add_option("--columns", corr_args.columns, "all or numeric");

  SelectArgs sel_args;
  auto* sel_cmd = app.add_subcommand("select", "rank features by correlation with the grades");
  add_common(*sel_cmd, sel_args.common);
  sel_cmd->add_option("--mode", sel_args.mode, "signed or absolute");
  sel_cmd->add_option("--aggregation", sel_args.aggregation, "max, mean or single_target");
  sel_cmd->add_option("--target", sel_args.targets, "target column (repeatable; default G3)");
  sel_cmd->add_option("--k", sel_args.k, "number of features to keep");
  sel_cmd->add_option("--candidates", sel_args.candidates, "numeric or all");
  sel_cmd->add_flag("--keep-grades", sel_args.keep_grades, "let non-target grade columns compete");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train the MLP and write model, history and split");
  add_common(*train_cmd, train_args.common);
  train_cmd->add_option("--epochs", train_args.epochs, "epoch cap");
  train_cmd->add_option("--batch-size", train_args.batch, "mini-batch size");
  train_cmd->add_option("--learning-rate", train_args.lr, "SGD step size");
  train_cmd->add_option("--features", train_args.features, "all or selected");

  EvaluateArgs eval_args;
  auto* eval_cmd = app.add_subcommand("evaluate", "score a saved model on its held-out rows");
  add_common(*eval_cmd, eval_args.common);
  eval_cmd->add_option("--model", eval_args.model, "model file (default <out>/model.json)");

  PredictArgs pred_args;
  auto* pred_cmd = app.add_subcommand("predict", "classify rows with a saved model");
  add_common(*pred_cmd, pred_args.common);
  pred_cmd->add_option("--model", pred_args.model, "model file (default <out>/model.json)");
  pred_cmd->add_option("--input", pred_args.input, "CSV rows to classify (grades optional)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    diagnostic("BadArgument", e.what());
    return kBadArgument;
  }

  try {
    if (*stats_cmd) return cmd_stats(stats_args);
    if (*pp_cmd) return cmd_probplot(pp_args);
    if (*corr_cmd) return cmd_corr(corr_args);
    if (*sel_cmd) return cmd_select(sel_args);
    if (*train_cmd) return cmd_train(train_args);
    if (*eval_cmd) return cmd_evaluate(eval_args);
    if (*pred_cmd) return cmd_predict(pred_args);
  } catch (const Error& e) {
    diagnostic(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    diagnostic("Internal", e.what());
    return 1;
  }
  return kBadArgument;
}
