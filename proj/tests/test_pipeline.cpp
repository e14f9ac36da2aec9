#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "studperf/pipeline.hpp"
#include "support/synthetic_students.hpp"

using namespace studperf;
using namespace studperf::pipeline;

namespace {

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::InvalidConfig;
}

std::vector<RawStudentRecord> students(std::size_t n = 120, std::uint64_t seed = 3) {
  return parse_csv_text(studperf::testing::synthetic_student_csv(n, seed));
}

PipelineConfig quick_config() {
  PipelineConfig cfg;
  cfg.train.max_epochs = 5;
  return cfg;
}

}  // namespace

TEST(Config, DefaultsFollowTheStudy) {
  const PipelineConfig cfg;
  EXPECT_EQ(cfg.train.batch_size, 8u);
  EXPECT_EQ(cfg.train.max_epochs, 500u);
  EXPECT_EQ(cfg.train_ratio, 0.7);
  EXPECT_EQ(cfg.seed(), 42u);
  EXPECT_EQ(cfg.train.features, TrainConfig::Features::All);
  EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, MergeJsonOverlaysKeys) {
  PipelineConfig cfg;
  cfg.merge_json(nlohmann::json::parse(R"({"seed": 7, "batch_size": 16, "learning_rate": 0.05,
      "early_stop": "patience", "patience": 4, "features": "selected", "selected_k": 5,
      "grade_edges": [10], "class_names": ["fail", "pass"], "scaling": false})"));
  EXPECT_EQ(cfg.seed(), 7u);
  EXPECT_EQ(cfg.train.batch_size, 16u);
  EXPECT_EQ(cfg.train.learning_rate, 0.05);
  EXPECT_EQ(cfg.train.early_stop.kind, training::EarlyStop::Kind::Patience);
  EXPECT_EQ(cfg.train.early_stop.patience, 4u);
  EXPECT_EQ(cfg.train.features, TrainConfig::Features::Selected);
  EXPECT_EQ(cfg.selected_k, 5u);
  EXPECT_EQ(cfg.bins.num_classes(), 2u);
  EXPECT_FALSE(cfg.train.scaling);
  EXPECT_EQ(cfg.train.max_epochs, 500u);
}

TEST(Config, Errors) {
  PipelineConfig cfg;
  EXPECT_EQ(kind_of([&] { cfg.merge_json(nlohmann::json::parse(R"({"sed": 1})")); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([&] { cfg.merge_json(nlohmann::json::parse(R"({"seed": "x"})")); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([&] { cfg.merge_json(nlohmann::json::parse("[1]")); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([&] { cfg.set_features("some"); }), ErrorKind::InvalidConfig);
  PipelineConfig ratio;
  ratio.train_ratio = 1.5;
  EXPECT_EQ(kind_of([&] { ratio.validate(); }), ErrorKind::RatioOutOfRange);
  PipelineConfig rates;
  rates.dropout_rates = {0.2};
  EXPECT_EQ(kind_of([&] { rates.validate(); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([] { load_config("/nonexistent/config.json"); }), ErrorKind::InvalidConfig);
}

TEST(Config, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "studperf_test_config.json";
  std::ofstream(path) << R"({"max_epochs": 3, "out": "elsewhere"})";
  const auto cfg = load_config(path);
  EXPECT_EQ(cfg.train.max_epochs, 3u);
  EXPECT_EQ(cfg.out_dir, "elsewhere");
  std::ofstream(path) << "{not json";
  EXPECT_EQ(kind_of([&] { load_config(path); }), ErrorKind::InvalidConfig);
  std::filesystem::remove(path);
}

TEST(Features, AllModeUsesThirtyAttributes) {
  const auto recs = students();
  const auto p = prepare(recs, quick_config());
  EXPECT_EQ(p.feature_columns.size(), 30u);
  EXPECT_EQ(p.split.train.features().cols(), 30u);
  ASSERT_TRUE(p.scaler.has_value());
}

TEST(Features, SelectedModeRanksNumericColumnsAgainstFinalGrade) {
  const auto recs = students(200);
  auto cfg = quick_config();
  cfg.set_features("selected");
  cfg.selected_k = 7;
  const auto p = prepare(recs, cfg);
  ASSERT_EQ(p.feature_columns.size(), 7u);
  const auto numeric = numeric_schema_columns();
  for (const auto& c : p.feature_columns) {
    EXPECT_FALSE(is_grade_column(c));
    EXPECT_NE(std::find(numeric.begin(), numeric.end(), c), numeric.end()) << c;
  }
  // the generator makes Medu and studytime drive the grades
  EXPECT_NE(std::find(p.feature_columns.begin(), p.feature_columns.end(), "Medu"), p.feature_columns.end());
  EXPECT_NE(std::find(p.feature_columns.begin(), p.feature_columns.end(), "studytime"), p.feature_columns.end());

  const auto ranking = rank_numeric_features(p.encoded, 13);
  EXPECT_EQ(ranking.ranked.size(), 13u);
  EXPECT_EQ(kind_of([&] { rank_numeric_features(p.encoded, 14); }), ErrorKind::KTooLarge);
}

TEST(Prepare, ScalingIsFittedOnTrainingRowsOnly) {
  const auto recs = students();
  const auto p = prepare(recs, quick_config());
  for (double v : p.split.train.features().values().values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  auto cfg = quick_config();
  cfg.train.scaling = false;
  const auto raw = prepare(recs, cfg);
  EXPECT_FALSE(raw.scaler.has_value());
  EXPECT_EQ(raw.split.train.source_rows(), p.split.train.source_rows());
  EXPECT_EQ(p.scaler->transform(raw.split.test.features()), p.split.test.features());
}

TEST(Bundle, SaveLoadPredictRoundTrip) {
  const auto recs = students();
  const auto out = run_training(recs, quick_config());
  const auto text = save_bundle(out.bundle);
  const auto back = load_bundle(text);
  EXPECT_EQ(back.network, out.bundle.network);
  EXPECT_EQ(back.feature_columns, out.bundle.feature_columns);
  EXPECT_EQ(back.scaler, out.bundle.scaler);
  EXPECT_EQ(back.split_seed, 42u);
  EXPECT_EQ(back.validation_ratio, 0.2);
  EXPECT_EQ(save_bundle(back), text);
  EXPECT_EQ(bundle_predict(back, recs), bundle_predict(out.bundle, recs));
  // bundle inputs for the test rows equal the prepared test features
  const auto& test_rows = out.data.split.test.source_rows();
  std::vector<RawStudentRecord> test_recs;
  for (auto r : test_rows) test_recs.push_back(recs[r]);
  EXPECT_EQ(bundle_inputs(back, test_recs), out.data.split.test.features().values());
  EXPECT_EQ(evaluate_bundle(back, recs).accuracy,
            training::evaluate(out.bundle.network, out.data.split.test).accuracy);
}

TEST(Bundle, Errors) {
  const auto out = run_training(students(), quick_config());
  auto doc = nlohmann::json::parse(save_bundle(out.bundle));
  doc["pipeline"]["feature_columns"].erase(0);
  EXPECT_EQ(kind_of([&] { load_bundle(doc.dump()); }), ErrorKind::ShapeMismatch);
  doc = nlohmann::json::parse(save_bundle(out.bundle));
  doc.erase("pipeline");
  EXPECT_EQ(kind_of([&] { load_bundle(doc.dump()); }), ErrorKind::CorruptPayload);
  EXPECT_EQ(kind_of([] { load_bundle("{"); }), ErrorKind::CorruptPayload);
  doc = nlohmann::json::parse(save_bundle(out.bundle));
  doc["pipeline"]["class_names"] = {"low", "high"};
  EXPECT_EQ(kind_of([&] { load_bundle(doc.dump()); }), ErrorKind::ShapeMismatch);
  doc = nlohmann::json::parse(save_bundle(out.bundle));
  doc["pipeline"]["grade_edges"] = {16, 10};
  EXPECT_EQ(kind_of([&] { load_bundle(doc.dump()); }), ErrorKind::CorruptPayload);
}

TEST(RunTraining, DeterministicAcrossRuns) {
  const auto recs = students();
  const auto a = run_training(recs, quick_config());
  const auto b = run_training(recs, quick_config());
  EXPECT_EQ(save_bundle(a.bundle), save_bundle(b.bundle));
  EXPECT_EQ(training::export_history(a.history), training::export_history(b.history));
}
