#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <string>

#include "studperf/dataset.hpp"
#include "support/synthetic_students.hpp"

using namespace studperf;
using studperf::testing::synthetic_student_csv;

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

// replaces the last field of the first data row
std::string with_last_field(std::string csv, const std::string& value) {
  const auto row_start = csv.find('\n') + 1;
  const auto row_end = csv.find('\n', row_start);
  const auto last_delim = csv.rfind(';', row_end);
  csv.replace(last_delim + 1, row_end - last_delim - 1, value);
  return csv;
}

LabeledDataset labeled_rows(std::size_t n, std::uint64_t seed = 1) {
  const auto recs = parse_csv_text(synthetic_student_csv(n, seed));
  return make_labeled(encode(recs, EncodingScheme::alphabetical_v1()));
}

}  // namespace

TEST(Schema, HasThirtyAttributesAndThreeGrades) {
  const auto& s = student_schema();
  ASSERT_EQ(s.size(), 33u);
  EXPECT_EQ(s.front().name, "school");
  EXPECT_EQ(s[29].name, "absences");
  EXPECT_EQ(s[30].name, "G1");
  EXPECT_EQ(s[32].name, "G3");
}

TEST(ParseCsv, ReadsEveryRowInOrder) {
  const auto text = synthetic_student_csv(40, 3);
  const auto recs = parse_csv_text(text);
  ASSERT_EQ(recs.size(), 40u);
  // independent count of data lines
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')) - 1, recs.size());
  for (const auto& r : recs) {
    const auto g = std::get<long long>(r["G3"]);
    EXPECT_GE(g, 0);
    EXPECT_LE(g, 20);
  }
}

TEST(ParseCsv, CommaAndSemicolonAgree) {
  const auto semi = parse_csv_text(synthetic_student_csv(25, 4));
  const auto comma = parse_csv_text(synthetic_student_csv(25, 4, {.delimiter = ',', .quote_strings = false}));
  EXPECT_EQ(semi, comma);
}

TEST(ParseCsv, ColumnsMayBeReordered) {
  const std::string text = synthetic_student_csv(5, 8, {.delimiter = ',', .quote_strings = false});
  std::istringstream in(text);
  std::ostringstream swapped;
  std::string line;
  while (std::getline(in, line)) {
    // move the first field (school) to the end
    const auto comma = line.find(',');
    swapped << line.substr(comma + 1) << ',' << line.substr(0, comma) << '\n';
  }
  EXPECT_EQ(parse_csv_text(swapped.str()), parse_csv_text(text));
}

TEST(ParseCsv, GradeOutOfRange) {
  const auto text = with_last_field(synthetic_student_csv(3, 5), "25");
  EXPECT_EQ(kind_of([&] { parse_csv_text(text); }), ErrorKind::GradeOutOfRange);
  EXPECT_EQ(kind_of([&] { parse_csv_text(with_last_field(synthetic_student_csv(3, 5), "-1")); }),
            ErrorKind::GradeOutOfRange);
}

TEST(ParseCsv, EmptyInput) {
  EXPECT_EQ(kind_of([] { parse_csv_text(""); }), ErrorKind::EmptyInput);
  EXPECT_EQ(kind_of([] { parse_csv_text("\n\n"); }), ErrorKind::EmptyInput);
  const auto header_only = synthetic_student_csv(0, 1);
  EXPECT_EQ(kind_of([&] { parse_csv_text(header_only); }), ErrorKind::EmptyInput);
}

TEST(ParseCsv, MalformedRow) {
  auto text = synthetic_student_csv(2, 6);
  text += "\"GP\";\"F\";18\n";
  EXPECT_EQ(kind_of([&] { parse_csv_text(text); }), ErrorKind::MalformedRow);
  EXPECT_EQ(kind_of([&] { parse_csv_text(with_last_field(synthetic_student_csv(2, 6), "ten")); }),
            ErrorKind::MalformedRow);
  EXPECT_EQ(kind_of([&] { parse_csv_text(with_last_field(synthetic_student_csv(2, 6), "")); }),
            ErrorKind::MalformedRow);
}

TEST(ParseCsv, UnknownCategory) {
  auto text = synthetic_student_csv(2, 7);
  const auto pos = text.find("\"GP\"") != std::string::npos ? text.find("\"GP\"") : text.find("\"MS\"");
  text.replace(pos, 4, "\"XX\"");
  EXPECT_EQ(kind_of([&] { parse_csv_text(text); }), ErrorKind::UnknownCategory);
}

TEST(ParseCsv, GradesOptionalForPredictionInput) {
  const auto text = synthetic_student_csv(4, 2, {.include_grades = false});
  EXPECT_EQ(kind_of([&] { parse_csv_text(text); }), ErrorKind::MalformedRow);
  const auto recs = parse_csv_text(text, std::nullopt, {.require_grades = false});
  ASSERT_EQ(recs.size(), 4u);
  EXPECT_FALSE(recs[0].has_grades());
}

TEST(Encode, DeclaredCodes) {
  const auto scheme = EncodingScheme::alphabetical_v1();
  EXPECT_EQ(scheme.code("sex", "F"), 0);
  EXPECT_EQ(scheme.code("sex", "M"), 1);
  const std::vector<std::string> jobs{"at_home", "health", "other", "services", "teacher"};
  for (int i = 0; i < 5; ++i) EXPECT_EQ(scheme.code("Mjob", jobs[i]), i);
  EXPECT_EQ(scheme.version(), "alphabetical-v1");
  EXPECT_EQ(kind_of([&] { (void)scheme.code("sex", "X"); }), ErrorKind::UnknownCategory);
}

TEST(Encode, NumericFieldsCopiedVerbatim) {
  auto recs = parse_csv_text(synthetic_student_csv(3, 9));
  recs[1].fields[*schema_index("absences")] = 6LL;
  recs[1].fields[*schema_index("sex")] = std::string("M");
  const auto m = encode(recs, EncodingScheme::alphabetical_v1());
  ASSERT_EQ(m.cols(), 33u);
  EXPECT_EQ(m.at(1, m.column_index("absences")), 6.0);
  EXPECT_EQ(m.at(1, m.column_index("sex")), 1.0);
}

TEST(Encode, SameSchemeSameCodes) {
  const auto recs = parse_csv_text(synthetic_student_csv(30, 10));
  EXPECT_EQ(encode(recs, EncodingScheme::alphabetical_v1()), encode(recs, EncodingScheme::by_version("alphabetical-v1")));
  EXPECT_EQ(kind_of([] { EncodingScheme::by_version("v0"); }), ErrorKind::InvalidConfig);
}

TEST(Encode, DecodeRestoresRecords) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto recs = parse_csv_text(synthetic_student_csv(25, seed));
    const auto scheme = EncodingScheme::alphabetical_v1();
    ASSERT_EQ(decode(encode(recs, scheme), scheme), recs) << "seed " << seed;
  }
}

TEST(DataMatrix, RejectsDuplicateNamesAndShapeMismatch) {
  EXPECT_EQ(kind_of([] { DataMatrix({"a", "a"}, Matrix(1, 2)); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([] { DataMatrix({"a"}, Matrix(1, 2)); }), ErrorKind::ShapeMismatch);
  const DataMatrix m({"a", "b"}, Matrix(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(kind_of([&] { (void)m.column("c"); }), ErrorKind::UnknownColumn);
  EXPECT_EQ(m.column("b"), (std::vector<double>{2, 4}));
}

TEST(DataMatrix, CsvOutput) {
  const DataMatrix m({"a", "b"}, Matrix(2, 2, {1, 2.5, -3, 0.1}));
  std::ostringstream out;
  write_csv(m, out);
  EXPECT_EQ(out.str(), "a,b\n1,2.5\n-3,0.1\n");
}

TEST(BinGrade, BoundaryExamples) {
  EXPECT_EQ(bin_grade(0), 0);
  EXPECT_EQ(bin_grade(9), 0);
  EXPECT_EQ(bin_grade(10), 1);
  EXPECT_EQ(bin_grade(15), 1);
  EXPECT_EQ(bin_grade(16), 2);
  EXPECT_EQ(bin_grade(20), 2);
  EXPECT_EQ(kind_of([] { bin_grade(21); }), ErrorKind::GradeOutOfRange);
  EXPECT_EQ(kind_of([] { bin_grade(-1); }), ErrorKind::GradeOutOfRange);
}

TEST(BinGrade, TotalAndMonotone) {
  const GradeBins custom{{5, 8, 12}, {"a", "b", "c", "d"}};
  for (const GradeBins& bins : {GradeBins{}, custom}) {
    int prev = 0;
    for (int g = 0; g <= 20; ++g) {
      const int c = bin_grade(g, bins);
      ASSERT_GE(c, prev);
      ASSERT_LT(static_cast<std::size_t>(c), bins.num_classes());
      prev = c;
    }
    EXPECT_EQ(bin_grade(20, bins), static_cast<int>(bins.num_classes()) - 1);
  }
}

TEST(OneHot, RowsSumToOne) {
  const std::vector<int> labels{0, 2, 1, 2};
  const auto m = one_hot(labels, 3);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double s = 0;
    for (double v : m.row(r)) s += v;
    EXPECT_EQ(s, 1.0);
    EXPECT_EQ(m(r, labels[r]), 1.0);
  }
}

TEST(Labeled, LeakageGuard) {
  const auto recs = parse_csv_text(synthetic_student_csv(10, 11));
  const auto enc = encode(recs, EncodingScheme::alphabetical_v1());
  const auto ds = make_labeled(enc);
  EXPECT_EQ(ds.features().cols(), 30u);
  for (const auto& c : ds.features().columns()) EXPECT_FALSE(is_grade_column(c));
  const std::vector<std::string> leaky{"age", "G2"};
  EXPECT_EQ(kind_of([&] { make_labeled(enc, {}, leaky); }), ErrorKind::LeakageDetected);
  EXPECT_EQ(kind_of([&] { LabeledDataset(enc, ds.labels(), 3, ds.source_rows()); }), ErrorKind::LeakageDetected);
}

TEST(Split, CeilingArithmetic) {
  const auto ds = labeled_rows(395);
  const auto s = split(ds, 0.7, 0.0, 42);
  EXPECT_EQ(s.train.size(), 277u);
  EXPECT_EQ(s.validation.size(), 0u);
  EXPECT_EQ(s.test.size(), 118u);

  const auto small = labeled_rows(10);
  for (std::uint64_t seed : {0ull, 1ull, 99ull, 123456789ull}) {
    const auto t = split(small, 0.7, 0.2, seed);
    EXPECT_EQ(t.train.size(), 5u);
    EXPECT_EQ(t.validation.size(), 2u);
    EXPECT_EQ(t.test.size(), 3u);
  }
}

TEST(Split, Errors) {
  const auto ds = labeled_rows(10);
  EXPECT_EQ(kind_of([&] { split(ds, 0.0, 0.2, 1); }), ErrorKind::RatioOutOfRange);
  EXPECT_EQ(kind_of([&] { split(ds, 1.0, 0.2, 1); }), ErrorKind::RatioOutOfRange);
  EXPECT_EQ(kind_of([&] { split(ds, 0.7, 1.0, 1); }), ErrorKind::RatioOutOfRange);
  EXPECT_EQ(kind_of([&] { split(ds, 0.7, -0.1, 1); }), ErrorKind::RatioOutOfRange);
  EXPECT_EQ(kind_of([&] { split(labeled_rows(2), 0.7, 0.2, 1); }), ErrorKind::DatasetTooSmall);
  EXPECT_EQ(kind_of([&] { split(ds, 0.99, 0.0, 1); }), ErrorKind::DatasetTooSmall);
}

TEST(Split, DisjointExhaustiveDeterministic) {
  Rng meta(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 5 + meta.below(120);
    const double tr = meta.uniform(0.3, 0.8);
    const double vr = meta.uniform() < 0.3 ? 0.0 : meta.uniform(0.05, 0.4);
    const std::uint64_t seed = meta.next();
    const auto ds = labeled_rows(n, trial);
    SplitDataset s;
    try {
      s = split(ds, tr, vr, seed);
    } catch (const Error& e) {
      ASSERT_EQ(e.kind(), ErrorKind::DatasetTooSmall);
      continue;
    }
    std::multiset<std::size_t> all;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      all.insert(part->source_rows().begin(), part->source_rows().end());
    }
    ASSERT_EQ(all.size(), n);
    ASSERT_EQ(std::set<std::size_t>(all.begin(), all.end()).size(), n);
    EXPECT_EQ(s.train.size() + s.validation.size(), ceil_count(tr * static_cast<double>(n)));

    const auto again = split(ds, tr, vr, seed);
    EXPECT_EQ(again.train.source_rows(), s.train.source_rows());
    EXPECT_EQ(again.validation.source_rows(), s.validation.source_rows());
    EXPECT_EQ(again.test.source_rows(), s.test.source_rows());
  }
}

TEST(Split, RowsKeepTheirLabelsAndFeatures) {
  const auto ds = labeled_rows(50);
  const auto s = split(ds, 0.7, 0.2, 5);
  for (std::size_t i = 0; i < s.test.size(); ++i) {
    const auto src = s.test.source_rows()[i];
    EXPECT_EQ(s.test.labels()[i], ds.labels()[src]);
    for (std::size_t c = 0; c < 30; ++c) EXPECT_EQ(s.test.features().at(i, c), ds.features().at(src, c));
  }
}

TEST(Split, Manifest) {
  const auto s = split(labeled_rows(20), 0.7, 0.2, 77);
  const auto j = split_manifest(s);
  EXPECT_EQ(j["seed"], 77);
  EXPECT_EQ(j["rows"], 20);
  EXPECT_EQ(j["train"].size(), s.train.size());
  EXPECT_EQ(j["validation"].size(), s.validation.size());
  EXPECT_EQ(j["test"].get<std::vector<std::size_t>>(), s.test.source_rows());
}

TEST(Scaling, DeclaredExamples) {
  const DataMatrix train({"x", "c"}, Matrix(3, 2, {2, 5, 4, 5, 6, 5}));
  const DataMatrix other({"x", "c"}, Matrix(1, 2, {12, 5}));
  const std::vector<DataMatrix> others{other};
  const auto out = scale_features(train, others);
  EXPECT_EQ(out.train.column("x"), (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(out.train.column("c"), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(out.others[0].at(0, 1), 0.0);

  const auto s = MinMaxScaler::fit(Matrix(2, 1, {0, 10}));
  EXPECT_DOUBLE_EQ(s.transform(Matrix(1, 1, {12}))(0, 0), 1.2);
  EXPECT_EQ(kind_of([&] { (void)s.transform(Matrix(1, 2)); }), ErrorKind::ShapeMismatch);
  EXPECT_EQ(kind_of([] { MinMaxScaler::fit(Matrix(0, 2)); }), ErrorKind::EmptyTrainingSet);
}

TEST(Scaling, TrainColumnsLandInUnitInterval) {
  const auto ds = labeled_rows(80, 12);
  const auto fitted = scale_features(ds.features(), {});
  for (double v : fitted.train.values().values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}
