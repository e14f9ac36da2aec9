#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "studperf/error.hpp"
#include "studperf/format.hpp"
#include "studperf/matrix.hpp"
#include "studperf/rng.hpp"

namespace studperf {

// ---------------------------------------------------------------------------
// Schema of the public student-performance table (student-mat / student-por).
// ---------------------------------------------------------------------------

enum class FieldKind { Categorical, Integer };

struct ColumnSpec {
  std::string name;
  FieldKind kind;
  std::vector<std::string> categories;  // empty for integer columns
};

inline constexpr std::size_t kSchemaColumns = 33;
inline constexpr std::size_t kAttributeColumns = 30;
inline constexpr int kMinGrade = 0;
inline constexpr int kMaxGrade = 20;

inline const std::vector<ColumnSpec>& student_schema() {
  using K = FieldKind;
  static const std::vector<ColumnSpec> schema = {
      {"school", K::Categorical, {"GP", "MS"}},
      {"sex", K::Categorical, {"F", "M"}},
      {"age", K::Integer, {}},
      {"address", K::Categorical, {"R", "U"}},
      {"famsize", K::Categorical, {"GT3", "LE3"}},
      {"Pstatus", K::Categorical, {"A", "T"}},
      {"Medu", K::Integer, {}},
      {"Fedu", K::Integer, {}},
      {"Mjob", K::Categorical, {"at_home", "health", "other", "services", "teacher"}},
      {"Fjob", K::Categorical, {"at_home", "health", "other", "services", "teacher"}},
      {"reason", K::Categorical, {"course", "home", "other", "reputation"}},
      {"guardian", K::Categorical, {"father", "mother", "other"}},
      {"traveltime", K::Integer, {}},
      {"studytime", K::Integer, {}},
      {"failures", K::Integer, {}},
      {"schoolsup", K::Categorical, {"no", "yes"}},
      {"famsup", K::Categorical, {"no", "yes"}},
      {"paid", K::Categorical, {"no", "yes"}},
      {"activities", K::Categorical, {"no", "yes"}},
      {"nursery", K::Categorical, {"no", "yes"}},
      {"higher", K::Categorical, {"no", "yes"}},
      {"internet", K::Categorical, {"no", "yes"}},
      {"romantic", K::Categorical, {"no", "yes"}},
      {"famrel", K::Integer, {}},
      {"freetime", K::Integer, {}},
      {"goout", K::Integer, {}},
      {"Dalc", K::Integer, {}},
      {"Walc", K::Integer, {}},
      {"health", K::Integer, {}},
      {"absences", K::Integer, {}},
      {"G1", K::Integer, {}},
      {"G2", K::Integer, {}},
      {"G3", K::Integer, {}},
  };
  return schema;
}

inline bool is_grade_column(std::string_view name) noexcept {
  return name == "G1" || name == "G2" || name == "G3";
}

inline std::optional<std::size_t> schema_index(std::string_view name) {
  const auto& schema = student_schema();
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (schema[i].name == name) return i;
  }
  return std::nullopt;
}

/// Names of the columns that are integer-valued in the raw file (grades included).
inline std::vector<std::string> numeric_schema_columns() {
  std::vector<std::string> out;
  for (const auto& c : student_schema()) {
    if (c.kind == FieldKind::Integer) out.push_back(c.name);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Raw records
// ---------------------------------------------------------------------------

/// monostate marks a field absent from the source header (only grades may be absent).
using RawField = std::variant<std::monostate, long long, std::string>;

struct RawStudentRecord {
  std::array<RawField, kSchemaColumns> fields;

  [[nodiscard]] const RawField& operator[](std::string_view name) const {
    const auto idx = schema_index(name);
    if (!idx) fail(ErrorKind::UnknownColumn, "unknown column '" + std::string(name) + "'");
    return fields[*idx];
  }

  [[nodiscard]] bool has_grades() const noexcept {
    return !std::holds_alternative<std::monostate>(fields[kSchemaColumns - 1]);
  }

  bool operator==(const RawStudentRecord&) const = default;
};

struct ParseOptions {
  /// When false, a header without G1/G2/G3 is accepted (prediction input).
  bool require_grades = true;
};

namespace detail {

inline std::vector<std::string> split_delimited(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == delim) {
      out.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.emplace_back(trim(cur));
  return out;
}

inline bool blank(std::string_view line) { return trim(line).empty(); }

inline std::string where(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

}  // namespace detail

/// Picks ';' or ',' by whichever occurs more often in the header line.
inline char detect_delimiter(std::string_view header) {
  const auto semis = std::count(header.begin(), header.end(), ';');
  const auto commas = std::count(header.begin(), header.end(), ',');
  return semis > commas ? ';' : ',';
}

/// Parses a header-bearing delimited student table. Row order is preserved.
inline std::vector<RawStudentRecord> parse_csv(std::istream& in,
                                               std::optional<char> delimiter = std::nullopt,
                                               ParseOptions options = {}) {
  const auto& schema = student_schema();
  std::string line;
  std::size_t line_no = 0;

  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!detail::blank(line)) {
      have_header = true;
      break;
    }
  }
  if (!have_header) fail(ErrorKind::EmptyInput, "input contains no header");

  const char delim = delimiter.value_or(detect_delimiter(line));
  const auto header = detail::split_delimited(line, delim);

  // header position -> schema index
  std::vector<std::size_t> column_of(header.size());
  std::vector<bool> seen(kSchemaColumns, false);
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto idx = schema_index(header[i]);
    if (!idx) {
      fail(ErrorKind::MalformedRow, detail::where(line_no) + "unexpected column '" + header[i] + "'");
    }
    if (seen[*idx]) {
      fail(ErrorKind::MalformedRow, detail::where(line_no) + "duplicate column '" + header[i] + "'");
    }
    seen[*idx] = true;
    column_of[i] = *idx;
  }
  const auto grades_present = std::count(seen.end() - 3, seen.end(), true);
  for (std::size_t c = 0; c < kAttributeColumns; ++c) {
    if (!seen[c]) {
      fail(ErrorKind::MalformedRow, detail::where(line_no) + "missing column '" + schema[c].name + "'");
    }
  }
  if (grades_present != 3 && (options.require_grades || grades_present != 0)) {
    fail(ErrorKind::MalformedRow, detail::where(line_no) + "grade columns G1, G2, G3 must all be present");
  }

  std::vector<RawStudentRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    const auto cells = detail::split_delimited(line, delim);
    if (cells.size() != header.size()) {
      fail(ErrorKind::MalformedRow, detail::where(line_no) + "expected " + std::to_string(header.size()) +
                                        " fields, found " + std::to_string(cells.size()));
    }
    RawStudentRecord rec;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& spec = schema[column_of[i]];
      const std::string& cell = cells[i];
      if (cell.empty()) {
        fail(ErrorKind::MalformedRow, detail::where(line_no) + "missing value for '" + spec.name + "'");
      }
      if (spec.kind == FieldKind::Categorical) {
        if (std::find(spec.categories.begin(), spec.categories.end(), cell) == spec.categories.end()) {
          fail(ErrorKind::UnknownCategory,
               detail::where(line_no) + "value '" + cell + "' is not a category of '" + spec.name + "'");
        }
        rec.fields[column_of[i]] = cell;
      } else {
        const auto value = parse_integer(cell);
        if (!value) {
          fail(ErrorKind::MalformedRow,
               detail::where(line_no) + "'" + spec.name + "' is not an integer: '" + cell + "'");
        }
        if (is_grade_column(spec.name) && (*value < kMinGrade || *value > kMaxGrade)) {
          fail(ErrorKind::GradeOutOfRange, detail::where(line_no) + spec.name + " = " +
                                               std::to_string(*value) + " outside [0, 20]");
        }
        rec.fields[column_of[i]] = *value;
      }
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) fail(ErrorKind::EmptyInput, "input contains no data rows");
  return records;
}

inline std::vector<RawStudentRecord> parse_csv_text(std::string_view text,
                                                    std::optional<char> delimiter = std::nullopt,
                                                    ParseOptions options = {}) {
  std::istringstream in{std::string(text)};
  return parse_csv(in, delimiter, options);
}

// ---------------------------------------------------------------------------
// Encoded matrices
// ---------------------------------------------------------------------------

/// Numeric matrix with unique, ordered column names.
class DataMatrix {
 public:
  DataMatrix() = default;

  DataMatrix(std::vector<std::string> columns, Matrix values)
      : columns_(std::move(columns)), values_(std::move(values)) {
    if (values_.cols() != columns_.size()) {
      fail(ErrorKind::ShapeMismatch, "matrix has " + std::to_string(values_.cols()) + " columns but " +
                                         std::to_string(columns_.size()) + " names");
    }
    std::unordered_set<std::string> names;
    for (const auto& c : columns_) {
      if (!names.insert(c).second) fail(ErrorKind::InvalidConfig, "duplicate column name '" + c + "'");
    }
  }

  [[nodiscard]] std::size_t rows() const noexcept { return values_.rows(); }
  [[nodiscard]] std::size_t cols() const noexcept { return values_.cols(); }
  [[nodiscard]] const std::vector<std::string>& columns() const noexcept { return columns_; }
  [[nodiscard]] const Matrix& values() const noexcept { return values_; }
  [[nodiscard]] double at(std::size_t r, std::size_t c) const noexcept { return values_(r, c); }

  [[nodiscard]] std::optional<std::size_t> find_column(std::string_view name) const {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (columns_[i] == name) return i;
    }
    return std::nullopt;
  }

  [[nodiscard]] std::size_t column_index(std::string_view name) const {
    const auto idx = find_column(name);
    if (!idx) fail(ErrorKind::UnknownColumn, "unknown column '" + std::string(name) + "'");
    return *idx;
  }

  [[nodiscard]] std::vector<double> column(std::size_t c) const {
    std::vector<double> out(rows());
    for (std::size_t r = 0; r < rows(); ++r) out[r] = values_(r, c);
    return out;
  }

  [[nodiscard]] std::vector<double> column(std::string_view name) const {
    return column(column_index(name));
  }

  [[nodiscard]] DataMatrix select_columns(std::span<const std::string> names) const {
    std::vector<std::size_t> idx;
    idx.reserve(names.size());
    for (const auto& n : names) idx.push_back(column_index(n));
    Matrix out(rows(), idx.size());
    for (std::size_t r = 0; r < rows(); ++r) {
      for (std::size_t j = 0; j < idx.size(); ++j) out(r, j) = values_(r, idx[j]);
    }
    return {std::vector<std::string>(names.begin(), names.end()), std::move(out)};
  }

  [[nodiscard]] DataMatrix select_rows(std::span<const std::size_t> rows) const {
    return {columns_, values_.gather_rows(rows)};
  }

  bool operator==(const DataMatrix&) const = default;

 private:
  std::vector<std::string> columns_;
  Matrix values_;
};

/// Writes the matrix as CSV with a header row; values use shortest round-trip text.
inline void write_csv(const DataMatrix& m, std::ostream& out) {
  for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m.columns()[c];
  out << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << format_double(m.at(r, c));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Categorical encoding
// ---------------------------------------------------------------------------

/// Per-column category tables; a category's code is its position in the table.
class EncodingScheme {
 public:
  static constexpr std::string_view kAlphabeticalV1 = "alphabetical-v1";

  /// Categories sorted by byte order, codes 0..k-1.
  static EncodingScheme alphabetical_v1() {
    EncodingScheme s;
    s.version_ = std::string(kAlphabeticalV1);
    for (const auto& c : student_schema()) {
      if (c.kind != FieldKind::Categorical) continue;
      auto cats = c.categories;
      std::sort(cats.begin(), cats.end());
      s.tables_.emplace(c.name, std::move(cats));
    }
    return s;
  }

  static EncodingScheme by_version(std::string_view version) {
    if (version == kAlphabeticalV1) return alphabetical_v1();
    fail(ErrorKind::InvalidConfig, "unknown encoding scheme version '" + std::string(version) + "'");
  }

  [[nodiscard]] const std::string& version() const noexcept { return version_; }

  [[nodiscard]] const std::vector<std::string>& table(const std::string& column) const {
    const auto it = tables_.find(column);
    if (it == tables_.end()) fail(ErrorKind::UnknownColumn, "no encoding table for '" + column + "'");
    return it->second;
  }

  [[nodiscard]] int code(const std::string& column, std::string_view value) const {
    const auto& t = table(column);
    const auto it = std::find(t.begin(), t.end(), value);
    if (it == t.end()) {
      fail(ErrorKind::UnknownCategory,
           "value '" + std::string(value) + "' is not a category of '" + column + "'");
    }
    return static_cast<int>(it - t.begin());
  }

  [[nodiscard]] const std::string& category(const std::string& column, int code) const {
    const auto& t = table(column);
    if (code < 0 || static_cast<std::size_t>(code) >= t.size()) {
      fail(ErrorKind::UnknownCategory, "code " + std::to_string(code) + " out of range for '" + column + "'");
    }
    return t[static_cast<std::size_t>(code)];
  }

 private:
  std::string version_;
  std::map<std::string, std::vector<std::string>> tables_;
};

/// Ordinal-encodes records: categorical fields become their table code, integers are copied.
/// Columns follow schema order; grade columns are emitted only when present in the records.
inline DataMatrix encode(std::span<const RawStudentRecord> records, const EncodingScheme& scheme) {
  if (records.empty()) fail(ErrorKind::EmptyInput, "no records to encode");
  const auto& schema = student_schema();
  const bool grades = records.front().has_grades();
  const std::size_t width = grades ? kSchemaColumns : kAttributeColumns;

  std::vector<std::string> names;
  for (std::size_t c = 0; c < width; ++c) names.push_back(schema[c].name);

  Matrix values(records.size(), width);
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (records[r].has_grades() != grades) {
      fail(ErrorKind::MalformedRow, "record " + std::to_string(r) + " differs in grade presence");
    }
    for (std::size_t c = 0; c < width; ++c) {
      const auto& field = records[r].fields[c];
      if (const auto* s = std::get_if<std::string>(&field)) {
        values(r, c) = scheme.code(schema[c].name, *s);
      } else if (const auto* v = std::get_if<long long>(&field)) {
        values(r, c) = static_cast<double>(*v);
      } else {
        fail(ErrorKind::MalformedRow, "record " + std::to_string(r) + " lacks '" + schema[c].name + "'");
      }
    }
  }
  return {std::move(names), std::move(values)};
}

/// Inverse of encode() for matrices whose columns are schema columns.
inline std::vector<RawStudentRecord> decode(const DataMatrix& m, const EncodingScheme& scheme) {
  const auto& schema = student_schema();
  std::vector<std::size_t> target(m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const auto idx = schema_index(m.columns()[c]);
    if (!idx) fail(ErrorKind::UnknownColumn, "unknown column '" + m.columns()[c] + "'");
    target[c] = *idx;
  }
  std::vector<RawStudentRecord> out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const auto& spec = schema[target[c]];
      const double v = m.at(r, c);
      if (spec.kind == FieldKind::Categorical) {
        out[r].fields[target[c]] = scheme.category(spec.name, static_cast<int>(std::lround(v)));
      } else {
        out[r].fields[target[c]] = static_cast<long long>(std::llround(v));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Targets
// ---------------------------------------------------------------------------

/// Half-open grade bins: class k covers [edges[k-1], edges[k]).
struct GradeBins {
  std::vector<int> edges{10, 16};
  std::vector<std::string> names{"fail", "pass", "excellent"};

  [[nodiscard]] std::size_t num_classes() const noexcept { return edges.size() + 1; }

  void validate() const {
    if (names.size() != edges.size() + 1) {
      fail(ErrorKind::InvalidConfig, "grade bins need exactly one more name than edges");
    }
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (edges[i] <= kMinGrade || edges[i] > kMaxGrade || (i > 0 && edges[i] <= edges[i - 1])) {
        fail(ErrorKind::InvalidConfig, "grade bin edges must be strictly increasing within (0, 20]");
      }
    }
  }
};

inline int bin_grade(long long g3, const GradeBins& bins = {}) {
  if (g3 < kMinGrade || g3 > kMaxGrade) {
    fail(ErrorKind::GradeOutOfRange, "grade " + std::to_string(g3) + " outside [0, 20]");
  }
  int label = 0;
  for (int edge : bins.edges) {
    if (g3 >= edge) ++label;
  }
  return label;
}

inline Matrix one_hot(std::span<const int> labels, std::size_t num_classes) {
  Matrix out(labels.size(), num_classes);
  for (std::size_t r = 0; r < labels.size(); ++r) out(r, static_cast<std::size_t>(labels[r])) = 1.0;
  return out;
}

/// Feature matrix plus class labels. Grade columns are refused as features.
class LabeledDataset {
 public:
  LabeledDataset() = default;

  LabeledDataset(DataMatrix features, std::vector<int> labels, std::size_t num_classes,
                 std::vector<std::size_t> source_rows)
      : features_(std::move(features)),
        labels_(std::move(labels)),
        num_classes_(num_classes),
        source_rows_(std::move(source_rows)) {
    for (const auto& c : features_.columns()) {
      if (is_grade_column(c)) fail(ErrorKind::LeakageDetected, "feature matrix contains grade column " + c);
    }
    if (labels_.size() != features_.rows() || source_rows_.size() != features_.rows()) {
      fail(ErrorKind::ShapeMismatch, "labels/row ids do not match feature rows");
    }
    for (int l : labels_) {
      if (l < 0 || static_cast<std::size_t>(l) >= num_classes_) {
        fail(ErrorKind::InvalidConfig, "label " + std::to_string(l) + " outside class range");
      }
    }
  }

  [[nodiscard]] std::size_t size() const noexcept { return labels_.size(); }
  [[nodiscard]] bool empty() const noexcept { return labels_.empty(); }
  [[nodiscard]] const DataMatrix& features() const noexcept { return features_; }
  [[nodiscard]] const std::vector<int>& labels() const noexcept { return labels_; }
  [[nodiscard]] std::size_t num_classes() const noexcept { return num_classes_; }
  /// Row index of each sample in the originally parsed file.
  [[nodiscard]] const std::vector<std::size_t>& source_rows() const noexcept { return source_rows_; }
  [[nodiscard]] Matrix one_hot() const { return studperf::one_hot(labels_, num_classes_); }

  [[nodiscard]] LabeledDataset subset(std::span<const std::size_t> rows) const {
    std::vector<int> labels;
    std::vector<std::size_t> src;
    for (auto r : rows) {
      labels.push_back(labels_[r]);
      src.push_back(source_rows_[r]);
    }
    return {features_.select_rows(rows), std::move(labels), num_classes_, std::move(src)};
  }

  [[nodiscard]] LabeledDataset with_features(DataMatrix features) const {
    return {std::move(features), labels_, num_classes_, source_rows_};
  }

 private:
  DataMatrix features_;
  std::vector<int> labels_;
  std::size_t num_classes_ = 0;
  std::vector<std::size_t> source_rows_;
};

/// Labels each row by binning G3. With no explicit feature list every non-grade column is used.
inline LabeledDataset make_labeled(const DataMatrix& encoded, const GradeBins& bins = {},
                                   std::span<const std::string> feature_columns = {}) {
  bins.validate();
  const auto g3 = encoded.column("G3");
  std::vector<int> labels(g3.size());
  for (std::size_t r = 0; r < g3.size(); ++r) labels[r] = bin_grade(std::llround(g3[r]), bins);

  std::vector<std::string> features;
  if (feature_columns.empty()) {
    for (const auto& c : encoded.columns()) {
      if (!is_grade_column(c)) features.push_back(c);
    }
  } else {
    features.assign(feature_columns.begin(), feature_columns.end());
  }
  std::vector<std::size_t> rows(encoded.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return {encoded.select_columns(features), std::move(labels), bins.num_classes(), std::move(rows)};
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

namespace rng_stream {
inline constexpr std::uint64_t kSplit = 0x73706c6974;  // "split"
inline constexpr std::uint64_t kInit = 0x696e6974;     // "init"
inline constexpr std::uint64_t kTrain = 0x747261696e;  // "train"
}  // namespace rng_stream

struct SplitDataset {
  LabeledDataset train;
  LabeledDataset validation;
  LabeledDataset test;
  std::uint64_t seed = 0;
  double train_ratio = 0.0;
  double validation_ratio = 0.0;
};

/// ceil() that ignores representation noise such as 0.7 * 10 = 7.0000000000000009.
inline std::size_t ceil_count(double x) {
  return static_cast<std::size_t>(std::ceil(x - 1e-9));
}

/// Seeded shuffle, then [train | validation] from the first ceil(train_ratio * n) rows and test
/// from the rest. Validation is the last ceil(validation_ratio * block) rows of the block.
inline SplitDataset split(const LabeledDataset& data, double train_ratio, double validation_ratio,
                          std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    fail(ErrorKind::RatioOutOfRange, "train_ratio must lie in (0, 1)");
  }
  if (!(validation_ratio >= 0.0 && validation_ratio < 1.0)) {
    fail(ErrorKind::RatioOutOfRange, "validation_ratio must lie in [0, 1)");
  }
  const std::size_t n = data.size();
  const std::size_t block = std::min(n, ceil_count(train_ratio * static_cast<double>(n)));
  const std::size_t n_val = ceil_count(validation_ratio * static_cast<double>(block));
  const std::size_t n_train = block - std::min(block, n_val);
  const std::size_t n_test = n - block;
  if (n_train == 0 || n_test == 0 || (validation_ratio > 0.0 && n_val == 0) || n_val >= block) {
    fail(ErrorKind::DatasetTooSmall, std::to_string(n) + " rows cannot fill every requested partition");
  }

  Rng rng(seed, rng_stream::kSplit);
  const auto perm = permutation(n, rng);
  const std::span<const std::size_t> p(perm);

  SplitDataset out;
  out.train = data.subset(p.subspan(0, n_train));
  out.validation = data.subset(p.subspan(n_train, n_val));
  out.test = data.subset(p.subspan(block));
  out.seed = seed;
  out.train_ratio = train_ratio;
  out.validation_ratio = validation_ratio;
  return out;
}

/// Row indices (into the parsed file) of every partition.
inline nlohmann::json split_manifest(const SplitDataset& s) {
  return {
      {"seed", s.seed},
      {"train_ratio", s.train_ratio},
      {"validation_ratio", s.validation_ratio},
      {"rows", s.train.size() + s.validation.size() + s.test.size()},
      {"train", s.train.source_rows()},
      {"validation", s.validation.source_rows()},
      {"test", s.test.source_rows()},
  };
}

// ---------------------------------------------------------------------------
// Scaling
// ---------------------------------------------------------------------------

/// Per-column affine map to [0, 1] fitted on training data. Constant columns map to 0 and
/// out-of-range values are not clipped.
struct MinMaxScaler {
  std::vector<double> min;
  std::vector<double> max;

  static MinMaxScaler fit(const Matrix& train) {
    if (train.rows() == 0) fail(ErrorKind::EmptyTrainingSet, "cannot fit scaler on an empty matrix");
    MinMaxScaler s;
    s.min.assign(train.cols(), 0.0);
    s.max.assign(train.cols(), 0.0);
    for (std::size_t c = 0; c < train.cols(); ++c) {
      double lo = train(0, c), hi = train(0, c);
      for (std::size_t r = 1; r < train.rows(); ++r) {
        lo = std::min(lo, train(r, c));
        hi = std::max(hi, train(r, c));
      }
      s.min[c] = lo;
      s.max[c] = hi;
    }
    return s;
  }

  [[nodiscard]] Matrix transform(const Matrix& m) const {
    if (m.cols() != min.size()) {
      fail(ErrorKind::ShapeMismatch, "scaler fitted on " + std::to_string(min.size()) +
                                         " columns, got " + std::to_string(m.cols()));
    }
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < m.cols(); ++c) {
        const double range = max[c] - min[c];
        out(r, c) = range > 0.0 ? (m(r, c) - min[c]) / range : 0.0;
      }
    }
    return out;
  }

  [[nodiscard]] DataMatrix transform(const DataMatrix& m) const { return {m.columns(), transform(m.values())}; }

  bool operator==(const MinMaxScaler&) const = default;
};

struct ScaledFeatures {
  DataMatrix train;
  std::vector<DataMatrix> others;
  MinMaxScaler scaler;
};

inline ScaledFeatures scale_features(const DataMatrix& train, std::span<const DataMatrix> others) {
  ScaledFeatures out;
  out.scaler = MinMaxScaler::fit(train.values());
  out.train = out.scaler.transform(train);
  for (const auto& m : others) out.others.push_back(out.scaler.transform(m));
  return out;
}

}  // namespace studperf
