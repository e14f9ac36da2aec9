#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "studperf/dataset.hpp"
#include "studperf/error.hpp"
#include "studperf/matrix.hpp"

namespace studperf::stats {

enum class EstimatorVariant { Biased, BiasCorrected };

/// Default for reported moments: the adjusted sample estimators used by common dataframe
/// tooling (pandas Series.skew / Series.kurt, std with n - 1).
inline constexpr EstimatorVariant kDefaultEstimator = EstimatorVariant::BiasCorrected;

constexpr std::string_view to_string(EstimatorVariant v) noexcept {
  return v == EstimatorVariant::Biased ? "biased" : "bias_corrected";
}

struct MomentSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  EstimatorVariant estimator_variant = kDefaultEstimator;
};

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Mean, standard deviation, skewness and excess kurtosis from central moments.
///
/// Biased: std = sqrt(m2), g1 = m3 / m2^1.5, g2 = m4 / m2^2 - 3.
/// BiasCorrected: std uses n - 1, G1 = g1 sqrt(n(n-1)) / (n-2),
/// G2 = ((n+1) g2 + 6)(n-1) / ((n-2)(n-3)), which is NaN for n = 3.
inline MomentSummary moments(std::span<const double> x, EstimatorVariant variant = kDefaultEstimator) {
  const std::size_t n = x.size();
  if (n < 3) fail(ErrorKind::TooFewSamples, "moments need at least 3 samples, got " + std::to_string(n));
  const double mu = mean(x);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mu;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  const double nd = static_cast<double>(n);
  m2 /= nd;
  m3 /= nd;
  m4 /= nd;
  if (m2 == 0.0) fail(ErrorKind::ConstantColumn, "skewness and kurtosis are undefined for a constant column");

  const double g1 = m3 / std::pow(m2, 1.5);
  const double g2 = m4 / (m2 * m2) - 3.0;

  MomentSummary s;
  s.n = n;
  s.mean = mu;
  s.estimator_variant = variant;
  if (variant == EstimatorVariant::Biased) {
    s.std = std::sqrt(m2);
    s.skewness = g1;
    s.excess_kurtosis = g2;
  } else {
    s.std = std::sqrt(m2 * nd / (nd - 1.0));
    s.skewness = g1 * std::sqrt(nd * (nd - 1.0)) / (nd - 2.0);
    s.excess_kurtosis = n > 3 ? ((nd + 1.0) * g2 + 6.0) * (nd - 1.0) / ((nd - 2.0) * (nd - 3.0))
                              : std::numeric_limits<double>::quiet_NaN();
  }
  return s;
}

/// Standard normal quantile, Wichura's AS 241 (PPND16); relative accuracy about 1e-16.
/// Returns -inf / +inf at 0 / 1 and NaN outside [0, 1].
inline double inverse_normal_cdf(double p) {
  if (std::isnan(p) || p < 0.0 || p > 1.0) return std::numeric_limits<double>::quiet_NaN();
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();

  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r + 6.7265770927008700853e+4) * r +
                4.5921953931549871457e+4) * r + 1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r + 3.9307895800092710610e+4) * r +
                2.1213794301586595867e+4) * r + 5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }

  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double z;
  if (r <= 5.0) {
    r -= 1.6;
    z = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r + 2.41780725177450611770e-1) * r +
            1.27045825245236838258e0) * r + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r + 1.51986665636164571966e-2) * r +
            1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    z = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r + 1.24266094738807843860e-3) * r +
            2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r + 1.84631831751005468180e-5) * r +
            7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -z : z;
}

/// Filliben's order-statistic medians for a sample of size n (n >= 2).
inline std::vector<double> filliben_positions(std::size_t n) {
  if (n < 2) fail(ErrorKind::TooFewSamples, "plotting positions need n >= 2");
  const double nd = static_cast<double>(n);
  std::vector<double> m(n);
  m[n - 1] = std::pow(0.5, 1.0 / nd);
  m[0] = 1.0 - m[n - 1];
  for (std::size_t i = 2; i < n; ++i) m[i - 1] = (static_cast<double>(i) - 0.3175) / (nd + 0.365);
  return m;
}

/// Sample Pearson correlation, two-pass. Result is clamped into [-1, 1].
inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    fail(ErrorKind::LengthMismatch,
         "pearson inputs differ in length (" + std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) fail(ErrorKind::TooFewSamples, "pearson needs at least 2 samples");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorKind::ConstantInput, "pearson is undefined for a constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct ProbPlot {
  std::vector<double> theoretical_quantiles;
  std::vector<double> ordered_sample;
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
};

/// Normal probability plot: sorted sample against normal quantiles of Filliben positions,
/// with the least-squares line of sample on quantile. A constant sample gives slope 0 and r 0.
inline ProbPlot probplot(std::span<const double> column) {
  if (column.size() < 2) fail(ErrorKind::TooFewSamples, "probability plot needs n >= 2");
  ProbPlot p;
  p.ordered_sample.assign(column.begin(), column.end());
  std::sort(p.ordered_sample.begin(), p.ordered_sample.end());
  const auto positions = filliben_positions(column.size());
  p.theoretical_quantiles.reserve(positions.size());
  for (double m : positions) p.theoretical_quantiles.push_back(inverse_normal_cdf(m));

  const auto& q = p.theoretical_quantiles;
  const auto& y = p.ordered_sample;
  const double mq = mean(q), my = mean(y);
  double sqy = 0.0, sqq = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    sqy += (q[i] - mq) * (y[i] - my);
    sqq += (q[i] - mq) * (q[i] - mq);
    syy += (y[i] - my) * (y[i] - my);
  }
  p.slope = sqy / sqq;
  p.intercept = my - p.slope * mq;
  p.r = syy > 0.0 ? std::clamp(sqy / std::sqrt(sqq * syy), -1.0, 1.0) : 0.0;
  return p;
}

struct CorrelationMatrix {
  std::vector<std::string> labels;
  Matrix values;
  /// Columns with zero variance; their off-diagonal entries are 0 by convention.
  std::vector<std::string> constant_columns;

  [[nodiscard]] std::size_t index(std::string_view label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) return i;
    }
    fail(ErrorKind::UnknownColumn, "unknown column '" + std::string(label) + "'");
  }

  [[nodiscard]] double at(std::string_view a, std::string_view b) const { return values(index(a), index(b)); }
};

/// Pairwise Pearson correlation over every column. Diagonal entries are 1.
inline CorrelationMatrix correlation_matrix(const DataMatrix& data) {
  if (data.rows() < 2) fail(ErrorKind::TooFewRows, "correlation matrix needs at least 2 rows");
  const std::size_t d = data.cols();

  // centered columns and their norms
  std::vector<std::vector<double>> centered(d);
  std::vector<double> norm(d);
  for (std::size_t c = 0; c < d; ++c) {
    centered[c] = data.column(c);
    const double mu = mean(centered[c]);
    double ss = 0.0;
    for (double& v : centered[c]) {
      v -= mu;
      ss += v * v;
    }
    norm[c] = std::sqrt(ss);
  }

  CorrelationMatrix out;
  out.labels = data.columns();
  out.values = Matrix(d, d);
  for (std::size_t c = 0; c < d; ++c) {
    if (norm[c] == 0.0) out.constant_columns.push_back(data.columns()[c]);
  }
  for (std::size_t i = 0; i < d; ++i) {
    out.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < d; ++j) {
      double r = 0.0;
      if (norm[i] > 0.0 && norm[j] > 0.0) {
        double s = 0.0;
        for (std::size_t k = 0; k < centered[i].size(); ++k) s += centered[i][k] * centered[j][k];
        r = std::clamp(s / (norm[i] * norm[j]), -1.0, 1.0);
      }
      out.values(i, j) = r;
      out.values(j, i) = r;
    }
  }
  return out;
}

enum class RankMode { SignedDesc, AbsoluteDesc };
enum class Aggregation { Max, Mean, SingleTarget };

constexpr std::string_view to_string(RankMode m) noexcept {
  return m == RankMode::SignedDesc ? "signed_desc" : "absolute_desc";
}

constexpr std::string_view to_string(Aggregation a) noexcept {
  switch (a) {
    case Aggregation::Max: return "max";
    case Aggregation::Mean: return "mean";
    case Aggregation::SingleTarget: return "single_target";
  }
  return "unknown";
}

struct RankedFeature {
  std::string name;
  double score = 0.0;
  bool operator==(const RankedFeature&) const = default;
};

struct FeatureRanking {
  std::vector<std::string> targets;
  std::vector<RankedFeature> ranked;  // top k non-target columns
  RankMode mode = RankMode::SignedDesc;
  Aggregation aggregation = Aggregation::SingleTarget;
  std::size_t k = 0;

  /// Targets first, then the ranked features.
  [[nodiscard]] std::vector<std::string> entries() const {
    std::vector<std::string> out = targets;
    for (const auto& f : ranked) out.push_back(f.name);
    return out;
  }
};

/// Scores every non-target column by its (signed or absolute) correlation with the targets,
/// aggregated by max or mean, and keeps the top k. Ties go to the smaller column name.
/// Columns named in `exclude` are not candidates.
inline FeatureRanking select_features(const CorrelationMatrix& corr, std::span<const std::string> targets,
                                      RankMode mode, Aggregation aggregation, std::size_t k,
                                      std::span<const std::string> exclude = {}) {
  if (targets.empty()) fail(ErrorKind::UnknownTarget, "at least one target column is required");
  if (aggregation == Aggregation::SingleTarget && targets.size() != 1) {
    fail(ErrorKind::InvalidConfig, "single_target aggregation takes exactly one target");
  }
  std::vector<std::size_t> target_idx;
  for (const auto& t : targets) {
    const auto it = std::find(corr.labels.begin(), corr.labels.end(), t);
    if (it == corr.labels.end()) fail(ErrorKind::UnknownTarget, "target '" + t + "' is not a column");
    target_idx.push_back(static_cast<std::size_t>(it - corr.labels.begin()));
  }

  std::vector<RankedFeature> scored;
  for (std::size_t c = 0; c < corr.labels.size(); ++c) {
    if (std::find(target_idx.begin(), target_idx.end(), c) != target_idx.end()) continue;
    if (std::find(exclude.begin(), exclude.end(), corr.labels[c]) != exclude.end()) continue;
    double agg = aggregation == Aggregation::Max ? -std::numeric_limits<double>::infinity() : 0.0;
    for (auto t : target_idx) {
      double v = corr.values(c, t);
      if (mode == RankMode::AbsoluteDesc) v = std::abs(v);
      agg = aggregation == Aggregation::Max ? std::max(agg, v) : agg + v;
    }
    if (aggregation != Aggregation::Max) agg /= static_cast<double>(target_idx.size());
    scored.push_back({corr.labels[c], agg});
  }
  if (k > scored.size()) {
    fail(ErrorKind::KTooLarge,
         "k = " + std::to_string(k) + " exceeds the " + std::to_string(scored.size()) + " candidate columns");
  }
  std::sort(scored.begin(), scored.end(), [](const RankedFeature& a, const RankedFeature& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.name < b.name;
  });
  scored.resize(k);

  FeatureRanking out;
  out.targets.assign(targets.begin(), targets.end());
  out.ranked = std::move(scored);
  out.mode = mode;
  out.aggregation = aggregation;
  out.k = k;
  return out;
}

/// Non-grade entries of the published most-correlated-features table, kept for audit comparison.
inline const std::vector<std::string>& reference_feature_set() {
  static const std::vector<std::string> names = {"Medu",    "Fedu",     "studytime", "famrel",
                                                 "freetime", "absences", "age"};
  return names;
}

inline std::size_t overlap(const FeatureRanking& ranking, std::span<const std::string> reference) {
  std::size_t hits = 0;
  for (const auto& f : ranking.ranked) {
    if (std::find(reference.begin(), reference.end(), f.name) != reference.end()) ++hits;
  }
  return hits;
}

}  // namespace studperf::stats
