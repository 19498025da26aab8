#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "slurmlens/error.hpp"
#include "slurmlens/ingest.hpp"
#include "slurmlens/text.hpp"

namespace slurmlens {

// Dense n x d design matrix with named columns. All entries are finite.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;

  FeatureMatrix(std::vector<std::string> column_names, Eigen::MatrixXd values)
      : names_(std::move(column_names)), values_(std::move(values)) {
    if (static_cast<Eigen::Index>(names_.size()) != values_.cols()) {
      throw ShapeMismatch("feature matrix has " + std::to_string(values_.cols()) + " columns but " +
                          std::to_string(names_.size()) + " names");
    }
    std::set<std::string> seen(names_.begin(), names_.end());
    if (seen.size() != names_.size()) throw ShapeMismatch("duplicate feature column name");
    if (!values_.allFinite()) throw ShapeMismatch("feature matrix contains non-finite entries");
  }

  const std::vector<std::string>& column_names() const { return names_; }
  const Eigen::MatrixXd& values() const { return values_; }
  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }

  // Row subset, preserving column names.
  FeatureMatrix select_rows(const std::vector<std::size_t>& rows) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), values_.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = values_.row(rows[i]);
    return FeatureMatrix(names_, std::move(out));
  }

 private:
  std::vector<std::string> names_;
  Eigen::MatrixXd values_;
};

struct TargetVector {
  std::string name;
  Eigen::VectorXd values;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }

  TargetVector select_rows(const std::vector<std::size_t>& rows) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = values(rows[i]);
    return {name, std::move(out)};
  }
};

enum class PredictorPolicy { AllExceptTarget, SubmissionTimeOnly };

// Columns known at submission time.
inline const std::vector<std::string>& submission_time_columns() {
  static const std::vector<std::string> cols = {"ReqCPUS",   "ReqMem", "ReqNodes", "Timelimit",
                                                "Submit",    "Account", "JobName"};
  return cols;
}

struct Design {
  FeatureMatrix features;
  TargetVector target;
  std::vector<std::size_t> source_rows;  // table row of each matrix row
};

// Selects surviving feature columns as predictors and `target_name` as y. Rows
// with a missing cell in any selected column are skipped (only possible when
// cleaning tolerated some missing values).
inline Design build_matrix(const JobTable& table, const std::string& target_name,
                           PredictorPolicy policy = PredictorPolicy::AllExceptTarget) {
  if (table.rows() == 0) throw EmptyTable();
  const TableColumn* target = table.find(target_name);
  if (target == nullptr || !target->feature) throw UnknownTarget(target_name);

  std::vector<const TableColumn*> predictors;
  for (const auto& c : table.columns) {
    if (!c.feature || &c == target) continue;
    if (policy == PredictorPolicy::SubmissionTimeOnly) {
      const auto& allowed = submission_time_columns();
      if (std::none_of(allowed.begin(), allowed.end(), [&](const auto& a) { return text::iequals(a, c.name); })) {
        continue;
      }
    }
    predictors.push_back(&c);
  }

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    bool complete = !is_missing(target->values[i]);
    for (const auto* p : predictors) complete = complete && !is_missing(p->values[i]);
    if (complete) rows.push_back(i);
  }
  if (rows.empty()) throw EmptyTable();

  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(predictors.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  std::vector<std::string> names;
  for (const auto* p : predictors) names.push_back(p->name);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto ri = static_cast<Eigen::Index>(r);
    y(ri) = target->values[rows[r]];
    for (std::size_t j = 0; j < predictors.size(); ++j) x(ri, static_cast<Eigen::Index>(j)) = predictors[j]->values[rows[r]];
  }
  return {FeatureMatrix(std::move(names), std::move(x)), TargetVector{target->name, std::move(y)}, std::move(rows)};
}

// ---------------------------------------------------------------------------
// Scaling
// ---------------------------------------------------------------------------

enum class ScalingMode { ZScore, MinMax };

// ZSCORE: center = mean, spread = population std.
// MINMAX: center = min, spread = max - min.
struct ScalingParams {
  ScalingMode mode = ScalingMode::ZScore;
  std::vector<std::string> column_names;
  std::vector<double> center;
  std::vector<double> spread;

  std::size_t size() const { return center.size(); }

  static ScalingParams identity(const std::vector<std::string>& names) {
    return {ScalingMode::ZScore, names, std::vector<double>(names.size(), 0.0), std::vector<double>(names.size(), 1.0)};
  }

  // (x - center) / spread; a zero spread maps the column to 0.
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const {
    if (static_cast<std::size_t>(x.cols()) != size()) {
      throw ShapeMismatch("scaling has " + std::to_string(size()) + " columns, matrix has " +
                          std::to_string(x.cols()));
    }
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      auto ju = static_cast<std::size_t>(j);
      if (spread[ju] == 0.0) {
        out.col(j).setZero();
      } else {
        out.col(j) = (x.col(j).array() - center[ju]) / spread[ju];
      }
    }
    return out;
  }

  FeatureMatrix apply(const FeatureMatrix& m) const { return FeatureMatrix(m.column_names(), apply(m.values())); }
};

inline nlohmann::json to_json(const ScalingParams& p) {
  nlohmann::json cols = nlohmann::json::array();
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (p.mode == ScalingMode::ZScore) {
      cols.push_back({{"name", p.column_names[j]}, {"mean", p.center[j]}, {"std", p.spread[j]}});
    } else {
      cols.push_back({{"name", p.column_names[j]}, {"min", p.center[j]}, {"max", p.center[j] + p.spread[j]}});
    }
  }
  return {{"mode", p.mode == ScalingMode::ZScore ? "ZSCORE" : "MINMAX"}, {"columns", cols}};
}

inline ScalingParams fit_zscore(const FeatureMatrix& m) {
  ScalingParams p;
  p.mode = ScalingMode::ZScore;
  p.column_names = m.column_names();
  const auto& x = m.values();
  auto n = static_cast<double>(x.rows());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double mean = x.col(j).mean();
    double var = (x.col(j).array() - mean).square().sum() / n;
    p.center.push_back(mean);
    p.spread.push_back(std::sqrt(var));
  }
  return p;
}

inline ScalingParams fit_minmax(const FeatureMatrix& m) {
  ScalingParams p;
  p.mode = ScalingMode::MinMax;
  p.column_names = m.column_names();
  const auto& x = m.values();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    double lo = x.rows() ? x.col(j).minCoeff() : 0.0;
    double hi = x.rows() ? x.col(j).maxCoeff() : 0.0;
    p.center.push_back(lo);
    p.spread.push_back(hi - lo);
  }
  return p;
}

// Zero mean, unit population variance per column.
inline std::pair<FeatureMatrix, ScalingParams> standardize(const FeatureMatrix& m) {
  auto params = fit_zscore(m);
  for (std::size_t j = 0; j < params.size(); ++j) {
    if (params.spread[j] == 0.0) throw ConstantColumn(params.column_names[j]);
  }
  return {params.apply(m), std::move(params)};
}

inline std::pair<FeatureMatrix, ScalingParams> minmax_normalize(const FeatureMatrix& m) {
  auto params = fit_minmax(m);
  auto out = params.apply(m);
  return {std::move(out), std::move(params)};
}

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;
  std::uint64_t seed = 0;

  std::size_t n() const { return assignments.size(); }

  std::vector<std::size_t> test_rows(std::size_t fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (assignments[i] == fold) rows.push_back(i);
    }
    return rows;
  }

  std::vector<std::size_t> train_rows(std::size_t fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (assignments[i] != fold) rows.push_back(i);
    }
    return rows;
  }
};

// Uniform integer in [0, bound) by rejection, so the sequence depends only on
// the mt19937_64 stream (std::uniform_int_distribution is implementation-defined).
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw = 0;
  do {
    draw = rng();
  } while (draw >= limit);
  return draw % bound;
}

// Seeded Fisher-Yates shuffle of 0..n-1 dealt round-robin into k folds.
inline FoldPlan kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2 || n < k) throw TooFewRows(n, k);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    auto j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(order[i - 1], order[j]);
  }
  FoldPlan plan{k, std::vector<std::size_t>(n), seed};
  for (std::size_t pos = 0; pos < n; ++pos) plan.assignments[order[pos]] = pos % k;
  return plan;
}

// Header row of column names, then one row per observation.
inline void write_csv(const FeatureMatrix& m, std::ostream& out) {
  for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << text::sanitize_cell(m.column_names()[j], ',');
  out << '\n';
  for (Eigen::Index i = 0; i < m.values().rows(); ++i) {
    for (Eigen::Index j = 0; j < m.values().cols(); ++j) out << (j ? "," : "") << text::format_real(m.values()(i, j));
    out << '\n';
  }
}

}  // namespace slurmlens
