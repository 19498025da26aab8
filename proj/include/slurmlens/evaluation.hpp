#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "slurmlens/dataset.hpp"
#include "slurmlens/error.hpp"
#include "slurmlens/ingest.hpp"
#include "slurmlens/linear_models.hpp"
#include "slurmlens/text.hpp"

namespace slurmlens {

// accuracy is the tolerance-band regression accuracy; label_accuracy,
// precision, recall and f1 come from the over-request label rule and are only
// meaningful when has_labels is set.
struct Metrics {
  double r_squared = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double label_accuracy = 0.0;
  std::size_t n_eval = 0;
  bool has_labels = false;
};

inline void check_lengths(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, Eigen::Index min_len) {
  if (y.size() != yhat.size()) throw ShapeMismatch("observed and predicted lengths differ");
  if (y.size() < min_len) throw ShapeMismatch("need at least " + std::to_string(min_len) + " values");
}

// 1 - SS_res / SS_tot.
inline double r_squared(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat) {
  check_lengths(y, yhat, 2);
  double mean = y.mean();
  double ss_tot = (y.array() - mean).square().sum();
  if (ss_tot == 0.0) throw ConstantTarget();
  double ss_res = (y - yhat).squaredNorm();
  return 1.0 - ss_res / ss_tot;
}

// Fraction of predictions within max(rel_tol * |y|, abs_floor) of the truth.
inline double regression_accuracy(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat, double rel_tol = 0.10,
                                  double abs_floor = 0.0) {
  check_lengths(y, yhat, 1);
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (std::abs(yhat(i) - y(i)) <= std::max(rel_tol * std::abs(y(i)), abs_floor)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

struct BinaryMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

inline BinaryMetrics binary_metrics(const std::vector<bool>& labels, const std::vector<bool>& predicted) {
  if (labels.size() != predicted.size() || labels.empty()) {
    throw ShapeMismatch("label and prediction vectors must be non-empty and of equal length");
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] && predicted[i]) ++tp;
    else if (!labels[i] && predicted[i]) ++fp;
    else if (labels[i] && !predicted[i]) ++fn;
    else ++tn;
  }
  BinaryMetrics m;
  auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = ratio(tp + tn, labels.size());
  return m;
}

// ---------------------------------------------------------------------------
// Label rules
// ---------------------------------------------------------------------------

enum class LabelRule { OverRequestMem, OverRequestTime };

// MaxRSS -> memory rule, CPUTimeRaw -> time rule, anything else -> none.
inline std::optional<LabelRule> label_rule_for_target(std::string_view target) {
  if (text::iequals(target, "MaxRSS")) return LabelRule::OverRequestMem;
  if (text::iequals(target, "CPUTimeRaw")) return LabelRule::OverRequestTime;
  return std::nullopt;
}

namespace detail {

inline double first_present(const JobTable& t, std::size_t i, std::initializer_list<std::string_view> names,
                            double fallback) {
  for (auto name : names) {
    if (auto v = t.value(name, i)) return *v;
  }
  return fallback;
}

}  // namespace detail

// Requested resource per table row: effective ReqMem (PER_NODE x NNodes,
// PER_CORE x NCPUS, TOTAL as-is) or Timelimit x AllocCPUS in CPU-seconds.
// A missing request (e.g. UNLIMITED time) is +inf, so it is never exceeded.
inline std::vector<double> requested_resource(const JobTable& table, const std::vector<std::size_t>& rows,
                                              LabelRule rule) {
  std::vector<double> out;
  out.reserve(rows.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (auto i : rows) {
    if (rule == LabelRule::OverRequestMem) {
      auto mem = table.value("ReqMem", i);
      if (!mem) {
        out.push_back(inf);
        continue;
      }
      double factor = 1.0;
      if (table.req_mem_scopes[i] == MemoryScope::PerNode) {
        factor = detail::first_present(table, i, {"NNodes", "AllocNodes", "ReqNodes"}, 1.0);
      } else if (table.req_mem_scopes[i] == MemoryScope::PerCore) {
        factor = detail::first_present(table, i, {"NCPUS", "AllocCPUS", "ReqCPUS"}, 1.0);
      }
      out.push_back(*mem * factor);
    } else {
      auto limit = table.value("Timelimit", i);
      if (!limit) {
        out.push_back(inf);
        continue;
      }
      out.push_back(*limit * detail::first_present(table, i, {"AllocCPUS", "NCPUS", "ReqCPUS"}, 1.0));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

struct EvalOptions {
  double rel_tol = 0.10;
  double abs_floor = 1.0;
  // Requested resource per matrix row; enables the label metrics.
  std::optional<std::vector<double>> thresholds;
  // Fit scaling on all rows instead of training rows. Leaks test rows; exists
  // only so that tests can demonstrate the leak changes results.
  bool scale_on_all_rows = false;
  SolverSettings solver;
};

struct FoldResult {
  std::size_t fold = 0;
  bool ok = false;
  std::string error;
  Metrics metrics;
};

struct CvResult {
  std::vector<FoldResult> folds;
  Metrics mean;
  bool mean_over_fewer_folds = false;
};

inline Metrics evaluate_predictions(const Eigen::VectorXd& y, const Eigen::VectorXd& yhat,
                                    const std::vector<double>* thresholds, const EvalOptions& options) {
  Metrics m;
  m.n_eval = static_cast<std::size_t>(y.size());
  m.r_squared = r_squared(y, yhat);
  m.accuracy = regression_accuracy(y, yhat, options.rel_tol, options.abs_floor);
  if (thresholds != nullptr) {
    std::vector<bool> actual(static_cast<std::size_t>(y.size()));
    std::vector<bool> predicted(actual.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      auto iu = static_cast<std::size_t>(i);
      actual[iu] = y(i) > (*thresholds)[iu];
      predicted[iu] = yhat(i) > (*thresholds)[iu];
    }
    auto b = binary_metrics(actual, predicted);
    m.precision = b.precision;
    m.recall = b.recall;
    m.f1 = b.f1;
    m.label_accuracy = b.accuracy;
    m.has_labels = true;
  }
  return m;
}

// Trains on all rows outside each fold (scaling fit on those rows) and scores
// the held-out fold. A failing fold is recorded, not thrown.
inline CvResult cross_validate(const FeatureMatrix& x, const TargetVector& y, FitMethod method, double lambda,
                               const FoldPlan& plan, const EvalOptions& options = {}) {
  if (plan.n() != x.rows() || x.rows() != y.size()) throw ShapeMismatch("fold plan does not match the data");
  if (options.thresholds && options.thresholds->size() != x.rows()) {
    throw ShapeMismatch("threshold vector does not match the data");
  }
  CvResult result;
  std::size_t ok = 0;
  for (std::size_t f = 0; f < plan.k; ++f) {
    FoldResult fold;
    fold.fold = f;
    try {
      auto train = plan.train_rows(f);
      auto test = plan.test_rows(f);
      auto x_train = x.select_rows(train);
      auto scaling = options.scale_on_all_rows ? fit_zscore(x) : fit_zscore(x_train);
      for (std::size_t j = 0; j < scaling.size(); ++j) {
        if (scaling.spread[j] == 0.0) throw ConstantColumn(scaling.column_names[j]);
      }
      auto model = fit_method(method, scaling.apply(x_train), y.select_rows(train), lambda, options.solver);
      auto yhat = predict(model, x.select_rows(test), scaling);
      std::optional<std::vector<double>> fold_thresholds;
      if (options.thresholds) {
        fold_thresholds.emplace();
        for (auto i : test) fold_thresholds->push_back((*options.thresholds)[i]);
      }
      fold.metrics = evaluate_predictions(y.select_rows(test).values, yhat,
                                          fold_thresholds ? &*fold_thresholds : nullptr, options);
      fold.ok = true;
      ++ok;
    } catch (const Error& e) {
      fold.error = e.what();
    }
    result.folds.push_back(std::move(fold));
  }
  result.mean_over_fewer_folds = ok < plan.k;
  if (ok > 0) {
    Metrics& m = result.mean;
    for (const auto& fold : result.folds) {
      if (!fold.ok) continue;
      m.r_squared += fold.metrics.r_squared;
      m.accuracy += fold.metrics.accuracy;
      m.precision += fold.metrics.precision;
      m.recall += fold.metrics.recall;
      m.f1 += fold.metrics.f1;
      m.label_accuracy += fold.metrics.label_accuracy;
      m.n_eval += fold.metrics.n_eval;
      m.has_labels = fold.metrics.has_labels;
    }
    double denom = static_cast<double>(ok);
    m.r_squared /= denom;
    m.accuracy /= denom;
    m.precision /= denom;
    m.recall /= denom;
    m.f1 /= denom;
    m.label_accuracy /= denom;
  }
  return result;
}

inline nlohmann::json to_json(const Metrics& m) {
  nlohmann::json j = {{"r_squared", m.r_squared}, {"accuracy", m.accuracy}, {"n_eval", m.n_eval}};
  if (m.has_labels) {
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    j["label_accuracy"] = m.label_accuracy;
  } else {
    j["precision"] = nullptr;
    j["recall"] = nullptr;
    j["f1"] = nullptr;
    j["label_accuracy"] = nullptr;
  }
  return j;
}

inline nlohmann::json to_json(const CvResult& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) {
    nlohmann::json j = {{"fold", f.fold}, {"ok", f.ok}};
    if (f.ok) {
      j["metrics"] = to_json(f.metrics);
    } else {
      j["error"] = f.error;
    }
    folds.push_back(j);
  }
  return {{"folds", folds}, {"mean", to_json(r.mean)}, {"mean_over_fewer_folds", r.mean_over_fewer_folds}};
}

// "LR" is the single hold-out split (fold 0 held out), "LR with k-fold" the
// mean over all folds.
inline std::string format_results_table(const CvResult& r, const std::string& model = "LR",
                                        double rel_tol = 0.10) {
  auto pct = [](double v) { return text::format_fixed(100.0 * v, 1); };
  auto row = [&](const std::string& name, const Metrics& m, bool ok) {
    std::string line = name;
    line.resize(std::max<std::size_t>(line.size(), 16), ' ');
    if (!ok) return line + "| failed";
    return line + "| " + pct(m.accuracy) + " | " + (m.has_labels ? pct(m.f1) : std::string("n/a")) + " | " +
           pct(m.r_squared);
  };
  std::ostringstream out;
  std::string header = "Model";
  header.resize(16, ' ');
  out << header << "| Accuracy(%) | F1(%) | R squared (%)\n";
  if (!r.folds.empty()) out << row(model, r.folds.front().metrics, r.folds.front().ok) << '\n';
  out << row(model + " with k-fold", r.mean, !r.folds.empty() && !(r.mean_over_fewer_folds && r.mean.n_eval == 0))
      << '\n';
  out << "Accuracy: share of predictions within +/-" << text::format_fixed(100.0 * rel_tol, 0)
      << "% of the observed value. F1: over-request label (observed vs predicted usage above the request).\n";
  if (r.mean_over_fewer_folds) out << "Warning: mean taken over fewer folds than planned.\n";
  return out.str();
}

}  // namespace slurmlens
