#pragma once

// Per-method feature scores from fitted linear models and their mean-score
// ranking.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "slurmlens/dataset.hpp"
#include "slurmlens/error.hpp"
#include "slurmlens/evaluation.hpp"
#include "slurmlens/linear_models.hpp"
#include "slurmlens/text.hpp"

namespace slurmlens {

using ScoreMap = std::map<std::string, double>;

// |b_j| / max_k |b_k|; all zeros when every coefficient is zero.
inline ScoreMap score_from_fit(const LinearFit& fit) {
  ScoreMap scores;
  double largest = fit.coefficients.size() ? fit.coefficients.cwiseAbs().maxCoeff() : 0.0;
  for (std::size_t j = 0; j < fit.feature_names.size(); ++j) {
    double b = std::abs(fit.coefficients(static_cast<Eigen::Index>(j)));
    scores[fit.feature_names[j]] = largest > 0.0 ? b / largest : 0.0;
  }
  return scores;
}

struct FeatureScore {
  std::string feature;
  std::map<std::string, double> per_method;
  double mean_score = 0.0;
};

// One (method name, score map) pair per scorer; every map must cover the same features.
inline std::vector<FeatureScore> aggregate_mean(const std::vector<std::pair<std::string, ScoreMap>>& per_method) {
  std::vector<FeatureScore> out;
  if (per_method.empty()) return out;
  const auto& reference = per_method.front().second;
  for (const auto& [method, scores] : per_method) {
    bool same = scores.size() == reference.size() &&
                std::equal(scores.begin(), scores.end(), reference.begin(),
                           [](const auto& a, const auto& b) { return a.first == b.first; });
    if (!same) throw FeatureSetMismatch("scores from '" + method + "' cover a different feature set");
  }
  for (const auto& [feature, ignored] : reference) {
    FeatureScore fs;
    fs.feature = feature;
    double sum = 0.0;
    for (const auto& [method, scores] : per_method) {
      double v = scores.at(feature);
      fs.per_method[method] = v;
      sum += v;
    }
    fs.mean_score = sum / static_cast<double>(per_method.size());
    out.push_back(std::move(fs));
  }
  return out;
}

struct RankingReport {
  std::string target;
  std::vector<FeatureScore> scores;  // mean_score descending, ties by name
  std::size_t top_k = 5;
  std::size_t bottom_k = 5;

  std::vector<FeatureScore> top() const { return {scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(top_k)}; }

  // Worst features, lowest score first (ties by name).
  std::vector<FeatureScore> bottom() const {
    auto sorted = scores;
    std::stable_sort(sorted.begin(), sorted.end(), [](const FeatureScore& a, const FeatureScore& b) {
      if (a.mean_score != b.mean_score) return a.mean_score < b.mean_score;
      return a.feature < b.feature;
    });
    sorted.resize(bottom_k);
    return sorted;
  }
};

inline RankingReport rank_report(std::vector<FeatureScore> scores, std::string target, std::size_t top_k = 5,
                                 std::size_t bottom_k = 5) {
  if (top_k + bottom_k > scores.size()) throw KTooLarge(top_k, bottom_k, scores.size());
  std::sort(scores.begin(), scores.end(), [](const FeatureScore& a, const FeatureScore& b) {
    if (a.mean_score != b.mean_score) return a.mean_score > b.mean_score;
    return a.feature < b.feature;
  });
  return {std::move(target), std::move(scores), top_k, bottom_k};
}

// Two tables: best then worst features, scores to two decimals.
inline std::string format_text(const RankingReport& r) {
  auto table = [&](const std::string& title, const std::vector<FeatureScore>& rows) {
    std::size_t width = std::string("Features").size();
    for (const auto& s : rows) width = std::max(width, s.feature.size());
    std::ostringstream out;
    out << title << '\n';
    out << std::string("Features") << std::string(width - 8 + 2, ' ') << "ranking score\n";
    for (const auto& s : rows) {
      out << s.feature << std::string(width - s.feature.size() + 2, ' ') << text::format_fixed(s.mean_score, 2)
          << '\n';
    }
    return out.str();
  };
  return table("Feature ranking scores for best features for predicting " + r.target, r.top()) + "\n" +
         table("Feature ranking scores for worst features for predicting " + r.target, r.bottom());
}

// feature,ols,ridge,lasso,mean for every feature in ranking order.
inline void write_csv(const RankingReport& r, std::ostream& out) {
  out << "feature,ols,ridge,lasso,mean\n";
  for (const auto& s : r.scores) {
    out << text::sanitize_cell(s.feature, ',');
    for (const char* method : {"OLS", "RIDGE", "LASSO"}) {
      out << ',';
      if (auto it = s.per_method.find(method); it != s.per_method.end()) out << text::format_real(it->second);
    }
    out << ',' << text::format_real(s.mean_score) << '\n';
  }
}

inline nlohmann::json to_json(const RankingReport& r) {
  nlohmann::json scores = nlohmann::json::array();
  for (const auto& s : r.scores) {
    scores.push_back({{"feature", s.feature}, {"per_method", s.per_method}, {"mean_score", s.mean_score}});
  }
  return {{"target", r.target}, {"top_k", r.top_k}, {"bottom_k", r.bottom_k}, {"scores", scores}};
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

inline std::vector<double> default_lambda_grid() { return {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2}; }

// Grid value with the lowest mean validation MSE (first one on ties). Scaling
// is fit on training rows of each fold; a failing fold disqualifies the value.
inline double select_lambda(const FeatureMatrix& x, const TargetVector& y, FitMethod method,
                            const std::vector<double>& grid, const FoldPlan& plan, const SolverSettings& solver = {}) {
  if (grid.empty()) throw ConfigError("lambda grid is empty");
  double best = grid.front();
  double best_mse = std::numeric_limits<double>::infinity();
  std::vector<std::vector<std::size_t>> train(plan.k), test(plan.k);
  for (std::size_t f = 0; f < plan.k; ++f) {
    train[f] = plan.train_rows(f);
    test[f] = plan.test_rows(f);
  }
  for (double lambda : grid) {
    double total = 0.0;
    bool ok = true;
    for (std::size_t f = 0; f < plan.k && ok; ++f) {
      try {
        auto x_train = x.select_rows(train[f]);
        auto scaling = fit_zscore(x_train);
        auto model = fit_method(method, scaling.apply(x_train), y.select_rows(train[f]), lambda, solver);
        auto yhat = predict(model, x.select_rows(test[f]), scaling);
        total += (y.select_rows(test[f]).values - yhat).squaredNorm() / static_cast<double>(test[f].size());
      } catch (const Error&) {
        ok = false;
      }
    }
    double mse = ok ? total / static_cast<double>(plan.k) : std::numeric_limits<double>::infinity();
    if (mse < best_mse) {
      best_mse = mse;
      best = lambda;
    }
  }
  return best;
}

struct RankingOptions {
  std::vector<double> lambda_grid = default_lambda_grid();
  std::size_t folds = 5;
  std::uint64_t seed = 42;
  SolverSettings solver;
  std::size_t top_k = 5;
  std::size_t bottom_k = 5;
};

struct RankingOutcome {
  RankingReport report;
  std::vector<LinearFit> fits;  // OLS, ridge, lasso
  ScalingParams scaling;
  // Set when OLS hit collinear columns and ridge at the smallest grid lambda stood in.
  std::vector<std::string> ols_rank_deficient_columns;
};

// Standardizes X, picks ridge/lasso penalties by k-fold CV, fits the three
// scorers on all rows and ranks features by their mean score.
inline RankingOutcome rank_features(const FeatureMatrix& x, const TargetVector& y, const RankingOptions& options = {}) {
  auto [xs, scaling] = standardize(x);
  auto plan = kfold_split(x.rows(), options.folds, options.seed);
  RankingOutcome out;
  out.scaling = scaling;

  LinearFit ols;
  try {
    ols = fit_ols(xs, y);
  } catch (const RankDeficient& e) {
    out.ols_rank_deficient_columns = e.columns();
    auto smallest = *std::min_element(options.lambda_grid.begin(), options.lambda_grid.end());
    ols = fit_ridge(xs, y, smallest > 0.0 ? smallest : 1e-8);
  }
  double ridge_lambda = select_lambda(x, y, FitMethod::Ridge, options.lambda_grid, plan, options.solver);
  double lasso_lambda = select_lambda(x, y, FitMethod::Lasso, options.lambda_grid, plan, options.solver);
  auto ridge = fit_ridge(xs, y, ridge_lambda);
  auto lasso = fit_lasso(xs, y, lasso_lambda, options.solver.tol, options.solver.max_iter);

  out.report = rank_report(aggregate_mean({{"OLS", score_from_fit(ols)},
                                           {"RIDGE", score_from_fit(ridge)},
                                           {"LASSO", score_from_fit(lasso)}}),
                           y.name, options.top_k, options.bottom_k);
  out.fits = {std::move(ols), std::move(ridge), std::move(lasso)};
  return out;
}

}  // namespace slurmlens
