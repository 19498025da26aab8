#pragma once

// Ordinary least squares, ridge and lasso on a FeatureMatrix. The intercept is
// always fitted by centering and is never penalized.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "slurmlens/dataset.hpp"
#include "slurmlens/error.hpp"

namespace slurmlens {

enum class FitMethod { Ols, Ridge, Lasso };

inline std::string_view to_string(FitMethod m) {
  switch (m) {
    case FitMethod::Ols: return "OLS";
    case FitMethod::Ridge: return "RIDGE";
    case FitMethod::Lasso: return "LASSO";
  }
  return "OLS";
}

// objective: OLS ||r||^2, ridge ||r||^2 + lambda ||b||^2,
// lasso (1/2n) ||r||^2 + lambda ||b||_1.
struct LinearFit {
  FitMethod method = FitMethod::Ols;
  std::vector<std::string> feature_names;
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  double lambda = 0.0;
  int iterations = 0;
  bool converged = true;
  double objective = 0.0;
};

inline nlohmann::json to_json(const LinearFit& fit) {
  nlohmann::json coefs = nlohmann::json::object();
  for (std::size_t j = 0; j < fit.feature_names.size(); ++j) {
    coefs[fit.feature_names[j]] = fit.coefficients(static_cast<Eigen::Index>(j));
  }
  return {{"method", to_string(fit.method)}, {"lambda", fit.lambda},       {"intercept", fit.intercept},
          {"coefficients", coefs},           {"converged", fit.converged}, {"iterations", fit.iterations}};
}

inline double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

namespace detail {

struct Centered {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  Eigen::RowVectorXd x_mean;
  double y_mean = 0.0;
};

inline Centered center(const FeatureMatrix& m, const TargetVector& t) {
  if (m.rows() != t.size()) {
    throw ShapeMismatch("feature matrix has " + std::to_string(m.rows()) + " rows, target has " +
                        std::to_string(t.size()));
  }
  if (m.rows() == 0) throw EmptyTable();
  Centered c;
  c.x_mean = m.values().colwise().mean();
  c.y_mean = t.values.mean();
  c.x = m.values().rowwise() - c.x_mean;
  c.y = t.values.array() - c.y_mean;
  return c;
}

struct LeastSquaresSolution {
  Eigen::VectorXd coefficients;
  std::vector<std::size_t> dependent_columns;
};

// min ||a x - b||_2 by Householder QR. A column whose R diagonal is below
// rank_tol times its original norm lies (numerically) in the span of the
// columns before it and is reported as dependent.
inline LeastSquaresSolution householder_least_squares(Eigen::MatrixXd a, Eigen::VectorXd b, double rank_tol) {
  const Eigen::Index m = a.rows();
  const Eigen::Index d = a.cols();
  LeastSquaresSolution out;
  Eigen::VectorXd column_norm = a.colwise().norm().transpose();
  Eigen::VectorXd diag(d);
  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::VectorXd v = a.col(k).tail(m - k);
    double norm = v.norm();
    if (norm == 0.0) {
      diag(k) = 0.0;
      continue;
    }
    double alpha = v(0) > 0 ? -norm : norm;
    v(0) -= alpha;
    double vnorm = v.norm();
    if (vnorm > 0.0) {
      v /= vnorm;
      a.bottomRightCorner(m - k, d - k) -= 2.0 * v * (v.transpose() * a.bottomRightCorner(m - k, d - k));
      b.tail(m - k) -= 2.0 * v * v.dot(b.tail(m - k));
    }
    diag(k) = a(k, k);
  }
  for (Eigen::Index k = 0; k < d; ++k) {
    if (std::abs(diag(k)) <= rank_tol * column_norm(k)) out.dependent_columns.push_back(static_cast<std::size_t>(k));
  }
  if (!out.dependent_columns.empty()) return out;
  out.coefficients = a.topLeftCorner(d, d).triangularView<Eigen::Upper>().solve(b.head(d));
  return out;
}

inline constexpr double kRankTolerance = 1e-10;

inline void throw_rank_deficient(const FeatureMatrix& m, const std::vector<std::size_t>& dependent) {
  std::vector<std::string> names;
  for (auto j : dependent) names.push_back(m.column_names()[j]);
  throw RankDeficient(std::move(names));
}

}  // namespace detail

inline LinearFit fit_ols(const FeatureMatrix& x, const TargetVector& y) {
  if (x.rows() < x.cols() + 1) throw InsufficientRows(x.rows(), x.cols());
  auto c = detail::center(x, y);
  auto solved = detail::householder_least_squares(c.x, c.y, detail::kRankTolerance);
  if (!solved.dependent_columns.empty()) detail::throw_rank_deficient(x, solved.dependent_columns);

  LinearFit fit;
  fit.method = FitMethod::Ols;
  fit.feature_names = x.column_names();
  fit.coefficients = std::move(solved.coefficients);
  fit.intercept = c.y_mean - c.x_mean.dot(fit.coefficients);
  fit.objective = (c.y - c.x * fit.coefficients).squaredNorm();
  return fit;
}

// beta = (Xc'Xc + lambda I)^-1 Xc'yc, solved as the QR least-squares problem
// [Xc; sqrt(lambda) I] beta ~ [yc; 0].
inline LinearFit fit_ridge(const FeatureMatrix& x, const TargetVector& y, double lambda) {
  if (!(lambda >= 0.0)) throw NegativeLambda(lambda);
  if (lambda == 0.0) {
    auto fit = fit_ols(x, y);
    fit.method = FitMethod::Ridge;
    return fit;
  }
  auto c = detail::center(x, y);
  const Eigen::Index n = c.x.rows();
  const Eigen::Index d = c.x.cols();
  Eigen::MatrixXd a(n + d, d);
  a.topRows(n) = c.x;
  a.bottomRows(d) = std::sqrt(lambda) * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + d);
  b.head(n) = c.y;
  auto solved = detail::householder_least_squares(std::move(a), std::move(b), 0.0);

  LinearFit fit;
  fit.method = FitMethod::Ridge;
  fit.lambda = lambda;
  fit.feature_names = x.column_names();
  fit.coefficients = std::move(solved.coefficients);
  fit.intercept = c.y_mean - c.x_mean.dot(fit.coefficients);
  fit.objective = (c.y - c.x * fit.coefficients).squaredNorm() + lambda * fit.coefficients.squaredNorm();
  return fit;
}

// Smallest lambda at which every lasso coefficient is zero: max_j |(1/n) xj'(y - ybar)|.
inline double lasso_lambda_max(const FeatureMatrix& x, const TargetVector& y) {
  auto c = detail::center(x, y);
  if (c.x.cols() == 0) return 0.0;
  return (c.x.transpose() * c.y).cwiseAbs().maxCoeff() / static_cast<double>(c.x.rows());
}

// Cyclic coordinate descent on (1/2n)||y - b0 - X b||^2 + lambda ||b||_1.
// Stops once a full sweep moves no coefficient by tol or more.
inline LinearFit fit_lasso(const FeatureMatrix& x, const TargetVector& y, double lambda, double tol = 1e-8,
                           int max_iter = 10000, const std::optional<Eigen::VectorXd>& warm_start = std::nullopt) {
  if (!(lambda >= 0.0)) throw NegativeLambda(lambda);
  auto c = detail::center(x, y);
  const Eigen::Index n = c.x.rows();
  const Eigen::Index d = c.x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  if (warm_start && warm_start->size() == d) beta = *warm_start;
  Eigen::VectorXd col_sq(d);
  for (Eigen::Index j = 0; j < d; ++j) col_sq(j) = c.x.col(j).squaredNorm() * inv_n;
  Eigen::VectorXd residual = c.y - c.x * beta;

  auto objective = [&] { return 0.5 * inv_n * residual.squaredNorm() + lambda * beta.lpNorm<1>(); };

  LinearFit fit;
  fit.method = FitMethod::Lasso;
  fit.lambda = lambda;
  fit.feature_names = x.column_names();
  fit.converged = false;
  // At or above lambda_max the origin is optimal; skip the sweeps so rounding in the
  // incremental residual cannot leave a coefficient at 1e-17.
  if (d == 0 || (c.x.transpose() * c.y).cwiseAbs().maxCoeff() / static_cast<double>(n) <= lambda) {
    beta.setZero();
    residual = c.y;
    fit.converged = true;
  }
  [[maybe_unused]] double previous = objective();
  for (int sweep = 1; !fit.converged && sweep <= max_iter; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (col_sq(j) == 0.0) {
        beta(j) = 0.0;
        continue;
      }
      double old = beta(j);
      double z = inv_n * c.x.col(j).dot(residual) + col_sq(j) * old;
      double updated = soft_threshold(z, lambda) / col_sq(j);
      if (updated != old) {
        residual -= (updated - old) * c.x.col(j);
        beta(j) = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
#ifndef NDEBUG
    double current = objective();
    assert(current <= previous + 1e-12 * (1.0 + std::abs(previous)));
    previous = current;
#endif
    fit.iterations = sweep;
    if (max_change < tol) {
      fit.converged = true;
      break;
    }
  }
  fit.coefficients = std::move(beta);
  fit.intercept = c.y_mean - c.x_mean.dot(fit.coefficients);
  fit.objective = objective();
  return fit;
}

// Largest violation of the lasso optimality conditions, in units of the
// (1/n)-scaled gradient: |g_j| - lambda for zero coefficients, |g_j - lambda sign(b_j)| otherwise,
// where g_j = (1/n) xj'r on centered data.
inline double lasso_kkt_violation(const FeatureMatrix& x, const TargetVector& y, const LinearFit& fit) {
  auto c = detail::center(x, y);
  Eigen::VectorXd r = c.y - c.x * fit.coefficients;
  Eigen::VectorXd g = c.x.transpose() * r / static_cast<double>(c.x.rows());
  double worst = 0.0;
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    double b = fit.coefficients(j);
    double v = b == 0.0 ? std::abs(g(j)) - fit.lambda : std::abs(g(j) - fit.lambda * (b > 0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

// y-hat = intercept + scaled(x)' beta.
inline Eigen::VectorXd predict(const LinearFit& fit, const FeatureMatrix& x, const ScalingParams& scaling) {
  if (x.column_names() != fit.feature_names || scaling.column_names != fit.feature_names ||
      static_cast<std::size_t>(fit.coefficients.size()) != fit.feature_names.size()) {
    throw ShapeMismatch("prediction columns do not match the fitted model");
  }
  Eigen::VectorXd out = scaling.apply(x.values()) * fit.coefficients;
  out.array() += fit.intercept;
  return out;
}

struct SolverSettings {
  double tol = 1e-8;
  int max_iter = 10000;
};

inline LinearFit fit_method(FitMethod method, const FeatureMatrix& x, const TargetVector& y, double lambda,
                            const SolverSettings& settings = {}) {
  switch (method) {
    case FitMethod::Ols: return fit_ols(x, y);
    case FitMethod::Ridge: return fit_ridge(x, y, lambda);
    case FitMethod::Lasso: return fit_lasso(x, y, lambda, settings.tol, settings.max_iter);
  }
  return fit_ols(x, y);
}

}  // namespace slurmlens
