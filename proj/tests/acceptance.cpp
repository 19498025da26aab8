// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slurmlens.hpp"

using namespace slurmlens;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = g(rng);
  }
  return x;
}

FeatureMatrix named(const Eigen::MatrixXd& x) {
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < x.cols(); ++j) names.push_back("x" + std::to_string(j));
  return {names, x};
}

Eigen::MatrixXd centered(const Eigen::MatrixXd& x) { return x.rowwise() - x.colwise().mean(); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ---------------------------------------------------------------------------

Verdict headline_reproduction() {
  Verdict v;
  const auto start = Clock::now();
  const int n = 10000, d = 20;
  const std::vector<int> designated = {2, 5, 11, 14, 19};
  const std::vector<double> beta = {1.0, -1.5, 2.0, 1.25, -2.5};
  std::mt19937_64 rng(20240601);
  std::normal_distribution<double> g(0.0, 1.0);
  double signal_var = 0.0;
  for (double b : beta) signal_var += b * b;
  const double noise_sd = std::sqrt(signal_var * (1.0 / 0.95 - 1.0));

  std::ostringstream dump;
  dump << "JobID|State";
  for (int j = 0; j < d; ++j) dump << "|f" << (j < 10 ? "0" : "") << j;
  dump << "|y\n";
  const char* states[] = {"COMPLETED", "FAILED", "TIMEOUT"};
  std::vector<double> row(d);
  for (int i = 0; i < n; ++i) {
    double y = 0.0;
    for (int j = 0; j < d; ++j) row[j] = g(rng);
    for (std::size_t k = 0; k < designated.size(); ++k) y += beta[k] * row[designated[k]];
    y += noise_sd * g(rng);
    dump << i + 1 << '|' << states[i % 3];
    for (double x : row) dump << '|' << text::format_real(x);
    dump << '|' << text::format_real(y) << '\n';
  }

  std::istringstream in(dump.str());
  auto [table, report] = clean_stream(in, '|');
  v.require(report.rows_out == static_cast<std::size_t>(n), "cleaning dropped rows");
  auto design = build_matrix(table, "y");
  // The 20 synthetic columns plus the coded State column.
  v.require(design.features.cols() == d + 1, "expected 21 predictors, got " + std::to_string(design.features.cols()));

  RankingOptions options;
  options.top_k = 5;
  options.bottom_k = 5;
  auto ranking = rank_features(design.features, design.target, options);
  std::set<std::string> top;
  for (const auto& s : ranking.report.top()) top.insert(s.feature);
  for (int j : designated) {
    std::string name = std::string("f") + (j < 10 ? "0" : "") + std::to_string(j);
    v.require(top.count(name) == 1, name + " missing from the top 5");
  }

  auto cv = cross_validate(design.features, design.target, FitMethod::Ols, 0.0, kfold_split(n, 5, 42));
  const double r2 = cv.mean.r_squared;
  v.require(!cv.mean_over_fewer_folds, "a fold failed");
  v.require(r2 >= 0.93 && r2 <= 0.97, "mean R^2 " + text::format_real(r2) + " outside [0.93, 0.97]");
  const double elapsed = seconds_since(start);
  v.require(elapsed < 10.0, "took " + text::format_fixed(elapsed, 2) + " s");
  if (v.pass) v.detail = "top-5 exact, mean R^2 " + text::format_fixed(r2, 4) + ", " + text::format_fixed(elapsed, 2) + " s";
  return v;
}

// Independent lasso oracle: FISTA on the centered problem, run until the
// iterates stop moving at 1e-12 precision.
Eigen::VectorXd lasso_fista(const Eigen::MatrixXd& xc, const Eigen::VectorXd& yc, double lambda) {
  const double n = static_cast<double>(xc.rows());
  Eigen::MatrixXd h = xc.transpose() * xc / n;
  const double lipschitz = std::max(h.eigenvalues().real().maxCoeff(), 1e-12);
  const double step = 1.0 / lipschitz;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(xc.cols()), z = b, prev = b;
  double t = 1.0;
  for (int it = 0; it < 2000000; ++it) {
    Eigen::VectorXd grad = h * z - xc.transpose() * yc / n;
    Eigen::VectorXd u = z - step * grad;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      double a = std::abs(u(j)) - step * lambda;
      b(j) = a > 0 ? std::copysign(a, u(j)) : 0.0;
    }
    double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    z = b + ((t - 1.0) / t_next) * (b - prev);
    t = t_next;
    if ((b - prev).cwiseAbs().maxCoeff() < 1e-12 && it > 10) break;
    prev = b;
  }
  return b;
}

double lasso_objective(const Eigen::MatrixXd& xc, const Eigen::VectorXd& yc, const Eigen::VectorXd& b, double lambda) {
  return 0.5 * (yc - xc * b).squaredNorm() / static_cast<double>(xc.rows()) + lambda * b.lpNorm<1>();
}

Verdict lasso_oracle() {
  Verdict v;
  std::mt19937_64 rng(77);
  const double tol = 1e-8;
  double worst_gap = 0.0, worst_kkt = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    auto n = 2 + static_cast<Eigen::Index>(rng() % 7);
    auto d = 1 + static_cast<Eigen::Index>(rng() % 3);
    Eigen::MatrixXd x = gaussian(rng, n, d);
    Eigen::VectorXd y = gaussian(rng, n, 1).col(0);
    TargetVector ty{"y", y};
    auto fx = named(x);
    double lambda = lasso_lambda_max(fx, ty) * std::uniform_real_distribution<double>(0.0, 1.2)(rng);
    auto fit = fit_lasso(fx, ty, lambda, tol);
    Eigen::MatrixXd xc = centered(x);
    Eigen::VectorXd yc = y.array() - y.mean();
    auto oracle = lasso_fista(xc, yc, lambda);
    double gap = std::abs(lasso_objective(xc, yc, fit.coefficients, lambda) - lasso_objective(xc, yc, oracle, lambda));
    double kkt = lasso_kkt_violation(fx, ty, fit);
    worst_gap = std::max(worst_gap, gap);
    worst_kkt = std::max(worst_kkt, kkt);
  }
  v.require(worst_gap <= 1e-6, "objective gap " + text::format_real(worst_gap));
  v.require(worst_kkt <= 10 * tol, "KKT violation " + text::format_real(worst_kkt));
  if (v.pass) v.detail = "max objective gap " + text::format_real(worst_gap) + ", max KKT " + text::format_real(worst_kkt);
  return v;
}

Verdict ridge_oracle() {
  Verdict v;
  std::mt19937_64 rng(78);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    auto n = 2 + static_cast<Eigen::Index>(rng() % 30);
    auto d = 1 + static_cast<Eigen::Index>(rng() % 6);
    Eigen::MatrixXd x = gaussian(rng, n, d);
    Eigen::VectorXd y = gaussian(rng, n, 1).col(0);
    double lambda = std::pow(10.0, std::uniform_real_distribution<double>(-3, 2)(rng));
    auto fit = fit_ridge(named(x), {"y", y}, lambda);
    Eigen::MatrixXd xc = centered(x);
    Eigen::VectorXd yc = y.array() - y.mean();
    Eigen::MatrixXd a = xc.transpose() * xc + lambda * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd direct = a.fullPivLu().solve(xc.transpose() * yc);
    worst = std::max(worst, (fit.coefficients - direct).cwiseAbs().maxCoeff());
  }
  v.require(worst <= 1e-8, "max deviation " + text::format_real(worst));
  if (v.pass) v.detail = "max deviation " + text::format_real(worst);
  return v;
}

Verdict ols_exactness() {
  Verdict v;
  std::mt19937_64 rng(79);
  double worst_coef = 0.0, worst_orth = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    auto d = 1 + static_cast<Eigen::Index>(rng() % 6);
    auto n = d + 2 + static_cast<Eigen::Index>(rng() % 40);
    Eigen::MatrixXd x = gaussian(rng, n, d);
    Eigen::VectorXd beta = gaussian(rng, d, 1).col(0);
    double intercept = std::normal_distribution<double>(0.0, 5.0)(rng);
    Eigen::VectorXd exact = (x * beta).array() + intercept;
    auto fit = fit_ols(named(x), {"y", exact});
    worst_coef = std::max({worst_coef, (fit.coefficients - beta).cwiseAbs().maxCoeff(), std::abs(fit.intercept - intercept)});

    Eigen::VectorXd y = gaussian(rng, n, 1).col(0);
    auto noisy = fit_ols(named(x), {"y", y});
    Eigen::VectorXd r = y - x * noisy.coefficients - Eigen::VectorXd::Constant(n, noisy.intercept);
    for (Eigen::Index j = 0; j < d; ++j) {
      worst_orth = std::max(worst_orth, std::abs(x.col(j).dot(r)) / (x.col(j).norm() * y.norm()));
    }
    worst_orth = std::max(worst_orth, std::abs(r.sum()) / (std::sqrt(static_cast<double>(n)) * y.norm()));
  }
  v.require(worst_coef <= 1e-8, "coefficient error " + text::format_real(worst_coef));
  v.require(worst_orth <= 1e-8, "relative residual correlation " + text::format_real(worst_orth));
  if (v.pass) {
    v.detail = "max coef error " + text::format_real(worst_coef) + ", max orthogonality " + text::format_real(worst_orth);
  }
  return v;
}

Verdict cleaning_rules() {
  Verdict v;
  std::mt19937_64 rng(80);
  const char* states[] = {"COMPLETED", "FAILED", "RUNNING", "TIMEOUT", "CANCELLED by 0", "OUT_OF_MEMORY", "PENDING"};
  int checked = 0;
  for (int trial = 0; trial < 300 && v.pass; ++trial) {
    std::ostringstream dump;
    dump << "JobID|State|Account|ElapsedRaw|Elapsed|MaxRSS|ReqMem|Submit|NNodes|AveCPUFreq\n";
    const std::size_t n = 3 + rng() % 60;
    std::size_t running = 0;
    std::set<std::size_t> corrupt_lines;
    const bool constant_elapsed = rng() % 4 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::string state = states[rng() % 7];
      const bool is_running = state == "RUNNING";
      running += is_running;
      bool corrupt = false;
      auto maybe = [&](std::string cell, int missing_one_in, int corrupt_one_in) {
        if (missing_one_in && rng() % missing_one_in == 0) return std::string();
        if (corrupt_one_in && rng() % corrupt_one_in == 0) {
          corrupt = true;
          return std::string("#bad#");
        }
        return cell;
      };
      std::string raw = constant_elapsed ? "60" : std::to_string(rng() % 5000);
      std::string elapsed = maybe(format_duration(static_cast<std::int64_t>(rng() % 90000)), 0, 25);
      std::string rss = maybe(std::to_string(1 + rng() % 900) + "M", 12, 0);
      std::string reqmem = maybe(std::to_string(1 + rng() % 8) + (rng() % 2 ? "Gn" : "Gc"), 0, 30);
      std::string submit = maybe("2021-0" + std::to_string(1 + rng() % 9) + "-1" + std::to_string(rng() % 10) + "T0" +
                                     std::to_string(rng() % 10) + ":00:00",
                                 0, 40);
      std::string freq = maybe(std::to_string(1 + rng() % 3) + "." + std::to_string(rng() % 10) + "G", 20, 0);
      if (corrupt && !is_running) corrupt_lines.insert(i + 2);
      dump << i << '|' << state << "|acct" << rng() % 4 << '|' << raw << '|' << elapsed << '|' << rss << '|' << reqmem
           << '|' << submit << "|1|" << freq << '\n';
    }
    std::istringstream in(dump.str());
    std::pair<JobTable, CleaningReport> result;
    try {
      result = clean_stream(in, '|');
    } catch (const NoSurvivingColumns&) {
      continue;
    }
    ++checked;
    const auto& [table, report] = result;
    const std::string where = "trial " + std::to_string(trial) + ": ";
    v.require(report.rows_in == n, where + "rows_in");
    v.require(report.rows_dropped_running == running, where + "running count");
    v.require(report.rows_dropped_unparseable() == corrupt_lines.size(), where + "unparseable count");
    v.require(report.rows_out == report.rows_in - report.rows_dropped_running - report.rows_dropped_unparseable(),
              where + "row accounting");
    v.require(table.rows() == report.rows_out, where + "table rows");
    for (auto s : table.states) v.require(s != JobState::Running, where + "RUNNING row survived");
    std::size_t features = 0;
    for (const auto& c : table.columns) {
      if (!c.feature) continue;
      ++features;
      v.require(std::none_of(c.values.begin(), c.values.end(), is_missing), where + c.name + " has missing cells");
      auto [lo, hi] = std::minmax_element(c.values.begin(), c.values.end());
      v.require(lo != c.values.end() && *lo < *hi, where + c.name + " is constant");
    }
    // Every non-ID header column is either a feature or reported as dropped.
    v.require(features + report.columns_dropped_missing.size() + report.columns_dropped_low_variance.size() == 9,
              where + "column accounting");
    if (constant_elapsed && report.rows_out > 0) {
      const auto& low = report.columns_dropped_low_variance;
      v.require(std::find(low.begin(), low.end(), "ElapsedRaw") != low.end(), where + "constant ElapsedRaw kept");
    }
  }
  v.require(checked >= 250, "too few tables survived cleaning: " + std::to_string(checked));
  if (v.pass) v.detail = std::to_string(checked) + " randomized tables";
  return v;
}

Verdict fold_algebra() {
  Verdict v;
  for (std::size_t n = 5; n <= 100; ++n) {
    for (std::uint64_t seed : {0ull, 1ull, 42ull, 0xdeadbeefull}) {
      auto plan = kfold_split(n, 5, seed);
      const std::string where = "n=" + std::to_string(n) + " seed=" + std::to_string(seed) + ": ";
      std::vector<int> seen(n, 0);
      std::size_t smallest = n, largest = 0;
      for (std::size_t f = 0; f < 5; ++f) {
        auto rows = plan.test_rows(f);
        smallest = std::min(smallest, rows.size());
        largest = std::max(largest, rows.size());
        for (auto r : rows) ++seen[r];
      }
      v.require(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }), where + "folds overlap or miss rows");
      v.require(largest - smallest <= 1, where + "size spread > 1");
      v.require(kfold_split(n, 5, seed).assignments == plan.assignments, where + "not deterministic");
    }
  }
  if (v.pass) v.detail = "n in [5,100], k=5, 4 seeds";
  return v;
}

Verdict metric_oracles() {
  Verdict v;
  auto near = [&](double got, double want, const std::string& what) {
    v.require(std::abs(got - want) <= 1e-12, what + " = " + text::format_real(got) + ", want " + text::format_real(want));
  };
  Eigen::Vector3d y(1, 2, 3);
  near(r_squared(y, Eigen::Vector3d(1, 2, 3)), 1.0, "R^2 perfect");
  near(r_squared(y, Eigen::Vector3d(2, 2, 2)), 0.0, "R^2 mean");
  near(r_squared(y, Eigen::Vector3d(1, 2, 2)), 0.5, "R^2 hand");
  near(regression_accuracy(Eigen::Vector2d(100, 200), Eigen::Vector2d(105, 290), 0.10), 0.5, "accuracy band");
  near(regression_accuracy(y, y, 0.10), 1.0, "accuracy identity");
  near(regression_accuracy(Eigen::VectorXd::Zero(1), Eigen::VectorXd::Constant(1, 0.5), 0.10, 1.0), 1.0,
       "accuracy floor");
  std::vector<bool> labels = {true, true, true, false, false, false, false, false, false, false};
  std::vector<bool> predicted = {true, true, false, true, false, false, false, false, false, false};
  auto m = binary_metrics(labels, predicted);
  near(m.precision, 2.0 / 3.0, "precision");
  near(m.recall, 2.0 / 3.0, "recall");
  near(m.f1, 2.0 / 3.0, "F1");
  near(m.accuracy, 0.8, "label accuracy");
  auto perfect = binary_metrics(labels, labels);
  near(perfect.precision + perfect.recall + perfect.f1 + perfect.accuracy, 4.0, "all-correct metrics");
  near(binary_metrics(labels, std::vector<bool>(10, false)).f1, 0.0, "F1 without positive predictions");
  if (v.pass) v.detail = "12 fixed cases";
  return v;
}

Verdict stay_or_go() {
  Verdict v;
  constexpr double gib = 1024.0 * 1024.0 * 1024.0;
  SubmissionPlan plan;
  plan.attempts.push_back({{gib, 1, 3600}, 10});
  plan.attempts.push_back({{2 * gib, 1, 7200}, 10});
  KillModel half;  // empty bins give 1/2 under alpha = 1
  PricingConfig with_overhead;
  with_overhead.migration_overhead = 3;
  const double cost = expected_cost(plan, half, with_overhead);
  v.require(cost == 13.0, "expected_cost = " + text::format_real(cost));

  PricingConfig unit;
  unit.local_rate = 1;
  auto tr = simulate_resubmission({8 * gib, 7200, 1}, {4 * gib, 1, 100 * 3600.0}, Policy{}, unit, 0.5, 1);
  v.require(tr.total_cost == 3.0 && tr.attempts.size() == 2 && tr.succeeded,
            "hand trace gave cost " + text::format_real(tr.total_cost) + " over " + std::to_string(tr.attempts.size()));

  auto summary = evaluate_policy(sample_jobs(1000, 99), {gib, 1, 600}, Policy{}, unit);
  v.require(summary.success_rate == 1.0, "success rate " + text::format_real(summary.success_rate));
  if (v.pass) v.detail = "cost 13, trace 3 over 2 attempts, success 1.0 over 1000 jobs";
  return v;
}

Verdict graph_contract() {
  Verdict v;
  std::mt19937_64 rng(81);
  const char* accounts[] = {"hpc_a", "hpc_b", "bio", "bio_lab", "cs_ml", "cs_sys", "chem", "geo_x", "geo_y", "astro"};
  const char* names[] = {"train_gpt", "train_cnn", "md_sim", "cfd_sim", "blast", "render", "post_proc"};
  const char* states[] = {"COMPLETED", "FAILED", "TIMEOUT", "OUT_OF_MEMORY", "CANCELLED"};
  std::ostringstream dump;
  dump << "JobID|Account|JobName|State|Submit|ElapsedRaw|MaxRSS|ReqCPUS|Timelimit\n";
  for (int i = 0; i < 1000; ++i) {
    dump << 5000 + i << '|' << accounts[rng() % 10] << '|' << names[rng() % 7] << '|' << states[rng() % 5] << '|'
         << 1609459200 + static_cast<long>(rng() % 5000000) << '|' << 1 + rng() % 200000 << '|' << 1 + rng() % 64000
         << "M|" << (1u << (rng() % 6)) << '|' << format_duration(static_cast<std::int64_t>(60 + rng() % 200000)) << '\n';
  }
  std::istringstream in(dump.str());
  auto table = clean_stream(in, '|').first;
  v.require(table.rows() == 1000, "cleaning dropped rows");
  const std::vector<std::string> features = {"ElapsedRaw", "MaxRSS", "ReqCPUS", "Timelimit"};
  auto g = build_graph(table, features);

  std::set<std::string> job_ids;
  std::map<std::string, const JobNode*> jobs;
  for (const auto& j : g.job_nodes) {
    job_ids.insert(j.id);
    jobs[j.id] = &j;
    for (double e : j.embedding) v.require(e >= 0.0 && e <= 1.0, j.id + " embedding outside [0,1]");
  }
  for (const auto& e : g.user_user_edges) {
    v.require(!job_ids.count(e.src) && !job_ids.count(e.dst), "user-user edge touches a job");
  }
  for (const auto& e : g.user_job_edges) v.require(!job_ids.count(e.user), "job-job edge " + e.user + "-" + e.job);
  for (const auto& u : g.user_nodes) {
    std::vector<std::vector<double>> member;
    for (const auto& id : u.job_ids) member.push_back(jobs.at(id)->embedding);
    // Same summation order as construction, so the recheck is exact.
    std::vector<double> mean(member.front().size(), 0.0);
    for (const auto& e : member) {
      for (std::size_t k = 0; k < e.size(); ++k) mean[k] += e[k];
    }
    for (auto& m : mean) m /= static_cast<double>(member.size());
    v.require(mean == u.embedding, u.id + " embedding differs from the mean of its jobs");
  }

  auto a = fs::temp_directory_path() / "slurmlens_acceptance_graph_a";
  auto b = fs::temp_directory_path() / "slurmlens_acceptance_graph_b";
  fs::remove_all(a);
  fs::remove_all(b);
  export_graph(g, a);
  export_graph(build_graph(table, features), b);
  v.require(slurp(a / "nodes.csv") == slurp(b / "nodes.csv"), "nodes.csv differs on re-export");
  v.require(slurp(a / "edges.csv") == slurp(b / "edges.csv"), "edges.csv differs on re-export");
  fs::remove_all(a);
  fs::remove_all(b);
  if (v.pass) {
    v.detail = std::to_string(g.user_nodes.size()) + " users, " + std::to_string(g.user_user_edges.size()) +
               " user-user edges, " + std::to_string(g.user_job_edges.size()) + " user-job edges";
  }
  return v;
}

Verdict throughput() {
  Verdict v;
  const std::size_t rows = 1000000;
  const fs::path path = fs::temp_directory_path() / "slurmlens_acceptance_1m.txt";
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "JobID|Account|JobName|State|Submit|Start|End|Elapsed|ElapsedRaw|Timelimit|ReqCPUS|AllocCPUS|NCPUS|"
           "ReqNodes|NNodes|ReqMem|MaxRSS|AveRSS|MaxVMSize|AveVMSize|CPUTimeRaw|TotalCPU|UserCPU|SystemCPU|"
           "AveCPUFreq|MaxDiskRead|MaxDiskWrite|AveDiskRead|AveDiskWrite|NTasks\n";
    std::mt19937_64 rng(82);
    const char* states[] = {"COMPLETED", "COMPLETED", "FAILED", "TIMEOUT", "CANCELLED by 1", "OUT_OF_MEMORY", "RUNNING"};
    std::string line;
    for (std::size_t i = 0; i < rows; ++i) {
      std::int64_t submit = 1600000000 + static_cast<std::int64_t>(rng() % 30000000);
      std::int64_t wait = static_cast<std::int64_t>(rng() % 3600);
      std::int64_t elapsed = 1 + static_cast<std::int64_t>(rng() % 172800);
      std::int64_t cpus = std::int64_t{1} << (rng() % 6);
      line.clear();
      line += std::to_string(1000000 + i) + "|acct" + std::to_string(rng() % 50) + "|job" + std::to_string(rng() % 200) +
              '|' + states[rng() % 7] + '|' + std::to_string(submit) + '|' + std::to_string(submit + wait) + '|' +
              std::to_string(submit + wait + elapsed) + '|' + format_duration(elapsed) + '|' + std::to_string(elapsed) +
              '|' + format_duration(elapsed + static_cast<std::int64_t>(rng() % 7200)) + '|' + std::to_string(cpus) +
              '|' + std::to_string(cpus) + '|' + std::to_string(cpus) + "|1|1|" + std::to_string(1 + rng() % 64) +
              "Gn|" + std::to_string(1 + rng() % 60000) + "M|" + std::to_string(1 + rng() % 30000) + "M|" +
              std::to_string(1 + rng() % 90000) + "M|" + std::to_string(1 + rng() % 40000) + "M|" +
              std::to_string(elapsed * cpus) + '|' + format_duration(elapsed * cpus / 2) + '|' +
              format_duration(elapsed * cpus / 3) + '|' + format_duration(static_cast<std::int64_t>(rng() % 600)) +
              '|' + std::to_string(1 + rng() % 3) + "." + std::to_string(rng() % 10) + "G|" +
              std::to_string(rng() % 5000) + "M|" + std::to_string(rng() % 5000) + "M|" +
              std::to_string(rng() % 2000) + "M|" + std::to_string(rng() % 2000) + "M|" +
              std::to_string(1 + rng() % 4) + '\n';
      out << line;
    }
  }
  const auto start = Clock::now();
  auto [table, report] = load_table(path.string());
  const double elapsed = seconds_since(start);
  fs::remove(path);
  v.require(report.rows_in == rows, "rows_in " + std::to_string(report.rows_in));
  v.require(report.rows_out == rows - report.rows_dropped_running - report.rows_dropped_unparseable(),
            "row accounting");
  v.require(table.columns.size() == 29, "expected 29 non-ID columns, got " + std::to_string(table.columns.size()));
  v.require(elapsed < 30.0, "took " + text::format_fixed(elapsed, 2) + " s");
  if (v.pass) {
    v.detail = std::to_string(rows) + " rows x 30 columns in " + text::format_fixed(elapsed, 2) + " s (" +
               std::to_string(report.rows_out) + " kept)";
  }
  return v;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"synthetic headline reproduction", headline_reproduction},
      {"lasso oracle", lasso_oracle},
      {"ridge oracle", ridge_oracle},
      {"OLS exactness", ols_exactness},
      {"cleaning rules", cleaning_rules},
      {"fold algebra", fold_algebra},
      {"metric oracles", metric_oracles},
      {"stay-or-go arithmetic", stay_or_go},
      {"graph contract", graph_contract},
      {"ingest throughput", throughput},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.pass = false;
      v.detail = std::string("exception: ") + e.what();
    }
    failures += v.pass ? 0 : 1;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].first << ": " << v.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
