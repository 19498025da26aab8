#pragma once

// Command-line front end: argument parsing into a validated Command, and the
// verb implementations that tie the pipeline together.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "slurmlens/config.hpp"
#include "slurmlens/dataset.hpp"
#include "slurmlens/error.hpp"
#include "slurmlens/evaluation.hpp"
#include "slurmlens/feature_ranking.hpp"
#include "slurmlens/graph_export.hpp"
#include "slurmlens/ingest.hpp"
#include "slurmlens/linear_models.hpp"
#include "slurmlens/stay_or_go.hpp"
#include "slurmlens/text.hpp"

namespace slurmlens::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

// `exit_code` is 0 for --help, 2 otherwise; `what()` holds the text to print.
class UsageError : public std::runtime_error {
 public:
  UsageError(const std::string& message, int exit_code = kExitUsage)
      : std::runtime_error(message), exit_code_(exit_code) {}

  int exit_code() const noexcept { return exit_code_; }

 private:
  int exit_code_;
};

enum class Verb { Ingest, Rank, Eval, Advise, Simulate, GraphExport };

inline std::string_view to_string(Verb v) {
  switch (v) {
    case Verb::Ingest: return "ingest";
    case Verb::Rank: return "rank";
    case Verb::Eval: return "eval";
    case Verb::Advise: return "advise";
    case Verb::Simulate: return "simulate";
    case Verb::GraphExport: return "graph-export";
  }
  return "ingest";
}

enum class OutputFormat { Text, Json, Csv };

struct Options {
  std::string input;
  std::string out;
  std::optional<char> delimiter;
  OutputFormat format = OutputFormat::Text;

  // rank / eval
  std::vector<std::string> targets;  // empty = default pair
  std::optional<std::size_t> top;
  std::optional<std::size_t> bottom;
  PredictorPolicy predictors = PredictorPolicy::AllExceptTarget;
  FitMethod method = FitMethod::Ols;
  double lambda = 0.0;

  // advise
  AttemptParams request;
  double est_runtime_s = 0.0;
  std::string history;

  // simulate
  std::string jobs;
  std::optional<std::size_t> trials;

  // graph-export
  std::vector<std::string> features;
};

struct Command {
  Verb verb = Verb::Ingest;
  Options options;
  std::string config_path;
  Config config;  // defaults <- config file <- flags
};

namespace detail {

inline std::string usage_footer() {
  return "Environment: SLURMLENS_CONFIG names a JSON config file; --config overrides it.\n"
         "Exit codes: 0 success, 1 data or model error, 2 usage error.\n";
}

inline double parse_seconds(const std::string& flag, const std::string& value) {
  ParsedDuration d;
  try {
    d = parse_duration(value);
  } catch (const Error&) {
    throw UsageError(flag + ": cannot parse duration '" + value + "'");
  }
  if (!d.seconds || *d.seconds <= 0) throw UsageError(flag + ": expected a positive duration, got '" + value + "'");
  return static_cast<double>(*d.seconds);
}

inline MemoryAmount parse_mem_flag(const std::string& flag, const std::string& value) {
  std::optional<MemoryAmount> m;
  try {
    m = parse_memory(value);
  } catch (const Error&) {
    throw UsageError(flag + ": cannot parse memory '" + value + "'");
  }
  if (!m || m->bytes <= 0) throw UsageError(flag + ": expected a positive memory amount, got '" + value + "'");
  return *m;
}

inline OutputFormat parse_format(const std::string& s) {
  if (s == "text") return OutputFormat::Text;
  if (s == "json") return OutputFormat::Json;
  return OutputFormat::Csv;
}

inline FitMethod parse_method(const std::string& s) {
  if (s == "ridge") return FitMethod::Ridge;
  if (s == "lasso") return FitMethod::Lasso;
  return FitMethod::Ols;
}

}  // namespace detail

// `env_config` is the value of SLURMLENS_CONFIG (nullptr when unset).
inline Command parse_args(const std::vector<std::string>& args, const char* env_config = std::getenv("SLURMLENS_CONFIG")) {
  CLI::App app{"Slurm accounting toolkit: cleaning, feature ranking, evaluation, stay-or-go advice, graph export",
               "slurmlens"};
  app.footer(detail::usage_footer());
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");

  std::string format = "text", out, input, delimiter, policy_flag, method = "ols", mem, timelimit, est_runtime, history,
              jobs, predictors = "all";
  std::vector<std::string> targets, features;
  std::size_t top = 0, bottom = 0, k = 0, trials = 0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  std::int64_t cpus = 1;

  const std::vector<std::string> formats_all = {"text", "json", "csv"};
  const std::vector<std::string> formats_report = {"text", "json"};

  auto* ingest = app.add_subcommand("ingest", "Parse and clean a sacct dump into clean.csv + cleaning_report.json");
  ingest->add_option("--input", input, "sacct dump (pipe or comma delimited)")->required();
  ingest->add_option("--delimiter", delimiter, "field delimiter (default: sniffed from the header)");
  ingest->add_option("--out", out, "output directory")->required();

  auto* rank = app.add_subcommand("rank", "Rank features by mean OLS/ridge/lasso score");
  rank->add_option("--input", input, "sacct dump or cleaned CSV")->required();
  rank->add_option("--target", targets, "target column (repeatable; default CPUTimeRaw and MaxRSS)");
  rank->add_option("--top", top, "number of best features to report")->check(CLI::PositiveNumber);
  rank->add_option("--bottom", bottom, "number of worst features to report")->check(CLI::PositiveNumber);
  rank->add_option("--policy", predictors, "predictor set: all | submit-only")
      ->check(CLI::IsMember({"all", "submit-only"}));
  rank->add_option("--k", k, "folds used to pick penalties")->check(CLI::Range(2, 1000000));
  rank->add_option("--seed", seed, "fold seed");
  rank->add_option("--format", format, "text | json | csv")->check(CLI::IsMember(formats_all));
  rank->add_option("--out", out, "write the report to this file instead of stdout");

  auto* eval = app.add_subcommand("eval", "k-fold evaluation of a linear model");
  eval->add_option("--input", input, "sacct dump or cleaned CSV")->required();
  eval->add_option("--target", targets, "target column (repeatable; default CPUTimeRaw and MaxRSS)");
  eval->add_option("--k", k, "number of folds")->check(CLI::Range(2, 1000000));
  eval->add_option("--seed", seed, "fold seed");
  eval->add_option("--method", method, "ols | ridge | lasso")->check(CLI::IsMember({"ols", "ridge", "lasso"}));
  eval->add_option("--lambda", lambda, "penalty for ridge/lasso")->check(CLI::NonNegativeNumber);
  eval->add_option("--policy", predictors, "predictor set: all | submit-only")
      ->check(CLI::IsMember({"all", "submit-only"}));
  eval->add_option("--format", format, "text | json")->check(CLI::IsMember(formats_report));
  eval->add_option("--out", out, "write the report to this file instead of stdout");

  auto* advise = app.add_subcommand("advise", "Recommend staying local or going to the cloud for one job");
  advise->add_option("--mem", mem, "requested memory, e.g. 8G")->required();
  advise->add_option("--cpus", cpus, "requested cores")->required()->check(CLI::PositiveNumber);
  advise->add_option("--timelimit", timelimit, "requested time limit, e.g. 02:00:00 or seconds")->required();
  advise->add_option("--est-runtime", est_runtime, "estimated runtime, e.g. 01:30:00 or seconds")->required();
  advise->add_option("--history", history, "sacct dump used to fit the kill model (default: uninformed model)");
  advise->add_option("--policy", policy_flag, "boost-local | migrate-after-k | migrate-immediately");
  advise->add_option("--format", format, "text | json")->check(CLI::IsMember(formats_report));
  advise->add_option("--out", out, "write the recommendation to this file instead of stdout");

  auto* simulate = app.add_subcommand("simulate", "Evaluate a resubmission policy on a set of jobs");
  simulate->add_option("--jobs", jobs, "sacct dump with COMPLETED jobs (MaxRSS, elapsed time, cores)");
  simulate->add_option("--policy", policy_flag, "boost-local | migrate-after-k | migrate-immediately");
  simulate->add_option("--trials", trials, "synthetic jobs, or a bootstrap sample size with --jobs")
      ->check(CLI::PositiveNumber);
  simulate->add_option("--mem", mem, "initial memory request (default from config)");
  simulate->add_option("--timelimit", timelimit, "initial time limit (default from config)");
  simulate->add_option("--seed", seed, "sampling seed");
  simulate->add_option("--format", format, "text | json | csv")->check(CLI::IsMember(formats_all));
  simulate->add_option("--out", out, "write the summary to this file instead of stdout");

  auto* graph = app.add_subcommand("graph-export", "Build the user-job graph and write nodes.csv + edges.csv");
  graph->add_option("--input", input, "sacct dump or cleaned CSV")->required();
  graph->add_option("--features", features, "embedding columns (default: every numeric feature)")->delimiter(',');
  graph->add_option("--out", out, "output directory")->required();

  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("slurmlens");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::ostringstream help, ignored;
    app.exit(e, help, ignored);
    throw UsageError(help.str(), kExitOk);
  } catch (const CLI::CallForAllHelp& e) {
    std::ostringstream help, ignored;
    app.exit(e, help, ignored);
    throw UsageError(help.str(), kExitOk);
  } catch (const CLI::ParseError& e) {
    throw UsageError(std::string(e.what()) + "\nRun with --help for usage.");
  }

  auto chosen = app.get_subcommands();
  if (chosen.empty()) throw UsageError(app.help());

  Command cmd;
  const auto* sub = chosen.front();
  const std::string name = sub->get_name();
  if (name == "ingest") cmd.verb = Verb::Ingest;
  if (name == "rank") cmd.verb = Verb::Rank;
  if (name == "eval") cmd.verb = Verb::Eval;
  if (name == "advise") cmd.verb = Verb::Advise;
  if (name == "simulate") cmd.verb = Verb::Simulate;
  if (name == "graph-export") cmd.verb = Verb::GraphExport;

  cmd.config_path = !config_path.empty() ? config_path : (env_config != nullptr ? env_config : "");
  try {
    if (!cmd.config_path.empty()) cmd.config = load_config(cmd.config_path);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }

  auto given = [&](const char* flag) {
    const auto* opt = sub->get_option_no_throw(flag);
    return opt != nullptr && opt->count() > 0;
  };
  auto& o = cmd.options;
  auto& c = cmd.config;
  o.input = input;
  o.out = out;
  o.format = detail::parse_format(format);
  o.targets = targets;
  o.features = features;
  o.predictors = predictors == "submit-only" ? PredictorPolicy::SubmissionTimeOnly : PredictorPolicy::AllExceptTarget;
  o.method = detail::parse_method(method);
  o.lambda = lambda;
  if (given("--delimiter")) {
    if (delimiter == "\\t" || delimiter == "tab") delimiter = "\t";
    if (delimiter.size() != 1) throw UsageError("--delimiter must be a single character");
    o.delimiter = delimiter.front();
  }
  if (given("--top")) o.top = top;
  if (given("--bottom")) o.bottom = bottom;
  if (given("--k")) c.eval.k = k;
  if (given("--seed")) {
    c.eval.seed = seed;
    c.simulate.seed = seed;
  }
  if (given("--trials")) o.trials = trials;
  if (given("--policy") && (cmd.verb == Verb::Advise || cmd.verb == Verb::Simulate)) {
    try {
      c.policy.kind = parse_policy_kind(policy_flag);
    } catch (const ConfigError& e) {
      throw UsageError(std::string("--policy: ") + e.what());
    }
  }
  if (o.method != FitMethod::Ols && !given("--lambda") && cmd.verb == Verb::Eval) {
    throw UsageError("--method " + method + " needs --lambda");
  }

  if (cmd.verb == Verb::Advise) {
    auto m = detail::parse_mem_flag("--mem", mem);
    o.request.req_cpus = cpus;
    o.request.req_mem_bytes =
        static_cast<double>(m.bytes) * (m.scope == MemoryScope::PerCore ? static_cast<double>(cpus) : 1.0);
    o.request.timelimit_s = detail::parse_seconds("--timelimit", timelimit);
    o.est_runtime_s = detail::parse_seconds("--est-runtime", est_runtime);
    o.history = history;
  }
  if (cmd.verb == Verb::Simulate) {
    o.jobs = jobs;
    if (given("--mem")) c.simulate.initial_mem_bytes = static_cast<double>(detail::parse_mem_flag("--mem", mem).bytes);
    if (given("--timelimit")) c.simulate.initial_timelimit_s = detail::parse_seconds("--timelimit", timelimit);
    if (!(c.simulate.initial_mem_bytes > 0.0) || !(c.simulate.initial_timelimit_s > 0.0)) {
      throw UsageError("initial memory and time limit must be > 0");
    }
  }
  try {
    c.policy.validate();
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  return cmd;
}

namespace detail {

inline std::pair<JobTable, CleaningReport> load(const Command& cmd, const std::string& path) {
  return load_table(path, cmd.options.delimiter, cmd.config.cleaning);
}

inline bool same_file(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::error_code ec;
  return std::filesystem::exists(a, ec) && std::filesystem::exists(b, ec) && std::filesystem::equivalent(a, b, ec);
}

// Report sink: the --out file when given, otherwise `fallback`.
class Sink {
 public:
  Sink(const Command& cmd, std::ostream& fallback) : stream_(&fallback) {
    if (cmd.options.out.empty()) return;
    if (same_file(cmd.options.out, cmd.options.input) || same_file(cmd.options.out, cmd.options.jobs) ||
        same_file(cmd.options.out, cmd.options.history)) {
      throw IoFailure("refusing to overwrite input file '" + cmd.options.out + "'");
    }
    file_.open(cmd.options.out, std::ios::binary | std::ios::trunc);
    if (!file_) throw IoFailure("cannot write '" + cmd.options.out + "'");
    stream_ = &file_;
  }

  std::ostream& stream() { return *stream_; }

  void close() {
    stream_->flush();
    if (!*stream_) throw IoFailure("failed writing report");
  }

 private:
  std::ofstream file_;
  std::ostream* stream_;
};

inline std::vector<std::string> resolve_targets(const Command& cmd, const JobTable& table, std::ostream& err) {
  if (!cmd.options.targets.empty()) return cmd.options.targets;
  std::vector<std::string> out;
  for (const char* name : {"CPUTimeRaw", "MaxRSS"}) {
    const auto* col = table.find(name);
    if (col != nullptr && col->feature) {
      out.emplace_back(name);
    } else {
      err << "note: default target " << name << " is not an available feature; skipped\n";
    }
  }
  if (out.empty()) throw UnknownTarget("CPUTimeRaw");
  return out;
}

inline int run_ingest(const Command& cmd, std::ostream& out) {
  namespace fs = std::filesystem;
  const fs::path dir = cmd.options.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create '" + dir.string() + "': " + ec.message());
  const auto csv_path = dir / "clean.csv";
  const auto report_path = dir / "cleaning_report.json";
  if (same_file(csv_path, cmd.options.input) || same_file(report_path, cmd.options.input)) {
    throw IoFailure("refusing to overwrite the input file");
  }

  auto [table, report] = load(cmd, cmd.options.input);
  std::ofstream csv(csv_path, std::ios::binary | std::ios::trunc);
  if (!csv) throw IoFailure("cannot write '" + csv_path.string() + "'");
  write_clean_csv(table, csv, report);
  std::ofstream js(report_path, std::ios::binary | std::ios::trunc);
  if (!js) throw IoFailure("cannot write '" + report_path.string() + "'");
  js << to_json(report).dump(2) << '\n';
  csv.flush();
  js.flush();
  if (!csv || !js) throw IoFailure("failed writing outputs under '" + dir.string() + "'");

  out << "rows_in=" << report.rows_in << " rows_out=" << report.rows_out
      << " rows_dropped_running=" << report.rows_dropped_running
      << " columns_dropped_missing=" << report.columns_dropped_missing.size()
      << " columns_dropped_low_variance=" << report.columns_dropped_low_variance.size()
      << " coercion_failures=" << report.coercion_failures.size() << '\n';
  out << "wrote " << csv_path.string() << " and " << report_path.string() << '\n';
  return kExitOk;
}

inline int run_rank(const Command& cmd, std::ostream& out, std::ostream& err) {
  auto [table, report] = load(cmd, cmd.options.input);
  auto targets = resolve_targets(cmd, table, err);
  Sink sink(cmd, out);
  auto& os = sink.stream();
  nlohmann::json all = nlohmann::json::array();
  bool first = true;
  for (const auto& target : targets) {
    auto design = build_matrix(table, target, cmd.options.predictors);
    const auto d = design.features.cols();
    RankingOptions options;
    options.lambda_grid = cmd.config.models.lambda_grid;
    options.folds = cmd.config.eval.k;
    options.seed = cmd.config.eval.seed;
    options.solver = cmd.config.models.solver;
    options.top_k = cmd.options.top.value_or(std::min<std::size_t>(5, d / 2));
    options.bottom_k = cmd.options.bottom.value_or(std::min<std::size_t>(5, d - options.top_k));
    auto result = rank_features(design.features, design.target, options);
    const double ridge_lambda = result.fits[1].lambda;
    const double lasso_lambda = result.fits[2].lambda;

    switch (cmd.options.format) {
      case OutputFormat::Text:
        if (!first) os << '\n';
        os << format_text(result.report);
        os << "Penalties chosen by " << options.folds << "-fold CV: ridge lambda=" << text::format_real(ridge_lambda)
           << ", lasso lambda=" << text::format_real(lasso_lambda) << '\n';
        if (!result.ols_rank_deficient_columns.empty()) {
          os << "Note: OLS design is rank deficient (";
          for (std::size_t i = 0; i < result.ols_rank_deficient_columns.size(); ++i) {
            os << (i ? ", " : "") << result.ols_rank_deficient_columns[i];
          }
          os << "); ridge with the smallest grid lambda was used as the OLS scorer.\n";
        }
        break;
      case OutputFormat::Csv:
        if (!first) os << '\n';
        if (targets.size() > 1) os << "# target " << target << '\n';
        write_csv(result.report, os);
        break;
      case OutputFormat::Json: {
        auto j = to_json(result.report);
        j["ridge_lambda"] = ridge_lambda;
        j["lasso_lambda"] = lasso_lambda;
        j["ols_rank_deficient_columns"] = result.ols_rank_deficient_columns;
        j["rows"] = design.features.rows();
        all.push_back(std::move(j));
        break;
      }
    }
    first = false;
  }
  if (cmd.options.format == OutputFormat::Json) os << all.dump(2) << '\n';
  sink.close();
  return kExitOk;
}

// Drops columns that make the full design rank deficient (e.g. Elapsed next to
// Start and End) so that OLS can be fit; returns the dropped names.
inline std::vector<std::string> drop_dependent_columns(Design& design) {
  std::vector<std::string> dropped;
  while (design.features.cols() > 0) {
    try {
      fit_ols(standardize(design.features).first, design.target);
      return dropped;
    } catch (const RankDeficient& e) {
      std::vector<std::string> keep_names;
      std::vector<Eigen::Index> keep;
      const auto& names = design.features.column_names();
      for (std::size_t j = 0; j < names.size(); ++j) {
        if (std::find(e.columns().begin(), e.columns().end(), names[j]) == e.columns().end()) {
          keep_names.push_back(names[j]);
          keep.push_back(static_cast<Eigen::Index>(j));
        }
      }
      if (keep.size() == names.size()) throw;
      dropped.insert(dropped.end(), e.columns().begin(), e.columns().end());
      Eigen::MatrixXd values = design.features.values()(Eigen::all, keep);
      design.features = FeatureMatrix(std::move(keep_names), std::move(values));
    } catch (const InsufficientRows&) {
      return dropped;
    }
  }
  return dropped;
}

inline int run_eval(const Command& cmd, std::ostream& out, std::ostream& err) {
  auto [table, report] = load(cmd, cmd.options.input);
  auto targets = resolve_targets(cmd, table, err);
  Sink sink(cmd, out);
  auto& os = sink.stream();
  nlohmann::json all = nlohmann::json::array();
  const auto& ec = cmd.config.eval;
  std::string model = cmd.options.method == FitMethod::Ols     ? "LR"
                      : cmd.options.method == FitMethod::Ridge ? "Ridge"
                                                               : "Lasso";
  bool first = true;
  for (const auto& target : targets) {
    auto design = build_matrix(table, target, cmd.options.predictors);
    std::vector<std::string> dropped;
    if (cmd.options.method == FitMethod::Ols) dropped = drop_dependent_columns(design);
    auto plan = kfold_split(design.features.rows(), ec.k, ec.seed);
    EvalOptions options;
    options.rel_tol = ec.rel_tol;
    const auto* target_column = table.find(target);
    const bool bytes = target_column != nullptr &&
                       (target_column->kind == ColumnKind::Memory || target_column->kind == ColumnKind::ReqMem);
    options.abs_floor = ec.abs_floor.value_or(bytes ? 1024.0 * 1024.0 : 1.0);
    options.solver = cmd.config.models.solver;
    if (ec.label_rule == "auto") {
      if (auto rule = label_rule_for_target(target)) {
        options.thresholds = requested_resource(table, design.source_rows, *rule);
      }
    }
    auto cv = cross_validate(design.features, design.target, cmd.options.method, cmd.options.lambda, plan, options);
    if (cmd.options.format == OutputFormat::Json) {
      auto j = to_json(cv);
      j["target"] = target;
      j["k"] = ec.k;
      j["seed"] = ec.seed;
      j["rows"] = design.features.rows();
      j["method"] = std::string(to_string(cmd.options.method));
      j["lambda"] = cmd.options.lambda;
      j["rel_tol"] = ec.rel_tol;
      j["dropped_dependent_columns"] = dropped;
      all.push_back(std::move(j));
    } else {
      if (!first) os << '\n';
      os << "Target: " << target << " (" << design.features.rows() << " rows, " << design.features.cols()
         << " predictors, k=" << ec.k << ", seed=" << ec.seed << ")\n";
      if (!dropped.empty()) {
        os << "Dropped linearly dependent predictors:";
        for (const auto& name : dropped) os << ' ' << name;
        os << '\n';
      }
      os << format_results_table(cv, model, ec.rel_tol);
      for (const auto& f : cv.folds) {
        if (!f.ok) os << "fold " << f.fold << " failed: " << f.error << '\n';
      }
    }
    first = false;
  }
  if (cmd.options.format == OutputFormat::Json) os << all.dump(2) << '\n';
  sink.close();
  return kExitOk;
}

inline int run_advise(const Command& cmd, std::ostream& out, std::ostream& err) {
  KillModel model(cmd.config.simulate.kill_model_alpha);
  if (!cmd.options.history.empty()) {
    auto [table, report] = load(cmd, cmd.options.history);
    model = fit_kill_model(table, cmd.config.simulate.kill_model_alpha);
  }
  const auto& req = cmd.options.request;
  auto r = recommend(req, req.req_cpus, cmd.options.est_runtime_s, model, cmd.config.pricing, cmd.config.policy);
  Sink sink(cmd, out);
  auto& os = sink.stream();
  const auto& pr = cmd.config.pricing;
  const bool unpriced = pr.local_rate == 0.0 && pr.local_flat_fee == 0.0 && pr.cloud_rate == 0.0 &&
                        pr.migration_overhead == 0.0 && pr.time_value == 0.0;
  if (unpriced) err << "note: every pricing value is 0; set pricing.* in the config file\n";
  if (cmd.options.format == OutputFormat::Json) {
    auto j = to_json(r);
    j["policy"] = std::string(to_string(cmd.config.policy.kind));
    j["kill_probability"] = model.probability(req);
    os << j.dump(2) << '\n';
  } else {
    os << "Recommendation: " << to_string(r.choice) << '\n'
       << "Expected local cost: " << text::format_real(r.expected_local) << '\n'
       << "Expected cloud cost: " << text::format_real(r.expected_cloud) << '\n'
       << "Policy: " << to_string(cmd.config.policy.kind) << '\n'
       << r.rationale << '\n';
  }
  sink.close();
  return kExitOk;
}

// Completed jobs with a known peak memory and runtime.
inline std::vector<SimJob> jobs_from_table(const JobTable& table) {
  std::vector<SimJob> jobs;
  for (std::size_t i = 0; i < table.rows(); ++i) {
    if (table.states[i] != JobState::Completed) continue;
    auto mem = table.value("MaxRSS", i);
    auto runtime = table.value("ElapsedRaw", i);
    if (!runtime) runtime = table.value("Elapsed", i);
    if (!mem || !runtime || !(*mem > 0.0) || !(*runtime > 0.0)) continue;
    SimJob job;
    job.true_peak_mem_bytes = *mem;
    job.true_runtime_s = *runtime;
    job.cores = std::max<std::int64_t>(
        1, static_cast<std::int64_t>(slurmlens::detail::first_present(table, i, {"AllocCPUS", "NCPUS", "ReqCPUS"}, 1.0)));
    jobs.push_back(job);
  }
  if (jobs.empty()) throw Error("no COMPLETED jobs with MaxRSS and elapsed time in the job file");
  return jobs;
}

inline int run_simulate(const Command& cmd, std::ostream& out) {
  const auto& sc = cmd.config.simulate;
  std::vector<SimJob> jobs;
  if (cmd.options.jobs.empty()) {
    jobs = sample_jobs(cmd.options.trials.value_or(1000), sc.seed);
  } else {
    auto [table, report] = load(cmd, cmd.options.jobs);
    jobs = jobs_from_table(table);
    if (cmd.options.trials) {
      std::mt19937_64 rng(sc.seed);
      std::vector<SimJob> sample;
      for (std::size_t i = 0; i < *cmd.options.trials; ++i) sample.push_back(jobs[uniform_below(rng, jobs.size())]);
      jobs = std::move(sample);
    }
  }
  AttemptParams initial;
  initial.req_mem_bytes = sc.initial_mem_bytes;
  initial.timelimit_s = sc.initial_timelimit_s;
  auto summary = evaluate_policy(jobs, initial, cmd.config.policy, cmd.config.pricing, sc.kill_fraction);

  Sink sink(cmd, out);
  auto& os = sink.stream();
  switch (cmd.options.format) {
    case OutputFormat::Json: {
      auto j = to_json(summary);
      j["policy"] = std::string(to_string(cmd.config.policy.kind));
      os << j.dump(2) << '\n';
      break;
    }
    case OutputFormat::Csv: write_csv(summary, os); break;
    case OutputFormat::Text:
      os << "Policy: " << to_string(cmd.config.policy.kind) << '\n'
         << "Jobs: " << summary.jobs << '\n'
         << "Mean cost: " << text::format_real(summary.mean_cost) << '\n'
         << "Success rate: " << text::format_fixed(summary.success_rate, 4) << '\n'
         << "Mean attempts: " << text::format_fixed(summary.mean_attempts, 4) << '\n';
      break;
  }
  sink.close();
  return kExitOk;
}

inline int run_graph_export(const Command& cmd, std::ostream& out) {
  auto [table, report] = load(cmd, cmd.options.input);
  auto features = !cmd.options.features.empty() ? cmd.options.features : cmd.config.graph_features;
  if (features.empty()) {
    for (const auto& c : table.columns) {
      if (!c.feature || c.kind == ColumnKind::Categorical || c.kind == ColumnKind::State) continue;
      if (std::none_of(c.values.begin(), c.values.end(), [](double v) { return is_missing(v); })) {
        features.push_back(c.name);
      }
    }
  }
  auto bundle = build_graph(table, features, cmd.config.graph);
  namespace fs = std::filesystem;
  for (const char* file : {"nodes.csv", "edges.csv"}) {
    if (same_file(fs::path(cmd.options.out) / file, cmd.options.input)) {
      throw IoFailure("refusing to overwrite the input file");
    }
  }
  export_graph(bundle, cmd.options.out);
  out << "users=" << bundle.user_nodes.size() << " jobs=" << bundle.job_nodes.size()
      << " user_user_edges=" << bundle.user_user_edges.size() << " user_job_edges=" << bundle.user_job_edges.size()
      << " embedding_dim=" << bundle.embedding_columns.size() << '\n';
  return kExitOk;
}

}  // namespace detail

inline int run(const Command& cmd, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    switch (cmd.verb) {
      case Verb::Ingest: return detail::run_ingest(cmd, out);
      case Verb::Rank: return detail::run_rank(cmd, out, err);
      case Verb::Eval: return detail::run_eval(cmd, out, err);
      case Verb::Advise: return detail::run_advise(cmd, out, err);
      case Verb::Simulate: return detail::run_simulate(cmd, out);
      case Verb::GraphExport: return detail::run_graph_export(cmd, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitOk;
}

// Full entry point: parse, then run. Help goes to `out`, usage errors to `err`.
inline int main_entry(const std::vector<std::string>& args, std::ostream& out = std::cout,
                      std::ostream& err = std::cerr) {
  Command cmd;
  try {
    cmd = parse_args(args);
  } catch (const UsageError& e) {
    (e.exit_code() == kExitOk ? out : err) << e.what();
    std::string_view msg = e.what();
    if (!msg.empty() && msg.back() != '\n') (e.exit_code() == kExitOk ? out : err) << '\n';
    return e.exit_code();
  }
  return run(cmd, out, err);
}

}  // namespace slurmlens::cli
