#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "slurmlens/cli.hpp"

using namespace slurmlens;
using namespace slurmlens::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kSample = fs::path(SLURMLENS_SOURCE_DIR) / "data" / "sample_sacct.txt";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("slurmlens_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code = main_entry(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(ParseArgs, RankCommand) {
  auto cmd = parse_args({"rank", "--input", "clean.csv", "--target", "CPUTimeRaw", "--top", "5"}, nullptr);
  EXPECT_EQ(cmd.verb, Verb::Rank);
  EXPECT_EQ(cmd.options.targets, std::vector<std::string>{"CPUTimeRaw"});
  EXPECT_EQ(cmd.options.top, 5u);
  EXPECT_FALSE(cmd.options.bottom);
  EXPECT_EQ(cmd.options.input, "clean.csv");
}

TEST(ParseArgs, UnknownFlagIsUsageError) {
  try {
    parse_args({"rank", "--input", "x", "--bogus"}, nullptr);
    FAIL() << "expected UsageError";
  } catch (const UsageError& e) {
    EXPECT_EQ(e.exit_code(), kExitUsage);
    EXPECT_NE(std::string(e.what()).find("--bogus"), std::string::npos);
  }
  EXPECT_THROW(parse_args({"rank", "--bogus"}, nullptr), UsageError);
}

TEST(ParseArgs, NoVerbPrintsUsageAndExitsTwo) {
  auto r = invoke({});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("graph-export"), std::string::npos);
  EXPECT_TRUE(r.out.empty());
}

TEST(ParseArgs, HelpExitsZeroWithoutSideEffects) {
  auto dir = scratch("help");
  auto r = invoke({"ingest", "--help"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_NE(r.out.find("--delimiter"), std::string::npos);
  EXPECT_EQ(invoke({"--help"}).code, kExitOk);
  EXPECT_TRUE(fs::is_empty(dir));
}

TEST(ParseArgs, AdviseValidatesUpFront) {
  auto cmd = parse_args({"advise", "--mem", "2Gc", "--cpus", "4", "--timelimit", "01:00:00", "--est-runtime", "1800"},
                        nullptr);
  EXPECT_DOUBLE_EQ(cmd.options.request.req_mem_bytes, 8.0 * 1024 * 1024 * 1024);
  EXPECT_DOUBLE_EQ(cmd.options.request.timelimit_s, 3600.0);
  EXPECT_DOUBLE_EQ(cmd.options.est_runtime_s, 1800.0);
  EXPECT_THROW(parse_args({"advise", "--mem", "lots", "--cpus", "1", "--timelimit", "60", "--est-runtime", "60"}, nullptr),
               UsageError);
  EXPECT_THROW(parse_args({"advise", "--mem", "1G", "--cpus", "1", "--timelimit", "60", "--est-runtime", "0"}, nullptr),
               UsageError);
  EXPECT_THROW(parse_args({"advise", "--mem", "1G", "--cpus", "0", "--timelimit", "60", "--est-runtime", "6"}, nullptr),
               UsageError);
  EXPECT_THROW(parse_args({"eval", "--input", "x", "--method", "ridge"}, nullptr), UsageError);
}

TEST(ParseArgs, ConfigPrecedence) {
  auto dir = scratch("config");
  auto env = dir / "env.json";
  auto flag = dir / "flag.json";
  std::ofstream(env) << R"({"eval": {"k": 3, "seed": 5}})";
  std::ofstream(flag) << R"({"eval": {"k": 7, "seed": 9}})";
  auto from_env = parse_args({"eval", "--input", "x"}, env.c_str());
  EXPECT_EQ(from_env.config.eval.k, 3u);
  auto from_flag = parse_args({"--config", flag.string(), "eval", "--input", "x"}, env.c_str());
  EXPECT_EQ(from_flag.config.eval.k, 7u);
  auto overridden = parse_args({"--config", flag.string(), "eval", "--input", "x", "--k", "4"}, env.c_str());
  EXPECT_EQ(overridden.config.eval.k, 4u);
  EXPECT_EQ(overridden.config.eval.seed, 9u);
  std::ofstream(flag) << R"({"eval": {"kk": 7}})";
  EXPECT_THROW(parse_args({"--config", flag.string(), "eval", "--input", "x"}, nullptr), UsageError);
}

TEST(Run, IngestWritesCleanCsvAndReport) {
  auto dir = scratch("ingest");
  auto r = invoke({"ingest", "--input", kSample.string(), "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("rows_in=300 rows_out=297 rows_dropped_running=3"), std::string::npos) << r.out;
  auto report = nlohmann::json::parse(slurp(dir / "cleaning_report.json"));
  EXPECT_EQ(report["rows_in"], 300);
  EXPECT_EQ(report["rows_out"], 297);
  auto csv = slurp(dir / "clean.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 298);

  // The cleaned CSV is itself valid input.
  auto again = scratch("ingest_again");
  EXPECT_EQ(invoke({"ingest", "--input", (dir / "clean.csv").string(), "--out", again.string()}).code, kExitOk);
}

TEST(Run, UnknownTargetExitsOneNamingTheColumn) {
  auto r = invoke({"rank", "--input", kSample.string(), "--target", "NoSuchThing"});
  EXPECT_EQ(r.code, kExitDataError);
  EXPECT_NE(r.err.find("NoSuchThing"), std::string::npos);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Run, MissingInputFileExitsOne) {
  auto r = invoke({"ingest", "--input", "/nonexistent/sacct.txt", "--out", scratch("missing").string()});
  EXPECT_EQ(r.code, kExitDataError);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
}

TEST(Run, EvalPrintsResultsTable) {
  auto r = invoke({"eval", "--input", kSample.string(), "--target", "CPUTimeRaw"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(r.out.rfind("Target: CPUTimeRaw (297 rows, ", 0), 0u) << r.out;
  EXPECT_NE(r.out.find("k=5, seed=42)\n"), std::string::npos);
  EXPECT_NE(r.out.find("Model           | Accuracy(%) | F1(%) | R squared (%)\n"), std::string::npos);
  EXPECT_NE(r.out.find("\nLR              | "), std::string::npos);
  EXPECT_NE(r.out.find("\nLR with k-fold  | "), std::string::npos);
  EXPECT_EQ(r.out.find("failed"), std::string::npos) << r.out;
}

TEST(Run, RankTextCsvJson) {
  auto text = invoke({"rank", "--input", kSample.string(), "--target", "MaxRSS", "--top", "3", "--bottom", "3"});
  ASSERT_EQ(text.code, kExitOk) << text.err;
  EXPECT_EQ(text.out.rfind("Feature ranking scores for best features for predicting MaxRSS\n", 0), 0u);
  EXPECT_NE(text.out.find("Penalties chosen by 5-fold CV"), std::string::npos);

  auto csv = invoke({"rank", "--input", kSample.string(), "--target", "MaxRSS", "--format", "csv"});
  ASSERT_EQ(csv.code, kExitOk) << csv.err;
  EXPECT_EQ(csv.out.rfind("feature,ols,ridge,lasso,mean\n", 0), 0u);

  auto json = invoke({"rank", "--input", kSample.string(), "--format", "json"});
  ASSERT_EQ(json.code, kExitOk) << json.err;
  auto j = nlohmann::json::parse(json.out);
  ASSERT_EQ(j.size(), 2u);
  EXPECT_EQ(j[0]["target"], "CPUTimeRaw");
  EXPECT_EQ(j[1]["target"], "MaxRSS");
}

TEST(Run, AdviseAndSimulate) {
  auto dir = scratch("advise");
  auto config = dir / "pricing.json";
  std::ofstream(config) << R"({"pricing": {"local_rate": 0.01, "cloud_rate": 0.05, "migration_overhead": 1}})";
  auto advise = invoke({"--config", config.string(), "advise", "--mem", "4G", "--cpus", "2", "--timelimit", "02:00:00",
                        "--est-runtime", "01:00:00", "--history", kSample.string(), "--format", "json"});
  ASSERT_EQ(advise.code, kExitOk) << advise.err;
  auto j = nlohmann::json::parse(advise.out);
  EXPECT_TRUE(j["choice"] == "STAY" || j["choice"] == "GO");
  EXPECT_GT(j["expected_cloud"].get<double>(), 1.0);

  auto unpriced = invoke({"advise", "--mem", "4G", "--cpus", "2", "--timelimit", "60", "--est-runtime", "60"});
  EXPECT_EQ(unpriced.code, kExitOk);
  EXPECT_NE(unpriced.err.find("pricing"), std::string::npos);

  auto sim = invoke({"simulate", "--trials", "200", "--format", "csv"});
  ASSERT_EQ(sim.code, kExitOk) << sim.err;
  EXPECT_EQ(sim.out.rfind("jobs,mean_cost,success_rate,mean_attempts\n200,", 0), 0u);

  auto from_jobs = invoke({"simulate", "--jobs", kSample.string(), "--policy", "migrate-immediately", "--format", "json"});
  ASSERT_EQ(from_jobs.code, kExitOk) << from_jobs.err;
  EXPECT_EQ(nlohmann::json::parse(from_jobs.out)["mean_attempts"], 1.0);
}

TEST(Run, GraphExport) {
  auto dir = scratch("graph");
  auto r = invoke({"graph-export", "--input", kSample.string(), "--out", dir.string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("jobs=297"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "nodes.csv"));
  EXPECT_TRUE(fs::exists(dir / "edges.csv"));
}

TEST(Run, PropertyDeterministicAndInputsUntouched) {
  const auto before = slurp(kSample);
  const auto stamp = fs::last_write_time(kSample);
  auto a = scratch("det_a");
  auto b = scratch("det_b");
  for (const auto& dir : {a, b}) {
    ASSERT_EQ(invoke({"ingest", "--input", kSample.string(), "--out", dir.string()}).code, kExitOk);
    ASSERT_EQ(invoke({"graph-export", "--input", kSample.string(), "--out", (dir / "g").string()}).code, kExitOk);
    ASSERT_EQ(invoke({"rank", "--input", kSample.string(), "--format", "csv", "--out", (dir / "rank.csv").string()}).code,
              kExitOk);
    ASSERT_EQ(invoke({"eval", "--input", kSample.string(), "--format", "json", "--out", (dir / "eval.json").string()}).code,
              kExitOk);
  }
  for (const char* file : {"clean.csv", "cleaning_report.json", "g/nodes.csv", "g/edges.csv", "rank.csv", "eval.json"}) {
    EXPECT_EQ(slurp(a / file), slurp(b / file)) << file;
  }
  EXPECT_EQ(slurp(kSample), before);
  EXPECT_EQ(fs::last_write_time(kSample), stamp);

  auto r = invoke({"rank", "--input", kSample.string(), "--out", kSample.string()});
  EXPECT_EQ(r.code, kExitDataError);
  EXPECT_EQ(slurp(kSample), before);
}
