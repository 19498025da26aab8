#pragma once

// Stay-or-go: expected cost of a local submission plan under a kill
// probability model, a stay/cloud recommender, and a deterministic
// resubmission simulator for evaluating fixed policies.

#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "slurmlens/error.hpp"
#include "slurmlens/evaluation.hpp"
#include "slurmlens/ingest.hpp"
#include "slurmlens/text.hpp"

namespace slurmlens {

inline constexpr double kSecondsPerHour = 3600.0;

struct PricingConfig {
  double local_rate = 0.0;          // per core-hour
  double local_flat_fee = 0.0;      // per submission
  double cloud_rate = 0.0;          // per core-hour
  double migration_overhead = 0.0;  // added once per plan / per migration
  double time_value = 0.0;          // per wall-clock hour spent

  void validate() const {
    for (double v : {local_rate, local_flat_fee, cloud_rate, migration_overhead, time_value}) {
      if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("pricing values must be finite and >= 0");
    }
  }
};

struct AttemptParams {
  double req_mem_bytes = 0.0;
  std::int64_t req_cpus = 1;
  double timelimit_s = 0.0;
};

struct PlannedAttempt {
  AttemptParams params;
  double cost = 0.0;
};

struct SubmissionPlan {
  std::vector<PlannedAttempt> attempts;
};

// Binned empirical kill frequency with Laplace smoothing. Bins are joint over
// floor(log2 memory bytes), floor(log2 cores) and floor(log4 timelimit
// seconds); a missing request gets its own bin (-1).
class KillModel {
 public:
  struct BinKey {
    int mem = -1;
    int cpus = -1;
    int time = -1;
    auto operator<=>(const BinKey&) const = default;
  };

  struct BinCounts {
    std::size_t killed = 0;
    std::size_t total = 0;
  };

  explicit KillModel(double alpha = 1.0) : alpha_(alpha) {
    if (!(alpha > 0.0)) throw ConfigError("Laplace smoothing alpha must be > 0");
  }

  static int log2_bin(double v) {
    if (!std::isfinite(v) || v < 0.0) return -1;
    if (v < 1.0) return 0;
    return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(v))) - 1;
  }

  static BinKey bin_of(const AttemptParams& p) {
    int t = log2_bin(p.timelimit_s);
    return {log2_bin(p.req_mem_bytes), log2_bin(static_cast<double>(p.req_cpus)), t < 0 ? -1 : t / 2};
  }

  void observe(const AttemptParams& p, bool killed) {
    auto& c = bins_[bin_of(p)];
    ++c.total;
    if (killed) ++c.killed;
  }

  void set_counts(const BinKey& key, BinCounts counts) { bins_[key] = counts; }

  double probability(const BinKey& key) const {
    BinCounts c;
    if (auto it = bins_.find(key); it != bins_.end()) c = it->second;
    return (static_cast<double>(c.killed) + alpha_) / (static_cast<double>(c.total) + 2.0 * alpha_);
  }

  double probability(const AttemptParams& p) const { return probability(bin_of(p)); }

  double alpha() const { return alpha_; }
  const std::map<BinKey, BinCounts>& bins() const { return bins_; }

 private:
  double alpha_;
  std::map<BinKey, BinCounts> bins_;
};

// killed = FAILED, TIMEOUT, OUT_OF_MEMORY or CANCELLED. Memory is the effective
// (scope-resolved) request; cores fall back ReqCPUS -> AllocCPUS -> NCPUS -> 1.
inline KillModel fit_kill_model(const JobTable& table, double alpha = 1.0) {
  if (table.rows() == 0) throw EmptyTable();
  KillModel model(alpha);
  std::vector<std::size_t> rows(table.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  auto mem = requested_resource(table, rows, LabelRule::OverRequestMem);
  for (std::size_t i = 0; i < table.rows(); ++i) {
    AttemptParams p;
    p.req_mem_bytes = std::isfinite(mem[i]) ? mem[i] : -1.0;
    p.req_cpus = static_cast<std::int64_t>(detail::first_present(table, i, {"ReqCPUS", "AllocCPUS", "NCPUS"}, 1.0));
    p.timelimit_s = table.value("Timelimit", i).value_or(-1.0);
    model.observe(p, is_killed(table.states[i]));
  }
  return model;
}

// sum_i C_i * P(kill | params_i) + C_A
inline double expected_cost(const SubmissionPlan& plan, const KillModel& model, const PricingConfig& pricing) {
  if (plan.attempts.empty()) throw ConfigError("submission plan has no attempts");
  double sum = 0.0;
  for (const auto& a : plan.attempts) sum += a.cost * model.probability(a.params);
  return sum + pricing.migration_overhead;
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

enum class PolicyKind { BoostLocal, MigrateAfterK, MigrateImmediately };

inline std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::BoostLocal: return "boost-local";
    case PolicyKind::MigrateAfterK: return "migrate-after-k";
    case PolicyKind::MigrateImmediately: return "migrate-immediately";
  }
  return "boost-local";
}

inline PolicyKind parse_policy_kind(std::string_view s) {
  if (text::iequals(s, "boost-local") || text::iequals(s, "BOOST_LOCAL")) return PolicyKind::BoostLocal;
  if (text::iequals(s, "migrate-after-k") || text::iequals(s, "MIGRATE_AFTER_K")) return PolicyKind::MigrateAfterK;
  if (text::iequals(s, "migrate-immediately") || text::iequals(s, "MIGRATE_IMMEDIATELY")) {
    return PolicyKind::MigrateImmediately;
  }
  throw ConfigError("unknown policy '" + std::string(s) + "'");
}

struct Policy {
  PolicyKind kind = PolicyKind::BoostLocal;
  double mem_boost_factor = 2.0;
  double time_boost_factor = 2.0;
  std::optional<int> max_attempts;  // nullopt = unlimited
  int k = 1;                        // local attempts before migrating (MigrateAfterK)

  void validate() const {
    if (!(mem_boost_factor > 1.0) || !(time_boost_factor > 1.0)) throw ConfigError("boost factors must be > 1");
    if (max_attempts && *max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    if (kind == PolicyKind::MigrateAfterK && k < 0) throw ConfigError("policy k must be >= 0");
  }
};

struct Recommendation {
  enum class Choice { Stay, Go };
  Choice choice = Choice::Stay;
  double expected_local = 0.0;
  double expected_cloud = 0.0;
  std::string rationale;
};

inline std::string_view to_string(Recommendation::Choice c) { return c == Recommendation::Choice::Stay ? "STAY" : "GO"; }

// Number of local attempts unrolled for an unlimited boosting policy.
inline constexpr int kRecommendHorizon = 16;

// Local plan: the policy's boost schedule (both dimensions boosted each step)
// up to its attempt budget, each attempt charged for its full timelimit.
inline SubmissionPlan unroll_local_plan(const AttemptParams& params, std::int64_t cores, const PricingConfig& pricing,
                                        const Policy& policy) {
  int attempts = 1;
  switch (policy.kind) {
    case PolicyKind::BoostLocal: attempts = policy.max_attempts.value_or(kRecommendHorizon); break;
    case PolicyKind::MigrateAfterK: attempts = std::max(1, policy.k); break;
    case PolicyKind::MigrateImmediately: attempts = 1; break;
  }
  if (policy.max_attempts) attempts = std::min(attempts, *policy.max_attempts);
  SubmissionPlan plan;
  AttemptParams p = params;
  for (int i = 0; i < attempts; ++i) {
    double hours = p.timelimit_s / kSecondsPerHour;
    double cost = pricing.local_rate * static_cast<double>(cores) * hours + pricing.local_flat_fee +
                  pricing.time_value * hours;
    plan.attempts.push_back({p, cost});
    p.req_mem_bytes *= policy.mem_boost_factor;
    p.timelimit_s *= policy.time_boost_factor;
  }
  return plan;
}

inline Recommendation recommend(const AttemptParams& params, std::int64_t cores, double est_runtime_s,
                                const KillModel& model, const PricingConfig& pricing, const Policy& policy) {
  if (!(est_runtime_s > 0.0)) throw ConfigError("estimated runtime must be > 0");
  if (params.req_cpus < 1 || !(params.timelimit_s > 0.0)) throw ConfigError("attempt needs >= 1 cpu and timelimit > 0");
  pricing.validate();
  policy.validate();
  Recommendation r;
  auto plan = unroll_local_plan(params, cores, pricing, policy);
  r.expected_local = expected_cost(plan, model, pricing);
  double hours = est_runtime_s / kSecondsPerHour;
  r.expected_cloud = pricing.cloud_rate * static_cast<double>(cores) * hours + pricing.migration_overhead +
                     pricing.time_value * hours;
  r.choice = r.expected_local <= r.expected_cloud ? Recommendation::Choice::Stay : Recommendation::Choice::Go;
  r.rationale = std::string(r.choice == Recommendation::Choice::Stay ? "stay local" : "go to cloud") +
                ": expected local cost " + text::format_real(r.expected_local) + " over " +
                std::to_string(plan.attempts.size()) + " planned attempt(s) (first-attempt kill probability " +
                text::format_fixed(model.probability(params), 3) + ") vs expected cloud cost " +
                text::format_real(r.expected_cloud);
  return r;
}

inline nlohmann::json to_json(const Recommendation& r) {
  return {{"choice", to_string(r.choice)},
          {"expected_local", r.expected_local},
          {"expected_cloud", r.expected_cloud},
          {"rationale", r.rationale}};
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct SimJob {
  double true_peak_mem_bytes = 0.0;
  double true_runtime_s = 0.0;
  std::int64_t cores = 1;
};

enum class Platform { Local, Cloud };
enum class Outcome { Completed, OomKilled, TimeoutKilled };

inline std::string_view to_string(Platform p) { return p == Platform::Local ? "LOCAL" : "CLOUD"; }

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Completed: return "COMPLETED";
    case Outcome::OomKilled: return "OUT_OF_MEMORY";
    case Outcome::TimeoutKilled: return "TIMEOUT";
  }
  return "COMPLETED";
}

struct AttemptRecord {
  AttemptParams params;
  Platform platform = Platform::Local;
  Outcome outcome = Outcome::Completed;
  double wall_s = 0.0;
  double cost = 0.0;
};

struct Trajectory {
  std::vector<AttemptRecord> attempts;
  double total_cost = 0.0;
  bool succeeded = false;
  Platform platform_final = Platform::Local;
};

// Guards against unbounded loops when a policy has no attempt limit.
inline constexpr int kSimulationAttemptCap = 100000;

// Deterministic resubmission model:
//   request m < M*            -> OOM kill, charged kill_fraction * min(t, T*)
//   m >= M*, timelimit t < T* -> timeout, charged t
//   otherwise                 -> success, charged T*
// A failed dimension is multiplied by its boost factor. A migration runs once
// in the cloud and always succeeds. `seed` is reserved for stochastic variants.
inline Trajectory simulate_resubmission(const SimJob& job, const AttemptParams& initial, const Policy& policy,
                                        const PricingConfig& pricing, double kill_fraction = 0.5,
                                        [[maybe_unused]] std::uint64_t seed = 0) {
  policy.validate();
  if (!(job.true_peak_mem_bytes > 0.0) || !(job.true_runtime_s > 0.0)) throw ConfigError("SimJob needs M* > 0, T* > 0");
  if (!(initial.req_mem_bytes > 0.0) || !(initial.timelimit_s > 0.0)) {
    throw ConfigError("initial request needs memory > 0 and timelimit > 0");
  }
  const double cores = static_cast<double>(job.cores);
  Trajectory tr;

  auto run_cloud = [&](const AttemptParams& p) {
    double hours = job.true_runtime_s / kSecondsPerHour;
    AttemptRecord rec{p, Platform::Cloud, Outcome::Completed, job.true_runtime_s,
                      pricing.cloud_rate * cores * hours + pricing.migration_overhead + pricing.time_value * hours};
    tr.total_cost += rec.cost;
    tr.attempts.push_back(rec);
    tr.succeeded = true;
    tr.platform_final = Platform::Cloud;
  };

  if (policy.kind == PolicyKind::MigrateImmediately) {
    run_cloud(initial);
    return tr;
  }

  int limit = std::min(policy.max_attempts.value_or(kSimulationAttemptCap), kSimulationAttemptCap);
  AttemptParams p = initial;
  for (int local = 0;; ++local) {
    if (policy.kind == PolicyKind::MigrateAfterK && local >= policy.k) {
      run_cloud(p);
      return tr;
    }
    if (local >= limit) break;
    AttemptRecord rec;
    rec.params = p;
    rec.platform = Platform::Local;
    if (p.req_mem_bytes < job.true_peak_mem_bytes) {
      rec.outcome = Outcome::OomKilled;
      rec.wall_s = kill_fraction * std::min(p.timelimit_s, job.true_runtime_s);
    } else if (p.timelimit_s < job.true_runtime_s) {
      rec.outcome = Outcome::TimeoutKilled;
      rec.wall_s = p.timelimit_s;
    } else {
      rec.outcome = Outcome::Completed;
      rec.wall_s = job.true_runtime_s;
    }
    double hours = rec.wall_s / kSecondsPerHour;
    rec.cost = pricing.local_rate * cores * hours + pricing.local_flat_fee + pricing.time_value * hours;
    tr.total_cost += rec.cost;
    tr.attempts.push_back(rec);
    tr.platform_final = Platform::Local;
    if (rec.outcome == Outcome::Completed) {
      tr.succeeded = true;
      return tr;
    }
    if (rec.outcome == Outcome::OomKilled) p.req_mem_bytes *= policy.mem_boost_factor;
    if (rec.outcome == Outcome::TimeoutKilled) p.timelimit_s *= policy.time_boost_factor;
  }
  tr.succeeded = false;  // attempt limit exceeded
  return tr;
}

struct PolicySummary {
  double mean_cost = 0.0;
  double success_rate = 0.0;
  double mean_attempts = 0.0;
  std::size_t jobs = 0;
};

inline PolicySummary evaluate_policy(const std::vector<SimJob>& jobs, const AttemptParams& initial,
                                     const Policy& policy, const PricingConfig& pricing, double kill_fraction = 0.5) {
  if (jobs.empty()) throw ConfigError("policy evaluation needs at least one job");
  PolicySummary s;
  s.jobs = jobs.size();
  for (const auto& job : jobs) {
    auto tr = simulate_resubmission(job, initial, policy, pricing, kill_fraction);
    s.mean_cost += tr.total_cost;
    s.success_rate += tr.succeeded ? 1.0 : 0.0;
    s.mean_attempts += static_cast<double>(tr.attempts.size());
  }
  auto n = static_cast<double>(jobs.size());
  s.mean_cost /= n;
  s.success_rate /= n;
  s.mean_attempts /= n;
  return s;
}

// Uniform double in [0, 1) from the top 53 bits of the generator.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Log-uniform peaks in [256 MiB, 64 GiB], runtimes in [1 min, 48 h], cores in {1,2,4,8,16}.
inline std::vector<SimJob> sample_jobs(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, unit_uniform(rng)); };
  std::vector<SimJob> jobs;
  jobs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SimJob j;
    j.true_peak_mem_bytes = log_uniform(256.0 * 1024 * 1024, 64.0 * 1024 * 1024 * 1024);
    j.true_runtime_s = log_uniform(60.0, 48.0 * 3600.0);
    j.cores = std::int64_t{1} << static_cast<int>(rng() % 5);
    jobs.push_back(j);
  }
  return jobs;
}

inline nlohmann::json to_json(const Trajectory& t) {
  nlohmann::json attempts = nlohmann::json::array();
  for (const auto& a : t.attempts) {
    attempts.push_back({{"req_mem_bytes", a.params.req_mem_bytes},
                        {"timelimit_s", a.params.timelimit_s},
                        {"platform", to_string(a.platform)},
                        {"outcome", to_string(a.outcome)},
                        {"wall_s", a.wall_s},
                        {"cost", a.cost}});
  }
  return {{"attempts", attempts},
          {"total_cost", t.total_cost},
          {"succeeded", t.succeeded},
          {"platform_final", to_string(t.platform_final)}};
}

inline nlohmann::json to_json(const PolicySummary& s) {
  return {{"mean_cost", s.mean_cost}, {"success_rate", s.success_rate}, {"mean_attempts", s.mean_attempts}, {"jobs", s.jobs}};
}

inline void write_csv(const Trajectory& t, std::ostream& out) {
  out << "attempt,platform,outcome,req_mem_bytes,timelimit_s,wall_s,cost\n";
  for (std::size_t i = 0; i < t.attempts.size(); ++i) {
    const auto& a = t.attempts[i];
    out << i + 1 << ',' << to_string(a.platform) << ',' << to_string(a.outcome) << ','
        << text::format_real(a.params.req_mem_bytes) << ',' << text::format_real(a.params.timelimit_s) << ','
        << text::format_real(a.wall_s) << ',' << text::format_real(a.cost) << '\n';
  }
}

inline void write_csv(const PolicySummary& s, std::ostream& out) {
  out << "jobs,mean_cost,success_rate,mean_attempts\n"
      << s.jobs << ',' << text::format_real(s.mean_cost) << ',' << text::format_real(s.success_rate) << ','
      << text::format_real(s.mean_attempts) << '\n';
}

}  // namespace slurmlens
