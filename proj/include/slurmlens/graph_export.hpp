#pragma once

// User-job heterogeneous graph: job nodes carry min-max normalized feature
// rows, user nodes (keyed by Account) carry the mean of their jobs, and users
// are linked to each other by similarity edges. Jobs never link to jobs.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "slurmlens/dataset.hpp"
#include "slurmlens/error.hpp"
#include "slurmlens/ingest.hpp"
#include "slurmlens/text.hpp"

namespace slurmlens {

enum class JobLabel { Failed, Succeeded };

inline std::string_view to_string(JobLabel l) { return l == JobLabel::Failed ? "FAILED" : "SUCCEEDED"; }

enum class SimilarityKind { Project, SubmitTime, JobName };

inline std::string_view to_string(SimilarityKind k) {
  switch (k) {
    case SimilarityKind::Project: return "PROJECT";
    case SimilarityKind::SubmitTime: return "SUBMIT_TIME";
    case SimilarityKind::JobName: return "JOB_NAME";
  }
  return "PROJECT";
}

struct SimilarityConfig {
  bool project = true;
  std::string project_separator = "_";  // account prefix = text before the first separator
  bool submit_time = true;
  double submit_window_s = 3600.0;
  bool job_name = true;
  double job_name_min_jaccard = 0.5;  // over the users' job-name token sets
};

struct JobNode {
  std::string id;
  std::vector<double> embedding;
  JobLabel label = JobLabel::Succeeded;
};

struct UserNode {
  std::string id;
  std::vector<double> embedding;
  std::vector<std::string> job_ids;
};

struct UserUserEdge {
  std::string src;
  std::string dst;
  SimilarityKind kind = SimilarityKind::Project;
};

struct UserJobEdge {
  std::string user;
  std::string job;
};

struct GraphBundle {
  std::vector<UserNode> user_nodes;
  std::vector<JobNode> job_nodes;
  std::vector<UserUserEdge> user_user_edges;
  std::vector<UserJobEdge> user_job_edges;
  std::vector<std::string> embedding_columns;
};

// Component-wise arithmetic mean, summed in input order.
inline std::vector<double> user_embedding(const std::vector<std::vector<double>>& job_embeddings) {
  if (job_embeddings.empty()) throw NoJobs();
  const auto d = job_embeddings.front().size();
  std::vector<double> sum(d, 0.0);
  for (const auto& e : job_embeddings) {
    if (e.size() != d) throw DimensionMismatch("job embeddings have different dimensions");
    for (std::size_t j = 0; j < d; ++j) sum[j] += e[j];
  }
  for (auto& v : sum) v /= static_cast<double>(job_embeddings.size());
  return sum;
}

inline std::string account_prefix(std::string_view account, std::string_view separators) {
  auto pos = account.find_first_of(separators);
  return std::string(account.substr(0, pos));
}

inline std::set<std::string> name_tokens(std::string_view name) {
  std::set<std::string> tokens;
  std::string current;
  for (char c : name) {
    bool alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    if (alnum) {
      current += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
    } else if (!current.empty()) {
      tokens.insert(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.insert(std::move(current));
  return tokens;
}

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& t : a) common += b.count(t);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

inline GraphBundle build_graph(const JobTable& table, const std::vector<std::string>& feature_columns,
                               const SimilarityConfig& similarity = {}) {
  if (table.rows() == 0) throw EmptyTable();
  if (feature_columns.empty()) throw NoFeatureColumns();

  const auto n = table.rows();
  Eigen::MatrixXd raw(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(feature_columns.size()));
  for (std::size_t j = 0; j < feature_columns.size(); ++j) {
    const auto* col = table.find(feature_columns[j]);
    if (col == nullptr) throw UnknownColumn(feature_columns[j]);
    for (std::size_t i = 0; i < n; ++i) {
      if (is_missing(col->values[i])) throw DimensionMismatch("column '" + col->name + "' has missing values");
      raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = col->values[i];
    }
  }
  auto [normalized, params] = minmax_normalize(FeatureMatrix(feature_columns, std::move(raw)));

  GraphBundle g;
  g.embedding_columns = feature_columns;
  std::map<std::string, std::size_t> user_index;
  std::vector<std::string> user_accounts;
  std::vector<std::vector<std::size_t>> user_jobs;
  std::vector<std::string> job_names(n);
  std::vector<double> submit(n, kMissing);

  for (std::size_t i = 0; i < n; ++i) {
    JobNode job;
    job.id = "J" + table.job_ids[i];
    const auto& row = normalized.values().row(static_cast<Eigen::Index>(i));
    for (Eigen::Index j = 0; j < row.size(); ++j) job.embedding.push_back(row(j));
    auto s = table.states[i];
    job.label = (s == JobState::Failed || s == JobState::Timeout || s == JobState::OutOfMemory) ? JobLabel::Failed
                                                                                               : JobLabel::Succeeded;
    auto account = table.label("Account", i);
    auto [it, inserted] = user_index.try_emplace(account, user_accounts.size());
    if (inserted) {
      user_accounts.push_back(account);
      user_jobs.emplace_back();
    }
    user_jobs[it->second].push_back(i);
    job_names[i] = table.label("JobName", i);
    if (auto t = table.value("Submit", i)) submit[i] = *t;
    g.user_job_edges.push_back({"U" + account, job.id});
    g.job_nodes.push_back(std::move(job));
  }

  for (std::size_t u = 0; u < user_accounts.size(); ++u) {
    UserNode user;
    user.id = "U" + user_accounts[u];
    std::vector<std::vector<double>> embeddings;
    for (auto i : user_jobs[u]) {
      user.job_ids.push_back(g.job_nodes[i].id);
      embeddings.push_back(g.job_nodes[i].embedding);
    }
    user.embedding = user_embedding(embeddings);
    g.user_nodes.push_back(std::move(user));
  }

  // (lower user index, higher user index, kind)
  std::set<std::tuple<std::size_t, std::size_t, SimilarityKind>> edges;
  auto link = [&](std::size_t a, std::size_t b, SimilarityKind kind) {
    if (a != b) edges.emplace(std::min(a, b), std::max(a, b), kind);
  };
  const auto users = user_accounts.size();

  if (similarity.project) {
    std::map<std::string, std::vector<std::size_t>> by_prefix;
    for (std::size_t u = 0; u < users; ++u) {
      by_prefix[account_prefix(user_accounts[u], similarity.project_separator)].push_back(u);
    }
    for (const auto& [prefix, members] : by_prefix) {
      for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) link(members[a], members[b], SimilarityKind::Project);
      }
    }
  }

  if (similarity.submit_time) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_missing(submit[i])) order.push_back(i);
    }
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return submit[a] < submit[b]; });
    std::vector<std::size_t> job_user(n);
    for (std::size_t u = 0; u < users; ++u) {
      for (auto i : user_jobs[u]) job_user[i] = u;
    }
    for (std::size_t a = 0; a < order.size(); ++a) {
      // Users already linked from this job; skips repeated pairs in dense windows.
      std::set<std::size_t> seen;
      for (std::size_t b = a + 1; b < order.size() && submit[order[b]] - submit[order[a]] <= similarity.submit_window_s;
           ++b) {
        auto ub = job_user[order[b]];
        if (seen.insert(ub).second) link(job_user[order[a]], ub, SimilarityKind::SubmitTime);
      }
    }
  }

  if (similarity.job_name) {
    std::vector<std::set<std::string>> tokens(users);
    for (std::size_t u = 0; u < users; ++u) {
      for (auto i : user_jobs[u]) {
        auto t = name_tokens(job_names[i]);
        tokens[u].insert(t.begin(), t.end());
      }
    }
    for (std::size_t a = 0; a < users; ++a) {
      for (std::size_t b = a + 1; b < users; ++b) {
        if (!tokens[a].empty() && jaccard(tokens[a], tokens[b]) >= similarity.job_name_min_jaccard) {
          link(a, b, SimilarityKind::JobName);
        }
      }
    }
  }

  for (const auto& [a, b, kind] : edges) g.user_user_edges.push_back({g.user_nodes[a].id, g.user_nodes[b].id, kind});
  return g;
}

// Writes <directory>/nodes.csv and <directory>/edges.csv.
inline void export_graph(const GraphBundle& g, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw IoFailure("cannot create '" + directory.string() + "': " + ec.message());

  std::ofstream nodes(directory / "nodes.csv", std::ios::binary | std::ios::trunc);
  std::ofstream edges(directory / "edges.csv", std::ios::binary | std::ios::trunc);
  if (!nodes || !edges) throw IoFailure("cannot write graph files under '" + directory.string() + "'");

  const auto d = g.embedding_columns.size();
  nodes << "id,kind,label";
  for (std::size_t j = 0; j < d; ++j) nodes << ",e" << j;
  nodes << '\n';
  auto write_embedding = [&](const std::vector<double>& e) {
    for (double v : e) nodes << ',' << text::format_real(v);
    nodes << '\n';
  };
  for (const auto& u : g.user_nodes) {
    nodes << text::sanitize_cell(u.id, ',') << ",user,";
    write_embedding(u.embedding);
  }
  for (const auto& j : g.job_nodes) {
    nodes << text::sanitize_cell(j.id, ',') << ",job," << to_string(j.label);
    write_embedding(j.embedding);
  }

  edges << "src,dst,kind\n";
  for (const auto& e : g.user_user_edges) {
    edges << text::sanitize_cell(e.src, ',') << ',' << text::sanitize_cell(e.dst, ',') << ',' << to_string(e.kind)
          << '\n';
  }
  for (const auto& e : g.user_job_edges) {
    edges << text::sanitize_cell(e.user, ',') << ',' << text::sanitize_cell(e.job, ',') << ",SUBMITTED\n";
  }
  nodes.flush();
  edges.flush();
  if (!nodes || !edges) throw IoFailure("failed writing graph files under '" + directory.string() + "'");
}

}  // namespace slurmlens
