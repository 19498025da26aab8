#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "slurmlens/dataset.hpp"
#include "slurmlens/ingest.hpp"

namespace testing_support {

inline slurmlens::JobTable table_from(const std::string& dump, slurmlens::CleaningConfig config = {}) {
  std::istringstream in(dump);
  return slurmlens::clean_stream(in, '|', config).first;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) x(i, j) = scale * g(rng);
  }
  return x;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale).col(0);
}

inline std::vector<std::string> names(std::size_t d, const std::string& prefix = "x") {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < d; ++j) out.push_back(prefix + std::to_string(j));
  return out;
}

inline slurmlens::FeatureMatrix features(const Eigen::MatrixXd& x) {
  return slurmlens::FeatureMatrix(names(static_cast<std::size_t>(x.cols())), x);
}

inline slurmlens::TargetVector target(const Eigen::VectorXd& y, const std::string& name = "y") { return {name, y}; }

}  // namespace testing_support
