#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace slurmlens {

// Base of every error raised by the toolkit. The CLI maps these to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- ingestion -------------------------------------------------------------

class EmptyInput : public Error {
 public:
  EmptyInput() : Error("input contains no header line") {}
};

class MalformedRow : public Error {
 public:
  MalformedRow(std::size_t line, std::size_t expected, std::size_t got)
      : Error("malformed row at line " + std::to_string(line) + ": expected " + std::to_string(expected) +
              " cells, got " + std::to_string(got)),
        line_(line),
        expected_(expected),
        got_(got) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t expected() const noexcept { return expected_; }
  std::size_t got() const noexcept { return got_; }

 private:
  std::size_t line_;
  std::size_t expected_;
  std::size_t got_;
};

// Raised by the scalar cell parsers; `kind` is "duration", "memory", ...
class UnparseableValue : public Error {
 public:
  UnparseableValue(std::string kind, std::string text)
      : Error("unparseable " + kind + ": '" + text + "'"), kind_(std::move(kind)), text_(std::move(text)) {}

  const std::string& kind() const noexcept { return kind_; }
  const std::string& text() const noexcept { return text_; }

 private:
  std::string kind_;
  std::string text_;
};

class UnparseableDuration : public UnparseableValue {
 public:
  explicit UnparseableDuration(std::string text) : UnparseableValue("duration", std::move(text)) {}
};

class UnparseableMemory : public UnparseableValue {
 public:
  explicit UnparseableMemory(std::string text) : UnparseableValue("memory", std::move(text)) {}
};

class UnparseableTimestamp : public UnparseableValue {
 public:
  explicit UnparseableTimestamp(std::string text) : UnparseableValue("timestamp", std::move(text)) {}
};

class NoSurvivingColumns : public Error {
 public:
  NoSurvivingColumns() : Error("cleaning removed every feature column") {}
};

// --- dataset ---------------------------------------------------------------

class UnknownTarget : public Error {
 public:
  explicit UnknownTarget(const std::string& name) : Error("unknown target column '" + name + "'") {}
};

class UnknownColumn : public Error {
 public:
  explicit UnknownColumn(const std::string& name) : Error("unknown column '" + name + "'") {}
};

class EmptyTable : public Error {
 public:
  EmptyTable() : Error("table has no rows") {}
};

class ConstantColumn : public Error {
 public:
  explicit ConstantColumn(const std::string& name) : Error("column '" + name + "' is constant") {}
};

class TooFewRows : public Error {
 public:
  TooFewRows(std::size_t n, std::size_t k)
      : Error("cannot split " + std::to_string(n) + " rows into " + std::to_string(k) + " folds") {}
};

// --- models ----------------------------------------------------------------

class RankDeficient : public Error {
 public:
  explicit RankDeficient(std::vector<std::string> columns)
      : Error("design matrix is rank deficient in columns: " + join(columns)), columns_(std::move(columns)) {}

  const std::vector<std::string>& columns() const noexcept { return columns_; }

 private:
  static std::string join(const std::vector<std::string>& names) {
    std::string out;
    for (const auto& name : names) {
      if (!out.empty()) out += ", ";
      out += name;
    }
    return out;
  }

  std::vector<std::string> columns_;
};

class NegativeLambda : public Error {
 public:
  explicit NegativeLambda(double lambda) : Error("penalty must be >= 0, got " + std::to_string(lambda)) {}
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class InsufficientRows : public Error {
 public:
  InsufficientRows(std::size_t n, std::size_t d)
      : Error("least squares needs n >= d+1, got n=" + std::to_string(n) + ", d=" + std::to_string(d)) {}
};

// --- ranking / evaluation --------------------------------------------------

class FeatureSetMismatch : public Error {
 public:
  using Error::Error;
};

class KTooLarge : public Error {
 public:
  KTooLarge(std::size_t top, std::size_t bottom, std::size_t available)
      : Error("top_k + bottom_k = " + std::to_string(top + bottom) + " exceeds " + std::to_string(available) +
              " features") {}
};

class ConstantTarget : public Error {
 public:
  ConstantTarget() : Error("target is constant; R^2 is undefined") {}
};

// --- graph -----------------------------------------------------------------

class NoFeatureColumns : public Error {
 public:
  NoFeatureColumns() : Error("graph export needs at least one feature column") {}
};

class NoJobs : public Error {
 public:
  NoJobs() : Error("user has no jobs") {}
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class IoFailure : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or option values (CLI exit code 2 when raised during validation).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace slurmlens
