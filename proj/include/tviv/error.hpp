#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace tviv {

/// Broad failure classes; the CLI maps each to an exit code.
enum class ErrorCategory { config, data, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

// ---- configuration -------------------------------------------------------

class InvalidConfig : public Error {
 public:
  InvalidConfig(std::string field, const std::string& detail)
      : Error(ErrorCategory::config, "invalid config: " + field + ": " + detail),
        field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// ---- data / ingestion ----------------------------------------------------

class IoError : public Error {
 public:
  explicit IoError(const std::string& detail) : Error(ErrorCategory::data, "io error: " + detail) {}
};

class MissingColumn : public Error {
 public:
  explicit MissingColumn(std::string column)
      : Error(ErrorCategory::data, "missing column: " + column), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& detail)
      : Error(ErrorCategory::data, "parse error at row " + std::to_string(row) + ", column " +
                                       column + ": " + detail),
        row_(row),
        column_(std::move(column)) {}
  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

class ConstantColumn : public Error {
 public:
  explicit ConstantColumn(std::string column)
      : Error(ErrorCategory::data, "column has zero variance: " + column), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

class EmptyCell : public Error {
 public:
  EmptyCell(std::string cluster, long period)
      : Error(ErrorCategory::data,
              "no records for cluster " + cluster + " in period " + std::to_string(period)),
        cluster_(std::move(cluster)),
        period_(period) {}
  const std::string& cluster() const noexcept { return cluster_; }
  long period() const noexcept { return period_; }

 private:
  std::string cluster_;
  long period_;
};

class IncompleteSeries : public Error {
 public:
  IncompleteSeries(const std::string& subject, long period)
      : Error(ErrorCategory::data,
              "subject " + subject + " has no record at follow-up time " + std::to_string(period)) {}
};

class MalformedResults : public Error {
 public:
  explicit MalformedResults(const std::string& detail)
      : Error(ErrorCategory::data, "malformed results: " + detail) {}
};

// ---- numerical -----------------------------------------------------------

class NonFinite : public Error {
 public:
  explicit NonFinite(const std::string& where)
      : Error(ErrorCategory::numerical, "non-finite value in " + where) {}
};

class RankDeficient : public Error {
 public:
  RankDeficient(std::size_t column, const std::string& context = {})
      : Error(ErrorCategory::numerical,
              "rank-deficient design (column " + std::to_string(column) + ")" +
                  (context.empty() ? std::string{} : " in " + context)),
        column_(column) {}
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

class SingularMatrix : public Error {
 public:
  explicit SingularMatrix(const std::string& detail)
      : Error(ErrorCategory::numerical, "singular matrix: " + detail) {}
};

class Separation : public Error {
 public:
  explicit Separation(const std::string& detail)
      : Error(ErrorCategory::numerical, "separation: " + detail) {}
};

class NoVariation : public Error {
 public:
  NoVariation() : Error(ErrorCategory::numerical, "binary response has a single class") {}
};

class NoStableLambda : public Error {
 public:
  NoStableLambda()
      : Error(ErrorCategory::numerical,
              "no ridge penalty in the grid met the stability tolerance; widen the grid") {}
};

class TooManyFailures : public Error {
 public:
  TooManyFailures(std::size_t failures, std::size_t total)
      : Error(ErrorCategory::numerical, std::to_string(failures) + " of " + std::to_string(total) +
                                            " bootstrap resamples failed") {}
};

class ScenarioFailed : public Error {
 public:
  explicit ScenarioFailed(const std::string& detail)
      : Error(ErrorCategory::numerical, "scenario failed: " + detail) {}
};

}  // namespace tviv
