#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace geomancer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = std::int64_t;

/// Bad input to an operation: wrong sizes, out-of-range parameters.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical step could not produce a meaningful result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pipeline failure tagged with the stage that raised it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Provenance stamped into every artifact.
struct ArtifactStamp {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

/// t points in R^n, one per row.
struct PointCloud {
  RowMatrix data;

  PointCloud() = default;
  explicit PointCloud(RowMatrix d) : data(std::move(d)) {}

  Index size() const noexcept { return data.rows(); }
  Index dim() const noexcept { return data.cols(); }
  auto point(Index i) const { return data.row(i); }

  /// Throws ArgumentError unless t >= 1, n >= 1 and every entry is finite.
  void validate() const;
};

}  // namespace geomancer
