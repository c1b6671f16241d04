#pragma once

#include "geomancer/block_operator.hpp"
#include "geomancer/common.hpp"
#include "geomancer/connection.hpp"

#include <cstdint>
#include <string>

namespace geomancer {

struct EigenOptions {
  Index count = 10;            // R
  double tol = 1e-7;           // relative residual: ||Av - lv|| <= tol * ||A||_est
  Index max_iter = 0;          // 0: 10 * R * sqrt(dim)
  std::uint64_t seed = 0;
  Index block_size = 1;        // vectors added to the Krylov basis per step
  Index basis_size = 0;        // basis vectors kept before a restart; 0 picks max(6R, 60)
  bool verbose = false;
};

struct SpectrumResult {
  Vector eigenvalues;          // ascending
  Matrix eigenvectors;         // dim x R, orthonormal columns
  Vector residuals;            // ||A v - l v|| per pair
  double norm_estimate = 0.0;  // ||A||_est used for the stopping test
  Index iterations = 0;        // block operator applications
  bool converged = false;

  Index count() const noexcept { return eigenvalues.size(); }
};

/// Raised when the eigensolver runs out of iterations; carries the best
/// approximations found so far.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, SpectrumResult partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const SpectrumResult& partial() const noexcept { return partial_; }

 private:
  SpectrumResult partial_;
};

/// The R smallest eigenpairs of a symmetric positive semidefinite operator by
/// thick-restart block Lanczos with full reorthogonalization, using only
/// operator products. After convergence the complement of the found vectors
/// is probed once more so that exactly repeated eigenvalues keep every copy.
/// Small problems are solved densely. Deterministic for a given seed and
/// independent of the thread count.
SpectrumResult smallest_eigenpairs(const LinearOperator& op, const EigenOptions& options = {});

/// Largest eigenvalue estimate by a short power iteration.
double estimate_norm(const LinearOperator& op, std::uint64_t seed, int iterations = 30);

/// Per-point k x k matrix field.
using MatrixField = std::vector<Matrix>;

/// Omega^r_i = reshape(Pi phi^r_i) for the first `count` eigenvectors
/// (all when count < 0).
std::vector<MatrixField> eigenvector_to_fields(const SpectrumResult& spectrum,
                                               const SymTracelessBasis& basis, Index count = -1);

/// Spectrum as JSON text: eigenvalues, residuals, iterations, converged.
std::string spectrum_to_json(const SpectrumResult& spectrum);

/// Binary eigenpairs: char[8] "GEOMSPC\0", u32 version (1), u32 reserved,
/// u64 config hash, u64 seed, u64 dim, u64 R, R f64 eigenvalues, R f64 residuals, f64 norm estimate,
/// u64 iterations, u64 converged, then dim x R f64 eigenvectors column by column.
void save_spectrum(const SpectrumResult& spectrum, const std::string& path,
                   const ArtifactStamp& stamp = {});
SpectrumResult load_spectrum(const std::string& path, ArtifactStamp* stamp = nullptr);

}  // namespace geomancer
