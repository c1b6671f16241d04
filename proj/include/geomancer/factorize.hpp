#pragma once

#include "geomancer/common.hpp"
#include "geomancer/connection.hpp"
#include "geomancer/graph.hpp"
#include "geomancer/spectral.hpp"

#include <optional>
#include <string>
#include <vector>

namespace geomancer {

/// Default fraction of lambda_R below which sub-gap eigenvalues must lie for
/// the spectrum to count as showing product structure.
inline constexpr double kDefaultGapCeiling = 0.2;

struct GeomancerConfig {
  Index k_neighbors = 0;             // 0 selects 2k
  Index eigen_count = 10;            // R
  double eigen_tol = 1e-7;
  Index eigen_max_iter = 0;          // 0 selects the eigensolver default
  std::optional<double> gamma;       // explicit eigenvalue threshold; unset means automatic
  double gap_ceiling = kDefaultGapCeiling;
  double cluster_threshold = 0.5;    // cosine
  double diag_tol = 1e-10;
  Index diag_max_sweeps = 100;
  std::uint64_t seed = 0;
  KnnOptions knn;
  bool verbose = false;

  Index neighbors_for(Index k) const { return k_neighbors > 0 ? k_neighbors : 2 * k; }
  /// Throws ArgumentError on out-of-range values; t and k are the problem size.
  void validate(Index t, Index k) const;
};

struct SpectralGap {
  Index m = 1;                // inferred factor count
  Index gap_index = 0;        // eigenvalues below the gap
  bool product_structure = false;
  std::string message;        // set when no product structure was detected
};

/// Finds the spectral gap of an ascending, nonnegative eigenvalue list.
///
/// Automatic mode: gap_index = 1 + argmax_r (l_{r+1} + eps) / (l_r + eps),
/// eps = 1e-12 * l_R, and m = gap_index + 1. If the sub-gap eigenvalues are
/// not below ceiling * l_R (or the spectrum is flat), no product structure is
/// reported and m = 1. With gamma set, gap_index counts eigenvalues below gamma.
SpectralGap detect_spectral_gap(const Vector& eigenvalues, std::optional<double> gamma,
                                double ceiling = kDefaultGapCeiling);

struct JointDiagonalization {
  Matrix w;                      // k x k orthogonal
  std::vector<Vector> diagonals; // diag(W^T M_r W) per input
  double residual = 0.0;         // off-diagonal energy sum_r sum_{p != q} (W^T M_r W)_pq^2
  double initial_residual = 0.0; // same, at the starting W
  Index sweeps = 0;
  bool converged = false;
};

/// Orthogonal joint diagonalization of symmetric matrices by FFDiag-style
/// skew-symmetric updates. Starts from the eigenvectors of a fixed generic
/// combination of the inputs; accepted sweeps never increase the
/// off-diagonal energy. On hitting max_sweeps the best W is returned with
/// converged = false.
JointDiagonalization joint_diagonalize(const std::vector<Matrix>& mats, double tol = 1e-10,
                                       Index max_sweeps = 100);

struct ColumnClusters {
  std::vector<std::vector<Index>> clusters;  // ordered by smallest member
  std::vector<Index> unassigned;             // zero signature vectors
  // Smallest |cos - threshold| over all column pairs; small values mean the
  // partition is sensitive to the threshold.
  double margin = 0.0;
};

/// Groups the columns of psi ((m-1) x k; column c is the signature of
/// tangent direction c) by transitive closure of cos > threshold.
ColumnClusters cluster_simplex_corners(const Matrix& psi, double threshold = 0.5);

struct PointDiagnostics {
  double offdiag_residual = 0.0;  // relative to the inputs' squared norm
  bool diag_converged = true;
  Index sweeps = 0;
  Index clusters = 0;
  Index unassigned = 0;
  double cosine_margin = 0.0;
};

struct Factorization {
  Index m = 1;
  Index k = 0;
  Index ambient_dim = 0;
  Index gap_index = 0;
  bool product_structure = false;
  std::string message;
  Vector eigenvalues;
  Vector residuals;
  // subspaces[i][j]: ambient_dim x dims[i][j], orthonormal columns of U_i W_i.
  std::vector<std::vector<Matrix>> subspaces;
  std::vector<PointDiagnostics> diagnostics;

  Index size() const noexcept { return static_cast<Index>(subspaces.size()); }
  std::vector<Index> dims(Index i) const;
};

/// Neighbor graph, tangent frames and connections.
struct Geometry {
  NeighborGraph graph;
  TangentFrames frames;
  ConnectionGraph connections;
};

Geometry build_geometry(const PointCloud& points, Index k, const GeomancerConfig& config);

/// Bottom eigenpairs of the projected second-order connection Laplacian.
SpectrumResult connection_spectrum(const Geometry& geometry, const GeomancerConfig& config);

/// Gap detection, per-point joint diagonalization and clustering.
Factorization factorize_spectrum(const Geometry& geometry, const SpectrumResult& spectrum,
                                 const GeomancerConfig& config);

/// The full pipeline. Failures are rethrown as StageError labelled
/// "config", "graph", "frames", "connection", "spectrum" or "factorize".
Factorization run_geomancer(const PointCloud& points, Index k, const GeomancerConfig& config = {});

}  // namespace geomancer
