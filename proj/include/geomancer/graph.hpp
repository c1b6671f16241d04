#pragma once

#include "geomancer/common.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace geomancer {

class BlockSparseOperator;

/// Undirected simple graph over point indices, stored as sorted adjacency (CSR).
///
/// Every undirected edge {i, j} has an id in [0, num_edges()); edges are
/// numbered in lexicographic order of (min, max). For each adjacency slot the
/// id of the corresponding undirected edge is kept alongside the neighbor.
class NeighborGraph {
 public:
  NeighborGraph() = default;

  /// Builds from per-node neighbor lists. Lists are sorted and deduplicated;
  /// throws ArgumentError on asymmetry, self-loops, out-of-range indices or
  /// isolated nodes.
  explicit NeighborGraph(std::vector<std::vector<Index>> adjacency);

  Index size() const noexcept { return static_cast<Index>(offsets_.size()) - 1; }
  Index num_edges() const noexcept { return static_cast<Index>(edges_.size()); }
  Index degree(Index i) const { return offsets_[i + 1] - offsets_[i]; }
  Index max_degree() const;
  /// Position of node i's first adjacency slot; slots of node i are
  /// [offset(i), offset(i) + degree(i)).
  Index offset(Index i) const { return offsets_[i]; }

  /// Sorted neighbors of node i.
  std::span<const Index> neighbors(Index i) const {
    return {neighbors_.data() + offsets_[i], static_cast<std::size_t>(degree(i))};
  }
  /// Undirected edge ids parallel to neighbors(i).
  std::span<const Index> edge_ids(Index i) const {
    return {edge_ids_.data() + offsets_[i], static_cast<std::size_t>(degree(i))};
  }
  /// Undirected edges as (i, j) with i < j.
  const std::vector<std::pair<Index, Index>>& edges() const noexcept { return edges_; }

  std::vector<std::vector<Index>> adjacency() const;

  /// Connected component label per node (labels 0.. in order of first node).
  std::vector<Index> components(Index* count = nullptr) const;

  friend bool operator==(const NeighborGraph& a, const NeighborGraph& b) {
    return a.offsets_ == b.offsets_ && a.neighbors_ == b.neighbors_;
  }

 private:
  std::vector<Index> offsets_{0};
  std::vector<Index> neighbors_;
  std::vector<Index> edge_ids_;
  std::vector<std::pair<Index, Index>> edges_;
};

enum class KnnMethod { Automatic, BruteForce, KdTree };

struct KnnOptions {
  KnnMethod method = KnnMethod::Automatic;
  // Automatic switches to the kd-tree above this many points.
  Index brute_force_limit = 2048;
};

/// The k nearest neighbors of every point (excluding itself) by Euclidean
/// distance, ties broken by lower index. Row i lists neighbors nearest first.
std::vector<std::vector<Index>> k_nearest_neighbors(const PointCloud& points, Index k,
                                                    const KnnOptions& options = {});

/// Symmetric union of the directed kNN relation.
NeighborGraph build_knn_graph(const PointCloud& points, Index k_neighbors,
                              const KnnOptions& options = {});

/// Per-point orthonormal tangent bases from local PCA.
struct TangentFrames {
  Index k = 0;
  std::vector<Matrix> frames;  // n x k each
  // Points where sigma_k and sigma_{k+1} coincide to 1e-12 (relative); the
  // chosen subspace is deterministic but not unique there.
  std::vector<Index> degenerate_points;

  Index size() const noexcept { return static_cast<Index>(frames.size()); }
  const Matrix& operator[](Index i) const { return frames[static_cast<std::size_t>(i)]; }
};

/// Fixes the sign of each column so its largest-magnitude entry is positive
/// (first such entry on ties).
void canonicalize_signs(Eigen::Ref<Matrix> columns);

/// U_i = top-k left singular vectors of (x_j - x_i) over neighbors j of i.
TangentFrames estimate_tangent_frames(const PointCloud& points, const NeighborGraph& graph,
                                      Index k);

/// Scalar graph Laplacian: degree on the diagonal, -1 per edge (block size 1).
BlockSparseOperator scalar_laplacian(const NeighborGraph& graph);

struct EmbeddingOptions {
  double tol = 1e-9;
  Index max_iter = 0;  // 0 selects the eigensolver default
  std::uint64_t seed = 0;
  // Graphs with at most this many nodes are solved densely.
  Index dense_limit = 1500;
};

/// Laplacian Eigenmaps: eigenvectors 2..d+1 of the scalar Laplacian as
/// columns, each of unit norm, signs canonicalized.
PointCloud laplacian_eigenmaps_embed(const NeighborGraph& graph, Index d,
                                     const EmbeddingOptions& options = {});

}  // namespace geomancer
