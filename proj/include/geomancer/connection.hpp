#pragma once

#include "geomancer/block_operator.hpp"
#include "geomancer/common.hpp"
#include "geomancer/graph.hpp"

#include <optional>

namespace geomancer {

/// Smallest singular value of U_j^T U_i below which transport is refused.
inline constexpr double kMinFrameOverlap = 1e-8;

/// Nearest orthogonal matrix to U_j^T U_i (its polar factor). It carries
/// tangent coordinates at i to tangent coordinates at j.
/// Throws NumericalError ("frame overlap degenerate") if the overlap is
/// near-singular.
Matrix connect_frames(const Matrix& frame_i, const Matrix& frame_j);

/// Polar factor U V^T of a square matrix.
Matrix polar_factor(const Matrix& m);

/// Edge transports Q_ij for every undirected edge (i < j); Q_ji = Q_ij^T.
class ConnectionGraph {
 public:
  ConnectionGraph() = default;
  ConnectionGraph(std::vector<std::pair<Index, Index>> edges, std::vector<Matrix> transports);

  Index k() const noexcept { return transports_.empty() ? 0 : transports_.front().rows(); }
  Index num_edges() const noexcept { return static_cast<Index>(transports_.size()); }
  const std::vector<std::pair<Index, Index>>& edges() const noexcept { return edges_; }

  /// Q_ij for undirected edge e = (i, j), i < j.
  const Matrix& edge_transport(Index e) const { return transports_[static_cast<std::size_t>(e)]; }

  /// Transport from `from` to `to` along edge e; transposes stored Q when reversed.
  Matrix transport(Index e, Index from, Index to) const;

 private:
  std::vector<std::pair<Index, Index>> edges_;
  std::vector<Matrix> transports_;
};

/// Connects the frames across every edge of the graph. Errors name the edge.
ConnectionGraph build_connections(const NeighborGraph& graph, const TangentFrames& frames);

/// Orthonormal basis of vectorized (column-stacked) symmetric traceless k x k
/// matrices, Pi = Pi_sym * Pi_tr.
///
/// Pi_sym columns: vec(e_i e_i^T) for i = 0..k-1, then
/// vec((e_i e_j^T + e_j e_i^T) / sqrt(2)) for i < j in lexicographic order.
/// Pi_tr: columns 2.. of the Householder reflector sending the normalized
/// identity (in symmetric coordinates) to the first axis.
struct SymTracelessBasis {
  Index k = 0;
  Matrix sym;       // k^2 x k(k+1)/2
  Matrix traceless; // k(k+1)/2 x d
  Matrix pi;        // k^2 x d

  Index dim() const noexcept { return pi.cols(); }

  /// Coefficients of a k x k matrix (its symmetric traceless part).
  Vector project(const Matrix& m) const;
  /// k x k matrix with the given coefficients.
  Matrix lift(const Eigen::Ref<const Vector>& coefficients) const;
};

SymTracelessBasis symmetric_traceless_basis(Index k);

/// Which connection Laplacian to assemble.
enum class LaplacianOrder { First = 1, Second = 2 };

/// Graph connection Laplacian as a block-sparse operator.
///
///   order 1: block dim k, (L v)_i = sum_j v_i - Q_ij^T v_j.
///   order 2: block dim k^2, (L S)_i = sum_j S_i - Q_ij^T S_j Q_ij with S
///            column-stacked.
///   order 2 with basis: every block sandwiched as Pi^T B Pi (block dim d).
///
/// Diagonal blocks are degree * I. Throws ArgumentError if `connections`
/// does not match the graph's edges.
BlockSparseOperator assemble_connection_laplacian(const NeighborGraph& graph,
                                                  const ConnectionGraph& connections,
                                                  const SymTracelessBasis* basis,
                                                  LaplacianOrder order);

/// The linear map X -> Q^T X Q on column-stacked k x k matrices.
Matrix conjugation_matrix(const Matrix& q);

/// The projected order-2 connection Laplacian applied directly through the
/// transports: (L phi)_i = deg_i phi_i - sum_j Pi^T vec(Q_ij^T Phi_j Q_ij)
/// with Phi_j = reshape(Pi phi_j). Equal to the assembled block operator up to
/// rounding, but stores k x k transports instead of d x d blocks, which keeps
/// products memory-light on large graphs. Accumulation is per node in sorted
/// neighbor order.
class ProjectedConnectionOperator final : public LinearOperator {
 public:
  ProjectedConnectionOperator(NeighborGraph graph, const ConnectionGraph& connections,
                              SymTracelessBasis basis);

  Index dim() const override { return graph_.size() * basis_.dim(); }
  const NeighborGraph& structure() const noexcept { return graph_; }
  const SymTracelessBasis& basis() const noexcept { return basis_; }

  using LinearOperator::apply;
  void apply(const Matrix& x, Matrix& y) const override;

 private:
  template <int K>
  void apply_column(const double* x, double* y, double* lifted) const;

  NeighborGraph graph_;
  SymTracelessBasis basis_;
  std::vector<double> slot_transports_;  // per adjacency slot of i with neighbor j: Q_ij, column-major
};

}  // namespace geomancer
