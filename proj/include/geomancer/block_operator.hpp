#pragma once

#include "geomancer/common.hpp"
#include "geomancer/graph.hpp"

#include <iosfwd>
#include <string>

namespace geomancer {

/// Symmetric linear operator accessed only through products.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Index dim() const = 0;
  /// y = A x for a block of column vectors; y is resized.
  virtual void apply(const Matrix& x, Matrix& y) const = 0;

  Vector apply(const Vector& x) const {
    Matrix y;
    apply(Matrix(x), y);
    return y.col(0);
  }
};

/// Symmetric block-sparse matrix on the sparsity pattern of a NeighborGraph.
///
/// Node i owns rows [i*b, (i+1)*b). Diagonal blocks are stored per node and
/// off-diagonal blocks per adjacency slot, so each node's row is contiguous;
/// block(j, i) is kept equal to block(i, j)^T by set_edge_block. Products
/// y_i = sum_j block(i, j) x_j are accumulated per node in sorted neighbor
/// order (diagonal first), so results do not depend on the thread count.
class BlockSparseOperator final : public LinearOperator {
 public:
  BlockSparseOperator() = default;
  /// Zero-initialized operator with block size b on the graph's pattern.
  BlockSparseOperator(NeighborGraph structure, Index block_dim);

  Index nodes() const noexcept { return graph_.size(); }
  Index block_dim() const noexcept { return b_; }
  Index dim() const override { return graph_.size() * b_; }
  const NeighborGraph& structure() const noexcept { return graph_; }

  Eigen::Map<Matrix> diagonal_block(Index i) {
    return Eigen::Map<Matrix>(diag_.data() + i * b_ * b_, b_, b_);
  }
  Eigen::Map<const Matrix> diagonal_block(Index i) const {
    return Eigen::Map<const Matrix>(diag_.data() + i * b_ * b_, b_, b_);
  }
  /// block(i, j) for undirected edge e = (i, j), i < j.
  Eigen::Map<const Matrix> edge_block(Index e) const {
    return Eigen::Map<const Matrix>(off_.data() + slots_[static_cast<std::size_t>(e)].first * b_ * b_,
                                    b_, b_);
  }
  /// Sets block(i, j) = m and block(j, i) = m^T for edge e = (i, j), i < j.
  void set_edge_block(Index e, const Eigen::Ref<const Matrix>& m);

  /// Dense copy of block(i, j); zero if i != j are not adjacent.
  Matrix block(Index i, Index j) const;

  using LinearOperator::apply;
  void apply(const Matrix& x, Matrix& y) const override;

  Matrix to_dense() const;

  /// Binary block-CSR layout, little-endian:
  ///   char[8] "GEOMBSO\0", u32 version (1), u32 reserved (0),
  ///   u64 t, u64 b, u64 edge count E,
  ///   E x (u64 i, u64 j) with i < j in edge-id order,
  ///   t diagonal blocks then E blocks block(i, j), each b*b f64 row-major.
  void save(std::ostream& out) const;
  static BlockSparseOperator load(std::istream& in);
  void save(const std::string& path) const;
  static BlockSparseOperator load(const std::string& path);

 private:
  NeighborGraph graph_;
  Index b_ = 0;
  std::vector<double> diag_;
  std::vector<double> off_;                    // one b x b block per adjacency slot
  std::vector<std::pair<Index, Index>> slots_;  // per edge: slot in row i, slot in row j
};

/// Dense symmetric matrix wrapped as an operator (tests and small problems).
class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(Matrix m) : m_(std::move(m)) {}
  Index dim() const override { return m_.rows(); }
  using LinearOperator::apply;
  void apply(const Matrix& x, Matrix& y) const override { y.noalias() = m_ * x; }

 private:
  Matrix m_;
};

}  // namespace geomancer
