#include "geomancer/block_operator.hpp"

#include "geomancer/binary_io.hpp"
#include "geomancer/parallel.hpp"

#include <fstream>

namespace geomancer {

namespace {
constexpr std::string_view kMagic = "GEOMBSO";
constexpr std::uint32_t kVersion = 1;
}  // namespace

BlockSparseOperator::BlockSparseOperator(NeighborGraph structure, Index block_dim)
    : graph_(std::move(structure)), b_(block_dim) {
  if (block_dim < 1) throw ArgumentError("block dimension must be >= 1");
  diag_.assign(static_cast<std::size_t>(graph_.size() * b_ * b_), 0.0);
  off_.assign(static_cast<std::size_t>(2 * graph_.num_edges() * b_ * b_), 0.0);
  slots_.resize(static_cast<std::size_t>(graph_.num_edges()));
  for (Index i = 0; i < graph_.size(); ++i) {
    const auto nb = graph_.neighbors(i);
    const auto ids = graph_.edge_ids(i);
    for (std::size_t s = 0; s < nb.size(); ++s) {
      auto& slot = slots_[static_cast<std::size_t>(ids[s])];
      (i < nb[s] ? slot.first : slot.second) = graph_.offset(i) + static_cast<Index>(s);
    }
  }
}

void BlockSparseOperator::set_edge_block(Index e, const Eigen::Ref<const Matrix>& m) {
  if (m.rows() != b_ || m.cols() != b_) throw ArgumentError("set_edge_block: wrong block shape");
  const auto [lo, hi] = slots_[static_cast<std::size_t>(e)];
  Eigen::Map<Matrix>(off_.data() + lo * b_ * b_, b_, b_) = m;
  Eigen::Map<Matrix>(off_.data() + hi * b_ * b_, b_, b_) = m.transpose();
}

Matrix BlockSparseOperator::block(Index i, Index j) const {
  if (i == j) return diagonal_block(i);
  const auto nb = graph_.neighbors(i);
  const auto it = std::lower_bound(nb.begin(), nb.end(), j);
  if (it == nb.end() || *it != j) return Matrix::Zero(b_, b_);
  const Index slot = graph_.offset(i) + static_cast<Index>(it - nb.begin());
  return Eigen::Map<const Matrix>(off_.data() + slot * b_ * b_, b_, b_);
}

void BlockSparseOperator::apply(const Matrix& x, Matrix& y) const {
  if (x.rows() != dim())
    throw ArgumentError("operator_matvec: vector dimension " + std::to_string(x.rows()) +
                        " does not match operator dimension " + std::to_string(dim()));
  const Index p = x.cols();
  y.resize(dim(), p);
  const Index n = dim();
  const Index b = b_;
  const double* xd = x.data();
  double* yd = y.data();
  // y_i = D_i x_i + sum_j B_ij x_j per column; blocks are column-major.
  const auto multiply = [&](const double* blk, Index i, Index j) {
    for (Index c = 0; c < p; ++c) {
      const double* xs = xd + c * n + j * b;
      double* yr = yd + c * n + i * b;
      for (Index col = 0; col < b; ++col) {
        const double v = xs[col];
        const double* bc = blk + col * b;
        for (Index r = 0; r < b; ++r) yr[r] += bc[r] * v;
      }
    }
  };
  parallel_for(graph_.size(), [&](Index i) {
    for (Index c = 0; c < p; ++c) std::fill_n(yd + c * n + i * b, b, 0.0);
    multiply(diag_.data() + i * b * b, i, i);
    const auto nb = graph_.neighbors(i);
    const double* row = off_.data() + graph_.offset(i) * b * b;
    for (std::size_t s = 0; s < nb.size(); ++s) multiply(row + static_cast<Index>(s) * b * b, i, nb[s]);
  });
}

Matrix BlockSparseOperator::to_dense() const {
  Matrix dense = Matrix::Zero(dim(), dim());
  for (Index i = 0; i < graph_.size(); ++i) dense.block(i * b_, i * b_, b_, b_) = diagonal_block(i);
  for (Index e = 0; e < graph_.num_edges(); ++e) {
    const auto [i, j] = graph_.edges()[static_cast<std::size_t>(e)];
    dense.block(i * b_, j * b_, b_, b_) = edge_block(e);
    dense.block(j * b_, i * b_, b_, b_) = edge_block(e).transpose();
  }
  return dense;
}

void BlockSparseOperator::save(std::ostream& out) const {
  using namespace binary;
  write_magic(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, 0);
  write_u64(out, static_cast<std::uint64_t>(graph_.size()));
  write_u64(out, static_cast<std::uint64_t>(b_));
  write_u64(out, static_cast<std::uint64_t>(graph_.num_edges()));
  for (const auto& [i, j] : graph_.edges()) {
    write_u64(out, static_cast<std::uint64_t>(i));
    write_u64(out, static_cast<std::uint64_t>(j));
  }
  RowMatrix row_major(b_, b_);
  for (Index i = 0; i < graph_.size(); ++i) {
    row_major = diagonal_block(i);
    write_f64_array(out, row_major.data(), static_cast<std::size_t>(b_ * b_));
  }
  for (Index e = 0; e < graph_.num_edges(); ++e) {
    row_major = edge_block(e);
    write_f64_array(out, row_major.data(), static_cast<std::size_t>(b_ * b_));
  }
  if (!out) throw std::runtime_error("failed writing block operator");
}

BlockSparseOperator BlockSparseOperator::load(std::istream& in) {
  using namespace binary;
  expect_magic(in, kMagic);
  if (read_u32(in) != kVersion) throw ArgumentError("unsupported block operator version");
  read_u32(in);
  const auto t = static_cast<Index>(read_u64(in));
  const auto b = static_cast<Index>(read_u64(in));
  const auto edges = static_cast<Index>(read_u64(in));
  std::vector<std::vector<Index>> adjacency(static_cast<std::size_t>(t));
  std::vector<std::pair<Index, Index>> edge_list;
  edge_list.reserve(static_cast<std::size_t>(edges));
  for (Index e = 0; e < edges; ++e) {
    const auto i = static_cast<Index>(read_u64(in));
    const auto j = static_cast<Index>(read_u64(in));
    if (i < 0 || j < 0 || i >= t || j >= t || i >= j)
      throw ArgumentError("block operator file: invalid edge");
    adjacency[static_cast<std::size_t>(i)].push_back(j);
    adjacency[static_cast<std::size_t>(j)].push_back(i);
    edge_list.emplace_back(i, j);
  }
  BlockSparseOperator op(NeighborGraph(std::move(adjacency)), b);
  if (op.structure().edges() != edge_list)
    throw ArgumentError("block operator file: edges not in canonical order");
  RowMatrix row_major(b, b);
  for (Index i = 0; i < t; ++i) {
    read_f64_array(in, row_major.data(), static_cast<std::size_t>(b * b));
    op.diagonal_block(i) = row_major;
  }
  for (Index e = 0; e < edges; ++e) {
    read_f64_array(in, row_major.data(), static_cast<std::size_t>(b * b));
    op.set_edge_block(e, row_major);
  }
  return op;
}

void BlockSparseOperator::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  save(out);
}

BlockSparseOperator BlockSparseOperator::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path);
  return load(in);
}

}  // namespace geomancer
