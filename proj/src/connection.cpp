#include "geomancer/connection.hpp"

#include "geomancer/parallel.hpp"

#include <cmath>
#include <sstream>

namespace geomancer {

Matrix polar_factor(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

Matrix connect_frames(const Matrix& frame_i, const Matrix& frame_j) {
  if (frame_i.rows() != frame_j.rows() || frame_i.cols() != frame_j.cols())
    throw ArgumentError("connect_frames: frame shapes differ");
  const Matrix overlap = frame_j.transpose() * frame_i;
  Eigen::JacobiSVD<Matrix> svd(overlap, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double smallest = svd.singularValues()(svd.singularValues().size() - 1);
  if (!(smallest > kMinFrameOverlap)) {
    std::ostringstream msg;
    msg << "frame overlap degenerate (smallest singular value " << smallest << ")";
    throw NumericalError(msg.str());
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

ConnectionGraph::ConnectionGraph(std::vector<std::pair<Index, Index>> edges,
                                 std::vector<Matrix> transports)
    : edges_(std::move(edges)), transports_(std::move(transports)) {
  if (edges_.size() != transports_.size())
    throw ArgumentError("connection graph: one transport per edge required");
}

Matrix ConnectionGraph::transport(Index e, Index from, Index to) const {
  const auto [i, j] = edges_[static_cast<std::size_t>(e)];
  if (from == i && to == j) return edge_transport(e);
  if (from == j && to == i) return edge_transport(e).transpose();
  throw ArgumentError("connection graph: nodes do not match edge " + std::to_string(e));
}

ConnectionGraph build_connections(const NeighborGraph& graph, const TangentFrames& frames) {
  if (frames.size() != graph.size()) throw ArgumentError("frames and graph sizes differ");
  const Index edges = graph.num_edges();
  std::vector<Matrix> transports(static_cast<std::size_t>(edges));
  std::vector<std::string> failures(static_cast<std::size_t>(edges));
  parallel_for(edges, [&](Index e) {
    const auto [i, j] = graph.edges()[static_cast<std::size_t>(e)];
    try {
      transports[static_cast<std::size_t>(e)] = connect_frames(frames[i], frames[j]);
    } catch (const NumericalError& err) {
      failures[static_cast<std::size_t>(e)] = err.what();
    }
  });
  for (Index e = 0; e < edges; ++e) {
    if (!failures[static_cast<std::size_t>(e)].empty()) {
      const auto [i, j] = graph.edges()[static_cast<std::size_t>(e)];
      throw NumericalError(failures[static_cast<std::size_t>(e)] + " on edge " +
                           std::to_string(i) + "-" + std::to_string(j));
    }
  }
  return ConnectionGraph(graph.edges(), std::move(transports));
}

Vector SymTracelessBasis::project(const Matrix& m) const {
  return pi.transpose() * Eigen::Map<const Vector>(m.data(), m.size());
}

Matrix SymTracelessBasis::lift(const Eigen::Ref<const Vector>& coefficients) const {
  const Vector v = pi * coefficients;
  return Eigen::Map<const Matrix>(v.data(), k, k);
}

SymTracelessBasis symmetric_traceless_basis(Index k) {
  if (k < 2) throw ArgumentError("symmetric traceless basis needs k >= 2");
  const Index s = k * (k + 1) / 2;
  SymTracelessBasis basis;
  basis.k = k;
  basis.sym = Matrix::Zero(k * k, s);
  for (Index i = 0; i < k; ++i) basis.sym(i * k + i, i) = 1.0;
  const double r = 1.0 / std::sqrt(2.0);
  Index col = k;
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j, ++col) {
      basis.sym(j * k + i, col) = r;  // entry (i, j), column-stacked
      basis.sym(i * k + j, col) = r;  // entry (j, i)
    }
  }
  Vector u = Vector::Zero(s);
  u.head(k).setConstant(1.0 / std::sqrt(static_cast<double>(k)));
  Vector v = u;
  v(0) -= 1.0;
  const Matrix h = Matrix::Identity(s, s) - (2.0 / v.squaredNorm()) * v * v.transpose();
  basis.traceless = h.rightCols(s - 1);
  basis.pi = basis.sym * basis.traceless;
  return basis;
}

Matrix conjugation_matrix(const Matrix& q) {
  const Index k = q.rows();
  Matrix out(k * k, k * k);
  Matrix unit = Matrix::Zero(k, k);
  for (Index c = 0; c < k * k; ++c) {
    unit(c % k, c / k) = 1.0;
    const Matrix image = q.transpose() * unit * q;
    out.col(c) = Eigen::Map<const Vector>(image.data(), k * k);
    unit(c % k, c / k) = 0.0;
  }
  return out;
}

BlockSparseOperator assemble_connection_laplacian(const NeighborGraph& graph,
                                                  const ConnectionGraph& connections,
                                                  const SymTracelessBasis* basis,
                                                  LaplacianOrder order) {
  if (connections.num_edges() != graph.num_edges() || connections.edges() != graph.edges())
    throw ArgumentError("connection Laplacian: connections do not cover the graph's edges");
  if (connections.num_edges() == 0) throw ArgumentError("connection Laplacian: graph has no edges");
  const Index k = connections.k();
  if (order == LaplacianOrder::First && basis)
    throw ArgumentError("connection Laplacian: projection applies to order 2 only");
  if (basis && basis->k != k) throw ArgumentError("connection Laplacian: basis k mismatch");

  const Index b = order == LaplacianOrder::First ? k : (basis ? basis->dim() : k * k);
  BlockSparseOperator op(graph, b);
  for (Index i = 0; i < graph.size(); ++i)
    op.diagonal_block(i) = static_cast<double>(graph.degree(i)) * Matrix::Identity(b, b);

  std::vector<Matrix> basis_matrices;
  if (basis)
    for (Index c = 0; c < b; ++c) basis_matrices.push_back(basis->lift(Vector::Unit(b, c)));

  // block(i, j) acts on the field at j and returns its transport to i.
  const Index edges = graph.num_edges();
  parallel_for(edges, [&](Index e) {
    const Matrix& q = connections.edge_transport(e);
    Matrix block(b, b);
    if (order == LaplacianOrder::First) {
      block = -q.transpose();
    } else if (!basis) {
      block = -conjugation_matrix(q);
    } else {
      // Columns: Pi^T vec(Q^T S_c Q) for each basis matrix S_c.
      for (Index c = 0; c < b; ++c) {
        const Matrix image = q.transpose() * basis_matrices[static_cast<std::size_t>(c)] * q;
        block.col(c) = -basis->pi.transpose() * Eigen::Map<const Vector>(image.data(), k * k);
      }
    }
    op.set_edge_block(e, block);
  });
  return op;
}

ProjectedConnectionOperator::ProjectedConnectionOperator(NeighborGraph graph,
                                                         const ConnectionGraph& connections,
                                                         SymTracelessBasis basis)
    : graph_(std::move(graph)), basis_(std::move(basis)) {
  if (connections.num_edges() != graph_.num_edges() || connections.edges() != graph_.edges())
    throw ArgumentError("connection Laplacian: connections do not cover the graph's edges");
  if (connections.num_edges() == 0) throw ArgumentError("connection Laplacian: graph has no edges");
  const Index k = connections.k();
  if (basis_.k != k) throw ArgumentError("connection Laplacian: basis k mismatch");
  slot_transports_.resize(static_cast<std::size_t>(2 * graph_.num_edges() * k * k));
  for (Index i = 0; i < graph_.size(); ++i) {
    const auto nb = graph_.neighbors(i);
    const auto ids = graph_.edge_ids(i);
    for (std::size_t s = 0; s < nb.size(); ++s) {
      Eigen::Map<Matrix> slot(slot_transports_.data() + (graph_.offset(i) + static_cast<Index>(s)) * k * k,
                              k, k);
      const Matrix& q = connections.edge_transport(ids[s]);
      if (i < nb[s])
        slot = q;
      else
        slot = q.transpose();
    }
  }
}

template <int K>
void ProjectedConnectionOperator::apply_column(const double* x, double* y, double* lifted) const {
  using Small = Eigen::Matrix<double, K, K>;
  const Index k = basis_.k;
  const Index d = basis_.dim();
  const Index t = graph_.size();
  const Index kk = k * k;
  parallel_for(t, [&](Index j) {
    Eigen::Map<Vector>(lifted + j * kk, kk).noalias() =
        basis_.pi * Eigen::Map<const Vector>(x + j * d, d);
  });
  parallel_for(t, [&](Index i) {
    Small acc = Small::Zero(k, k);
    const auto nb = graph_.neighbors(i);
    const double* q = slot_transports_.data() + graph_.offset(i) * kk;
    for (std::size_t s = 0; s < nb.size(); ++s, q += kk) {
      const Eigen::Map<const Small> qs(q, k, k);
      const Eigen::Map<const Small> phi(lifted + nb[s] * kk, k, k);
      acc.noalias() += qs.transpose() * phi * qs;
    }
    Eigen::Map<Vector> yi(y + i * d, d);
    yi.noalias() = -(basis_.pi.transpose() * Eigen::Map<const Vector>(acc.data(), kk));
    yi += static_cast<double>(nb.size()) * Eigen::Map<const Vector>(x + i * d, d);
  });
}

void ProjectedConnectionOperator::apply(const Matrix& x, Matrix& y) const {
  if (x.rows() != dim())
    throw ArgumentError("operator_matvec: vector dimension " + std::to_string(x.rows()) +
                        " does not match operator dimension " + std::to_string(dim()));
  const Index k = basis_.k;
  y.resize(dim(), x.cols());
  std::vector<double> lifted(static_cast<std::size_t>(graph_.size() * k * k));
  for (Index c = 0; c < x.cols(); ++c) {
    const double* xc = x.data() + c * x.rows();
    double* yc = y.data() + c * y.rows();
    switch (k) {
      case 2: apply_column<2>(xc, yc, lifted.data()); break;
      case 3: apply_column<3>(xc, yc, lifted.data()); break;
      case 4: apply_column<4>(xc, yc, lifted.data()); break;
      case 5: apply_column<5>(xc, yc, lifted.data()); break;
      case 6: apply_column<6>(xc, yc, lifted.data()); break;
      case 7: apply_column<7>(xc, yc, lifted.data()); break;
      case 8: apply_column<8>(xc, yc, lifted.data()); break;
      case 9: apply_column<9>(xc, yc, lifted.data()); break;
      default: apply_column<Eigen::Dynamic>(xc, yc, lifted.data()); break;
    }
  }
}

}  // namespace geomancer
