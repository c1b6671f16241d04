#pragma once

// Independent oracles and small utilities shared by the unit tests.

#include "geomancer/common.hpp"
#include "geomancer/connection.hpp"
#include "geomancer/graph.hpp"
#include "geomancer/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace geomancer::test {

/// One-sample Kolmogorov-Smirnov statistic against a CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// Asymptotic KS critical value at significance 0.01.
inline double ks_critical_01(std::size_t n) { return 1.628 / std::sqrt(static_cast<double>(n)); }

/// Dense matrix of an operator, column by column from unit vectors.
template <typename Op>
Matrix materialize(const Op& op) {
  const Index n = op.dim();
  Matrix eye = Matrix::Identity(n, n);
  Matrix out;
  op.apply(eye, out);
  return out;
}

/// Orthonormal basis from QR of a Gaussian matrix (test-side generator).
inline Matrix random_orthonormal(Rng& rng, Index rows, Index cols) {
  Matrix g = rng.gaussian(rows, cols);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(rows, cols);
}

inline Matrix random_rotation(Rng& rng, Index n) {
  Matrix q = random_orthonormal(rng, n, n);
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

/// k x k matrix of the unit basis element e_a e_b^T.
inline Matrix unit(Index k, Index a, Index b) {
  Matrix m = Matrix::Zero(k, k);
  m(a, b) = 1.0;
  return m;
}

/// Column-stacking vectorization.
inline Vector vec(const Matrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

inline Matrix unvec(const Eigen::Ref<const Vector>& v, Index k) { return Eigen::Map<const Matrix>(v.data(), k, k); }

/// Dense connection Laplacian built straight from its definition: node blocks
/// deg_i * I, edge maps v_j -> -Q_ij^T v_j (order 1) or S_j -> -Q_ij^T S_j Q_ij
/// (order 2, applied to each unit matrix). Optionally sandwiched by Pi.
inline Matrix dense_connection_laplacian(const NeighborGraph& graph, const ConnectionGraph& conn, int order,
                                         const Matrix* pi = nullptr) {
  const Index k = conn.k();
  const Index b = order == 1 ? k : k * k;
  const Index t = graph.size();
  Matrix full = Matrix::Zero(t * b, t * b);
  for (Index i = 0; i < t; ++i) full.block(i * b, i * b, b, b) = static_cast<double>(graph.degree(i)) * Matrix::Identity(b, b);
  for (Index e = 0; e < conn.num_edges(); ++e) {
    const auto [i, j] = conn.edges()[static_cast<std::size_t>(e)];
    const Matrix q = conn.edge_transport(e);  // carries i to j
    // Block (i, j) acts on node j's value: -Q_ij^T v_j.
    Matrix bij(b, b), bji(b, b);
    if (order == 1) {
      bij = -q.transpose();
      bji = -q;
    } else {
      for (Index c = 0; c < b; ++c) {
        const Matrix e_c = unit(k, c % k, c / k);
        bij.col(c) = -vec(q.transpose() * e_c * q);
        bji.col(c) = -vec(q * e_c * q.transpose());
      }
    }
    full.block(i * b, j * b, b, b) = bij;
    full.block(j * b, i * b, b, b) = bji;
  }
  if (!pi) return full;
  const Index d = pi->cols();
  Matrix big = Matrix::Zero(t * b, t * d);
  for (Index i = 0; i < t; ++i) big.block(i * b, i * d, b, d) = *pi;
  return big.transpose() * full * big;
}

/// Orients frames consistently by breadth-first transport from node 0: a
/// node's last column is flipped when the overlap with its tree parent has
/// negative determinant. Assumes a connected graph.
inline TangentFrames orient_along_tree(const NeighborGraph& graph, TangentFrames frames) {
  std::vector<bool> seen(static_cast<std::size_t>(graph.size()), false);
  std::vector<Index> queue{0};
  seen[0] = true;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const Index i = queue[head];
    for (Index j : graph.neighbors(i)) {
      if (seen[static_cast<std::size_t>(j)]) continue;
      seen[static_cast<std::size_t>(j)] = true;
      Matrix& fj = frames.frames[static_cast<std::size_t>(j)];
      if ((fj.transpose() * frames[i]).determinant() < 0) fj.col(fj.cols() - 1) *= -1.0;
      queue.push_back(j);
    }
  }
  return frames;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("geomancer-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Largest principal angle between two column spans via an independent SVD.
inline double largest_angle(const Matrix& a, const Matrix& b) {
  Eigen::HouseholderQR<Matrix> qa(a), qb(b);
  const Matrix oa = qa.householderQ() * Matrix::Identity(a.rows(), a.cols());
  const Matrix ob = qb.householderQ() * Matrix::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<Matrix> svd(oa.transpose() * ob);
  const double smin = svd.singularValues().minCoeff();
  if (smin < std::sqrt(0.5) || a.cols() > b.cols()) return std::acos(std::clamp(smin, -1.0, 1.0));
  // Small angles: acos loses half the digits, the sine of the residual does not.
  const Matrix residual = oa - ob * (ob.transpose() * oa);
  Eigen::JacobiSVD<Matrix> rs(residual);
  return std::asin(std::min(1.0, rs.singularValues()(0)));
}

}  // namespace geomancer::test
