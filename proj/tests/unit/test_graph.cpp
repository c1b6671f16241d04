#include "helpers.hpp"

#include "geomancer/block_operator.hpp"
#include "geomancer/graph.hpp"
#include "geomancer/spectral.hpp"
#include "geomancer/synth.hpp"

#include <doctest.h>

#include <numeric>

using namespace geomancer;
using geomancer::test::largest_angle;
using geomancer::test::materialize;

namespace {

// Union-find component count, independent of NeighborGraph::components.
Index count_components(const NeighborGraph& g) {
  std::vector<Index> parent(static_cast<std::size_t>(g.size()));
  std::iota(parent.begin(), parent.end(), Index{0});
  std::function<Index(Index)> find = [&](Index x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& [i, j] : g.edges()) parent[find(i)] = find(j);
  Index roots = 0;
  for (Index i = 0; i < g.size(); ++i) roots += find(i) == i;
  return roots;
}

void check_graph_invariants(const NeighborGraph& g) {
  for (Index i = 0; i < g.size(); ++i) {
    const auto nb = g.neighbors(i);
    CHECK(std::is_sorted(nb.begin(), nb.end()));
    for (Index j : nb) {
      CHECK(j != i);
      const auto back = g.neighbors(j);
      CHECK(std::binary_search(back.begin(), back.end(), i));
    }
  }
}

NeighborGraph cycle(Index t) {
  std::vector<std::vector<Index>> adj(static_cast<std::size_t>(t));
  for (Index i = 0; i < t; ++i) {
    adj[i].push_back((i + 1) % t);
    adj[i].push_back((i + t - 1) % t);
  }
  return NeighborGraph(adj);
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("collinear points give a path graph") {
  RowMatrix x(3, 2);
  x << 0, 0, 1, 0, 2, 0;
  const NeighborGraph g = build_knn_graph(PointCloud(x), 1);
  CHECK(g.num_edges() == 2);
  CHECK(g.adjacency() == std::vector<std::vector<Index>>{{1}, {0, 2}, {1}});
}

TEST_CASE("kNN graph is symmetric without self loops") {
  const PointCloud pc = sample_sphere(2, 1500, 1);
  const NeighborGraph g = build_knn_graph(pc, 5);
  check_graph_invariants(g);
  for (Index i = 0; i < g.size(); ++i) CHECK(g.degree(i) >= 5);
}

TEST_CASE("1000 points on S2 with 4 neighbors are connected") {
  const NeighborGraph g = build_knn_graph(sample_sphere(2, 1000, 7), 4);
  Index count = 0;
  g.components(&count);
  CHECK(count_components(g) == 1);
  CHECK(count == 1);
}

TEST_CASE("brute force and kd-tree return identical neighbors") {
  const PointCloud pc = sample_product(ManifoldSpec::parse("S2xS1"), 3000, 5).points;
  KnnOptions brute{KnnMethod::BruteForce};
  KnnOptions tree{KnnMethod::KdTree};
  CHECK(k_nearest_neighbors(pc, 8, brute) == k_nearest_neighbors(pc, 8, tree));
  CHECK(build_knn_graph(pc, 8, brute) == build_knn_graph(pc, 8, tree));
}

TEST_CASE("neighbor graph construction rejects bad input") {
  CHECK_THROWS_AS(NeighborGraph({{1}, {}}), ArgumentError);       // asymmetric / isolated
  CHECK_THROWS_AS(NeighborGraph({{0}, {0}}), ArgumentError);      // self loop
  CHECK_THROWS_AS(NeighborGraph({{3}, {0}}), ArgumentError);      // out of range
  RowMatrix x(3, 1);
  x << 0, 1, 2;
  CHECK_THROWS_AS(build_knn_graph(PointCloud(x), 3), ArgumentError);
}

TEST_CASE("frames of coplanar points span the plane") {
  Rng rng(4);
  const Matrix plane = test::random_orthonormal(rng, 5, 2);
  const Matrix coeffs = rng.gaussian(200, 2);
  const PointCloud pc{RowMatrix(coeffs * plane.transpose())};
  const NeighborGraph g = build_knn_graph(pc, 6);
  const TangentFrames f = estimate_tangent_frames(pc, g, 2);
  for (Index i = 0; i < f.size(); ++i) {
    CHECK((f[i].transpose() * f[i] - Matrix::Identity(2, 2)).norm() < 1e-12);
    CHECK(largest_angle(f[i], plane) < 1e-10);
  }
}

TEST_CASE("S2 frames approximate the analytic tangent planes") {
  const ProductSample s = sample_product(ManifoldSpec::parse("S2"), 2000, 8);
  const NeighborGraph g = build_knn_graph(s.points, 4);
  const TangentFrames f = estimate_tangent_frames(s.points, g, 2);
  double total = 0.0;
  for (Index i = 0; i < f.size(); ++i) total += largest_angle(f[i], s.truth.bases[i][0]);
  CHECK(total / static_cast<double>(f.size()) < 0.1);
}

TEST_CASE("k equal to the ambient dimension gives orthogonal frames") {
  const PointCloud pc = sample_sphere(2, 100, 2);
  const TangentFrames f = estimate_tangent_frames(pc, build_knn_graph(pc, 4), 3);
  for (Index i = 0; i < f.size(); ++i) CHECK((f[i].transpose() * f[i] - Matrix::Identity(3, 3)).norm() < 1e-12);
}

TEST_CASE("frame spans do not depend on point order") {
  const PointCloud pc = sample_product(ManifoldSpec::parse("S2xS1"), 800, 3).points;
  std::vector<Index> perm(800);
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(5);
  for (Index i = 799; i > 0; --i) std::swap(perm[i], perm[static_cast<Index>(rng.uniform() * (i + 1))]);
  RowMatrix shuffled(800, pc.dim());
  for (Index i = 0; i < 800; ++i) shuffled.row(i) = pc.data.row(perm[i]);
  const PointCloud pp(shuffled);
  const TangentFrames a = estimate_tangent_frames(pc, build_knn_graph(pc, 6), 3);
  const TangentFrames b = estimate_tangent_frames(pp, build_knn_graph(pp, 6), 3);
  for (Index i = 0; i < 800; ++i) CHECK(largest_angle(a[perm[i]], b[i]) < 1e-8);
}

TEST_CASE("scalar Laplacian basics") {
  RowMatrix x(3, 1);
  x << 0, 1, 2;
  const BlockSparseOperator path = scalar_laplacian(build_knn_graph(PointCloud(x), 1));
  const Matrix dense = materialize(path);
  CHECK(dense.diagonal() == Vector((Vector(3) << 1, 2, 1).finished()));
  Eigen::SelfAdjointEigenSolver<Matrix> es(dense);
  CHECK(es.eigenvalues()(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(es.eigenvalues()(1) == doctest::Approx(1.0));
  CHECK(es.eigenvalues()(2) == doctest::Approx(3.0));

  const NeighborGraph g = build_knn_graph(sample_sphere(2, 300, 1), 5);
  const BlockSparseOperator lap = scalar_laplacian(g);
  CHECK(lap.apply(Vector::Ones(300)).cwiseAbs().maxCoeff() == 0.0);
  Rng rng(1);
  for (int r = 0; r < 100; ++r) {
    const Vector v = rng.gaussian(300, 1);
    CHECK(v.dot(lap.apply(v)) >= 0.0);
  }
  // Dense construction from the adjacency.
  Matrix oracle = Matrix::Zero(300, 300);
  for (const auto& [i, j] : g.edges()) {
    oracle(i, j) = oracle(j, i) = -1.0;
    oracle(i, i) += 1.0;
    oracle(j, j) += 1.0;
  }
  const Vector v = rng.gaussian(300, 1);
  CHECK((lap.apply(v) - oracle * v).norm() <= 1e-12 * (oracle * v).norm());
}

TEST_CASE("Laplacian Eigenmaps of a cycle lie on an ellipse") {
  const NeighborGraph g = cycle(50);
  const PointCloud emb = laplacian_eigenmaps_embed(g, 2);
  REQUIRE(emb.dim() == 2);
  Matrix design(50, 6);
  for (Index i = 0; i < 50; ++i) {
    const double x = emb.data(i, 0), y = emb.data(i, 1);
    design.row(i) << x * x, x * y, y * y, x, y, 1.0;
  }
  for (Index c = 0; c < 6; ++c) design.col(c).normalize();
  Eigen::JacobiSVD<Matrix> svd(design);
  const Vector s = svd.singularValues();
  CHECK(s(5) / s(0) < 1e-6);
}

TEST_CASE("Laplacian Eigenmaps columns are unit, centered and complete") {
  const NeighborGraph g = build_knn_graph(sample_sphere(2, 400, 6), 6);
  const PointCloud emb = laplacian_eigenmaps_embed(g, 5);
  for (Index c = 0; c < 5; ++c) {
    CHECK(std::abs(emb.data.col(c).norm() - 1.0) < 1e-10);
    CHECK(std::abs(emb.data.col(c).sum()) < 1e-8);
  }
  const NeighborGraph small = cycle(12);
  const PointCloud all = laplacian_eigenmaps_embed(small, 11);
  CHECK(all.dim() == 11);
  Matrix gram = all.data.transpose() * all.data;
  CHECK((gram - Matrix::Identity(11, 11)).norm() < 1e-10);
  CHECK_THROWS_AS(laplacian_eigenmaps_embed(small, 12), ArgumentError);
}

TEST_CASE("disconnected graphs are refused by the embedding") {
  const NeighborGraph g({{1}, {0}, {3}, {2}});
  CHECK_THROWS_WITH_AS(laplacian_eigenmaps_embed(g, 1), doctest::Contains("2 components"), NumericalError);
}

TEST_CASE("sign canonicalization") {
  Matrix m(3, 2);
  m << 0.1, -0.5, -0.9, 0.2, 0.3, 0.1;
  canonicalize_signs(m);
  CHECK(m(1, 0) > 0);
  CHECK(m(0, 1) > 0);
}

}  // TEST_SUITE
