#include "geomancer/graph.hpp"

#include "geomancer/block_operator.hpp"
#include "geomancer/parallel.hpp"
#include "geomancer/spectral.hpp"

#include <algorithm>
#include <numeric>
#include <queue>
#include <sstream>

namespace geomancer {

NeighborGraph::NeighborGraph(std::vector<std::vector<Index>> adjacency) {
  const Index t = static_cast<Index>(adjacency.size());
  for (Index i = 0; i < t; ++i) {
    auto& list = adjacency[static_cast<std::size_t>(i)];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    if (list.empty())
      throw ArgumentError("neighbor graph: node " + std::to_string(i) + " has no neighbors");
    for (Index j : list) {
      if (j < 0 || j >= t)
        throw ArgumentError("neighbor graph: node " + std::to_string(i) +
                            " lists out-of-range neighbor " + std::to_string(j));
      if (j == i) throw ArgumentError("neighbor graph: self-loop at node " + std::to_string(i));
    }
  }
  offsets_.assign(static_cast<std::size_t>(t) + 1, 0);
  for (Index i = 0; i < t; ++i)
    offsets_[static_cast<std::size_t>(i) + 1] =
        offsets_[static_cast<std::size_t>(i)] + static_cast<Index>(adjacency[i].size());
  neighbors_.reserve(static_cast<std::size_t>(offsets_.back()));
  for (const auto& list : adjacency) neighbors_.insert(neighbors_.end(), list.begin(), list.end());

  // Edge ids follow (i, j), i < j, in lexicographic order: the upper slots of
  // each row in row order.
  edge_ids_.assign(neighbors_.size(), -1);
  for (Index i = 0; i < t; ++i) {
    for (Index s = offsets_[i]; s < offsets_[i + 1]; ++s) {
      const Index j = neighbors_[s];
      if (j > i) {
        edge_ids_[s] = static_cast<Index>(edges_.size());
        edges_.emplace_back(i, j);
      }
    }
  }
  for (Index i = 0; i < t; ++i) {
    for (Index s = offsets_[i]; s < offsets_[i + 1]; ++s) {
      const Index j = neighbors_[s];
      if (j > i) continue;
      // Mirror slot: find i in row j.
      const auto first = neighbors_.begin() + offsets_[j];
      const auto last = neighbors_.begin() + offsets_[j + 1];
      const auto it = std::lower_bound(first, last, i);
      if (it == last || *it != i)
        throw ArgumentError("neighbor graph: edge " + std::to_string(i) + "-" +
                            std::to_string(j) + " is not symmetric");
      edge_ids_[s] = edge_ids_[static_cast<std::size_t>(it - neighbors_.begin())];
    }
  }
}

Index NeighborGraph::max_degree() const {
  Index best = 0;
  for (Index i = 0; i < size(); ++i) best = std::max(best, degree(i));
  return best;
}

std::vector<std::vector<Index>> NeighborGraph::adjacency() const {
  std::vector<std::vector<Index>> out(static_cast<std::size_t>(size()));
  for (Index i = 0; i < size(); ++i) {
    const auto nb = neighbors(i);
    out[static_cast<std::size_t>(i)].assign(nb.begin(), nb.end());
  }
  return out;
}

std::vector<Index> NeighborGraph::components(Index* count) const {
  std::vector<Index> label(static_cast<std::size_t>(size()), -1);
  Index next = 0;
  std::vector<Index> stack;
  for (Index root = 0; root < size(); ++root) {
    if (label[root] >= 0) continue;
    label[root] = next;
    stack.push_back(root);
    while (!stack.empty()) {
      const Index v = stack.back();
      stack.pop_back();
      for (Index w : neighbors(v)) {
        if (label[w] < 0) {
          label[w] = next;
          stack.push_back(w);
        }
      }
    }
    ++next;
  }
  if (count) *count = next;
  return label;
}

namespace {

// Fixed summation order so brute force and the tree agree bit for bit.
inline double squared_distance(const double* a, const double* b, Index n) {
  double s = 0.0;
  for (Index c = 0; c < n; ++c) {
    const double d = a[c] - b[c];
    s += d * d;
  }
  return s;
}

struct Candidate {
  double dist;
  Index index;
  bool operator<(const Candidate& o) const {
    return dist < o.dist || (dist == o.dist && index < o.index);
  }
};

// Bounded max-heap of the k best (distance, index) pairs.
class NeighborHeap {
 public:
  explicit NeighborHeap(Index k) : k_(k) { heap_.reserve(static_cast<std::size_t>(k)); }

  bool full() const { return static_cast<Index>(heap_.size()) == k_; }
  double worst() const { return full() ? heap_.front().dist : std::numeric_limits<double>::infinity(); }

  void offer(Candidate c) {
    if (!full()) {
      heap_.push_back(c);
      std::push_heap(heap_.begin(), heap_.end());
    } else if (c < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = c;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  std::vector<Index> sorted_indices() {
    std::sort(heap_.begin(), heap_.end());
    std::vector<Index> out;
    out.reserve(heap_.size());
    for (const auto& c : heap_) out.push_back(c.index);
    return out;
  }

 private:
  Index k_;
  std::vector<Candidate> heap_;
};

class KdTree {
 public:
  explicit KdTree(const RowMatrix& data) : data_(data), n_(data.cols()) {
    order_.resize(static_cast<std::size_t>(data.rows()));
    std::iota(order_.begin(), order_.end(), Index{0});
    nodes_.reserve(static_cast<std::size_t>(2 * data.rows() / kLeafSize + 2));
    build(0, data.rows());
  }

  std::vector<Index> query(Index self, Index k) const {
    NeighborHeap heap(k);
    std::vector<double> offsets(static_cast<std::size_t>(n_), 0.0);
    search(0, data_.row(self).data(), self, heap, 0.0, offsets);
    return heap.sorted_indices();
  }

 private:
  static constexpr Index kLeafSize = 16;

  struct Node {
    Index begin = 0, end = 0;   // range in order_ for leaves
    Index dim = -1;             // split dimension, -1 for leaves
    double split = 0.0;
    Index left = -1, right = -1;
  };

  Index build(Index begin, Index end) {
    const Index id = static_cast<Index>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= kLeafSize) return id;

    Index best_dim = 0;
    double best_spread = -1.0;
    for (Index c = 0; c < n_; ++c) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (Index s = begin; s < end; ++s) {
        const double v = data_(order_[s], c);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_spread) {
        best_spread = hi - lo;
        best_dim = c;
      }
    }
    if (best_spread <= 0.0) return id;  // all points identical: keep as a leaf

    const Index mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](Index a, Index b) {
                       const double va = data_(a, best_dim), vb = data_(b, best_dim);
                       return va < vb || (va == vb && a < b);
                     });
    const double split = data_(order_[mid], best_dim);
    const Index left = build(begin, mid);
    const Index right = build(mid, end);
    Node& node = nodes_[static_cast<std::size_t>(id)];
    node.dim = best_dim;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
  }

  // `lower` is a lower bound on the squared distance from the query to the
  // node's cell, assembled from per-dimension offsets.
  void search(Index id, const double* q, Index self, NeighborHeap& heap, double lower,
              std::vector<double>& offsets) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.dim < 0) {
      for (Index s = node.begin; s < node.end; ++s) {
        const Index j = order_[s];
        if (j == self) continue;
        heap.offer({squared_distance(q, data_.row(j).data(), n_), j});
      }
      return;
    }
    // Left holds values <= split, right holds values >= split.
    const double diff = q[node.dim] - node.split;
    const Index near = diff < 0.0 ? node.left : node.right;
    const Index far = diff < 0.0 ? node.right : node.left;
    search(near, q, self, heap, lower, offsets);

    const double old = offsets[node.dim];
    const double far_lower = lower - old * old + diff * diff;
    // Equal distances may still improve the index tie-break, hence <=.
    if (far_lower <= heap.worst()) {
      offsets[node.dim] = diff;
      search(far, q, self, heap, far_lower, offsets);
      offsets[node.dim] = old;
    }
  }

  const RowMatrix& data_;
  Index n_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
};

std::vector<Index> brute_force_query(const RowMatrix& data, Index self, Index k) {
  NeighborHeap heap(k);
  const double* q = data.row(self).data();
  for (Index j = 0; j < data.rows(); ++j) {
    if (j == self) continue;
    heap.offer({squared_distance(q, data.row(j).data(), data.cols()), j});
  }
  return heap.sorted_indices();
}

}  // namespace

std::vector<std::vector<Index>> k_nearest_neighbors(const PointCloud& points, Index k,
                                                    const KnnOptions& options) {
  points.validate();
  const Index t = points.size();
  if (k < 1 || k >= t)
    throw ArgumentError("k_neighbors must satisfy 1 <= k_neighbors < t (got " +
                        std::to_string(k) + " with t = " + std::to_string(t) + ")");
  bool use_tree = options.method == KnnMethod::KdTree ||
                  (options.method == KnnMethod::Automatic && t > options.brute_force_limit);
  std::vector<std::vector<Index>> result(static_cast<std::size_t>(t));
  if (use_tree) {
    const KdTree tree(points.data);
    parallel_for(t, [&](Index i) { result[i] = tree.query(i, k); });
  } else {
    parallel_for(t, [&](Index i) { result[i] = brute_force_query(points.data, i, k); });
  }
  return result;
}

NeighborGraph build_knn_graph(const PointCloud& points, Index k_neighbors,
                              const KnnOptions& options) {
  const auto knn = k_nearest_neighbors(points, k_neighbors, options);
  std::vector<std::vector<Index>> adjacency(knn.size());
  for (std::size_t i = 0; i < knn.size(); ++i) {
    for (Index j : knn[i]) {
      adjacency[i].push_back(j);
      adjacency[static_cast<std::size_t>(j)].push_back(static_cast<Index>(i));
    }
  }
  return NeighborGraph(std::move(adjacency));
}

void canonicalize_signs(Eigen::Ref<Matrix> columns) {
  for (Index c = 0; c < columns.cols(); ++c) {
    Index arg = 0;
    double best = -1.0;
    for (Index r = 0; r < columns.rows(); ++r) {
      const double a = std::abs(columns(r, c));
      if (a > best) {
        best = a;
        arg = r;
      }
    }
    if (columns(arg, c) < 0.0) columns.col(c) = -columns.col(c);
  }
}

TangentFrames estimate_tangent_frames(const PointCloud& points, const NeighborGraph& graph,
                                      Index k) {
  const Index n = points.dim();
  const Index t = points.size();
  if (graph.size() != t) throw ArgumentError("graph and point cloud sizes differ");
  if (k < 1 || k > n)
    throw ArgumentError("manifold dimension k must satisfy 1 <= k <= n (got " +
                        std::to_string(k) + ", n = " + std::to_string(n) + ")");
  for (Index i = 0; i < t; ++i)
    if (graph.degree(i) < k)
      throw NumericalError("insufficient neighbors at node " + std::to_string(i) + ": degree " +
                           std::to_string(graph.degree(i)) + " < k = " + std::to_string(k));

  TangentFrames out;
  out.k = k;
  out.frames.resize(static_cast<std::size_t>(t));
  std::vector<char> degenerate(static_cast<std::size_t>(t), 0);
  parallel_for(t, [&](Index i) {
    const auto nb = graph.neighbors(i);
    Matrix dx(n, static_cast<Index>(nb.size()));
    for (std::size_t s = 0; s < nb.size(); ++s)
      dx.col(static_cast<Index>(s)) = (points.data.row(nb[s]) - points.data.row(i)).transpose();
    Eigen::JacobiSVD<Matrix> svd(dx, Eigen::ComputeThinU);
    const Vector& sigma = svd.singularValues();
    Matrix u = svd.matrixU().leftCols(k);
    canonicalize_signs(u);
    out.frames[static_cast<std::size_t>(i)] = std::move(u);
    const double next = k < sigma.size() ? sigma(k) : 0.0;
    if (k < n && std::abs(sigma(k - 1) - next) <= 1e-12 * std::max(sigma(0), 1e-300))
      degenerate[static_cast<std::size_t>(i)] = 1;
  });
  for (Index i = 0; i < t; ++i)
    if (degenerate[static_cast<std::size_t>(i)]) out.degenerate_points.push_back(i);
  return out;
}

BlockSparseOperator scalar_laplacian(const NeighborGraph& graph) {
  BlockSparseOperator op(graph, 1);
  for (Index i = 0; i < graph.size(); ++i)
    op.diagonal_block(i)(0, 0) = static_cast<double>(graph.degree(i));
  for (Index e = 0; e < graph.num_edges(); ++e) op.set_edge_block(e, Matrix::Constant(1, 1, -1.0));
  return op;
}

PointCloud laplacian_eigenmaps_embed(const NeighborGraph& graph, Index d,
                                     const EmbeddingOptions& options) {
  const Index t = graph.size();
  if (d < 1 || d >= t)
    throw ArgumentError("embedding dimension must satisfy 1 <= d < t (got " + std::to_string(d) +
                        ")");
  Index count = 0;
  graph.components(&count);
  if (count != 1)
    throw NumericalError("laplacian eigenmaps needs a connected graph; found " +
                         std::to_string(count) + " components");

  const BlockSparseOperator lap = scalar_laplacian(graph);
  Matrix vectors;
  if (t <= options.dense_limit || 3 * (d + 1) >= t) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(lap.to_dense());
    vectors = eig.eigenvectors().middleCols(1, d);
  } else {
    EigenOptions eo;
    eo.count = d + 1;
    eo.tol = options.tol;
    eo.max_iter = options.max_iter;
    eo.seed = options.seed;
    const SpectrumResult spectrum = smallest_eigenpairs(lap, eo);
    vectors = spectrum.eigenvectors.middleCols(1, d);
  }
  for (Index c = 0; c < d; ++c) vectors.col(c).normalize();
  canonicalize_signs(vectors);
  return PointCloud(RowMatrix(vectors));
}

}  // namespace geomancer
