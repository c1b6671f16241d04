#include "geomancer/eval.hpp"

#include "geomancer/connection.hpp"
#include "geomancer/parallel.hpp"
#include "geomancer/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace geomancer {

namespace {

void check_orthonormal(const Matrix& a, const char* name) {
  const double err = (a.transpose() * a - Matrix::Identity(a.cols(), a.cols())).cwiseAbs().maxCoeff();
  if (a.cols() > 0 && !(err <= 1e-6))
    throw ArgumentError(std::string("principal_angles: ") + name +
                        " does not have orthonormal columns (deviation " + std::to_string(err) + ")");
}

// Minimum-cost perfect matching on a square cost matrix (Hungarian method).
double assignment_cost(const Matrix& cost) {
  const Index n = cost.rows();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n + 1)), v(static_cast<std::size_t>(n + 1));
  std::vector<Index> match(static_cast<std::size_t>(n + 1)), way(static_cast<std::size_t>(n + 1));
  for (Index i = 1; i <= n; ++i) {
    match[0] = i;
    Index j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const Index i0 = match[static_cast<std::size_t>(j0)];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (Index j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const Index j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (Index j = 1; j <= n; ++j) total += cost(match[static_cast<std::size_t>(j)] - 1, j - 1);
  return total;
}

std::vector<Index> to_index(const std::vector<int>& dims) {
  return {dims.begin(), dims.end()};
}

std::vector<Index> dims_of(const std::vector<Matrix>& subspaces) {
  std::vector<Index> out;
  for (const Matrix& s : subspaces) out.push_back(s.cols());
  return out;
}

// Inverse square root of a symmetric positive definite Gram matrix; false if
// it is numerically singular.
bool inverse_sqrt(const Matrix& gram_matrix, Matrix& out) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram_matrix);
  const Vector& lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  if (!(top > 0.0) || !(lambda.minCoeff() > 1e-10 * top)) return false;
  out = eig.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().asDiagonal() *
        eig.eigenvectors().transpose();
  return true;
}

}  // namespace

Vector principal_angles(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw ArgumentError("principal_angles: ambient dimensions differ (" + std::to_string(a.rows()) +
                        " vs " + std::to_string(b.rows()) + ")");
  check_orthonormal(a, "A");
  check_orthonormal(b, "B");
  const Index count = std::min(a.cols(), b.cols());
  if (count == 0) return Vector(0);
  Eigen::JacobiSVD<Matrix> svd(a.transpose() * b);
  const Vector sigma = svd.singularValues().head(count);  // descending
  Vector angles(count);
  // Ascending cosines give descending angles.
  for (Index c = 0; c < count; ++c)
    angles(c) = std::acos(std::clamp(sigma(count - 1 - c), 0.0, 1.0));
  return angles;
}

double subspace_angle(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) return std::numbers::pi / 2;
  const Vector angles = principal_angles(a, b);
  return angles.size() == 0 ? 0.0 : angles(0);
}

double matched_error(const std::vector<Matrix>& truth, const std::vector<Matrix>& estimate) {
  const Index m = static_cast<Index>(truth.size());
  if (static_cast<Index>(estimate.size()) != m)
    throw ArgumentError("matched_error: subspace counts differ");
  if (m == 0) return 0.0;
  Matrix cost(m, m);
  for (Index j = 0; j < m; ++j)
    for (Index c = 0; c < m; ++c)
      cost(j, c) = subspace_angle(truth[static_cast<std::size_t>(j)], estimate[static_cast<std::size_t>(c)]);
  double best;
  if (m <= 8) {
    std::vector<Index> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), Index{0});
    best = std::numeric_limits<double>::infinity();
    do {
      double sum = 0.0;
      for (Index j = 0; j < m; ++j) sum += cost(j, perm[static_cast<std::size_t>(j)]);
      best = std::min(best, sum);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    best = assignment_cost(cost);
  }
  return best / static_cast<double>(m);
}

bool same_shape(const std::vector<Index>& a, const std::vector<Index>& b) {
  std::vector<Index> x = a, y = b;
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return x == y;
}

ErrorReport score_subspaces(const std::vector<std::vector<Matrix>>& estimate, const GroundTruth& truth,
                            const std::vector<bool>* valid) {
  const Index t = static_cast<Index>(estimate.size());
  if (t != truth.size())
    throw ArgumentError("disentangling_error: point counts differ (" + std::to_string(t) + " vs " +
                        std::to_string(truth.size()) + ")");
  if (valid && static_cast<Index>(valid->size()) != t)
    throw ArgumentError("disentangling_error: validity mask has the wrong length");
  const std::vector<Index> truth_dims = to_index(truth.factor_dims);

  ErrorReport report;
  report.points = t;
  report.per_point.assign(static_cast<std::size_t>(t), std::numeric_limits<double>::quiet_NaN());
  std::vector<char> shape_ok(static_cast<std::size_t>(t), 0);
  parallel_for(t, [&](Index i) {
    const auto& est = estimate[static_cast<std::size_t>(i)];
    if (!same_shape(dims_of(est), truth_dims)) return;
    shape_ok[static_cast<std::size_t>(i)] = 1;
    if (valid && !(*valid)[static_cast<std::size_t>(i)]) return;
    report.per_point[static_cast<std::size_t>(i)] = matched_error(truth.bases[static_cast<std::size_t>(i)], est);
  });

  double sum = 0.0;
  Index good = 0;
  for (Index i = 0; i < t; ++i) {
    if (!shape_ok[static_cast<std::size_t>(i)]) {
      ++report.excluded;
      continue;
    }
    ++good;
    const double e = report.per_point[static_cast<std::size_t>(i)];
    if (std::isnan(e)) {
      ++report.unaligned;
      continue;
    }
    sum += e;
    ++report.evaluated;
  }
  report.shape_accuracy = t > 0 ? static_cast<double>(good) / static_cast<double>(t) : 0.0;
  if (report.evaluated > 0) {
    report.mean_error = sum / static_cast<double>(report.evaluated);
    double sq = 0.0;
    for (double e : report.per_point)
      if (!std::isnan(e)) sq += (e - report.mean_error) * (e - report.mean_error);
    report.error_std = std::sqrt(sq / static_cast<double>(report.evaluated));
  } else {
    report.mean_error = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

ErrorReport disentangling_error(const Factorization& fact, const GroundTruth& truth) {
  return score_subspaces(fact.subspaces, truth);
}

double shape_accuracy(const Factorization& fact, const std::vector<int>& truth_dims) {
  const Index t = fact.size();
  if (t == 0) return 0.0;
  const std::vector<Index> want = to_index(truth_dims);
  Index good = 0;
  for (Index i = 0; i < t; ++i)
    if (same_shape(fact.dims(i), want)) ++good;
  return static_cast<double>(good) / static_cast<double>(t);
}

ChanceBaseline chance_baseline(Index k, const std::vector<int>& dims, Index samples,
                               std::uint64_t seed, const Matrix* rotation) {
  if (k < 1) throw ArgumentError("chance_baseline: k must be >= 1");
  if (samples < 1) throw ArgumentError("chance_baseline: samples must be >= 1");
  if (dims.empty()) throw ArgumentError("chance_baseline: no subspace dims");
  Index total = 0;
  for (int d : dims) {
    if (d < 1) throw ArgumentError("chance_baseline: dims must be >= 1");
    total += d;
  }
  if (total > k) throw ArgumentError("chance_baseline: dims sum exceeds k");
  if (rotation && (rotation->rows() != k || rotation->cols() != k))
    throw ArgumentError("chance_baseline: rotation must be k x k");

  const auto split = [&](const Matrix& q) {
    std::vector<Matrix> parts;
    Index c = 0;
    for (int d : dims) {
      parts.push_back(q.middleCols(c, d));
      c += d;
    }
    return parts;
  };
  Rng rng(seed);
  double sum = 0.0, sq = 0.0;
  for (Index s = 0; s < samples; ++s) {
    Matrix a = haar_orthogonal(rng, static_cast<int>(k));
    const Matrix b = haar_orthogonal(rng, static_cast<int>(k));
    if (rotation) a = *rotation * a;
    const double e = matched_error(split(a), split(b));
    sum += e;
    sq += e * e;
  }
  ChanceBaseline out;
  out.samples = samples;
  out.mean = sum / static_cast<double>(samples);
  out.std = std::sqrt(std::max(0.0, sq / static_cast<double>(samples) - out.mean * out.mean));
  return out;
}

Index Alignment::unaligned_count() const {
  return static_cast<Index>(std::count(aligned.begin(), aligned.end(), false));
}

Alignment align_to_ground_truth(const PointCloud& latent_points,
                                const std::vector<Matrix>& latent_frames,
                                const PointCloud& data_points, const TangentFrames& data_frames,
                                const NeighborGraph& graph) {
  const Index t = graph.size();
  if (latent_points.size() != t || data_points.size() != t ||
      static_cast<Index>(latent_frames.size()) != t || data_frames.size() != t)
    throw ArgumentError("align_to_ground_truth: point counts differ");
  const Index k = data_frames.k;
  Alignment out;
  out.rotations.assign(static_cast<std::size_t>(t), Matrix::Identity(k, k));
  out.aligned.assign(static_cast<std::size_t>(t), false);
  for (Index i = 0; i < t; ++i) {
    const Matrix& uz = latent_frames[static_cast<std::size_t>(i)];
    if (uz.cols() != k || uz.rows() != latent_points.dim() || data_frames[i].rows() != data_points.dim())
      throw ArgumentError("align_to_ground_truth: frame shapes do not match at point " + std::to_string(i));
  }
  std::vector<char> ok(static_cast<std::size_t>(t), 0);
  parallel_for(t, [&](Index i) {
    const Matrix& uz = latent_frames[static_cast<std::size_t>(i)];
    const Matrix& ux = data_frames[i];
    const auto nb = graph.neighbors(i);
    const Index count = static_cast<Index>(nb.size());
    Matrix dz(count, latent_points.dim()), dx(count, data_points.dim());
    for (Index s = 0; s < count; ++s) {
      dz.row(s) = latent_points.point(nb[static_cast<std::size_t>(s)]) - latent_points.point(i);
      dx.row(s) = data_points.point(nb[static_cast<std::size_t>(s)]) - data_points.point(i);
    }
    const Matrix vz = dz * uz;
    const Matrix vx = dx * ux;
    Matrix wz, wx;
    if (!inverse_sqrt(vz.transpose() * vz, wz) || !inverse_sqrt(vx.transpose() * vx, wx)) return;
    out.rotations[static_cast<std::size_t>(i)] = polar_factor(wz * vz.transpose() * vx * wx);
    ok[static_cast<std::size_t>(i)] = 1;
  });
  for (Index i = 0; i < t; ++i) out.aligned[static_cast<std::size_t>(i)] = ok[static_cast<std::size_t>(i)] != 0;
  return out;
}

std::vector<std::vector<Matrix>> lift_to_latent(const Factorization& fact, const Alignment& alignment,
                                                const std::vector<Matrix>& latent_frames,
                                                const TangentFrames& data_frames) {
  const Index t = fact.size();
  if (static_cast<Index>(alignment.rotations.size()) != t ||
      static_cast<Index>(latent_frames.size()) != t || data_frames.size() != t)
    throw ArgumentError("lift_to_latent: point counts differ");
  std::vector<std::vector<Matrix>> out(static_cast<std::size_t>(t));
  parallel_for(t, [&](Index i) {
    const Matrix carry = latent_frames[static_cast<std::size_t>(i)] *
                         alignment.rotations[static_cast<std::size_t>(i)] *
                         data_frames[i].transpose();
    for (const Matrix& s : fact.subspaces[static_cast<std::size_t>(i)])
      out[static_cast<std::size_t>(i)].push_back(carry * s);
  });
  return out;
}

std::string ErrorReport::to_json(bool include_points) const {
  nlohmann::json j;
  const auto number = [](double x) { return std::isnan(x) ? nlohmann::json() : nlohmann::json(x); };
  j["mean_error"] = number(mean_error);
  j["error_std"] = number(error_std);
  j["shape_accuracy"] = shape_accuracy;
  j["points"] = points;
  j["evaluated"] = evaluated;
  j["excluded"] = excluded;
  j["unaligned"] = unaligned;
  if (chance_mean) j["chance_mean"] = *chance_mean;
  if (chance_std) j["chance_std"] = *chance_std;
  if (include_points) {
    nlohmann::json arr = nlohmann::json::array();
    for (double e : per_point) arr.push_back(number(e));
    j["per_point"] = std::move(arr);
  }
  return j.dump(2);
}

}  // namespace geomancer
