#include "geomancer/factorize.hpp"

#include "geomancer/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

namespace geomancer {

void GeomancerConfig::validate(Index t, Index k) const {
  if (k < 2) throw ArgumentError("k must be >= 2 (got " + std::to_string(k) + ")");
  const Index nb = neighbors_for(k);
  if (nb < k)
    throw ArgumentError("k_neighbors must be >= k (got " + std::to_string(nb) + " < " +
                        std::to_string(k) + ")");
  if (t <= nb)
    throw ArgumentError("need more points than neighbors (t = " + std::to_string(t) +
                        ", k_neighbors = " + std::to_string(nb) + ")");
  if (eigen_count < 2) throw ArgumentError("eigen_count must be >= 2");
  if (!(eigen_tol > 0.0)) throw ArgumentError("eigen_tol must be positive");
  if (eigen_max_iter < 0) throw ArgumentError("eigen_max_iter must be >= 0");
  if (gamma && !(*gamma > 0.0)) throw ArgumentError("gamma must be positive");
  if (!(gap_ceiling > 0.0 && gap_ceiling <= 1.0)) throw ArgumentError("gap_ceiling must be in (0, 1]");
  if (!(cluster_threshold > -1.0 && cluster_threshold < 1.0))
    throw ArgumentError("cluster_threshold must be in (-1, 1)");
  if (!(diag_tol > 0.0)) throw ArgumentError("diag_tol must be positive");
  if (diag_max_sweeps < 1) throw ArgumentError("diag_max_sweeps must be >= 1");
}

SpectralGap detect_spectral_gap(const Vector& eigenvalues, std::optional<double> gamma,
                                double ceiling) {
  const Index r = eigenvalues.size();
  if (r < 2) throw ArgumentError("gap detection needs at least 2 eigenvalues");
  for (Index i = 0; i < r; ++i) {
    if (!std::isfinite(eigenvalues(i))) throw ArgumentError("gap detection: non-finite eigenvalue");
    if (i > 0 && eigenvalues(i) < eigenvalues(i - 1))
      throw ArgumentError("gap detection: eigenvalues must be ascending");
  }
  // Round-off can leave PSD eigenvalues marginally negative.
  const Vector lambda = eigenvalues.cwiseMax(0.0);

  SpectralGap gap;
  if (gamma) {
    gap.gap_index = (lambda.array() < *gamma).count();
    if (gap.gap_index == 0 || gap.gap_index == r) {
      gap.message = "no product structure detected (no eigenvalue gap at gamma)";
      gap.gap_index = 0;
      return gap;
    }
    gap.m = gap.gap_index + 1;
    gap.product_structure = true;
    return gap;
  }

  const double top = lambda(r - 1);
  if (!(top > 0.0)) {
    gap.message = "no product structure detected (spectrum is identically zero)";
    return gap;
  }
  const double eps = 1e-12 * top;
  Index best = 0;
  double best_ratio = 0.0;
  for (Index i = 0; i + 1 < r; ++i) {
    const double ratio = (lambda(i + 1) + eps) / (lambda(i) + eps);
    if (ratio > best_ratio) {
      best_ratio = ratio;
      best = i;
    }
  }
  gap.gap_index = best + 1;
  if (!(lambda(best) < ceiling * top)) {
    gap.message = "no product structure detected (no eigenvalue below " + std::to_string(ceiling) +
                  " * lambda_R)";
    gap.gap_index = 0;
    return gap;
  }
  gap.m = gap.gap_index + 1;
  gap.product_structure = true;
  return gap;
}

namespace {

double offdiag_energy(const std::vector<Matrix>& c) {
  double sum = 0.0;
  for (const Matrix& m : c) sum += m.squaredNorm() - m.diagonal().squaredNorm();
  return sum;
}

std::vector<Matrix> rotate_all(const std::vector<Matrix>& mats, const Matrix& w) {
  std::vector<Matrix> out;
  out.reserve(mats.size());
  for (const Matrix& m : mats) out.push_back(w.transpose() * m * w);
  return out;
}

}  // namespace

JointDiagonalization joint_diagonalize(const std::vector<Matrix>& mats, double tol,
                                       Index max_sweeps) {
  if (mats.empty()) throw ArgumentError("joint_diagonalize: no matrices");
  const Index k = mats.front().rows();
  double scale = 0.0;
  for (const Matrix& m : mats) {
    if (m.rows() != k || m.cols() != k) throw ArgumentError("joint_diagonalize: shapes differ");
    scale += m.squaredNorm();
  }
  for (const Matrix& m : mats) {
    if ((m - m.transpose()).norm() > 1e-8 * std::max(1.0, std::sqrt(scale)))
      throw ArgumentError("joint_diagonalize: inputs must be symmetric");
  }

  JointDiagonalization out;
  if (scale == 0.0) {
    out.w = Matrix::Identity(k, k);
    out.diagonals.assign(mats.size(), Vector::Zero(k));
    out.converged = true;
    return out;
  }
  // Work on unit-energy copies so the floors below are scale-free.
  std::vector<Matrix> unit;
  unit.reserve(mats.size());
  for (const Matrix& m : mats) unit.push_back(0.5 * (m + m.transpose()) / std::sqrt(scale));

  // Start from the eigenbasis of a fixed combination with incommensurate weights.
  Matrix combo = Matrix::Zero(k, k);
  constexpr double kGolden = 0.6180339887498949;
  for (std::size_t r = 0; r < unit.size(); ++r) {
    const double x = static_cast<double>(r + 1) * kGolden;
    combo += (1.0 + (x - std::floor(x))) * unit[r];
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(combo);
  Matrix w = eig.eigenvectors();
  std::vector<Matrix> c = rotate_all(unit, w);
  double off = offdiag_energy(c);
  out.initial_residual = off;

  constexpr double kDenominatorFloor = 1e-14;
  constexpr double kStepCap = 0.5;
  constexpr double kNegligible = 1e-30;
  Index sweep = 0;
  bool converged = off <= kNegligible;
  while (!converged && sweep < max_sweeps) {
    ++sweep;
    Matrix e = Matrix::Zero(k, k);
    for (Index p = 0; p < k; ++p) {
      for (Index q = p + 1; q < k; ++q) {
        double num = 0.0, den = 0.0;
        for (const Matrix& cr : c) {
          const double diff = cr(q, q) - cr(p, p);
          num += cr(p, q) * diff;
          den += diff * diff;
        }
        if (den < kDenominatorFloor) continue;
        e(p, q) = num / den;
        e(q, p) = -e(p, q);
      }
    }
    const double norm = e.norm();
    if (norm == 0.0) {
      converged = true;
      break;
    }
    if (norm > kStepCap) e *= kStepCap / norm;

    bool accepted = false;
    for (int halving = 0; halving < 40 && !accepted; ++halving, e *= 0.5) {
      const Matrix trial_w = polar_factor(w * (Matrix::Identity(k, k) + e));
      std::vector<Matrix> trial_c = rotate_all(unit, trial_w);
      const double trial_off = offdiag_energy(trial_c);
      if (trial_off <= off) {
        const double decrease = off - trial_off;
        w = trial_w;
        c = std::move(trial_c);
        converged = decrease < tol * off || trial_off <= kNegligible;
        off = trial_off;
        accepted = true;
      }
    }
    if (!accepted) converged = true;  // no descent direction left at this precision
  }

  out.w = w;
  out.residual = off * scale;
  out.initial_residual *= scale;
  out.sweeps = sweep;
  out.converged = converged;
  out.diagonals.reserve(mats.size());
  for (const Matrix& m : mats) out.diagonals.push_back((w.transpose() * m * w).diagonal());
  return out;
}

ColumnClusters cluster_simplex_corners(const Matrix& psi, double threshold) {
  const Index k = psi.cols();
  ColumnClusters out;
  if (k == 0) return out;
  const Vector norms = psi.colwise().norm().transpose();
  const double largest = norms.maxCoeff();
  std::vector<bool> zero(static_cast<std::size_t>(k));
  for (Index c = 0; c < k; ++c)
    zero[static_cast<std::size_t>(c)] = !(largest > 0.0) || norms(c) < 1e-10 * largest;

  std::vector<Index> label(static_cast<std::size_t>(k));
  std::iota(label.begin(), label.end(), Index{0});
  const auto find = [&](Index x) {
    while (label[static_cast<std::size_t>(x)] != x) x = label[static_cast<std::size_t>(x)];
    return x;
  };
  double margin = std::numeric_limits<double>::infinity();
  for (Index p = 0; p < k; ++p) {
    if (zero[static_cast<std::size_t>(p)]) continue;
    for (Index q = p + 1; q < k; ++q) {
      if (zero[static_cast<std::size_t>(q)]) continue;
      const double cosine = psi.col(p).dot(psi.col(q)) / (norms(p) * norms(q));
      margin = std::min(margin, std::abs(cosine - threshold));
      if (cosine > threshold) {
        const Index a = find(p), b = find(q);
        label[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
      }
    }
  }
  out.margin = std::isfinite(margin) ? margin : 0.0;

  std::vector<Index> cluster_of(static_cast<std::size_t>(k), -1);
  for (Index c = 0; c < k; ++c) {
    if (zero[static_cast<std::size_t>(c)]) {
      out.unassigned.push_back(c);
      continue;
    }
    const Index root = find(c);
    Index& slot = cluster_of[static_cast<std::size_t>(root)];
    if (slot < 0) {
      slot = static_cast<Index>(out.clusters.size());
      out.clusters.emplace_back();
    }
    out.clusters[static_cast<std::size_t>(slot)].push_back(c);
  }
  return out;
}

std::vector<Index> Factorization::dims(Index i) const {
  std::vector<Index> out;
  for (const Matrix& s : subspaces[static_cast<std::size_t>(i)]) out.push_back(s.cols());
  return out;
}

Geometry build_geometry(const PointCloud& points, Index k, const GeomancerConfig& config) {
  Geometry g;
  try {
    g.graph = build_knn_graph(points, config.neighbors_for(k), config.knn);
  } catch (const std::exception& e) {
    throw StageError("graph", e.what());
  }
  try {
    g.frames = estimate_tangent_frames(points, g.graph, k);
  } catch (const std::exception& e) {
    throw StageError("frames", e.what());
  }
  try {
    g.connections = build_connections(g.graph, g.frames);
  } catch (const std::exception& e) {
    throw StageError("connection", e.what());
  }
  return g;
}

SpectrumResult connection_spectrum(const Geometry& geometry, const GeomancerConfig& config) {
  try {
    const ProjectedConnectionOperator op(geometry.graph, geometry.connections,
                                         symmetric_traceless_basis(geometry.frames.k));
    EigenOptions options;
    options.count = config.eigen_count;
    options.tol = config.eigen_tol;
    options.max_iter = config.eigen_max_iter;
    options.seed = config.seed;
    options.verbose = config.verbose;
    return smallest_eigenpairs(op, options);
  } catch (const std::exception& e) {
    throw StageError("spectrum", e.what());
  }
}

Factorization factorize_spectrum(const Geometry& geometry, const SpectrumResult& spectrum,
                                 const GeomancerConfig& config) {
  try {
    const Index t = geometry.graph.size();
    const Index k = geometry.frames.k;
    const SymTracelessBasis basis = symmetric_traceless_basis(k);
    if (spectrum.eigenvectors.rows() != t * basis.dim())
      throw ArgumentError("spectrum does not match the geometry (eigenvector length " +
                          std::to_string(spectrum.eigenvectors.rows()) + ", expected " +
                          std::to_string(t * basis.dim()) + ")");

    const SpectralGap gap = detect_spectral_gap(spectrum.eigenvalues, config.gamma, config.gap_ceiling);
    Factorization f;
    f.m = gap.m;
    f.k = k;
    f.ambient_dim = t > 0 ? geometry.frames[0].rows() : 0;
    f.gap_index = gap.gap_index;
    f.product_structure = gap.product_structure;
    f.message = gap.message;
    f.eigenvalues = spectrum.eigenvalues;
    f.residuals = spectrum.residuals;
    f.subspaces.resize(static_cast<std::size_t>(t));
    f.diagnostics.resize(static_cast<std::size_t>(t));

    if (!gap.product_structure) {
      for (Index i = 0; i < t; ++i) {
        f.subspaces[static_cast<std::size_t>(i)] = {geometry.frames[i]};
        f.diagnostics[static_cast<std::size_t>(i)].clusters = 1;
      }
      return f;
    }

    const std::vector<MatrixField> fields = eigenvector_to_fields(spectrum, basis, gap.gap_index);
    parallel_for(t, [&](Index i) {
      std::vector<Matrix> mats;
      double energy = 0.0;
      for (const MatrixField& field : fields) {
        mats.push_back(field[static_cast<std::size_t>(i)]);
        energy += mats.back().squaredNorm();
      }
      PointDiagnostics& diag = f.diagnostics[static_cast<std::size_t>(i)];
      const JointDiagonalization jd = joint_diagonalize(mats, config.diag_tol, config.diag_max_sweeps);
      diag.offdiag_residual = energy > 0.0 ? jd.residual / energy : 0.0;
      diag.diag_converged = jd.converged;
      diag.sweeps = jd.sweeps;

      Matrix psi(static_cast<Index>(jd.diagonals.size()), k);
      for (std::size_t r = 0; r < jd.diagonals.size(); ++r)
        psi.row(static_cast<Index>(r)) = jd.diagonals[r].transpose();
      const ColumnClusters clusters = cluster_simplex_corners(psi, config.cluster_threshold);
      diag.clusters = static_cast<Index>(clusters.clusters.size());
      diag.unassigned = static_cast<Index>(clusters.unassigned.size());
      diag.cosine_margin = clusters.margin;

      const Matrix rotated = geometry.frames[i] * jd.w;
      auto& out = f.subspaces[static_cast<std::size_t>(i)];
      for (const auto& members : clusters.clusters) {
        Matrix sub(rotated.rows(), static_cast<Index>(members.size()));
        for (std::size_t c = 0; c < members.size(); ++c)
          sub.col(static_cast<Index>(c)) = rotated.col(members[c]);
        out.push_back(std::move(sub));
      }
    });
    return f;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("factorize", e.what());
  }
}

Factorization run_geomancer(const PointCloud& points, Index k, const GeomancerConfig& config) {
  try {
    points.validate();
    config.validate(points.size(), k);
    if (k > points.dim())
      throw ArgumentError("k = " + std::to_string(k) + " exceeds the ambient dimension " +
                          std::to_string(points.dim()));
  } catch (const std::exception& e) {
    throw StageError("config", e.what());
  }
  const Geometry geometry = build_geometry(points, k, config);
  if (config.verbose) std::cerr << "geometry: " << geometry.graph.num_edges() << " edges\n";
  const SpectrumResult spectrum = connection_spectrum(geometry, config);
  return factorize_spectrum(geometry, spectrum, config);
}

}  // namespace geomancer
