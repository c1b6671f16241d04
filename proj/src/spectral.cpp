#include "geomancer/spectral.hpp"

#include "geomancer/binary_io.hpp"
#include "geomancer/parallel.hpp"
#include "geomancer/rng.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

namespace geomancer {

namespace {

// Column-rescaled Cholesky-free orthonormalization (SVQB). Applies the same
// transform to `image` (the operator applied to `basis`) when given. Columns
// that are numerically dependent are dropped.
void orthonormalize(Matrix& basis, Matrix* image, double drop_tol = 1e-12) {
  for (int pass = 0; pass < 2 && basis.cols() > 0; ++pass) {
    const Matrix g = gram(basis, basis);
    const Index q = g.rows();
    Vector scale(q);
    for (Index c = 0; c < q; ++c) scale(c) = g(c, c) > 0.0 ? 1.0 / std::sqrt(g(c, c)) : 0.0;
    const Matrix gs = scale.asDiagonal() * g * scale.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(gs);
    const Vector& lambda = eig.eigenvalues();
    const double top = lambda.maxCoeff();
    std::vector<Index> keep;
    for (Index c = 0; c < q; ++c)
      if (lambda(c) > drop_tol * top && top > 0.0) keep.push_back(c);
    Matrix transform(q, static_cast<Index>(keep.size()));
    for (std::size_t c = 0; c < keep.size(); ++c)
      transform.col(static_cast<Index>(c)) =
          scale.asDiagonal() * eig.eigenvectors().col(keep[c]) / std::sqrt(lambda(keep[c]));
    basis = tall_times(basis, transform);
    if (image) *image = tall_times(*image, transform);
  }
}

// z -= y (y^T z), twice.
void project_out(const Eigen::Ref<const Matrix>& y, Matrix& z) {
  if (y.cols() == 0 || z.cols() == 0) return;
  for (int pass = 0; pass < 2; ++pass) z -= tall_times(y, gram(y, z));
}

Vector residual_norms(const Matrix& x, const Matrix& ax, const Vector& lambda, Matrix* residual) {
  Matrix r = ax - x * lambda.asDiagonal();
  Vector norms(r.cols());
  for (Index c = 0; c < r.cols(); ++c) norms(c) = std::sqrt(gram(r.col(c), r.col(c))(0, 0));
  if (residual) *residual = std::move(r);
  return norms;
}

SpectrumResult dense_solve(const LinearOperator& op, Index count) {
  const Index n = op.dim();
  Matrix dense(n, n);
  constexpr Index chunk = 256;
  for (Index c = 0; c < n; c += chunk) {
    const Index w = std::min(chunk, n - c);
    Matrix unit = Matrix::Zero(n, w);
    for (Index j = 0; j < w; ++j) unit(c + j, j) = 1.0;
    Matrix image;
    op.apply(unit, image);
    dense.middleCols(c, w) = image;
  }
  dense = 0.5 * (dense + dense.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(dense);
  SpectrumResult out;
  out.eigenvalues = eig.eigenvalues().head(count);
  out.eigenvectors = eig.eigenvectors().leftCols(count);
  Matrix ax;
  op.apply(out.eigenvectors, ax);
  out.residuals = residual_norms(out.eigenvectors, ax, out.eigenvalues, nullptr);
  out.norm_estimate = std::max(std::abs(eig.eigenvalues()(0)), std::abs(eig.eigenvalues()(n - 1)));
  out.iterations = 0;
  out.converged = true;
  return out;
}

}  // namespace

double estimate_norm(const LinearOperator& op, std::uint64_t seed, int iterations) {
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  Matrix v = rng.gaussian(op.dim(), 1);
  v /= v.norm();
  double estimate = 0.0;
  Matrix av;
  for (int it = 0; it < iterations; ++it) {
    op.apply(v, av);
    const double norm = std::sqrt(gram(av, av)(0, 0));
    estimate = std::max(estimate, norm);
    if (norm == 0.0) break;
    v = av / norm;
  }
  return estimate;
}

namespace {

struct LanczosRun {
  SpectrumResult result;
  bool cleared = false;  // stopped early: lowest Ritz value minus residual is above `floor`
};

// Thick-restart block Lanczos on the orthogonal complement of `locked`.
// With `floor` set, returns as soon as the lowest Ritz pair shows no
// eigenvalue below it.
LanczosRun lanczos(const LinearOperator& op, const EigenOptions& options, Index count, Index basis,
                   Index max_iter, const Matrix& locked, std::uint64_t seed, double& norm,
                   std::optional<double> floor = std::nullopt) {
  const Index n = op.dim();
  const Index step = options.block_size;
  const Index keep = count + (basis - count) / 3;

  Rng rng(seed);
  // Basis V and its image AV live in the leading `used` columns.
  Matrix v(n, basis), av(n, basis), t(0, 0);
  Index used = 0;
  Matrix next = rng.gaussian(n, step);
  project_out(locked, next);
  orthonormalize(next, nullptr);
  Index steps = 0;

  while (true) {
    // Expand the basis with operator images, keeping V orthonormal and
    // T = V^T A V formed explicitly from the stored images.
    while (used + next.cols() <= basis && steps < max_iter) {
      Matrix image;
      op.apply(next, image);
      ++steps;
      const Index w = next.cols();
      v.middleCols(used, w) = next;
      av.middleCols(used, w) = image;
      used += w;
      const auto vb = v.leftCols(used);
      const Matrix coupling = gram(vb, image);
      t.conservativeResize(used, used);
      t.rightCols(w) = coupling;
      t.bottomRows(w) = coupling.transpose();
      t.bottomRightCorner(w, w) = 0.5 * (coupling.bottomRows(w) + coupling.bottomRows(w).transpose());

      next = image - tall_times(vb, coupling);
      next -= tall_times(vb, gram(vb, next));
      project_out(locked, next);
      orthonormalize(next, nullptr);
      if (next.cols() < step) {
        // Invariant subspace reached: continue from fresh random directions.
        Matrix fresh = rng.gaussian(n, step - next.cols());
        project_out(locked, fresh);
        project_out(vb, fresh);
        project_out(next, fresh);
        orthonormalize(fresh, nullptr);
        Matrix joined(n, next.cols() + fresh.cols());
        joined << next, fresh;
        next = std::move(joined);
      }
    }

    Eigen::SelfAdjointEigenSolver<Matrix> eig(t);
    const Vector& theta = eig.eigenvalues();
    norm = std::max({norm, std::abs(theta(0)), std::abs(theta(theta.size() - 1))});
    const Index wanted = std::min(count, t.rows());
    const Matrix c = eig.eigenvectors().leftCols(wanted);
    LanczosRun run;
    SpectrumResult& out = run.result;
    out.eigenvalues = theta.head(wanted);
    out.eigenvectors = tall_times(v.leftCols(used), c);
    const Matrix images = tall_times(av.leftCols(used), c);
    out.residuals = residual_norms(out.eigenvectors, images, out.eigenvalues, nullptr);
    out.norm_estimate = norm;
    out.iterations = steps;
    out.converged = wanted == count && out.residuals.maxCoeff() <= options.tol * norm;
    if (options.verbose) {
      std::cerr << "lanczos step " << steps << " basis " << used << " max relative residual "
                << out.residuals.maxCoeff() / norm << "\n";
    }
    if (out.converged) return run;
    if (floor && out.eigenvalues(0) - out.residuals(0) >= *floor) {
      run.cleared = true;
      return run;
    }
    if (steps >= max_iter) {
      const double worst = out.residuals.maxCoeff() / norm;
      throw ConvergenceError("eigensolver did not converge in " + std::to_string(steps) +
                                 " block steps (max relative residual " + std::to_string(worst) +
                                 ")",
                             std::move(out));
    }

    // Thick restart on the lowest Ritz vectors. The pending block stays
    // orthogonal to them since they lie in span(V).
    const Index kept = std::min(keep, t.rows());
    const Matrix ck = eig.eigenvectors().leftCols(kept);
    v.leftCols(kept) = tall_times(v.leftCols(used), ck);
    av.leftCols(kept) = tall_times(av.leftCols(used), ck);
    used = kept;
    t = theta.head(kept).asDiagonal();
    project_out(v.leftCols(used), next);
    orthonormalize(next, nullptr);
  }
}

// Rayleigh-Ritz on span([a, b]), keeping the lowest `count` pairs.
SpectrumResult merge_pairs(const LinearOperator& op, const Matrix& a, const Matrix& b, Index count, double norm) {
  Matrix x(a.rows(), a.cols() + b.cols());
  x << a, b;
  orthonormalize(x, nullptr);
  Matrix ax;
  op.apply(x, ax);
  Matrix t = gram(x, ax);
  t = 0.5 * (t + t.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(t);
  const Index wanted = std::min(count, t.rows());
  const Matrix c = eig.eigenvectors().leftCols(wanted);
  SpectrumResult out;
  out.eigenvalues = eig.eigenvalues().head(wanted);
  out.eigenvectors = tall_times(x, c);
  out.residuals = residual_norms(out.eigenvectors, tall_times(ax, c), out.eigenvalues, nullptr);
  out.norm_estimate = norm;
  return out;
}

}  // namespace

SpectrumResult smallest_eigenpairs(const LinearOperator& op, const EigenOptions& options) {
  const Index n = op.dim();
  const Index count = options.count;
  if (count < 1 || count >= n)
    throw ArgumentError("smallest_eigenpairs: need 1 <= R < dim (R = " + std::to_string(count) +
                        ", dim = " + std::to_string(n) + ")");
  if (!(options.tol > 0.0)) throw ArgumentError("smallest_eigenpairs: tol must be positive");
  const Index step = options.block_size;
  if (step < 1) throw ArgumentError("smallest_eigenpairs: block size must be >= 1");
  const Index basis = options.basis_size > 0 ? options.basis_size : std::max<Index>(6 * count, 60);
  if (basis < count + 2 * step)
    throw ArgumentError("smallest_eigenpairs: basis size must be >= R + 2 * block size");
  if (2 * (basis + step) > n) return dense_solve(op, count);

  const Index max_iter = options.max_iter > 0
                             ? options.max_iter
                             : static_cast<Index>(std::ceil(10.0 * static_cast<double>(count) *
                                                            std::sqrt(static_cast<double>(n))));
  double norm = 0.0;
  SpectrumResult out = lanczos(op, options, count, basis, max_iter, Matrix(n, 0), options.seed, norm).result;
  Index steps = out.iterations;

  // A Krylov space from one start vector holds a single copy of an exactly
  // repeated eigenvalue. Probe the complement of the converged vectors for
  // copies below lambda_R and fold them in.
  for (Index round = 1; round <= count; ++round) {
    const double top = out.eigenvalues(count - 1);
    const double margin = 10.0 * options.tol * norm;
    if (steps >= max_iter) break;
    LanczosRun probe;
    try {
      probe = lanczos(op, options, count, basis, max_iter - steps, out.eigenvectors,
                      options.seed + 0x5bd1e995ULL * static_cast<std::uint64_t>(round), norm, top - margin);
    } catch (const ConvergenceError& e) {
      // The probe ran out of budget; it only matters if it already found a
      // lower eigenvalue.
      steps += e.partial().iterations;
      if (e.partial().eigenvalues(0) < top - margin) {
        out.iterations = steps;
        out.converged = false;
        throw ConvergenceError("eigensolver found a repeated eigenvalue but ran out of iterations resolving it",
                               std::move(out));
      }
      break;
    }
    steps += probe.result.iterations;
    if (probe.cleared || probe.result.eigenvalues(0) >= top - margin) break;
    if (options.verbose)
      std::cerr << "eigensolver: folding in a repeated eigenvalue " << probe.result.eigenvalues(0) << "\n";
    const Index below = (probe.result.eigenvalues.array() < top - margin).count();
    out = merge_pairs(op, out.eigenvectors, probe.result.eigenvectors.leftCols(below), count, norm);
  }
  out.norm_estimate = norm;
  out.iterations = steps;
  out.converged = out.residuals.maxCoeff() <= options.tol * norm;
  if (!out.converged)
    throw ConvergenceError("eigensolver residuals exceed the tolerance after merging repeated eigenvalues",
                           std::move(out));
  return out;
}

std::vector<MatrixField> eigenvector_to_fields(const SpectrumResult& spectrum,
                                               const SymTracelessBasis& basis, Index count) {
  const Index d = basis.dim();
  const Index total = spectrum.eigenvectors.rows();
  if (d == 0 || total % d != 0)
    throw ArgumentError("eigenvector_to_fields: eigenvector length " + std::to_string(total) +
                        " is not a multiple of the basis dimension " + std::to_string(d));
  if (count < 0 || count > spectrum.count()) count = spectrum.count();
  const Index t = total / d;
  std::vector<MatrixField> fields(static_cast<std::size_t>(count),
                                  MatrixField(static_cast<std::size_t>(t)));
  for (Index r = 0; r < count; ++r) {
    auto& field = fields[static_cast<std::size_t>(r)];
    parallel_for(t, [&](Index i) {
      field[static_cast<std::size_t>(i)] = basis.lift(spectrum.eigenvectors.col(r).segment(i * d, d));
    });
  }
  return fields;
}

std::string spectrum_to_json(const SpectrumResult& spectrum) {
  nlohmann::json j;
  j["eigenvalues"] = std::vector<double>(spectrum.eigenvalues.data(),
                                         spectrum.eigenvalues.data() + spectrum.eigenvalues.size());
  j["residuals"] = std::vector<double>(spectrum.residuals.data(),
                                       spectrum.residuals.data() + spectrum.residuals.size());
  j["norm_estimate"] = spectrum.norm_estimate;
  j["iterations"] = spectrum.iterations;
  j["converged"] = spectrum.converged;
  return j.dump(2);
}

namespace {
constexpr std::string_view kSpectrumMagic = "GEOMSPC";
}

void save_spectrum(const SpectrumResult& spectrum, const std::string& path,
                   const ArtifactStamp& stamp) {
  using namespace binary;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open " + path + " for writing");
  write_magic(out, kSpectrumMagic);
  write_u32(out, 1);
  write_u32(out, 0);
  write_u64(out, stamp.config_hash);
  write_u64(out, stamp.seed);
  write_u64(out, static_cast<std::uint64_t>(spectrum.eigenvectors.rows()));
  write_u64(out, static_cast<std::uint64_t>(spectrum.count()));
  write_f64_array(out, spectrum.eigenvalues.data(), static_cast<std::size_t>(spectrum.count()));
  write_f64_array(out, spectrum.residuals.data(), static_cast<std::size_t>(spectrum.count()));
  write_f64(out, spectrum.norm_estimate);
  write_u64(out, static_cast<std::uint64_t>(spectrum.iterations));
  write_u64(out, spectrum.converged ? 1u : 0u);
  write_f64_array(out, spectrum.eigenvectors.data(),
                  static_cast<std::size_t>(spectrum.eigenvectors.size()));
  if (!out) throw std::runtime_error("failed writing " + path);
}

SpectrumResult load_spectrum(const std::string& path, ArtifactStamp* stamp) {
  using namespace binary;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path);
  expect_magic(in, kSpectrumMagic);
  if (read_u32(in) != 1) throw ArgumentError("unsupported spectrum version");
  read_u32(in);
  ArtifactStamp st;
  st.config_hash = read_u64(in);
  st.seed = read_u64(in);
  const auto dim = static_cast<Index>(read_u64(in));
  const auto count = static_cast<Index>(read_u64(in));
  if (dim < 0 || count < 0 || dim > (Index{1} << 40) || count > 4096)
    throw ArgumentError(path + ": implausible spectrum shape");
  SpectrumResult s;
  s.eigenvalues.resize(count);
  s.residuals.resize(count);
  read_f64_array(in, s.eigenvalues.data(), static_cast<std::size_t>(count));
  read_f64_array(in, s.residuals.data(), static_cast<std::size_t>(count));
  s.norm_estimate = read_f64(in);
  s.iterations = static_cast<Index>(read_u64(in));
  s.converged = read_u64(in) != 0;
  s.eigenvectors.resize(dim, count);
  read_f64_array(in, s.eigenvectors.data(), static_cast<std::size_t>(dim * count));
  if (stamp) *stamp = st;
  return s;
}

}  // namespace geomancer
