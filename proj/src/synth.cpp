#include "geomancer/synth.hpp"

#include "geomancer/rng.hpp"

#include <charconv>
#include <cmath>

namespace geomancer {

void PointCloud::validate() const {
  if (data.rows() < 1 || data.cols() < 1)
    throw ArgumentError("point cloud must have at least one point and one dimension");
  if (!data.allFinite()) throw ArgumentError("point cloud contains non-finite entries");
}

int intrinsic_dim(const FactorSpec& factor) {
  return std::visit(
      [](const auto& f) -> int {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Sphere>)
          return f.n;
        else
          return f.n * (f.n - 1) / 2;
      },
      factor);
}

int ambient_dim(const FactorSpec& factor) {
  return std::visit(
      [](const auto& f) -> int {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Sphere>)
          return f.n + 1;
        else
          return f.n * f.n;
      },
      factor);
}

std::string factor_name(const FactorSpec& factor) {
  if (const auto* s = std::get_if<Sphere>(&factor)) return "S" + std::to_string(s->n);
  return "SO" + std::to_string(std::get<SpecialOrthogonal>(factor).n);
}

int ManifoldSpec::intrinsic_dim() const {
  int total = 0;
  for (const auto& f : factors) total += geomancer::intrinsic_dim(f);
  return total;
}

int ManifoldSpec::ambient_dim() const {
  int total = 0;
  for (const auto& f : factors) total += geomancer::ambient_dim(f);
  return total;
}

std::vector<int> ManifoldSpec::factor_dims() const {
  std::vector<int> dims;
  dims.reserve(factors.size());
  for (const auto& f : factors) dims.push_back(geomancer::intrinsic_dim(f));
  return dims;
}

void ManifoldSpec::validate() const {
  if (factors.empty()) throw ArgumentError("manifold spec needs at least one factor");
  for (const auto& f : factors) {
    if (const auto* s = std::get_if<Sphere>(&f); s && s->n < 1)
      throw ArgumentError("sphere dimension must be >= 1");
    if (const auto* g = std::get_if<SpecialOrthogonal>(&f); g && g->n < 2)
      throw ArgumentError("SO(n) requires n >= 2");
  }
}

std::string ManifoldSpec::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i) out += 'x';
    out += factor_name(factors[i]);
  }
  return out;
}

ManifoldSpec ManifoldSpec::parse(std::string_view text) {
  ManifoldSpec spec;
  if (text.empty()) throw ArgumentError("empty manifold spec");
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('x', pos), text.size());
    const std::string_view token = text.substr(pos, end - pos);
    std::string_view digits;
    bool rotation = false;
    if (token.starts_with("SO")) {
      rotation = true;
      digits = token.substr(2);
    } else if (token.starts_with("S")) {
      digits = token.substr(1);
    } else {
      throw ArgumentError("bad factor '" + std::string(token) + "' in manifold spec '" +
                          std::string(text) + "' (expected S<n> or SO<n>)");
    }
    int n = 0;
    const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
    if (digits.empty() || ec != std::errc() || ptr != digits.data() + digits.size())
      throw ArgumentError("bad dimension in factor '" + std::string(token) + "'");
    if (rotation)
      spec.factors.emplace_back(SpecialOrthogonal{n});
    else
      spec.factors.emplace_back(Sphere{n});
    if (end == text.size()) break;
    pos = end + 1;
    if (pos == text.size()) throw ArgumentError("manifold spec ends with 'x'");
  }
  spec.validate();
  return spec;
}

namespace {

void fill_sphere(Rng& rng, int n, Eigen::Ref<RowMatrix> out) {
  for (Index i = 0; i < out.rows(); ++i) {
    double norm = 0.0;
    do {
      for (int c = 0; c <= n; ++c) out(i, c) = rng.normal();
      norm = out.row(i).norm();
    } while (norm == 0.0);
    out.row(i) /= norm;
  }
}

void fill_rotations(Rng& rng, int n, Eigen::Ref<RowMatrix> out) {
  for (Index i = 0; i < out.rows(); ++i) {
    Matrix q = haar_orthogonal(rng, n);
    // Flipping one column maps the det = -1 coset onto SO(n) without
    // disturbing uniformity.
    if (q.determinant() < 0.0) q.col(0) = -q.col(0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) out(i, a * n + b) = q(a, b);
  }
}

}  // namespace

Matrix haar_orthogonal(Rng& rng, int n) {
  const Matrix z = rng.gaussian(n, n);
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  // Sign fix against diag(R) makes Q Haar on O(n).
  for (int c = 0; c < n; ++c)
    if (r(c, c) < 0.0) q.col(c) = -q.col(c);
  return q;
}

PointCloud sample_sphere(int n, Index count, std::uint64_t seed) {
  if (n < 1) throw ArgumentError("sample_sphere: n must be >= 1");
  if (count < 1) throw ArgumentError("sample_sphere: count must be >= 1");
  Rng rng(seed);
  RowMatrix data(count, n + 1);
  fill_sphere(rng, n, data);
  return PointCloud(std::move(data));
}

PointCloud sample_rotation_group(int n, Index count, std::uint64_t seed) {
  if (n < 2) throw ArgumentError("sample_rotation_group: n must be >= 2");
  if (count < 1) throw ArgumentError("sample_rotation_group: count must be >= 1");
  Rng rng(seed);
  RowMatrix data(count, n * n);
  fill_rotations(rng, n, data);
  return PointCloud(std::move(data));
}

Matrix sphere_tangent_basis(const Eigen::Ref<const Vector>& x) {
  const Index dim = x.size();
  Vector v = x;
  v(0) += (x(0) >= 0.0 ? 1.0 : -1.0);
  const Matrix h = Matrix::Identity(dim, dim) - (2.0 / v.squaredNorm()) * v * v.transpose();
  return h.rightCols(dim - 1);
}

Matrix rotation_tangent_basis(const Eigen::Ref<const Vector>& q_rowmajor, int n) {
  const Matrix q = Eigen::Map<const RowMatrix>(q_rowmajor.data(), n, n);
  Matrix basis(n * n, n * (n - 1) / 2);
  const double s = 1.0 / std::sqrt(2.0);
  Index col = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j, ++col) {
      // Q A_ij has column j equal to s * Q e_i and column i equal to -s * Q e_j.
      RowMatrix qa = RowMatrix::Zero(n, n);
      qa.col(j) = s * q.col(i);
      qa.col(i) = -s * q.col(j);
      basis.col(col) = Eigen::Map<const Vector>(qa.data(), n * n);
    }
  }
  return basis;
}

Matrix stacked_frame(const std::vector<Matrix>& factor_bases) {
  Index cols = 0;
  for (const auto& b : factor_bases) cols += b.cols();
  Matrix out(factor_bases.front().rows(), cols);
  Index c = 0;
  for (const auto& b : factor_bases) {
    out.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  return out;
}

ProductSample sample_product(const ManifoldSpec& spec, Index count, std::uint64_t seed) {
  spec.validate();
  if (count < 1) throw ArgumentError("sample_product: count must be >= 1");
  Rng rng(seed);
  const int ambient = spec.ambient_dim();
  RowMatrix data(count, ambient);
  std::vector<int> offsets;
  int offset = 0;
  for (const auto& f : spec.factors) {
    offsets.push_back(offset);
    const int a = geomancer::ambient_dim(f);
    auto block = data.middleCols(offset, a);
    if (const auto* s = std::get_if<Sphere>(&f))
      fill_sphere(rng, s->n, block);
    else
      fill_rotations(rng, std::get<SpecialOrthogonal>(f).n, block);
    offset += a;
  }

  GroundTruth truth;
  truth.factor_dims = spec.factor_dims();
  truth.bases.resize(static_cast<std::size_t>(count));
  for (Index i = 0; i < count; ++i) {
    auto& point_bases = truth.bases[static_cast<std::size_t>(i)];
    for (std::size_t fi = 0; fi < spec.factors.size(); ++fi) {
      const auto& f = spec.factors[fi];
      const int a = geomancer::ambient_dim(f);
      const Vector x = data.row(i).segment(offsets[fi], a).transpose();
      Matrix local;
      if (std::holds_alternative<Sphere>(f))
        local = sphere_tangent_basis(x);
      else
        local = rotation_tangent_basis(x, std::get<SpecialOrthogonal>(f).n);
      Matrix full = Matrix::Zero(ambient, local.cols());
      full.middleRows(offsets[fi], a) = local;
      point_bases.push_back(std::move(full));
    }
  }
  return {PointCloud(std::move(data)), std::move(truth)};
}

}  // namespace geomancer
