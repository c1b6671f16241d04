#pragma once

#include "geomancer/common.hpp"
#include "geomancer/rng.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace geomancer {

/// The n-sphere S^n embedded as unit vectors in R^{n+1}.
struct Sphere {
  int n = 1;
};

/// SO(n) embedded as n x n orthogonal matrices, vectorized row-major into R^{n^2}.
struct SpecialOrthogonal {
  int n = 2;
};

using FactorSpec = std::variant<Sphere, SpecialOrthogonal>;

int intrinsic_dim(const FactorSpec& factor);
int ambient_dim(const FactorSpec& factor);
std::string factor_name(const FactorSpec& factor);

/// Ordered list of factors making up a product manifold.
struct ManifoldSpec {
  std::vector<FactorSpec> factors;

  int intrinsic_dim() const;
  int ambient_dim() const;
  std::vector<int> factor_dims() const;
  void validate() const;

  /// Factors joined by 'x', e.g. "S2xS3xSO3".
  std::string to_string() const;
  static ManifoldSpec parse(std::string_view text);
};

/// Analytic tangent subspaces of each factor, per point, in ambient coordinates.
struct GroundTruth {
  std::vector<int> factor_dims;
  // bases[i][j] is ambient_dim x factor_dims[j] with orthonormal columns.
  std::vector<std::vector<Matrix>> bases;

  Index size() const noexcept { return static_cast<Index>(bases.size()); }
};

struct ProductSample {
  PointCloud points;
  GroundTruth truth;
};

// Samplers are pure functions of their arguments. A sample_product call draws
// factor by factor in spec order, all points of one factor before the next,
// from a single generator seeded with `seed`.

/// Haar-distributed n x n orthogonal matrix (QR of a Gaussian matrix filled
/// column by column, signs fixed by diag(R)).
Matrix haar_orthogonal(Rng& rng, int n);

PointCloud sample_sphere(int n, Index count, std::uint64_t seed);
PointCloud sample_rotation_group(int n, Index count, std::uint64_t seed);
ProductSample sample_product(const ManifoldSpec& spec, Index count, std::uint64_t seed);

/// Orthonormal basis of the complement of unit vector x (columns 2.. of the
/// Householder reflector mapping x onto the first axis).
Matrix sphere_tangent_basis(const Eigen::Ref<const Vector>& x);

/// Basis {vec(Q A_ij)} for i < j, A_ij = (e_i e_j^T - e_j e_i^T) / sqrt(2),
/// with `q_rowmajor` the row-major vectorization of Q.
Matrix rotation_tangent_basis(const Eigen::Ref<const Vector>& q_rowmajor, int n);

/// Concatenates the per-factor bases of a point into one ambient x k frame.
Matrix stacked_frame(const std::vector<Matrix>& factor_bases);

}  // namespace geomancer
