#pragma once

#include "geomancer/common.hpp"
#include "geomancer/factorize.hpp"
#include "geomancer/synth.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace geomancer {

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Hash as 16 lowercase hex digits.
std::string hash_hex(std::uint64_t hash);

/// Dense matrix file, little-endian:
///   char[8] "GEOMMAT\0", u32 version (1), u32 reserved (0),
///   u64 rows, u64 cols, u64 config hash, u64 seed,
///   rows * cols f64, row-major.
void save_matrix(const std::string& path, const RowMatrix& m, const ArtifactStamp& stamp);
RowMatrix load_matrix(const std::string& path, ArtifactStamp* stamp = nullptr);

/// Comma-separated rows, full double precision.
void save_matrix_csv(const std::string& path, const RowMatrix& m);
RowMatrix load_matrix_csv(const std::string& path);

/// Points from a matrix file, or from CSV when the path ends in ".csv".
PointCloud load_points(const std::string& path, ArtifactStamp* stamp = nullptr);

/// Ground truth as a matrix with one row per point: the factor bases of the
/// point concatenated, each ambient x dim_j flattened row-major. The factor
/// dims go to a JSON sidecar "<path>.json" together with the stamp.
void save_ground_truth(const std::string& path, const GroundTruth& truth, const ArtifactStamp& stamp);
GroundTruth load_ground_truth(const std::string& path, ArtifactStamp* stamp = nullptr);

/// Factorization container: a JSON manifest (m, gap, spectrum, per-point
/// dims and diagnostics, stamp) at `manifest_path` and the bases in a binary
/// file at `bases_path`:
///   char[8] "GEOMFAC\0", u32 version (1), u32 reserved (0),
///   u64 points, u64 ambient dim, u64 config hash, u64 seed,
///   per point: u32 subspace count, then per subspace u32 dim followed by
///   ambient * dim f64 (row-major).
void save_factorization(const std::string& manifest_path, const std::string& bases_path,
                        const Factorization& fact, const ArtifactStamp& stamp);
Factorization load_factorization(const std::string& manifest_path, const std::string& bases_path,
                                 ArtifactStamp* stamp = nullptr);

/// Whole-file helpers.
std::string read_text(const std::string& path);
void write_text(const std::string& path, std::string_view text);

}  // namespace geomancer
