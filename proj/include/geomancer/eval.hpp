#pragma once

#include "geomancer/common.hpp"
#include "geomancer/factorize.hpp"
#include "geomancer/graph.hpp"
#include "geomancer/synth.hpp"

#include <optional>
#include <string>
#include <vector>

namespace geomancer {

/// Principal angles between span(a) and span(b), descending, min(p, q) of
/// them. Columns must be orthonormal to 1e-6.
Vector principal_angles(const Matrix& a, const Matrix& b);

/// Largest principal angle, or pi/2 when the dimensions differ.
double subspace_angle(const Matrix& a, const Matrix& b);

/// min over matchings sigma of mean_j angle(truth_j, estimate_sigma(j)).
/// Both lists must have the same length; exhaustive up to 8 subspaces,
/// assignment solver beyond.
double matched_error(const std::vector<Matrix>& truth, const std::vector<Matrix>& estimate);

/// True when the multisets of subspace dimensions agree.
bool same_shape(const std::vector<Index>& a, const std::vector<Index>& b);

struct ErrorReport {
  double mean_error = 0.0;        // radians, over evaluated points
  double error_std = 0.0;         // per-point std over evaluated points
  double shape_accuracy = 0.0;    // fraction of all points with the right shape
  Index points = 0;
  Index evaluated = 0;
  Index excluded = 0;             // wrong shape
  Index unaligned = 0;            // right shape but no alignment available
  std::vector<double> per_point;  // NaN where not evaluated
  std::optional<double> chance_mean;
  std::optional<double> chance_std;

  std::string to_json(bool include_points = true) const;
};

/// Scores estimated subspaces against ground truth in the same ambient
/// coordinates. Wrong-shape points count against shape accuracy and are left
/// out of the angle mean; points with valid[i] == false are counted as
/// unaligned.
ErrorReport score_subspaces(const std::vector<std::vector<Matrix>>& estimate, const GroundTruth& truth,
                            const std::vector<bool>* valid = nullptr);

ErrorReport disentangling_error(const Factorization& fact, const GroundTruth& truth);

double shape_accuracy(const Factorization& fact, const std::vector<int>& truth_dims);

struct ChanceBaseline {
  double mean = 0.0;
  double std = 0.0;
  Index samples = 0;
};

/// Expected error of uniformly random splits of R^k into subspaces of the
/// given dims, scored against an independent random split. `rotation`, when
/// given, is applied to one side of every sample.
ChanceBaseline chance_baseline(Index k, const std::vector<int>& dims, Index samples,
                               std::uint64_t seed, const Matrix* rotation = nullptr);

struct Alignment {
  std::vector<Matrix> rotations;  // k x k; maps data-frame to latent-frame coordinates
  std::vector<bool> aligned;
  Index unaligned_count() const;
};

/// Per-point alignment of data tangent frames to latent tangent frames.
/// With neighbor offsets projected into each frame, V_z = (z_j - z_i) U_z and
/// V_x = (x_j - x_i) U_x over the graph neighbors j of i, the alignment is the
/// polar factor of (V_z^T V_z)^{-1/2} V_z^T V_x (V_x^T V_x)^{-1/2}. Points
/// whose Gram matrices have smallest eigenvalue <= 1e-10 (relative to the
/// largest) are flagged unaligned.
Alignment align_to_ground_truth(const PointCloud& latent_points,
                                const std::vector<Matrix>& latent_frames,
                                const PointCloud& data_points, const TangentFrames& data_frames,
                                const NeighborGraph& graph);

/// Carries estimated subspaces (columns inside span(U_x,i)) to latent ambient
/// coordinates: S -> U_z,i A_i U_x,i^T S.
std::vector<std::vector<Matrix>> lift_to_latent(const Factorization& fact, const Alignment& alignment,
                                                const std::vector<Matrix>& latent_frames,
                                                const TangentFrames& data_frames);

}  // namespace geomancer
