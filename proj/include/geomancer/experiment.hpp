#pragma once

#include "geomancer/common.hpp"
#include "geomancer/eval.hpp"
#include "geomancer/factorize.hpp"
#include "geomancer/graph.hpp"
#include "geomancer/synth.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>

namespace geomancer {

/// One experiment: where the points come from and how the pipeline is tuned.
///
/// JSON keys (all optional except a data source):
///   spec, input, truth, t, k, k_neighbors, R, gamma ("auto" or a number),
///   eigen_tol, eigen_max_iter, gap_ceiling, cluster_threshold, diag_tol,
///   diag_max_sweeps, seed, lem_dim, lem_neighbors, output_dir, cache.
/// Unknown keys are rejected.
struct ExperimentConfig {
  std::string spec;              // synthetic product manifold, e.g. "S2xS3"
  std::string input;             // or a point file (GEOMMAT or .csv)
  std::string truth;             // ground truth for `input`, optional
  Index t = 0;                   // synthetic point count
  Index k = 0;                   // 0: intrinsic dim of `spec`
  Index k_neighbors = 0;         // 0: 2k
  Index R = 10;
  std::optional<double> gamma;   // unset: automatic gap detection
  double eigen_tol = 1e-7;
  Index eigen_max_iter = 0;
  double gap_ceiling = kDefaultGapCeiling;
  double cluster_threshold = 0.5;
  double diag_tol = 1e-10;
  Index diag_max_sweeps = 100;
  std::uint64_t seed = 0;
  Index lem_dim = 0;             // > 0: run on a Laplacian Eigenmaps embedding of the sample
  Index lem_neighbors = 10;      // latent-space neighbors for that embedding
  std::string output_dir;
  bool cache = true;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  /// Throws ArgumentError; called before any compute.
  void validate() const;

  /// Manifold dimension (k, or the intrinsic dim of `spec`).
  Index manifold_dim() const;
  GeomancerConfig pipeline() const;

  /// Hash of everything that determines the point cloud and ground truth.
  std::uint64_t data_hash() const;
  /// Hash of everything that determines the spectrum.
  std::uint64_t spectrum_hash() const;
  /// Hash of everything that determines the factorization.
  std::uint64_t run_hash() const;
};

/// Points to factorize, with the latent sample and truth when synthetic.
struct Dataset {
  PointCloud points;                    // input to the pipeline
  std::optional<PointCloud> latent;     // product-manifold sample behind an embedding
  std::optional<GroundTruth> truth;     // in latent coordinates
  std::optional<NeighborGraph> latent_graph;

  bool embedded() const noexcept { return latent.has_value(); }
};

/// Samples (and embeds) per the config, or loads `input`/`truth` from disk.
Dataset make_dataset(const ExperimentConfig& config);

/// Scores a factorization against the dataset's truth. Embedded datasets are
/// aligned through the latent-space neighbor graph first.
ErrorReport evaluate(const ExperimentConfig& config, const Dataset& data, const Factorization& fact);

}  // namespace geomancer
