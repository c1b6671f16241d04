#include "geomancer/experiment.hpp"

#include "geomancer/io.hpp"

#include <set>

namespace geomancer {

namespace {

using nlohmann::json;

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ArgumentError(std::string("config key '") + key + "' has the wrong type");
  }
}

std::uint64_t hash_json(const json& j) { return fnv1a64(j.dump()); }

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  static const std::set<std::string> known = {
      "spec",       "input",          "truth",       "t",                 "k",
      "k_neighbors", "R",             "gamma",       "eigen_tol",         "eigen_max_iter",
      "gap_ceiling", "cluster_threshold", "diag_tol", "diag_max_sweeps",  "seed",
      "lem_dim",    "lem_neighbors",  "output_dir",  "cache"};
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ArgumentError("unknown config key '" + key + "'");

  ExperimentConfig c;
  take(j, "spec", c.spec);
  take(j, "input", c.input);
  take(j, "truth", c.truth);
  take(j, "t", c.t);
  take(j, "k", c.k);
  take(j, "k_neighbors", c.k_neighbors);
  take(j, "R", c.R);
  if (j.contains("gamma")) {
    const auto& g = j.at("gamma");
    if (g.is_string() && g.get<std::string>() == "auto") {
      c.gamma.reset();
    } else if (g.is_number()) {
      c.gamma = g.get<double>();
    } else {
      throw ArgumentError("config key 'gamma' must be \"auto\" or a number");
    }
  }
  take(j, "eigen_tol", c.eigen_tol);
  take(j, "eigen_max_iter", c.eigen_max_iter);
  take(j, "gap_ceiling", c.gap_ceiling);
  take(j, "cluster_threshold", c.cluster_threshold);
  take(j, "diag_tol", c.diag_tol);
  take(j, "diag_max_sweeps", c.diag_max_sweeps);
  take(j, "seed", c.seed);
  take(j, "lem_dim", c.lem_dim);
  take(j, "lem_neighbors", c.lem_neighbors);
  take(j, "output_dir", c.output_dir);
  take(j, "cache", c.cache);
  return c;
}

json ExperimentConfig::to_json() const {
  json j = {{"spec", spec},
            {"input", input},
            {"truth", truth},
            {"t", t},
            {"k", k},
            {"k_neighbors", k_neighbors},
            {"R", R},
            {"eigen_tol", eigen_tol},
            {"eigen_max_iter", eigen_max_iter},
            {"gap_ceiling", gap_ceiling},
            {"cluster_threshold", cluster_threshold},
            {"diag_tol", diag_tol},
            {"diag_max_sweeps", diag_max_sweeps},
            {"seed", seed},
            {"lem_dim", lem_dim},
            {"lem_neighbors", lem_neighbors},
            {"output_dir", output_dir},
            {"cache", cache}};
  if (gamma)
    j["gamma"] = *gamma;
  else
    j["gamma"] = "auto";
  return j;
}

void ExperimentConfig::validate() const {
  if (spec.empty() == input.empty()) throw ArgumentError("exactly one of 'spec' and 'input' must be set");
  if (!spec.empty()) {
    ManifoldSpec::parse(spec);
    if (t < 1) throw ArgumentError("'t' must be >= 1 for a synthetic spec");
    if (!truth.empty()) throw ArgumentError("'truth' applies to 'input' only");
  } else {
    if (k < 1) throw ArgumentError("'k' is required with 'input'");
    if (lem_dim > 0) throw ArgumentError("'lem_dim' applies to synthetic specs only");
  }
  if (k < 0 || k_neighbors < 0 || t < 0) throw ArgumentError("sizes must be nonnegative");
  if (lem_dim < 0) throw ArgumentError("'lem_dim' must be >= 0");
  if (lem_dim > 0) {
    if (lem_dim >= t) throw ArgumentError("'lem_dim' must be below t");
    if (lem_dim < manifold_dim()) throw ArgumentError("'lem_dim' must be >= k");
    if (lem_neighbors < 1 || lem_neighbors >= t) throw ArgumentError("'lem_neighbors' out of range");
  }
  const Index points = spec.empty() ? 0 : t;
  GeomancerConfig g = pipeline();
  if (points > 0) {
    g.validate(points, manifold_dim());
  } else {
    // Point count unknown until the file is read.
    g.validate(g.neighbors_for(manifold_dim()) + 1, manifold_dim());
  }
}

Index ExperimentConfig::manifold_dim() const {
  if (k > 0) return k;
  if (!spec.empty()) return ManifoldSpec::parse(spec).intrinsic_dim();
  return 0;
}

GeomancerConfig ExperimentConfig::pipeline() const {
  GeomancerConfig g;
  g.k_neighbors = k_neighbors;
  g.eigen_count = R;
  g.eigen_tol = eigen_tol;
  g.eigen_max_iter = eigen_max_iter;
  g.gamma = gamma;
  g.gap_ceiling = gap_ceiling;
  g.cluster_threshold = cluster_threshold;
  g.diag_tol = diag_tol;
  g.diag_max_sweeps = diag_max_sweeps;
  g.seed = seed;
  return g;
}

std::uint64_t ExperimentConfig::data_hash() const {
  json j;
  if (!spec.empty()) {
    j = {{"spec", ManifoldSpec::parse(spec).to_string()}, {"t", t}, {"seed", seed}};
    if (lem_dim > 0) {
      j["lem_dim"] = lem_dim;
      j["lem_neighbors"] = lem_neighbors;
    }
  } else {
    j = {{"input", fnv1a64(read_text(input))}};
    if (!truth.empty()) j["truth"] = fnv1a64(read_text(truth));
  }
  return hash_json(j);
}

std::uint64_t ExperimentConfig::spectrum_hash() const {
  const json j = {{"data", data_hash()},
                  {"k", manifold_dim()},
                  {"k_neighbors", pipeline().neighbors_for(manifold_dim())},
                  {"R", R},
                  {"eigen_tol", eigen_tol},
                  {"eigen_max_iter", eigen_max_iter},
                  {"seed", seed}};
  return hash_json(j);
}

std::uint64_t ExperimentConfig::run_hash() const {
  json j = {{"spectrum", spectrum_hash()},
            {"gap_ceiling", gap_ceiling},
            {"cluster_threshold", cluster_threshold},
            {"diag_tol", diag_tol},
            {"diag_max_sweeps", diag_max_sweeps}};
  if (gamma)
    j["gamma"] = *gamma;
  else
    j["gamma"] = "auto";
  return hash_json(j);
}

Dataset make_dataset(const ExperimentConfig& config) {
  Dataset d;
  if (!config.input.empty()) {
    d.points = load_points(config.input);
    if (!config.truth.empty()) d.truth = load_ground_truth(config.truth);
    return d;
  }
  ProductSample sample = sample_product(ManifoldSpec::parse(config.spec), config.t, config.seed);
  d.truth = std::move(sample.truth);
  if (config.lem_dim == 0) {
    d.points = std::move(sample.points);
    return d;
  }
  d.latent_graph = build_knn_graph(sample.points, config.lem_neighbors);
  EmbeddingOptions options;
  options.seed = config.seed;
  d.points = laplacian_eigenmaps_embed(*d.latent_graph, config.lem_dim, options);
  d.latent = std::move(sample.points);
  return d;
}

ErrorReport evaluate(const ExperimentConfig& config, const Dataset& data, const Factorization& fact) {
  if (!data.truth) throw ArgumentError("no ground truth to evaluate against");
  if (!data.embedded()) return disentangling_error(fact, *data.truth);

  const Index k = config.manifold_dim();
  const GeomancerConfig g = config.pipeline();
  const NeighborGraph graph = build_knn_graph(data.points, g.neighbors_for(k), g.knn);
  const TangentFrames frames = estimate_tangent_frames(data.points, graph, k);
  std::vector<Matrix> latent_frames;
  latent_frames.reserve(data.truth->bases.size());
  for (const auto& b : data.truth->bases) latent_frames.push_back(stacked_frame(b));
  const Alignment alignment =
      align_to_ground_truth(*data.latent, latent_frames, data.points, frames, *data.latent_graph);
  const auto lifted = lift_to_latent(fact, alignment, latent_frames, frames);
  return score_subspaces(lifted, *data.truth, &alignment.aligned);
}

}  // namespace geomancer
