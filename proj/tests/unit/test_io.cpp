#include "helpers.hpp"

#include "geomancer/experiment.hpp"
#include "geomancer/io.hpp"
#include "geomancer/synth.hpp"

#include <doctest.h>

#include <fstream>

using namespace geomancer;

TEST_SUITE("io") {

TEST_CASE("FNV-1a reference values") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(hash_hex(0xaf63dc4c8601ec8cULL) == "af63dc4c8601ec8c");
  CHECK(hash_hex(1) == "0000000000000001");
}

TEST_CASE("matrix files round-trip bit-exactly") {
  const auto dir = test::scratch_dir("io-matrix");
  Rng rng(1);
  const RowMatrix m = rng.gaussian(17, 5);
  const std::string path = (dir / "m.bin").string();
  save_matrix(path, m, ArtifactStamp{123, 456});
  ArtifactStamp stamp;
  CHECK(load_matrix(path, &stamp) == m);
  CHECK(stamp.config_hash == 123);
  CHECK(stamp.seed == 456);
  CHECK(std::filesystem::file_size(path) == 48 + 17 * 5 * 8);

  const std::string csv = (dir / "m.csv").string();
  save_matrix_csv(csv, m);
  CHECK(load_matrix_csv(csv) == m);
  CHECK(load_points(csv).data == m);
  CHECK(load_points(path).data == m);
}

TEST_CASE("malformed files are rejected") {
  const auto dir = test::scratch_dir("io-bad");
  const std::string junk = (dir / "junk.bin").string();
  write_text(junk, "not a matrix at all, just text");
  CHECK_THROWS_AS(load_matrix(junk), ArgumentError);
  CHECK_THROWS_AS(load_matrix((dir / "missing.bin").string()), ArgumentError);

  const std::string ragged = (dir / "ragged.csv").string();
  write_text(ragged, "1,2,3\n4,5\n");
  CHECK_THROWS_AS(load_matrix_csv(ragged), ArgumentError);
  const std::string nan = (dir / "nan.csv").string();
  write_text(nan, "# comment\n1,2\nnan,3\n");
  CHECK_THROWS_AS(load_points(nan), ArgumentError);

  // Truncated data section.
  Rng rng(2);
  const std::string cut = (dir / "cut.bin").string();
  save_matrix(cut, rng.gaussian(10, 3), {});
  std::filesystem::resize_file(cut, 100);
  CHECK_THROWS_AS(load_matrix(cut), ArgumentError);
}

TEST_CASE("ground truth round-trips with its sidecar") {
  const auto dir = test::scratch_dir("io-truth");
  const ProductSample s = sample_product(ManifoldSpec::parse("S2xSO3"), 50, 3);
  const std::string path = (dir / "truth.bin").string();
  save_ground_truth(path, s.truth, ArtifactStamp{7, 8});
  CHECK(std::filesystem::exists(path + ".json"));
  ArtifactStamp stamp;
  const GroundTruth back = load_ground_truth(path, &stamp);
  CHECK(stamp.config_hash == 7);
  CHECK(back.factor_dims == s.truth.factor_dims);
  for (Index i = 0; i < 50; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(back.bases[i][j] == s.truth.bases[i][j]);

  // A sidecar from another run is refused.
  save_matrix(path, load_matrix(path), ArtifactStamp{9, 8});
  CHECK_THROWS_AS(load_ground_truth(path), ArgumentError);
}

TEST_CASE("factorizations round-trip") {
  const auto dir = test::scratch_dir("io-fact");
  const ProductSample s = sample_product(ManifoldSpec::parse("S2xS1"), 40, 4);
  Factorization f;
  f.m = 2;
  f.k = 3;
  f.ambient_dim = 5;
  f.gap_index = 1;
  f.product_structure = true;
  f.eigenvalues = (Vector(3) << 1e-5, 0.2, 0.3).finished();
  f.residuals = Vector::Constant(3, 1e-9);
  f.subspaces = s.truth.bases;
  f.subspaces[3] = {stacked_frame(s.truth.bases[3])};
  f.diagnostics.resize(40);
  f.diagnostics[5].offdiag_residual = 0.25;
  f.diagnostics[5].diag_converged = false;
  const std::string manifest = (dir / "f.json").string(), bases = (dir / "f.bin").string();
  save_factorization(manifest, bases, f, ArtifactStamp{11, 12});
  ArtifactStamp stamp;
  const Factorization g = load_factorization(manifest, bases, &stamp);
  CHECK(stamp.config_hash == 11);
  CHECK(stamp.seed == 12);
  CHECK(g.m == 2);
  CHECK(g.k == 3);
  CHECK(g.gap_index == 1);
  CHECK(g.product_structure);
  CHECK(g.eigenvalues == f.eigenvalues);
  CHECK(g.dims(3) == std::vector<Index>{3});
  CHECK(g.diagnostics[5].offdiag_residual == 0.25);
  CHECK_FALSE(g.diagnostics[5].diag_converged);
  for (Index i = 0; i < 40; ++i)
    for (std::size_t j = 0; j < f.subspaces[i].size(); ++j) CHECK(g.subspaces[i][j] == f.subspaces[i][j]);
}

TEST_CASE("experiment configs parse strictly") {
  const auto j = nlohmann::json::parse(R"({"spec": "S2xS2", "t": 500, "seed": 3, "gamma": "auto"})");
  const ExperimentConfig c = ExperimentConfig::from_json(j);
  CHECK(c.spec == "S2xS2");
  CHECK(c.t == 500);
  CHECK_FALSE(c.gamma.has_value());
  CHECK(c.manifold_dim() == 4);
  CHECK_NOTHROW(c.validate());
  CHECK(ExperimentConfig::from_json(c.to_json()).run_hash() == c.run_hash());

  CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"spec": "S2", "tt": 5})")), ArgumentError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"spec": 2})")), ArgumentError);
  CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::parse(R"({"gamma": "sometimes"})")), ArgumentError);

  ExperimentConfig none;
  CHECK_THROWS_AS(none.validate(), ArgumentError);
  ExperimentConfig both = c;
  both.input = "points.bin";
  CHECK_THROWS_AS(both.validate(), ArgumentError);
  ExperimentConfig input_only;
  input_only.input = "points.bin";
  CHECK_THROWS_AS(input_only.validate(), ArgumentError);  // needs k
  ExperimentConfig small = c;
  small.t = 5;
  CHECK_THROWS_AS(small.validate(), ArgumentError);
  ExperimentConfig bad_spec = c;
  bad_spec.spec = "T2";
  CHECK_THROWS_AS(bad_spec.validate(), ArgumentError);
}

TEST_CASE("config hashes separate the stages they govern") {
  ExperimentConfig a;
  a.spec = "S2xS2";
  a.t = 1000;
  ExperimentConfig b = a;
  b.cluster_threshold = 0.6;
  CHECK(a.data_hash() == b.data_hash());
  CHECK(a.spectrum_hash() == b.spectrum_hash());
  CHECK(a.run_hash() != b.run_hash());
  b = a;
  b.R = 12;
  CHECK(a.data_hash() == b.data_hash());
  CHECK(a.spectrum_hash() != b.spectrum_hash());
  b = a;
  b.seed = 1;
  CHECK(a.data_hash() != b.data_hash());
  b = a;
  b.output_dir = "elsewhere";
  b.cache = false;
  CHECK(a.run_hash() == b.run_hash());
  CHECK(a.run_hash() == ExperimentConfig(a).run_hash());
}

TEST_CASE("datasets follow the config") {
  ExperimentConfig c;
  c.spec = "S2xS1";
  c.t = 300;
  c.seed = 4;
  const Dataset d = make_dataset(c);
  CHECK_FALSE(d.embedded());
  CHECK(d.points.data == sample_product(ManifoldSpec::parse("S2xS1"), 300, 4).points.data);
  REQUIRE(d.truth.has_value());

  c.lem_dim = 6;
  const Dataset e = make_dataset(c);
  CHECK(e.embedded());
  CHECK(e.points.dim() == 6);
  CHECK(e.latent->data == d.points.data);
  CHECK(e.latent_graph.has_value());
}

}  // TEST_SUITE
