#include "cli.hpp"

#include "geomancer/eval.hpp"
#include "geomancer/experiment.hpp"
#include "geomancer/factorize.hpp"
#include "geomancer/io.hpp"
#include "geomancer/parallel.hpp"
#include "geomancer/spectral.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

namespace geomancer::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kOutputEnv = "GEOMANCER_OUTPUT_DIR";
constexpr const char* kDefaultOutput = "geomancer-out";
constexpr Index kChanceSamples = 10000;

/// Bad flags or config; exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::string out;
  std::string spec;
  std::string input;
  std::string truth;
  std::string gamma;
  std::optional<Index> t, k, k_neighbors, R, lem_dim;
  std::optional<std::uint64_t> seed;
  bool no_cache = false;
  bool verbose = false;
  int threads = 0;
  // synth
  bool csv = false;
  // sweep
  std::vector<Index> t_grid;
  Index seeds = 1;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", o.out, std::string("Output directory (default: $") + kOutputEnv + " or " +
                                         kDefaultOutput + ")");
  cmd->add_option("--spec", o.spec, "Product manifold, e.g. S2xS3 or S2xSO3");
  cmd->add_option("--input", o.input, "Point file (GEOMMAT or .csv) instead of a synthetic spec");
  cmd->add_option("--truth", o.truth, "Ground truth file for --input");
  cmd->add_option("--t", o.t, "Number of sampled points");
  cmd->add_option("--k", o.k, "Manifold dimension (defaults to that of --spec)");
  cmd->add_option("--k-neighbors", o.k_neighbors, "Nearest neighbors (default 2k)");
  cmd->add_option("--R", o.R, "Number of eigenpairs");
  cmd->add_option("--gamma", o.gamma, "Eigenvalue threshold, or 'auto'");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--lem-dim", o.lem_dim, "Run on a Laplacian Eigenmaps embedding of this dimension");
  cmd->add_flag("--no-cache", o.no_cache, "Recompute every stage");
  cmd->add_option("--threads", o.threads, "Worker threads (0: OpenMP default)")->check(CLI::NonNegativeNumber);
  cmd->add_flag("-v,--verbose", o.verbose, "Progress on stderr");
}

// `check` is off for sweep, whose point counts come from the grid.
ExperimentConfig resolve(const Options& o, bool check = true) {
  json j = json::object();
  if (!o.config_path.empty()) {
    try {
      j = json::parse(read_text(o.config_path));
    } catch (const json::exception& e) {
      throw UsageError(o.config_path + ": " + e.what());
    }
    if (!j.is_object()) throw UsageError(o.config_path + ": config must be a JSON object");
  }
  if (!o.spec.empty()) {
    j["spec"] = o.spec;
    j.erase("input");
  }
  if (!o.input.empty()) {
    j["input"] = o.input;
    j.erase("spec");
  }
  if (!o.truth.empty()) j["truth"] = o.truth;
  if (o.t) j["t"] = *o.t;
  if (o.k) j["k"] = *o.k;
  if (o.k_neighbors) j["k_neighbors"] = *o.k_neighbors;
  if (o.R) j["R"] = *o.R;
  if (o.seed) j["seed"] = *o.seed;
  if (o.lem_dim) j["lem_dim"] = *o.lem_dim;
  if (!o.gamma.empty()) {
    if (o.gamma == "auto") {
      j["gamma"] = "auto";
    } else {
      try {
        std::size_t used = 0;
        j["gamma"] = std::stod(o.gamma, &used);
        if (used != o.gamma.size()) throw std::invalid_argument(o.gamma);
      } catch (const std::exception&) {
        throw UsageError("--gamma must be 'auto' or a number");
      }
    }
  }
  if (o.no_cache) j["cache"] = false;

  ExperimentConfig c;
  try {
    c = ExperimentConfig::from_json(j);
    if (!o.out.empty()) {
      c.output_dir = o.out;
    } else if (c.output_dir.empty()) {
      const char* env = std::getenv(kOutputEnv);
      c.output_dir = env && *env ? env : kDefaultOutput;
    }
    if (check) c.validate();
  } catch (const ArgumentError& e) {
    throw UsageError(e.what());
  }
  return c;
}

template <typename F>
auto in_stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

// Message without the "<stage>: " prefix.
std::string detail(const StageError& e) {
  const std::string what = e.what();
  const std::string prefix = e.stage() + ": ";
  return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

GeomancerConfig pipeline_of(const ExperimentConfig& c, const Options& o) {
  GeomancerConfig g = c.pipeline();
  g.verbose = o.verbose;
  return g;
}

// Artifact paths inside the output directory.
struct Layout {
  fs::path dir;
  fs::path config() const { return dir / "config.json"; }
  fs::path points() const { return dir / "points.bin"; }
  fs::path points_csv() const { return dir / "points.csv"; }
  fs::path latent() const { return dir / "latent.bin"; }
  fs::path truth() const { return dir / "truth.bin"; }
  fs::path manifest() const { return dir / "factorization.json"; }
  fs::path bases() const { return dir / "subspaces.bin"; }
  fs::path spectrum_json() const { return dir / "spectrum.json"; }
  fs::path spectrum_csv() const { return dir / "spectrum.csv"; }
  fs::path spectrum_svg() const { return dir / "spectrum.svg"; }
  fs::path report() const { return dir / "report.json"; }
  fs::path sweep_csv() const { return dir / "sweep.csv"; }
  fs::path sweep_summary() const { return dir / "sweep_summary.csv"; }
  fs::path cache(std::uint64_t hash) const { return dir / "cache" / ("spectrum-" + hash_hex(hash) + ".bin"); }
};

Layout prepare(const ExperimentConfig& c) {
  Layout l{fs::path(c.output_dir)};
  in_stage("io", [&] {
    fs::create_directories(l.dir);
    return 0;
  });
  return l;
}

void write_config(const Layout& l, const ExperimentConfig& c) {
  json j = c.to_json();
  j.erase("output_dir");
  j["data_hash"] = hash_hex(c.data_hash());
  j["run_hash"] = hash_hex(c.run_hash());
  write_text(l.config().string(), j.dump(2) + "\n");
}

void write_dataset(const Layout& l, const ExperimentConfig& c, const Dataset& d, bool csv) {
  const ArtifactStamp stamp{c.data_hash(), c.seed};
  save_matrix(l.points().string(), d.points.data, stamp);
  if (csv) save_matrix_csv(l.points_csv().string(), d.points.data);
  if (d.truth) save_ground_truth(l.truth().string(), *d.truth, stamp);
  if (d.latent) save_matrix(l.latent().string(), d.latent->data, stamp);
}

// Loads the synthetic dataset from the output directory when its stamps
// match the config, otherwise samples it and writes it there.
Dataset obtain_dataset(const Layout& l, const ExperimentConfig& c) {
  if (!c.input.empty()) return in_stage("load", [&] { return make_dataset(c); });
  const std::uint64_t hash = c.data_hash();
  if (c.cache && fs::exists(l.points()) && fs::exists(l.truth()) &&
      (c.lem_dim == 0 || fs::exists(l.latent()))) {
    auto loaded = in_stage("load", [&]() -> std::optional<Dataset> {
      ArtifactStamp sp, st;
      Dataset d;
      d.points = load_points(l.points().string(), &sp);
      d.truth = load_ground_truth(l.truth().string(), &st);
      if (sp.config_hash != hash || st.config_hash != hash) return std::nullopt;
      if (c.lem_dim > 0) {
        ArtifactStamp sl;
        d.latent = load_points(l.latent().string(), &sl);
        if (sl.config_hash != hash) return std::nullopt;
        d.latent_graph = build_knn_graph(*d.latent, c.lem_neighbors);
      }
      return d;
    });
    if (loaded) return std::move(*loaded);
  }
  Dataset d = in_stage("synth", [&] { return make_dataset(c); });
  in_stage("io", [&] {
    write_dataset(l, c, d, false);
    return 0;
  });
  return d;
}

SpectrumResult obtain_spectrum(const Layout& l, const ExperimentConfig& c, const Geometry& geometry,
                               const GeomancerConfig& g) {
  const std::uint64_t hash = c.spectrum_hash();
  const fs::path path = l.cache(hash);
  if (c.cache && fs::exists(path)) {
    ArtifactStamp s;
    SpectrumResult cached = in_stage("load", [&] { return load_spectrum(path.string(), &s); });
    if (s.config_hash == hash) {
      if (g.verbose) std::cerr << "spectrum: cached " << path.string() << "\n";
      return cached;
    }
  }
  SpectrumResult spectrum = connection_spectrum(geometry, g);
  if (c.cache) {
    in_stage("io", [&] {
      fs::create_directories(path.parent_path());
      save_spectrum(spectrum, path.string(), ArtifactStamp{hash, c.seed});
      return 0;
    });
  }
  return spectrum;
}

void check_points(const ExperimentConfig& c, const PointCloud& points) {
  in_stage("config", [&] {
    points.validate();
    c.pipeline().validate(points.size(), c.manifold_dim());
    if (c.manifold_dim() > points.dim())
      throw ArgumentError("k exceeds the ambient dimension " + std::to_string(points.dim()));
    return 0;
  });
}

std::string format_pm(double mean, double std) {
  if (std::isnan(mean)) return "n/a";
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << mean << "+-" << std::setprecision(2) << std;
  return s.str();
}

std::string label(const ExperimentConfig& c) {
  if (!c.input.empty()) return fs::path(c.input).filename().string();
  std::string s = ManifoldSpec::parse(c.spec).to_string();
  if (c.lem_dim > 0) s += " (LEM d=" + std::to_string(c.lem_dim) + ")";
  return s;
}

void print_table(std::ostream& out, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i)
      out << (i ? " | " : "") << std::left << std::setw(static_cast<int>(width[i])) << r[i];
    out << "\n";
  };
  line(header);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "-+-" : "") << std::string(width[i], '-');
  out << "\n";
  for (const auto& r : rows) line(r);
}

// ---------------------------------------------------------------- synth

int cmd_synth(const Options& o) {
  const ExperimentConfig c = resolve(o);
  if (c.spec.empty()) throw UsageError("synth needs --spec");
  const Layout l = prepare(c);
  const Dataset d = in_stage("synth", [&] { return make_dataset(c); });
  in_stage("io", [&] {
    write_dataset(l, c, d, o.csv);
    write_config(l, c);
    return 0;
  });
  std::cout << "synth: " << d.points.size() << " points in R^" << d.points.dim() << " -> "
            << l.points().string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- run

Factorization run_pipeline(const Layout& l, const ExperimentConfig& c, const Options& o, const Dataset& d) {
  check_points(c, d.points);
  const GeomancerConfig g = pipeline_of(c, o);
  const Geometry geometry = build_geometry(d.points, c.manifold_dim(), g);
  const SpectrumResult spectrum = obtain_spectrum(l, c, geometry, g);
  in_stage("io", [&] {
    write_text(l.spectrum_json().string(), spectrum_to_json(spectrum) + "\n");
    return 0;
  });
  return factorize_spectrum(geometry, spectrum, g);
}

int cmd_run(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const Layout l = prepare(c);
  const Dataset d = obtain_dataset(l, c);
  const Factorization f = run_pipeline(l, c, o, d);
  in_stage("io", [&] {
    save_factorization(l.manifest().string(), l.bases().string(), f, ArtifactStamp{c.run_hash(), c.seed});
    write_config(l, c);
    return 0;
  });
  std::cout << "run: m = " << f.m << " (gap after eigenvalue " << f.gap_index << ")\n";
  if (!f.product_structure) std::cout << "run: " << f.message << "\n";
  std::cout << "run: factorization -> " << l.manifest().string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

int cmd_eval(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const Layout l = prepare(c);
  if (!c.input.empty() && c.truth.empty()) throw UsageError("eval with --input needs --truth");
  ArtifactStamp stamp;
  const Factorization f = in_stage("load", [&] {
    return load_factorization(l.manifest().string(), l.bases().string(), &stamp);
  });
  if (stamp.config_hash != c.run_hash())
    throw StageError("eval", "factorization hash " + hash_hex(stamp.config_hash) +
                                 " does not match the config's " + hash_hex(c.run_hash()) +
                                 "; rerun `run` with this config");
  const Dataset d = obtain_dataset(l, c);
  ErrorReport report = in_stage("eval", [&] {
    if (!d.truth) throw ArgumentError("no ground truth");
    if (f.size() != d.points.size()) throw ArgumentError("factorization and dataset sizes differ");
    ErrorReport r = evaluate(c, d, f);
    const ChanceBaseline chance =
        chance_baseline(c.manifold_dim(), d.truth->factor_dims, kChanceSamples, c.seed);
    r.chance_mean = chance.mean;
    r.chance_std = chance.std;
    return r;
  });
  json j = json::parse(report.to_json(true));
  j["label"] = label(c);
  j["m"] = f.m;
  j["true_m"] = d.truth->factor_dims.size();
  j["config_hash"] = hash_hex(c.run_hash());
  j["seed"] = c.seed;
  in_stage("io", [&] {
    write_text(l.report().string(), j.dump(1) + "\n");
    return 0;
  });
  std::ostringstream shape;
  shape << std::fixed << std::setprecision(3) << report.shape_accuracy;
  print_table(std::cout, {"Data", "t", "m", "Shape acc.", "Error (rad)", "Chance"},
              {{label(c), std::to_string(d.points.size()), std::to_string(f.m), shape.str(),
                format_pm(report.mean_error, report.error_std),
                format_pm(*report.chance_mean, *report.chance_std)}});
  return 0;
}

// ---------------------------------------------------------------- spectrum

std::string svg_panel(const Vector& values, double x0, double width, double height, const std::string& title) {
  const double margin = 40.0;
  const double plot_w = width - 2 * margin;
  const double plot_h = height - 2 * margin;
  double top = 0.0;
  for (Index i = 0; i < values.size(); ++i)
    if (std::isfinite(values(i))) top = std::max(top, values(i));
  if (!(top > 0.0)) top = 1.0;
  const double bar = plot_w / static_cast<double>(std::max<Index>(values.size(), 1));
  std::ostringstream s;
  s << std::setprecision(6);
  s << "<g transform=\"translate(" << x0 << ",0)\">\n";
  s << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
  s << "<line x1=\"" << margin << "\" y1=\"" << margin + plot_h << "\" x2=\"" << margin + plot_w << "\" y2=\""
    << margin + plot_h << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << margin + plot_h
    << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << margin - 4 << "\" y=\"" << margin + 4 << "\" text-anchor=\"end\" font-size=\"10\">" << top
    << "</text>\n";
  s << "<text x=\"" << margin - 4 << "\" y=\"" << margin + plot_h << "\" text-anchor=\"end\" font-size=\"10\">0</text>\n";
  for (Index i = 0; i < values.size(); ++i) {
    const double v = std::isfinite(values(i)) ? std::max(values(i), 0.0) : 0.0;
    const double h = plot_h * v / top;
    const double x = margin + bar * static_cast<double>(i) + 0.15 * bar;
    s << "<rect x=\"" << x << "\" y=\"" << margin + plot_h - h << "\" width=\"" << 0.7 * bar << "\" height=\"" << h
      << "\" fill=\"steelblue\"/>\n";
    s << "<text x=\"" << x + 0.35 * bar << "\" y=\"" << margin + plot_h + 14
      << "\" text-anchor=\"middle\" font-size=\"10\">" << i + 1 << "</text>\n";
  }
  s << "</g>\n";
  return s.str();
}

int cmd_spectrum(const Options& o) {
  const ExperimentConfig c = resolve(o);
  const Layout l = prepare(c);
  const Dataset d = obtain_dataset(l, c);
  check_points(c, d.points);
  const GeomancerConfig g = pipeline_of(c, o);
  const Geometry geometry = build_geometry(d.points, c.manifold_dim(), g);
  const SpectrumResult s = obtain_spectrum(l, c, geometry, g);
  const Vector raw = s.eigenvalues.cwiseMax(0.0);
  const double first = raw.size() > 0 ? raw(0) : 0.0;
  const Vector rescaled = first > 0.0 ? Vector(raw / first) : Vector::Constant(raw.size(), std::nan(""));

  in_stage("io", [&] {
    std::ostringstream csv;
    csv << std::setprecision(17) << "index,eigenvalue,rescaled,residual\n";
    for (Index i = 0; i < raw.size(); ++i)
      csv << i + 1 << "," << raw(i) << "," << rescaled(i) << "," << s.residuals(i) << "\n";
    write_text(l.spectrum_csv().string(), csv.str());
    write_text(l.spectrum_json().string(), spectrum_to_json(s) + "\n");
    const double w = 420.0, h = 300.0;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * w << "\" height=\"" << h
        << "\" font-family=\"sans-serif\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << svg_panel(raw, 0.0, w, h, label(c) + ": eigenvalues")
        << svg_panel(rescaled, w, w, h, "rescaled, first = 1") << "</svg>\n";
    write_text(l.spectrum_svg().string(), svg.str());
    return 0;
  });
  std::cout << std::setprecision(6);
  for (Index i = 0; i < raw.size(); ++i) std::cout << "lambda_" << i + 1 << " = " << raw(i) << "\n";
  std::cout << "spectrum -> " << l.spectrum_csv().string() << ", " << l.spectrum_svg().string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- sweep

int cmd_sweep(const Options& o) {
  const ExperimentConfig base = resolve(o, false);
  if (base.spec.empty()) throw UsageError("sweep needs a synthetic --spec");
  if (o.t_grid.empty()) throw UsageError("sweep needs --t-grid");
  if (o.seeds < 1) throw UsageError("--seeds must be >= 1");
  std::vector<ExperimentConfig> runs;
  for (Index t : o.t_grid) {
    for (Index s = 0; s < o.seeds; ++s) {
      ExperimentConfig c = base;
      c.t = t;
      c.seed = base.seed + static_cast<std::uint64_t>(s);
      try {
        c.validate();
      } catch (const ArgumentError& e) {
        throw UsageError("t = " + std::to_string(t) + ": " + e.what());
      }
      runs.push_back(c);
    }
  }
  const Layout l = prepare(base);

  struct Row {
    Index t;
    std::uint64_t seed;
    Index m;
    ErrorReport report;
    double seconds;
    std::string status;
  };
  std::vector<Row> rows;
  int failures = 0;
  std::ostringstream csv;
  csv << std::setprecision(10) << "t,seed,m,shape_accuracy,mean_error,error_std,seconds,status\n";
  for (const auto& c : runs) {
    const auto start = std::chrono::steady_clock::now();
    Row row{c.t, c.seed, 0, {}, 0.0, "ok"};
    try {
      const Dataset d = in_stage("synth", [&] { return make_dataset(c); });
      check_points(c, d.points);
      const Factorization f = run_geomancer(d.points, c.manifold_dim(), pipeline_of(c, o));
      row.m = f.m;
      row.report = in_stage("eval", [&] { return evaluate(c, d, f); });
    } catch (const StageError& e) {
      row.status = e.stage();
      row.report.mean_error = std::nan("");
      ++failures;
      std::cerr << "sweep: t = " << c.t << ", seed " << c.seed << ": stage '" << e.stage() << "' failed: " << detail(e)
                << "\n";
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    csv << row.t << "," << row.seed << "," << row.m << "," << row.report.shape_accuracy << ","
        << row.report.mean_error << "," << row.report.error_std << "," << row.seconds << "," << row.status << "\n";
    std::cout << "sweep: t = " << row.t << " seed " << row.seed << ": m = " << row.m
              << ", error = " << format_pm(row.report.mean_error, row.report.error_std) << ", shape "
              << row.report.shape_accuracy << " (" << std::setprecision(3) << row.seconds << " s)\n";
    rows.push_back(std::move(row));
  }

  // Per-t summary: error mean and std over seeds, mean per-point std.
  std::ostringstream summary;
  summary << std::setprecision(10)
          << "t,runs,m_correct,shape_accuracy,mean_error,seed_std,point_std\n";
  const std::size_t true_m = ManifoldSpec::parse(base.spec).factors.size();
  std::vector<std::vector<std::string>> table;
  for (Index t : o.t_grid) {
    double err = 0.0, err2 = 0.0, pstd = 0.0, shape = 0.0;
    Index n = 0, correct = 0, total = 0;
    for (const auto& r : rows) {
      if (r.t != t) continue;
      ++total;
      shape += r.report.shape_accuracy;
      if (r.m == static_cast<Index>(true_m)) ++correct;
      if (r.status != "ok" || std::isnan(r.report.mean_error)) continue;
      err += r.report.mean_error;
      err2 += r.report.mean_error * r.report.mean_error;
      pstd += r.report.error_std;
      ++n;
    }
    const double mean = n ? err / static_cast<double>(n) : std::nan("");
    const double seed_std = n > 1 ? std::sqrt(std::max(0.0, (err2 - n * mean * mean) / static_cast<double>(n - 1))) : 0.0;
    const double point_std = n ? pstd / static_cast<double>(n) : std::nan("");
    summary << t << "," << total << "," << correct << "," << shape / static_cast<double>(total) << "," << mean << ","
            << seed_std << "," << point_std << "\n";
    std::ostringstream sh;
    sh << std::fixed << std::setprecision(3) << shape / static_cast<double>(total);
    table.push_back({std::to_string(t), std::to_string(correct) + "/" + std::to_string(total), sh.str(),
                     format_pm(mean, seed_std)});
  }
  in_stage("io", [&] {
    write_text(l.sweep_csv().string(), csv.str());
    write_text(l.sweep_summary().string(), summary.str());
    return 0;
  });
  print_table(std::cout, {"t", "m correct", "Shape acc.", "Error (rad, +- over seeds)"}, table);
  return failures ? 1 : 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"Factorizes product manifolds from point samples."};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Sample a product manifold and write points plus ground truth");
  add_common(synth, o);
  synth->add_flag("--csv", o.csv, "Also write points.csv");

  auto* run = app.add_subcommand("run", "Run the pipeline and write the factorization");
  add_common(run, o);

  auto* eval = app.add_subcommand("eval", "Score a factorization against ground truth");
  add_common(eval, o);

  auto* spectrum = app.add_subcommand("spectrum", "Write the connection spectrum as CSV and SVG");
  add_common(spectrum, o);

  auto* sweep = app.add_subcommand("sweep", "Error against number of points");
  add_common(sweep, o);
  sweep->add_option("--t-grid", o.t_grid, "Point counts, comma separated")->delimiter(',');
  sweep->add_option("--seeds", o.seeds, "Seeds per point count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (o.threads > 0) set_thread_count(o.threads);
    if (synth->parsed()) return cmd_synth(o);
    if (run->parsed()) return cmd_run(o);
    if (eval->parsed()) return cmd_eval(o);
    if (spectrum->parsed()) return cmd_spectrum(o);
    if (sweep->parsed()) return cmd_sweep(o);
  } catch (const UsageError& e) {
    std::cerr << "geomancer: " << e.what() << "\n";
    return 2;
  } catch (const StageError& e) {
    std::cerr << "geomancer: stage '" << e.stage() << "' failed: " << detail(e) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "geomancer: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace geomancer::cli
