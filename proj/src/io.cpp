#include "geomancer/io.hpp"

#include "geomancer/binary_io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace geomancer {

namespace {

constexpr std::uint32_t kVersion = 1;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArgumentError("cannot open '" + path + "' for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path + "'");
  return in;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw ArgumentError("write to '" + path + "' failed");
}

void check_version(std::istream& in, const std::string& path) {
  const auto version = binary::read_u32(in);
  binary::read_u32(in);
  if (version != kVersion)
    throw ArgumentError("'" + path + "': unsupported version " + std::to_string(version));
}

// Shortest round-trip representation.
std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::uint64_t parse_hash(const nlohmann::json& j) {
  return std::stoull(j.get<std::string>(), nullptr, 16);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string read_text(const std::string& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, std::string_view text) {
  auto out = open_out(path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  finish(out, path);
}

void save_matrix(const std::string& path, const RowMatrix& m, const ArtifactStamp& stamp) {
  auto out = open_out(path);
  binary::write_magic(out, "GEOMMAT");
  binary::write_u32(out, kVersion);
  binary::write_u32(out, 0);
  binary::write_u64(out, static_cast<std::uint64_t>(m.rows()));
  binary::write_u64(out, static_cast<std::uint64_t>(m.cols()));
  binary::write_u64(out, stamp.config_hash);
  binary::write_u64(out, stamp.seed);
  binary::write_f64_array(out, m.data(), static_cast<std::size_t>(m.size()));
  finish(out, path);
}

RowMatrix load_matrix(const std::string& path, ArtifactStamp* stamp) {
  auto in = open_in(path);
  binary::expect_magic(in, "GEOMMAT");
  check_version(in, path);
  const auto rows = binary::read_u64(in);
  const auto cols = binary::read_u64(in);
  ArtifactStamp s;
  s.config_hash = binary::read_u64(in);
  s.seed = binary::read_u64(in);
  if (rows > (1ull << 40) || cols > (1ull << 20)) throw ArgumentError("'" + path + "': implausible shape");
  RowMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  binary::read_f64_array(in, m.data(), static_cast<std::size_t>(m.size()));
  if (stamp) *stamp = s;
  return m;
}

void save_matrix_csv(const std::string& path, const RowMatrix& m) {
  std::string text;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) {
      if (c) text += ',';
      text += format_double(m(r, c));
    }
    text += '\n';
  }
  write_text(path, text);
}

RowMatrix load_matrix_csv(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  Index lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p <= end) {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      double v = 0.0;
      auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc())
        throw ArgumentError(path + ":" + std::to_string(lineno) + ": not a number");
      row.push_back(v);
      p = res.ptr;
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
      if (p == end) break;
      if (*p != ',') throw ArgumentError(path + ":" + std::to_string(lineno) + ": expected ','");
      ++p;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw ArgumentError(path + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ArgumentError("'" + path + "' holds no rows");
  RowMatrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return m;
}

PointCloud load_points(const std::string& path, ArtifactStamp* stamp) {
  PointCloud pc;
  if (ends_with(path, ".csv")) {
    pc.data = load_matrix_csv(path);
    if (stamp) *stamp = {};
  } else {
    pc.data = load_matrix(path, stamp);
  }
  pc.validate();
  return pc;
}

void save_ground_truth(const std::string& path, const GroundTruth& truth, const ArtifactStamp& stamp) {
  const Index t = truth.size();
  if (t == 0) throw ArgumentError("empty ground truth");
  const Index n = truth.bases[0][0].rows();
  Index width = 0;
  for (int d : truth.factor_dims) width += n * d;
  RowMatrix flat(t, width);
  for (Index i = 0; i < t; ++i) {
    Index c = 0;
    for (std::size_t j = 0; j < truth.factor_dims.size(); ++j) {
      const Matrix& b = truth.bases[static_cast<std::size_t>(i)][j];
      for (Index r = 0; r < b.rows(); ++r)
        for (Index q = 0; q < b.cols(); ++q) flat(i, c++) = b(r, q);
    }
  }
  save_matrix(path, flat, stamp);
  nlohmann::json meta = {{"factor_dims", truth.factor_dims},
                         {"ambient_dim", n},
                         {"points", t},
                         {"config_hash", hash_hex(stamp.config_hash)},
                         {"seed", stamp.seed}};
  write_text(path + ".json", meta.dump(2) + "\n");
}

GroundTruth load_ground_truth(const std::string& path, ArtifactStamp* stamp) {
  ArtifactStamp s;
  const RowMatrix flat = load_matrix(path, &s);
  const auto meta = nlohmann::json::parse(read_text(path + ".json"));
  GroundTruth truth;
  truth.factor_dims = meta.at("factor_dims").get<std::vector<int>>();
  const Index n = meta.at("ambient_dim").get<Index>();
  Index width = 0;
  for (int d : truth.factor_dims) width += n * d;
  if (flat.cols() != width || flat.rows() != meta.at("points").get<Index>())
    throw ArgumentError("'" + path + "': shape disagrees with its sidecar");
  if (parse_hash(meta.at("config_hash")) != s.config_hash)
    throw ArgumentError("'" + path + "': sidecar hash disagrees with the matrix header");
  truth.bases.resize(static_cast<std::size_t>(flat.rows()));
  for (Index i = 0; i < flat.rows(); ++i) {
    Index c = 0;
    for (int d : truth.factor_dims) {
      Matrix b(n, d);
      for (Index r = 0; r < n; ++r)
        for (Index q = 0; q < d; ++q) b(r, q) = flat(i, c++);
      truth.bases[static_cast<std::size_t>(i)].push_back(std::move(b));
    }
  }
  if (stamp) *stamp = s;
  return truth;
}

void save_factorization(const std::string& manifest_path, const std::string& bases_path,
                        const Factorization& fact, const ArtifactStamp& stamp) {
  using nlohmann::json;
  json dims = json::array();
  json diag = json::array();
  for (Index i = 0; i < fact.size(); ++i) {
    dims.push_back(fact.dims(i));
    const auto& d = fact.diagnostics[static_cast<std::size_t>(i)];
    diag.push_back({{"offdiag_residual", d.offdiag_residual},
                    {"diag_converged", d.diag_converged},
                    {"sweeps", d.sweeps},
                    {"clusters", d.clusters},
                    {"unassigned", d.unassigned},
                    {"cosine_margin", d.cosine_margin}});
  }
  json manifest = {
      {"format", "geomancer-factorization"},
      {"version", kVersion},
      {"config_hash", hash_hex(stamp.config_hash)},
      {"seed", stamp.seed},
      {"m", fact.m},
      {"k", fact.k},
      {"ambient_dim", fact.ambient_dim},
      {"points", fact.size()},
      {"gap_index", fact.gap_index},
      {"product_structure", fact.product_structure},
      {"message", fact.message},
      {"eigenvalues", std::vector<double>(fact.eigenvalues.data(), fact.eigenvalues.data() + fact.eigenvalues.size())},
      {"residuals", std::vector<double>(fact.residuals.data(), fact.residuals.data() + fact.residuals.size())},
      {"dims", dims},
      {"diagnostics", diag},
  };
  write_text(manifest_path, manifest.dump(1) + "\n");

  auto out = open_out(bases_path);
  binary::write_magic(out, "GEOMFAC");
  binary::write_u32(out, kVersion);
  binary::write_u32(out, 0);
  binary::write_u64(out, static_cast<std::uint64_t>(fact.size()));
  binary::write_u64(out, static_cast<std::uint64_t>(fact.ambient_dim));
  binary::write_u64(out, stamp.config_hash);
  binary::write_u64(out, stamp.seed);
  for (const auto& subs : fact.subspaces) {
    binary::write_u32(out, static_cast<std::uint32_t>(subs.size()));
    for (const auto& s : subs) {
      binary::write_u32(out, static_cast<std::uint32_t>(s.cols()));
      const RowMatrix rm = s;
      binary::write_f64_array(out, rm.data(), static_cast<std::size_t>(rm.size()));
    }
  }
  finish(out, bases_path);
}

Factorization load_factorization(const std::string& manifest_path, const std::string& bases_path,
                                 ArtifactStamp* stamp) {
  const auto manifest = nlohmann::json::parse(read_text(manifest_path));
  if (manifest.value("format", "") != "geomancer-factorization")
    throw ArgumentError("'" + manifest_path + "' is not a factorization manifest");
  Factorization fact;
  fact.m = manifest.at("m").get<Index>();
  fact.k = manifest.at("k").get<Index>();
  fact.ambient_dim = manifest.at("ambient_dim").get<Index>();
  fact.gap_index = manifest.at("gap_index").get<Index>();
  fact.product_structure = manifest.at("product_structure").get<bool>();
  fact.message = manifest.at("message").get<std::string>();
  const auto ev = manifest.at("eigenvalues").get<std::vector<double>>();
  const auto rs = manifest.at("residuals").get<std::vector<double>>();
  fact.eigenvalues = Eigen::Map<const Vector>(ev.data(), static_cast<Index>(ev.size()));
  fact.residuals = Eigen::Map<const Vector>(rs.data(), static_cast<Index>(rs.size()));
  for (const auto& d : manifest.at("diagnostics")) {
    PointDiagnostics p;
    p.offdiag_residual = d.at("offdiag_residual").get<double>();
    p.diag_converged = d.at("diag_converged").get<bool>();
    p.sweeps = d.at("sweeps").get<Index>();
    p.clusters = d.at("clusters").get<Index>();
    p.unassigned = d.at("unassigned").get<Index>();
    p.cosine_margin = d.at("cosine_margin").get<double>();
    fact.diagnostics.push_back(p);
  }
  ArtifactStamp s;
  s.config_hash = parse_hash(manifest.at("config_hash"));
  s.seed = manifest.at("seed").get<std::uint64_t>();

  auto in = open_in(bases_path);
  binary::expect_magic(in, "GEOMFAC");
  check_version(in, bases_path);
  const auto points = binary::read_u64(in);
  const auto ambient = binary::read_u64(in);
  const auto hash = binary::read_u64(in);
  const auto seed = binary::read_u64(in);
  if (hash != s.config_hash || seed != s.seed)
    throw ArgumentError("'" + bases_path + "' does not belong to '" + manifest_path + "'");
  if (points != fact.diagnostics.size() || ambient != static_cast<std::uint64_t>(fact.ambient_dim))
    throw ArgumentError("'" + bases_path + "': shape disagrees with the manifest");
  fact.subspaces.resize(points);
  for (auto& subs : fact.subspaces) {
    const auto count = binary::read_u32(in);
    if (count > ambient) throw ArgumentError("'" + bases_path + "': corrupt subspace count");
    for (std::uint32_t j = 0; j < count; ++j) {
      const auto d = binary::read_u32(in);
      if (d > ambient) throw ArgumentError("'" + bases_path + "': corrupt subspace dim");
      RowMatrix rm(static_cast<Index>(ambient), static_cast<Index>(d));
      binary::read_f64_array(in, rm.data(), static_cast<std::size_t>(rm.size()));
      subs.emplace_back(rm);
    }
  }
  if (stamp) *stamp = s;
  return fact;
}

}  // namespace geomancer
