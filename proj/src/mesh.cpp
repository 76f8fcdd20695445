#include "fluxsolve/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "fluxsolve/common.hpp"
#include "fluxsolve/tolerances.hpp"

namespace fluxsolve {

std::string to_string(FaceKind kind) {
  switch (kind) {
    case FaceKind::Interior: return "interior";
    case FaceKind::PeriodicSeam: return "periodic";
    case FaceKind::Dirichlet: return "dirichlet";
    case FaceKind::Neumann: return "neumann";
  }
  return "interior";
}

FaceKind face_kind_from_string(const std::string& s) {
  if (s == "interior") return FaceKind::Interior;
  if (s == "periodic") return FaceKind::PeriodicSeam;
  if (s == "dirichlet") return FaceKind::Dirichlet;
  if (s == "neumann") return FaceKind::Neumann;
  throw CorruptionError("unknown face kind '" + s + "'");
}

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size() && k < b.size(); ++k) s += a[k] * b[k];
  return s;
}

std::vector<std::size_t> Mesh::boundary_faces() const {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < faces.size(); ++f)
    if (faces[f].is_boundary()) out.push_back(f);
  return out;
}

std::vector<std::vector<long>> Mesh::neighbor_lists() const {
  std::vector<std::vector<long>> nb(n_cells());
  for (const auto& f : faces) {
    if (f.is_boundary()) continue;
    nb[static_cast<std::size_t>(f.owner)].push_back(f.neighbor);
    nb[static_cast<std::size_t>(f.neighbor)].push_back(f.owner);
  }
  for (auto& l : nb) std::sort(l.begin(), l.end());
  return nb;
}

double Mesh::total_volume() const {
  double s = 0.0;
  for (double v : cell_volumes) s += v;
  return s;
}

Mesh build_interval_mesh_from_widths(const std::vector<double>& widths,
                                     IntervalBoundary boundary) {
  const std::size_t n = widths.size();
  if (n < 2) throw ConfigError("build_interval_mesh: n_cells must be >= 2");
  for (double w : widths)
    if (!(w > 0.0) || !std::isfinite(w))
      throw ConfigError("build_interval_mesh: cell widths must be positive");
  if (!boundary.periodic) {
    auto ok = [](FaceKind k) { return k == FaceKind::Dirichlet || k == FaceKind::Neumann; };
    if (!ok(boundary.left) || !ok(boundary.right))
      throw ConfigError("build_interval_mesh: bounded ends must be dirichlet or neumann");
  }

  Mesh m;
  m.dim = 1;
  m.boundary = boundary.periodic ? "periodic" : "bounded";
  m.cell_volumes = widths;
  std::vector<double> edges(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) edges[i + 1] = edges[i] + widths[i];
  m.length = edges[n];
  m.cell_centroids.resize(n);
  for (std::size_t i = 0; i < n; ++i) m.cell_centroids[i] = {0.5 * (edges[i] + edges[i + 1])};

  auto x = [&](long i) { return m.cell_centroids[static_cast<std::size_t>(i)][0]; };

  if (boundary.periodic) {
    for (std::size_t k = 0; k < n; ++k) {
      Face f;
      f.owner = static_cast<long>((k + n - 1) % n);
      f.neighbor = static_cast<long>(k);
      f.normal = {1.0};
      f.centroid = {edges[k]};
      if (k == 0) {
        f.kind = FaceKind::PeriodicSeam;
        f.d = {x(0) + m.length - x(f.owner)};
      } else {
        f.d = {x(f.neighbor) - x(f.owner)};
      }
      m.faces.push_back(std::move(f));
    }
  } else {
    Face left;
    left.owner = 0;
    left.neighbor = -1;
    left.normal = {-1.0};
    left.centroid = {0.0};
    left.d = {0.0 - x(0)};
    left.kind = boundary.left;
    m.faces.push_back(std::move(left));
    for (std::size_t k = 1; k < n; ++k) {
      Face f;
      f.owner = static_cast<long>(k - 1);
      f.neighbor = static_cast<long>(k);
      f.normal = {1.0};
      f.centroid = {edges[k]};
      f.d = {x(f.neighbor) - x(f.owner)};
      m.faces.push_back(std::move(f));
    }
    Face right;
    right.owner = static_cast<long>(n - 1);
    right.neighbor = -2;
    right.normal = {1.0};
    right.centroid = {m.length};
    right.d = {m.length - x(static_cast<long>(n - 1))};
    right.kind = boundary.right;
    m.faces.push_back(std::move(right));
  }
  return m;
}

Mesh build_interval_mesh(std::size_t n_cells, double length, IntervalBoundary boundary) {
  if (!(length > 0.0) || !std::isfinite(length))
    throw ConfigError("build_interval_mesh: length must be positive");
  if (n_cells < 2) throw ConfigError("build_interval_mesh: n_cells must be >= 2");
  Mesh m = build_interval_mesh_from_widths(
      std::vector<double>(n_cells, length / static_cast<double>(n_cells)), boundary);
  // uniform centroids computed directly rather than by accumulation
  const double dx = length / static_cast<double>(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i)
    m.cell_centroids[i] = {(static_cast<double>(i) + 0.5) * dx};
  for (auto& f : m.faces) {
    if (f.is_boundary()) {
      f.d = {f.centroid[0] - m.cell_centroids[static_cast<std::size_t>(f.owner)][0]};
    } else {
      f.d = {dx};
    }
  }
  for (std::size_t k = 0; k < m.faces.size(); ++k) {
    auto& f = m.faces[k];
    if (!f.is_boundary()) f.centroid = {static_cast<double>(f.neighbor) * dx};
  }
  m.length = length;
  return m;
}

std::vector<std::vector<int>> GraphTopology::adjacency() const {
  std::vector<std::vector<int>> a(n_vertices, std::vector<int>(n_vertices, 0));
  for (const auto& h : half_edges)
    if (!h.boundary) a[static_cast<std::size_t>(h.from)][static_cast<std::size_t>(h.to)] = 1;
  return a;
}

GraphTopology mesh_to_graph(const Mesh& mesh) {
  GraphTopology g;
  g.n_vertices = mesh.n_cells();
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& face = mesh.faces[f];
    if (face.is_boundary()) {
      g.half_edges.push_back({face.owner, face.neighbor, f, 1.0, true});
      g.reverse.push_back(-1);
    } else {
      const long a = static_cast<long>(g.half_edges.size());
      g.half_edges.push_back({face.owner, face.neighbor, f, 1.0, false});
      g.half_edges.push_back({face.neighbor, face.owner, f, -1.0, false});
      g.reverse.push_back(a + 1);
      g.reverse.push_back(a);
    }
  }
  return g;
}

FaceGeometry face_geometry(const Mesh& mesh, std::size_t face_id, bool from_neighbor) {
  if (face_id >= mesh.faces.size())
    throw std::out_of_range("face_geometry: unknown face id " + std::to_string(face_id));
  const auto& f = mesh.faces[face_id];
  if (from_neighbor && f.is_boundary())
    throw std::invalid_argument("face_geometry: boundary face has no neighbor view");
  FaceGeometry g{f.area, f.normal, f.d, f.centroid, f.owner, f.neighbor};
  if (from_neighbor) {
    for (auto& v : g.normal) v = -v;
    for (auto& v : g.d) v = -v;
    std::swap(g.from, g.to);
  }
  return g;
}

std::vector<MeshViolation> validate_mesh(const Mesh& mesh) {
  std::vector<MeshViolation> out;
  const long n = static_cast<long>(mesh.n_cells());
  if (mesh.cell_centroids.size() != mesh.cell_volumes.size())
    out.push_back({"cell_count", -1, "centroid and volume arrays differ in length"});
  for (long i = 0; i < n; ++i) {
    double v = mesh.cell_volumes[static_cast<std::size_t>(i)];
    if (!(v > 0.0) || !std::isfinite(v))
      out.push_back({"cell_volume", i, "volume " + std::to_string(v) + " is not positive"});
  }
  std::set<long> virtual_ids;
  for (std::size_t k = 0; k < mesh.faces.size(); ++k) {
    const auto& f = mesh.faces[k];
    const long id = static_cast<long>(k);
    if (!(f.area > 0.0)) out.push_back({"face_area", id, "area is not positive"});
    if (static_cast<int>(f.normal.size()) != mesh.dim || static_cast<int>(f.d.size()) != mesh.dim ||
        static_cast<int>(f.centroid.size()) != mesh.dim) {
      out.push_back({"face_dimension", id, "vector length differs from mesh dimension"});
      continue;
    }
    if (std::abs(norm(f.normal) - 1.0) > tol::normal_unit)
      out.push_back({"face_normal", id, "|n| = " + std::to_string(norm(f.normal))});
    if (!(norm(f.d) > 0.0)) out.push_back({"face_distance", id, "d has zero length"});
    if (f.owner < 0 || f.owner >= n) out.push_back({"face_owner", id, "owner out of range"});
    if (f.is_boundary()) {
      if (f.kind != FaceKind::Dirichlet && f.kind != FaceKind::Neumann)
        out.push_back({"face_kind", id, "boundary face must be dirichlet or neumann"});
      if (!virtual_ids.insert(f.neighbor).second)
        out.push_back({"face_neighbor", id, "virtual index reused"});
    } else {
      if (f.neighbor >= n) out.push_back({"face_neighbor", id, "neighbor out of range"});
      if (f.neighbor == f.owner) out.push_back({"face_neighbor", id, "owner equals neighbor"});
      if (f.kind == FaceKind::Dirichlet || f.kind == FaceKind::Neumann)
        out.push_back({"face_kind", id, "interior face tagged as boundary"});
    }
  }
  // symmetry of neighbor lists: every j in N_i must list i
  bool in_range = std::none_of(out.begin(), out.end(), [](const MeshViolation& v) {
    return v.kind == "face_owner" || v.kind == "face_neighbor";
  });
  if (in_range) {
    auto nb = mesh.neighbor_lists();
    for (long i = 0; i < n; ++i)
      for (long j : nb[static_cast<std::size_t>(i)]) {
        const auto& back = nb[static_cast<std::size_t>(j)];
        if (!std::binary_search(back.begin(), back.end(), i))
          out.push_back({"neighbor_symmetry", i, "missing reverse entry for " + std::to_string(j)});
      }
  }
  return out;
}

nlohmann::json mesh_to_json(const Mesh& mesh) {
  using nlohmann::json;
  json faces = json::array();
  for (const auto& f : mesh.faces) {
    faces.push_back({{"owner", f.owner},
                     {"neighbor", f.neighbor},
                     {"area", f.area},
                     {"normal", f.normal},
                     {"centroid", f.centroid},
                     {"d", f.d},
                     {"kind", to_string(f.kind)}});
  }
  return json{{"n_cells", mesh.n_cells()},
              {"dim", mesh.dim},
              {"length", mesh.length},
              {"boundary", mesh.boundary},
              {"cell_volumes", mesh.cell_volumes},
              {"cell_centroids", mesh.cell_centroids},
              {"faces", std::move(faces)}};
}

Mesh mesh_from_json(const nlohmann::json& j) {
  Mesh m;
  try {
    m.dim = j.value("dim", 1);
    m.length = j.at("length").get<double>();
    m.boundary = j.at("boundary").get<std::string>();
    m.cell_centroids = j.at("cell_centroids").get<std::vector<Vec>>();
    const auto n = j.at("n_cells").get<std::size_t>();
    if (j.contains("cell_volumes")) {
      m.cell_volumes = j.at("cell_volumes").get<std::vector<double>>();
    } else {
      m.cell_volumes.assign(n, m.length / static_cast<double>(n));
    }
    if (m.cell_volumes.size() != n || m.cell_centroids.size() != n)
      throw CorruptionError("mesh: n_cells does not match cell arrays");
    for (const auto& jf : j.at("faces")) {
      Face f;
      f.owner = jf.at("owner").get<long>();
      f.neighbor = jf.at("neighbor").get<long>();
      f.area = jf.at("area").get<double>();
      f.normal = jf.at("normal").get<Vec>();
      f.centroid = jf.at("centroid").get<Vec>();
      f.kind = face_kind_from_string(jf.value("kind", std::string("interior")));
      if (jf.contains("d")) {
        f.d = jf.at("d").get<Vec>();
      } else if (f.neighbor >= 0 && f.neighbor < static_cast<long>(n)) {
        const auto& xi = m.cell_centroids.at(static_cast<std::size_t>(f.owner));
        const auto& xj = m.cell_centroids.at(static_cast<std::size_t>(f.neighbor));
        f.d.resize(xi.size());
        for (std::size_t k = 0; k < xi.size(); ++k) f.d[k] = xj[k] - xi[k];
      } else {
        const auto& xi = m.cell_centroids.at(static_cast<std::size_t>(f.owner));
        f.d.resize(xi.size());
        for (std::size_t k = 0; k < xi.size(); ++k) f.d[k] = f.centroid[k] - xi[k];
      }
      m.faces.push_back(std::move(f));
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptionError(std::string("mesh: ") + e.what());
  }
  auto violations = validate_mesh(m);
  if (!violations.empty())
    throw CorruptionError("mesh: " + violations.front().kind + " at " +
                          std::to_string(violations.front().index) + ": " +
                          violations.front().detail);
  return m;
}

}  // namespace fluxsolve
