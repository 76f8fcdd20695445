#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

namespace fluxsolve {

using Vec = std::vector<double>;

enum class FaceKind { Interior, PeriodicSeam, Dirichlet, Neumann };

std::string to_string(FaceKind kind);
FaceKind face_kind_from_string(const std::string& s);

// A face seen from its owner. Boundary faces carry a negative virtual
// neighbor index that never addresses cell arrays.
struct Face {
  long owner = 0;
  long neighbor = 0;
  double area = 1.0;
  Vec normal;    // unit, pointing out of owner
  Vec centroid;  // x_ij
  Vec d;         // x_j - x_i (wrap-corrected on periodic seams); x_ij - x_i on boundaries
  FaceKind kind = FaceKind::Interior;

  bool is_boundary() const { return neighbor < 0; }
};

// Immutable after construction.
struct Mesh {
  int dim = 1;
  double length = 0.0;
  std::string boundary = "periodic";  // "periodic" or "bounded"
  std::vector<double> cell_volumes;
  std::vector<Vec> cell_centroids;
  std::vector<Face> faces;

  std::size_t n_cells() const { return cell_volumes.size(); }
  std::size_t n_faces() const { return faces.size(); }
  std::vector<std::size_t> boundary_faces() const;
  std::size_t n_interior_faces() const { return n_faces() - boundary_faces().size(); }
  // N_i derived from interior faces; each list sorted ascending.
  std::vector<std::vector<long>> neighbor_lists() const;
  double total_volume() const;
};

// Boundary specification for an interval: either periodic, or a kind for
// each end (Dirichlet or Neumann). Values live with the boundary conditions.
struct IntervalBoundary {
  bool periodic = true;
  FaceKind left = FaceKind::Neumann;
  FaceKind right = FaceKind::Neumann;

  static IntervalBoundary make_periodic() { return {}; }
  static IntervalBoundary bounded(FaceKind left, FaceKind right) { return {false, left, right}; }
};

// Uniform cells of width length / n_cells; n_cells >= 2, length > 0.
// Periodic meshes have n faces, face k at x = k dx joining cell k-1 (mod n)
// to cell k. Bounded meshes list the left boundary face, the n - 1 interior
// faces, then the right boundary face.
Mesh build_interval_mesh(std::size_t n_cells, double length, IntervalBoundary boundary);

// Same layout with arbitrary positive cell widths.
Mesh build_interval_mesh_from_widths(const std::vector<double>& widths, IntervalBoundary boundary);

struct HalfEdge {
  long from = 0;
  long to = 0;            // negative for boundary half-edges
  std::size_t face = 0;
  double orientation = 1.0;  // +1 when `from` is the face owner
  bool boundary = false;
};

struct GraphTopology {
  std::size_t n_vertices = 0;
  std::vector<HalfEdge> half_edges;
  // index of the opposite half-edge, or -1 for boundary half-edges
  std::vector<long> reverse;

  // dense 0/1 adjacency over real vertices (boundary half-edges excluded)
  std::vector<std::vector<int>> adjacency() const;
};

GraphTopology mesh_to_graph(const Mesh& mesh);

struct FaceGeometry {
  double area = 0.0;
  Vec normal;
  Vec d;
  Vec centroid;
  long from = 0;
  long to = 0;
};

// Geometry of face `face_id` seen from its owner, or from its neighbor when
// `from_neighbor` is set (normal and d flip, area and centroid are shared).
FaceGeometry face_geometry(const Mesh& mesh, std::size_t face_id, bool from_neighbor = false);

struct MeshViolation {
  std::string kind;  // e.g. "cell_volume", "face_normal"
  long index = 0;    // offending cell or face index
  std::string detail;
};

// Report of every invariant violation; empty iff the mesh is well-formed.
std::vector<MeshViolation> validate_mesh(const Mesh& mesh);

double norm(const Vec& v);
double dot(const Vec& a, const Vec& b);

nlohmann::json mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const nlohmann::json& j);

}  // namespace fluxsolve
