#include <gtest/gtest.h>

#include <cmath>

#include "fluxsolve/mesh.hpp"
#include "fluxsolve/propcheck.hpp"

using namespace fluxsolve;

TEST(Mesh, UniformPeriodicTenCells) {
  const Mesh m = build_interval_mesh(10, 1.0, IntervalBoundary::make_periodic());
  EXPECT_EQ(m.n_cells(), 10u);
  EXPECT_EQ(m.n_interior_faces(), 10u);
  for (double v : m.cell_volumes) EXPECT_EQ(v, 0.1);
  for (const auto& f : m.faces) {
    EXPECT_EQ(std::abs(f.normal[0]), 1.0);
    EXPECT_NEAR(norm(f.d), 0.1, 1e-15);
  }
  EXPECT_TRUE(validate_mesh(m).empty());
}

TEST(Mesh, TwoCellPeriodic) {
  const Mesh m = build_interval_mesh(2, 1.0, IntervalBoundary::make_periodic());
  EXPECT_DOUBLE_EQ(m.cell_centroids[0][0], 0.25);
  EXPECT_DOUBLE_EQ(m.cell_centroids[1][0], 0.75);
  ASSERT_EQ(m.n_faces(), 2u);
  EXPECT_DOUBLE_EQ(m.faces[0].centroid[0], 0.0);
  EXPECT_DOUBLE_EQ(m.faces[1].centroid[0], 0.5);
  EXPECT_TRUE(validate_mesh(m).empty());
}

TEST(Mesh, RejectsSingleCellAndBadLength) {
  EXPECT_THROW(build_interval_mesh(1, 1.0, IntervalBoundary::make_periodic()), ConfigError);
  EXPECT_THROW(build_interval_mesh(4, 0.0, IntervalBoundary::make_periodic()), ConfigError);
}

TEST(Mesh, VolumesSumToLength) {
  for (std::size_t n : {2, 3, 7, 10, 33, 100}) {
    for (double len : {0.3, 1.0, 7.5}) {
      const Mesh m = build_interval_mesh(n, len, IntervalBoundary::make_periodic());
      EXPECT_NEAR(m.total_volume(), len, 1e-12 * len);
    }
  }
}

TEST(Mesh, GraphHalfEdges) {
  EXPECT_EQ(mesh_to_graph(build_interval_mesh(10, 1.0, IntervalBoundary::make_periodic())).half_edges.size(), 20u);
  EXPECT_EQ(mesh_to_graph(build_interval_mesh(2, 1.0, IntervalBoundary::make_periodic())).half_edges.size(), 4u);
  const Mesh b = build_interval_mesh(4, 1.0, IntervalBoundary::bounded(FaceKind::Dirichlet, FaceKind::Neumann));
  const auto g = mesh_to_graph(b);
  std::size_t boundary = 0;
  for (std::size_t e = 0; e < g.half_edges.size(); ++e)
    if (g.half_edges[e].boundary) {
      ++boundary;
      EXPECT_LT(g.half_edges[e].to, 0);
      EXPECT_EQ(g.reverse[e], -1);
    }
  EXPECT_EQ(boundary, 2u);
  EXPECT_EQ(g.half_edges.size(), 2u * 3u + 2u);
}

TEST(Mesh, GraphAdjacencySymmetric) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Mesh m = random_graph_mesh(12, 15, 2, rng);
    EXPECT_TRUE(validate_mesh(m).empty());
    const auto a = mesh_to_graph(m).adjacency();
    for (std::size_t i = 0; i < a.size(); ++i)
      for (std::size_t j = 0; j < a.size(); ++j) EXPECT_EQ(a[i][j], a[j][i]);
  }
}

TEST(Mesh, FaceGeometryViews) {
  const Mesh m = build_interval_mesh(10, 1.0, IntervalBoundary::make_periodic());
  const auto g = face_geometry(m, 4);
  EXPECT_EQ(g.from, 3);
  EXPECT_EQ(g.to, 4);
  EXPECT_EQ(g.area, 1.0);
  EXPECT_EQ(g.normal[0], 1.0);
  EXPECT_NEAR(norm(g.d), 0.1, 1e-15);
  const auto r = face_geometry(m, 4, true);
  EXPECT_EQ(r.from, 4);
  EXPECT_EQ(r.normal[0], -1.0);
  EXPECT_EQ(r.d[0], -g.d[0]);
  EXPECT_EQ(r.area, g.area);
  EXPECT_EQ(r.centroid, g.centroid);
  // periodic seam between cells 9 and 0 uses the wrapped distance
  const auto seam = face_geometry(m, 0);
  EXPECT_EQ(seam.from, 9);
  EXPECT_EQ(seam.to, 0);
  EXPECT_NEAR(norm(seam.d), 0.1, 1e-15);
  EXPECT_THROW(face_geometry(m, 10), std::out_of_range);
}

TEST(Mesh, ValidationCatchesInjectedDefects) {
  Mesh m = build_interval_mesh(10, 1.0, IntervalBoundary::make_periodic());
  Mesh bad_normal = m;
  bad_normal.faces[3].normal[0] = 0.5;
  auto v = validate_mesh(bad_normal);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].index, 3);
  Mesh bad_volume = m;
  bad_volume.cell_volumes[2] = 0.0;
  v = validate_mesh(bad_volume);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].index, 2);
}

TEST(Mesh, NeighborListsSymmetric) {
  const Mesh m = build_interval_mesh(6, 1.0, IntervalBoundary::bounded(FaceKind::Dirichlet, FaceKind::Dirichlet));
  const auto nl = m.neighbor_lists();
  for (std::size_t i = 0; i < nl.size(); ++i)
    for (long j : nl[i]) {
      const auto& back = nl[static_cast<std::size_t>(j)];
      EXPECT_NE(std::find(back.begin(), back.end(), static_cast<long>(i)), back.end());
    }
  EXPECT_EQ(nl[0], std::vector<long>{1});
}

TEST(Mesh, JsonRoundTripAndCorruption) {
  const Mesh m = build_interval_mesh_from_widths({0.1, 0.3, 0.2}, IntervalBoundary::bounded(FaceKind::Dirichlet, FaceKind::Neumann));
  const Mesh back = mesh_from_json(mesh_to_json(m));
  EXPECT_EQ(back.cell_volumes, m.cell_volumes);
  EXPECT_EQ(back.n_faces(), m.n_faces());
  for (std::size_t f = 0; f < m.n_faces(); ++f) {
    EXPECT_EQ(back.faces[f].d, m.faces[f].d);
    EXPECT_EQ(back.faces[f].kind, m.faces[f].kind);
  }
  auto j = mesh_to_json(m);
  j["cell_volumes"][1] = -1.0;
  EXPECT_THROW(mesh_from_json(j), CorruptionError);
}
