#include "support.hpp"

#include "neupig/kdtree.hpp"
#include "neupig/kernels.hpp"
#include "neupig/mesh_io.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

using namespace neupig;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir(const std::string& name) {
  const fs::path p = fs::path(NEUPIG_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

PointCloud cloud_of(std::initializer_list<Vec3d> pts) {
  PointCloud c;
  c.points = pts;
  return c;
}

// Vertex index x + 2y + 4z. Every quad touching (1,1,1) is split along the
// diagonal through it, so that corner sees equal area from its three faces.
TriMesh unit_cube() {
  TriMesh m;
  for (int i = 0; i < 8; ++i) m.vertices.emplace_back(i & 1, (i >> 1) & 1, (i >> 2) & 1);
  const int quads[6][4] = {{0, 4, 6, 2}, {7, 5, 1, 3}, {0, 1, 5, 4},
                           {7, 3, 2, 6}, {0, 2, 3, 1}, {7, 6, 4, 5}};
  for (const auto& q : quads) {
    m.faces.push_back({q[0], q[1], q[2]});
    m.faces.push_back({q[0], q[2], q[3]});
  }
  return m;
}

TriMesh icosahedron() {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh m;
  m.vertices = {{-1, p, 0}, {1, p, 0},  {-1, -p, 0}, {1, -p, 0}, {0, -1, p},  {0, 1, p},
                {0, -1, -p}, {0, 1, -p}, {p, 0, -1},  {p, 0, 1},  {-p, 0, -1}, {-p, 0, 1}};
  m.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return m;
}

}  // namespace

TEST_CASE("normalization examples") {
  {
    auto [out, xf] = normalize_sequence({cloud_of({{-1, -1, -1}, {1, 1, 1}})});
    CHECK(xf.scale == 1.0);
    CHECK(xf.center == Vec3d::Zero());
    CHECK(out[0].points[0] == Vec3d(-1, -1, -1));
    CHECK(out[0].points[1] == Vec3d(1, 1, 1));
  }
  {
    auto [out, xf] = normalize_sequence({cloud_of({{0, 0, 0}, {2, 0, 0}})});
    CHECK(xf.center == Vec3d(1, 0, 0));
    CHECK(xf.scale == 1.0);
    CHECK(out[0].points[0] == Vec3d(-1, 0, 0));
    CHECK(out[0].points[1] == Vec3d(1, 0, 0));
  }
  {
    auto [out, xf] =
        normalize_sequence({cloud_of({{0, 0, 0}, {1, 2, 3}}), cloud_of({{4, 4, 4}, {2, 1, 0}})});
    CHECK(xf.scale == 0.5);
    CHECK(xf.center == Vec3d(2, 2, 2));
    CHECK(out[1].points[0] == Vec3d(1, 1, 1));
  }
}

TEST_CASE("normalization errors") {
  CHECK_THROWS_AS(normalize_sequence({}), Error);
  CHECK_THROWS_AS(normalize_sequence({PointCloud{}}), Error);
  CHECK_THROWS_AS(normalize_sequence({cloud_of({{1, 2, 3}, {1, 2, 3}})}), Error);
}

TEST_CASE("normalization fits the cube, is shared by all frames and is idempotent") {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    PointCloudSequence seq(3);
    for (auto& c : seq)
      for (auto& p : random_points(50, rng, -5.0, 11.0))
        c.points.push_back(Vec3d(p.x() * 2.0, p.y(), p.z() * 0.3));
    auto [out, xf] = normalize_sequence(seq);
    double max_abs = 0.0;
    for (std::size_t t = 0; t < seq.size(); ++t)
      for (std::size_t i = 0; i < seq[t].size(); ++i) {
        const Vec3d& q = out[t].points[i];
        CHECK(q.isApprox(xf.apply(seq[t].points[i])));
        max_abs = std::max(max_abs, q.cwiseAbs().maxCoeff());
      }
    CHECK(max_abs <= 1.0 + 1e-15);
    CHECK(max_abs >= 1.0 - 1e-15);

    auto [again, xf2] = normalize_sequence(out);
    CHECK(std::abs(xf2.scale - 1.0) <= 1e-12);
    CHECK(xf2.center.norm() <= 1e-12);
  }
}

TEST_CASE("nearest neighbor examples") {
  const std::vector<Vec3d> a = {{0, 0, 0}, {1, 1, 1}};
  KdTree<double> ta(a);
  auto h = ta.nearest(Vec3d(0, 0, 0));
  CHECK(h.index == 0);
  CHECK(h.sq_dist == 0.0);

  const std::vector<Vec3d> b = {{0, 0, 0}, {1, 0, 0}};
  KdTree<double> tb(b);
  h = tb.nearest(Vec3d(0.9, 0, 0));
  CHECK(h.index == 1);
  CHECK(h.sq_dist == doctest::Approx(0.01).epsilon(1e-12));

  KdTree<double> empty;
  CHECK_THROWS_AS(empty.nearest(Vec3d::Zero()), Error);
}

TEST_CASE("nearest neighbor ties go to the lowest index") {
  const std::vector<Vec3d> pts = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {1, 0, 0}};
  KdTree<double> tree(pts, 1);
  CHECK(tree.nearest(Vec3d::Zero()).index == 0);
  CHECK(tree.nearest(Vec3d(2, 0, 0)).index == 0);
}

TEST_CASE("kd-tree matches an exhaustive scan") {
  Rng rng(11);
  for (int n : {1, 2, 17, 500, 2000}) {
    const auto pts = random_points(static_cast<std::size_t>(n), rng);
    // Duplicates and a lattice exercise tie handling.
    auto targets = pts;
    for (int k = 0; k < n / 10; ++k) targets.push_back(pts[static_cast<std::size_t>(k)]);
    for (int x = 0; x < 4; ++x)
      for (int y = 0; y < 4; ++y) targets.emplace_back(x * 0.5 - 1, y * 0.5 - 1, 0.0);
    KdTree<double> tree(targets);
    auto queries = random_points(100, rng, -1.2, 1.2);
    queries.emplace_back(-0.75, -0.75, 0.0);
    queries.emplace_back(-0.25, -0.25, 0.0);
    for (const auto& q : queries) {
      // Independent scan in test code.
      int best = -1;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < targets.size(); ++j) {
        const double d = (targets[j] - q).squaredNorm();
        if (d < bd) {
          bd = d;
          best = static_cast<int>(j);
        }
      }
      const auto h = tree.nearest(q);
      CHECK(h.index == best);
      CHECK(h.sq_dist == squared_distance(targets[static_cast<std::size_t>(best)], q));
      const auto hb = nearest_brute_force<double>(targets, q);
      CHECK(hb.index == best);
    }
  }
}

TEST_CASE("batched nearest neighbor: serial and parallel agree") {
  Rng rng(3);
  const auto targets = random_points(800, rng);
  const auto queries = random_points(1000, rng);
  KdTree<double> tree(targets);
  std::vector<int> i1(queries.size()), i2(queries.size()), i3(queries.size());
  std::vector<double> d1(queries.size()), d2(queries.size()), d3(queries.size());
  kernels::nearest_batch<double>(tree, queries, i1, d1, kernels::Exec::Serial);
  kernels::nearest_batch<double>(tree, queries, i2, d2, kernels::Exec::Parallel);
  kernels::nearest_batch_brute<double>(targets, queries, i3, d3, kernels::Exec::Parallel);
  CHECK(i1 == i2);
  CHECK(d1 == d2);
  CHECK(i1 == i3);
  CHECK(d1 == d3);
}

TEST_CASE("edge extraction") {
  CHECK(extract_edges({{0, 1, 2}}, 3) == std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}});
  CHECK(extract_edges({{0, 1, 2}, {2, 1, 3}}, 4).size() == 5);
  const TriMesh ico = icosahedron();
  const auto e = extract_edges(ico.faces, ico.vertices.size());
  // V - E + F = 2
  CHECK(static_cast<int>(ico.vertices.size()) - static_cast<int>(e.size()) +
            static_cast<int>(ico.faces.size()) ==
        2);
  CHECK(e.size() == 30);
  for (const auto& [a, b] : e) CHECK(a < b);
  CHECK_THROWS_AS(extract_edges({{0, 1, 3}}, 3), Error);
  CHECK_THROWS_AS(extract_edges({{0, -1, 2}}, 3), Error);
}

TEST_CASE("edge extraction ignores face order and orientation") {
  TriMesh ico = icosahedron();
  const auto ref = extract_edges(ico.faces, ico.vertices.size());
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 10; ++trial) {
    auto faces = ico.faces;
    std::shuffle(faces.begin(), faces.end(), gen);
    for (auto& f : faces) std::rotate(f.begin(), f.begin() + (gen() % 3), f.end());
    CHECK(extract_edges(faces, ico.vertices.size()) == ref);
  }
}

TEST_CASE("vertex normals") {
  TriMesh square;
  square.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  square.faces = {{0, 1, 2}, {0, 2, 3}};
  for (const auto& n : vertex_normals(square)) CHECK((n - Vec3d(0, 0, 1)).norm() < 1e-15);

  const TriMesh cube = unit_cube();
  const auto cn = vertex_normals(cube);
  CHECK((cn[7] - Vec3d(1, 1, 1).normalized()).norm() < 1e-12);

  TriMesh degenerate = square;
  degenerate.vertices.push_back({2, 0, 0});
  degenerate.faces.push_back({1, 4, 1});  // zero area
  degenerate.faces.push_back({1, 4, 2});
  const auto dn = vertex_normals(degenerate, DegenerateFacePolicy::Skip);
  for (const auto& n : dn) {
    CHECK(n.allFinite());
    CHECK(std::abs(n.norm() - 1.0) <= 1e-6);
  }
  CHECK_THROWS_AS(vertex_normals(degenerate, DegenerateFacePolicy::Error), Error);

  TriMesh isolated = square;
  isolated.vertices.push_back({5, 5, 5});
  try {
    vertex_normals(isolated);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("vertex 4") != std::string::npos);
  }
}

TEST_CASE("emitted normals are unit length") {
  Rng rng(9);
  for (int sub = 0; sub <= 3; ++sub) {
    TriMesh m = base_shape(sub);
    for (auto& v : m.vertices) v += Vec3d(rng.uniform(-0.01, 0.01), 0, 0);
    finalize_mesh(m);
    for (const auto& n : m.vertex_normals) CHECK(std::abs(n.norm() - 1.0) <= 1e-6);
  }
}

TEST_CASE("PLY cloud round-trip") {
  const fs::path dir = tmp_dir("ply");
  Rng rng(21);
  PointCloud c;
  c.points = random_points(300, rng, -3.0, 3.0);
  for (std::size_t i = 0; i < c.size(); ++i) c.normals.push_back(random_points(1, rng)[0].normalized());

  io::write_ply_cloud(dir / "b.ply", c, io::PlyFormat::BinaryLittleEndian);
  const auto b = io::read_ply_cloud(dir / "b.ply");
  CHECK(b.points == c.points);
  CHECK(b.normals == c.normals);

  io::write_ply_cloud(dir / "a.ply", c, io::PlyFormat::Ascii);
  const auto a = io::read_ply_cloud(dir / "a.ply");
  REQUIRE(a.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(a.points[i] == c.points[i]);

  PointCloud bare;
  bare.points = c.points;
  io::write_ply_cloud(dir / "bare.ply", bare);
  CHECK_FALSE(io::read_ply_cloud(dir / "bare.ply").has_normals());
}

TEST_CASE("PLY reader accepts float properties and extra elements") {
  const fs::path dir = tmp_dir("ply_float");
  std::ofstream f(dir / "c.ply", std::ios::binary);
  f << "ply\nformat binary_little_endian 1.0\ncomment test\nelement vertex 2\n"
       "property float x\nproperty float y\nproperty float z\nproperty uchar red\n"
       "element face 0\nproperty list uchar int vertex_indices\nend_header\n";
  const float v[2][3] = {{0.5f, -1.25f, 2.0f}, {3.0f, 4.0f, -5.5f}};
  for (const auto& p : v) {
    f.write(reinterpret_cast<const char*>(p), 12);
    const unsigned char red = 7;
    f.write(reinterpret_cast<const char*>(&red), 1);
  }
  f.close();
  const auto c = io::read_ply_cloud(dir / "c.ply");
  REQUIRE(c.size() == 2);
  CHECK(c.points[0] == Vec3d(0.5, -1.25, 2.0));
  CHECK(c.points[1] == Vec3d(3.0, 4.0, -5.5));
}

TEST_CASE("OBJ and PLY mesh round-trip") {
  const fs::path dir = tmp_dir("obj");
  Rng rng(2);
  TriMesh m = base_shape(2);
  for (auto& v : m.vertices) v = v * 3.7 + Vec3d(rng.uniform(), rng.uniform(), rng.uniform());
  finalize_mesh(m);
  io::write_obj_mesh(dir / "m.obj", m);
  const TriMesh r = io::read_mesh(dir / "m.obj");
  CHECK(r.faces == m.faces);
  CHECK(r.edges == m.edges);
  REQUIRE(r.vertices.size() == m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i)
    for (int a = 0; a < 3; ++a) {
      const double x = m.vertices[i][a];
      CHECK(std::abs(r.vertices[i][a] - x) <= 5e-9 * std::max(1.0, std::abs(x)));
    }

  // OBJ extras: normals, texture coordinates and v/vt/vn face tokens.
  std::ofstream f(dir / "tokens.obj");
  f << "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\nf 1/1/1 2/1/1 3/1/1\n";
  f.close();
  const TriMesh t = io::read_mesh(dir / "tokens.obj");
  CHECK(t.faces == std::vector<Face>{{0, 1, 2}});

  CHECK_THROWS_AS(io::read_mesh(dir / "missing.obj"), Error);
}

TEST_CASE("frame files are ordered by numeric suffix") {
  const fs::path dir = tmp_dir("order");
  for (const char* n : {"f_10.ply", "f_2.ply", "f_0001.ply", "notes.txt"})
    std::ofstream(dir / n) << "x";
  const auto files = io::list_frame_files(dir, {".ply"});
  REQUIRE(files.size() == 3);
  CHECK(files[0].filename() == "f_0001.ply");
  CHECK(files[1].filename() == "f_2.ply");
  CHECK(files[2].filename() == "f_10.ply");
  CHECK_THROWS_AS(io::list_frame_files(dir / "nope", {".ply"}), Error);
}
