#include <cstdio>
#include <filesystem>
#include <fstream>

#include "dirreg/harness.hpp"
#include "dirreg/io.hpp"
#include "doctest.h"

using namespace dirreg;

namespace {

namespace fs = std::filesystem;

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& name) {
    path = fs::temp_directory_path() / ("dirreg_test_" + name);
  }
  ~TempFile() { std::error_code ec; fs::remove(path, ec); }
  std::string str() const { return path.string(); }
};

void write_text(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const char* kTetrahedron =
    "ply\n"
    "format ascii 1.0\n"
    "comment test fixture\n"
    "element vertex 4\n"
    "property float x\n"
    "property float y\n"
    "property float z\n"
    "element face 2\n"
    "property list uchar int vertex_indices\n"
    "end_header\n"
    "0 0 0\n"
    "1 0 0\n"
    "0 1 0\n"
    "0 0 1\n"
    "3 0 1 2\n"
    "3 0 1 3\n";

}  // namespace

TEST_CASE("ascii PLY fixture parses points and faces") {
  TempFile f("tetra.ply");
  write_text(f.path, kTetrahedron);
  const OrientedPointSet s = read_ply(f.str());
  CHECK(s.size() == 4);
  CHECK(s.faces.size() == 2);
  CHECK_FALSE(s.has_normals());
  CHECK(s.connectivity == OrientedPointSet::Connectivity::mesh);
  CHECK(s.points(1, 0) == 1.0);
  CHECK(s.points(3, 2) == 1.0);
  CHECK(s.faces[1] == std::array<int, 3>{0, 1, 3});
}

TEST_CASE("PLY normals are renormalized near unit length, rejected beyond") {
  TempFile f("normals.ply");
  const std::string header =
      "ply\nformat ascii 1.0\nelement vertex 1\n"
      "property float x\nproperty float y\nproperty float z\n"
      "property float nx\nproperty float ny\nproperty float nz\n"
      "end_header\n";
  write_text(f.path, header + "0 0 0 1.0005 0 0\n");
  const OrientedPointSet ok = read_ply(f.str());
  CHECK(ok.normals(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  write_text(f.path, header + "0 0 0 1.5 0 0\n");
  CHECK_THROWS_AS(read_ply(f.str()), ParseError);
}

TEST_CASE("unknown PLY vertex properties are skipped") {
  TempFile f("extra.ply");
  write_text(f.path,
             "ply\nformat ascii 1.0\nelement vertex 2\n"
             "property float x\nproperty float y\nproperty float z\n"
             "property uchar red\n"
             "end_header\n"
             "1 2 3 255\n"
             "4 5 6 0\n");
  const OrientedPointSet s = read_ply(f.str());
  CHECK(s.size() == 2);
  CHECK(s.points(1, 1) == 5.0);
}

TEST_CASE("quad faces are fan-triangulated") {
  TempFile f("quad.ply");
  write_text(f.path,
             "ply\nformat ascii 1.0\nelement vertex 4\n"
             "property float x\nproperty float y\nproperty float z\n"
             "element face 1\nproperty list uchar int vertex_indices\n"
             "end_header\n"
             "0 0 0\n1 0 0\n1 1 0\n0 1 0\n"
             "4 0 1 2 3\n");
  const OrientedPointSet s = read_ply(f.str());
  REQUIRE(s.faces.size() == 2);
  CHECK(s.faces[0] == std::array<int, 3>{0, 1, 2});
  CHECK(s.faces[1] == std::array<int, 3>{0, 2, 3});
}

TEST_CASE("malformed PLY inputs fail loudly") {
  TempFile f("bad.ply");
  write_text(f.path, "solid nope\n");
  CHECK_THROWS_AS(read_ply(f.str()), ParseError);

  write_text(f.path,
             "ply\nformat binary_big_endian 1.0\nelement vertex 0\n"
             "property float x\nproperty float y\nproperty float z\nend_header\n");
  CHECK_THROWS_AS(read_ply(f.str()), UnsupportedFormat);

  // truncated body: header promises 4 vertices, file carries 2
  write_text(f.path,
             "ply\nformat ascii 1.0\nelement vertex 4\n"
             "property float x\nproperty float y\nproperty float z\n"
             "end_header\n0 0 0\n1 1 1\n");
  CHECK_THROWS_AS(read_ply(f.str()), ParseError);

  CHECK_THROWS_AS(read_ply("/nonexistent/missing.ply"), ParseError);
}

TEST_CASE("PLY write/read round-trips both encodings") {
  OrientedPointSet mesh = gen_icosphere(1);
  for (bool binary : {false, true}) {
    TempFile f(binary ? "rt.bin.ply" : "rt.ascii.ply");
    write_ply(f.str(), mesh, binary);
    const OrientedPointSet back = read_ply(f.str());
    CHECK(back.size() == mesh.size());
    CHECK(back.faces.size() == mesh.faces.size());
    const double tol = 1e-9;  // ascii output carries 9 significant digits
    CHECK((back.points - mesh.points).cwiseAbs().maxCoeff() < (binary ? 1e-15 : tol));
    CHECK((back.normals - mesh.normals).cwiseAbs().maxCoeff() < (binary ? 1e-15 : tol));

    // a second write of the re-read shape is byte-identical
    TempFile g(binary ? "rt2.bin.ply" : "rt2.ascii.ply");
    write_ply(g.str(), back, binary);
    CHECK(read_bytes(f.path) == read_bytes(g.path));
  }
}

TEST_CASE("CSV round-trips 2D shapes with and without normals") {
  const OrientedPointSet curve = gen_curve(25, 3);
  TempFile f("curve.csv");
  write_points_csv(f.str(), curve);
  const OrientedPointSet back =
      read_points_csv(f.str(), 2, OrientedPointSet::Connectivity::closed_polyline);
  CHECK(back.size() == 25);
  CHECK(back.connectivity == OrientedPointSet::Connectivity::closed_polyline);
  CHECK((back.points - curve.points).cwiseAbs().maxCoeff() < 1e-7);
  CHECK((back.normals - curve.normals).cwiseAbs().maxCoeff() < 1e-7);

  TempFile g("plain.csv");
  write_text(g.path, "x,y\n0,0\n1,0\n0.5,2\n");
  const OrientedPointSet plain = read_points_csv(g.str(), 2);
  CHECK(plain.size() == 3);
  CHECK_FALSE(plain.has_normals());
  CHECK(plain.points(2, 1) == 2.0);
}

TEST_CASE("CSV rejects inconsistent rows and wrong dimensions") {
  TempFile f("bad.csv");
  write_text(f.path, "x,y\n0,0\n1,2,3\n");
  CHECK_THROWS_AS(read_points_csv(f.str(), 2), ParseError);

  write_text(f.path, "x,y,z\n0,0,0\n");
  CHECK_NOTHROW(read_points_csv(f.str(), 3));
  CHECK_THROWS_AS(read_points_csv(f.str(), 2), ParseError);
  CHECK_THROWS_AS(read_points_csv(f.str(), 4), InvalidDimension);
}
