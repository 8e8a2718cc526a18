#include "dirreg/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace dirreg {

namespace {

struct PlyProperty {
  std::string type;
  std::string name;
};

int scalar_size(const std::string& type) {
  if (type == "char" || type == "uchar" || type == "int8" || type == "uint8") return 1;
  if (type == "short" || type == "ushort" || type == "int16" || type == "uint16") return 2;
  if (type == "int" || type == "uint" || type == "int32" || type == "uint32" ||
      type == "float" || type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  throw ParseError("unknown PLY scalar type: " + type);
}

double read_scalar(std::istream& in, const std::string& type) {
  char buf[8];
  in.read(buf, scalar_size(type));
  if (!in) throw ParseError("truncated PLY body");
  if (type == "char" || type == "int8") return *reinterpret_cast<int8_t*>(buf);
  if (type == "uchar" || type == "uint8") return *reinterpret_cast<uint8_t*>(buf);
  if (type == "short" || type == "int16") { int16_t v; std::memcpy(&v, buf, 2); return v; }
  if (type == "ushort" || type == "uint16") { uint16_t v; std::memcpy(&v, buf, 2); return v; }
  if (type == "int" || type == "int32") { int32_t v; std::memcpy(&v, buf, 4); return v; }
  if (type == "uint" || type == "uint32") { uint32_t v; std::memcpy(&v, buf, 4); return v; }
  if (type == "float" || type == "float32") { float v; std::memcpy(&v, buf, 4); return v; }
  double v;
  std::memcpy(&v, buf, 8);
  return v;
}

}  // namespace

OrientedPointSet read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);

  std::string line;
  int line_no = 0;
  auto next_line = [&]() {
    if (!std::getline(in, line)) throw ParseError("unexpected end of header at line " +
                                                  std::to_string(line_no));
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
  };

  next_line();
  if (line != "ply") throw ParseError("not a PLY file (line 1)");

  bool binary = false;
  long vertex_count = -1, face_count = 0;
  std::vector<PlyProperty> vertex_props;
  std::string face_count_type = "uchar", face_index_type = "int";
  std::string current_element;

  while (true) {
    next_line();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment" || word == "obj_info") continue;
    if (word == "format") {
      std::string fmt, version;
      ls >> fmt >> version;
      if (fmt == "binary_big_endian") throw UnsupportedFormat("big-endian PLY not supported");
      if (fmt != "ascii" && fmt != "binary_little_endian")
        throw ParseError("unknown PLY format at line " + std::to_string(line_no));
      binary = fmt == "binary_little_endian";
      continue;
    }
    if (word == "element") {
      long count;
      ls >> current_element >> count;
      if (!ls) throw ParseError("malformed element at line " + std::to_string(line_no));
      if (current_element == "vertex") vertex_count = count;
      else if (current_element == "face") face_count = count;
      continue;
    }
    if (word == "property") {
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string ctype, itype, name;
        ls >> ctype >> itype >> name;
        if (current_element == "face") {
          face_count_type = ctype;
          face_index_type = itype;
        }
      } else if (current_element == "vertex") {
        PlyProperty p;
        p.type = type;
        ls >> p.name;
        if (!ls) throw ParseError("malformed property at line " + std::to_string(line_no));
        vertex_props.push_back(p);
      }
      continue;
    }
    if (word == "end_header") break;
    throw ParseError("unexpected header line " + std::to_string(line_no) + ": " + line);
  }
  if (vertex_count < 0) throw ParseError("PLY header missing vertex element");

  int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
  for (int i = 0; i < static_cast<int>(vertex_props.size()); ++i) {
    const std::string& n = vertex_props[i].name;
    if (n == "x") ix = i;
    else if (n == "y") iy = i;
    else if (n == "z") iz = i;
    else if (n == "nx") inx = i;
    else if (n == "ny") iny = i;
    else if (n == "nz") inz = i;
  }
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError("PLY vertex element lacks x/y/z");
  const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;

  OrientedPointSet shape;
  shape.points.resize(vertex_count, 3);
  if (has_normals) shape.normals.resize(vertex_count, 3);

  std::vector<double> record(vertex_props.size());
  for (long v = 0; v < vertex_count; ++v) {
    if (binary) {
      for (size_t p = 0; p < vertex_props.size(); ++p)
        record[p] = read_scalar(in, vertex_props[p].type);
    } else {
      next_line();
      std::istringstream ls(line);
      for (size_t p = 0; p < vertex_props.size(); ++p)
        if (!(ls >> record[p]))
          throw ParseError("truncated vertex at line " + std::to_string(line_no));
    }
    shape.points(v, 0) = record[ix];
    shape.points(v, 1) = record[iy];
    shape.points(v, 2) = record[iz];
    if (has_normals) {
      Eigen::Vector3d nrm(record[inx], record[iny], record[inz]);
      const double norm = nrm.norm();
      if (std::abs(norm - 1.0) > 1e-3)
        throw ParseError("vertex " + std::to_string(v) + " normal is far from unit length");
      // leave already-unit normals untouched so round-trips are bit-exact
      if (std::abs(norm - 1.0) > 1e-12) nrm /= norm;
      shape.normals.row(v) = nrm.transpose();
    }
  }

  for (long f = 0; f < face_count; ++f) {
    long count;
    std::vector<long> idx;
    if (binary) {
      count = static_cast<long>(read_scalar(in, face_count_type));
      for (long i = 0; i < count; ++i)
        idx.push_back(static_cast<long>(read_scalar(in, face_index_type)));
    } else {
      next_line();
      std::istringstream ls(line);
      if (!(ls >> count)) throw ParseError("truncated face at line " + std::to_string(line_no));
      long v;
      while (ls >> v) idx.push_back(v);
      if (static_cast<long>(idx.size()) != count)
        throw ParseError("face vertex count mismatch at line " + std::to_string(line_no));
    }
    if (count < 3) throw ParseError("face with fewer than 3 vertices");
    // fan-triangulate polygons
    for (long i = 1; i + 1 < count; ++i)
      shape.faces.push_back({static_cast<int>(idx[0]), static_cast<int>(idx[i]),
                             static_cast<int>(idx[i + 1])});
  }
  if (!shape.faces.empty()) shape.connectivity = OrientedPointSet::Connectivity::mesh;
  shape.validate();
  return shape;
}

void write_ply(const std::string& path, const OrientedPointSet& shape, bool binary) {
  if (shape.dim() != 3) throw DimensionError("PLY output requires 3D points");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open " + path + " for writing");

  out << "ply\n";
  out << (binary ? "format binary_little_endian 1.0\n" : "format ascii 1.0\n");
  out << "element vertex " << shape.size() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  if (shape.has_normals())
    out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (!shape.faces.empty()) {
    out << "element face " << shape.faces.size() << "\n";
    out << "property list uchar int vertex_indices\n";
  }
  out << "end_header\n";

  if (binary) {
    for (int i = 0; i < shape.size(); ++i) {
      for (int c = 0; c < 3; ++c) {
        const double v = shape.points(i, c);
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
      if (shape.has_normals())
        for (int c = 0; c < 3; ++c) {
          const double v = shape.normals(i, c);
          out.write(reinterpret_cast<const char*>(&v), 8);
        }
    }
    for (const auto& f : shape.faces) {
      const uint8_t count = 3;
      out.write(reinterpret_cast<const char*>(&count), 1);
      for (int v : f) {
        const int32_t iv = v;
        out.write(reinterpret_cast<const char*>(&iv), 4);
      }
    }
  } else {
    out.precision(9);
    for (int i = 0; i < shape.size(); ++i) {
      out << shape.points(i, 0) << ' ' << shape.points(i, 1) << ' ' << shape.points(i, 2);
      if (shape.has_normals())
        out << ' ' << shape.normals(i, 0) << ' ' << shape.normals(i, 1) << ' '
            << shape.normals(i, 2);
      out << '\n';
    }
    for (const auto& f : shape.faces)
      out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  }
}

OrientedPointSet read_points_csv(const std::string& path, int dim,
                                 OrientedPointSet::Connectivity connectivity) {
  if (dim != 2 && dim != 3) throw InvalidDimension("CSV dimension must be 2 or 3");
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty CSV file " + path);
  int line_no = 1;

  // header row: x,y[,z][,nx,ny[,nz]]
  int cols = 1;
  for (char c : line)
    if (c == ',') ++cols;
  const bool has_normals = cols == 2 * dim;
  if (!has_normals && cols != dim)
    throw ParseError("CSV header has " + std::to_string(cols) + " columns, expected " +
                     std::to_string(dim) + " or " + std::to_string(2 * dim));

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> vals;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
    if (static_cast<int>(vals.size()) != cols)
      throw ParseError("row width mismatch at line " + std::to_string(line_no));
    rows.push_back(std::move(vals));
  }

  OrientedPointSet shape;
  shape.points.resize(rows.size(), dim);
  if (has_normals) shape.normals.resize(rows.size(), dim);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < dim; ++c) shape.points(i, c) = rows[i][c];
    if (has_normals) {
      Eigen::VectorXd nrm(dim);
      for (int c = 0; c < dim; ++c) nrm[c] = rows[i][dim + c];
      shape.normals.row(i) = nrm.normalized().transpose();
    }
  }
  shape.connectivity = connectivity;
  shape.validate();
  return shape;
}

void write_points_csv(const std::string& path, const OrientedPointSet& shape) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path + " for writing");
  const int d = shape.dim();
  out << (d == 2 ? "x,y" : "x,y,z");
  if (shape.has_normals()) out << (d == 2 ? ",nx,ny" : ",nx,ny,nz");
  out << '\n';
  out.precision(9);
  for (int i = 0; i < shape.size(); ++i) {
    for (int c = 0; c < d; ++c) out << (c ? "," : "") << shape.points(i, c);
    if (shape.has_normals())
      for (int c = 0; c < d; ++c) out << ',' << shape.normals(i, c);
    out << '\n';
  }
}

}  // namespace dirreg
