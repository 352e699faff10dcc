#include "neupig/mesh_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

namespace neupig::io {
namespace fs = std::filesystem;

namespace {

static_assert(std::endian::native == std::endian::little,
              "binary PLY support assumes a little-endian host");

enum class Scalar { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

Scalar parse_scalar(const std::string& name, const fs::path& path) {
  static const std::map<std::string, Scalar> table = {
      {"char", Scalar::Int8},     {"int8", Scalar::Int8},
      {"uchar", Scalar::UInt8},   {"uint8", Scalar::UInt8},
      {"short", Scalar::Int16},   {"int16", Scalar::Int16},
      {"ushort", Scalar::UInt16}, {"uint16", Scalar::UInt16},
      {"int", Scalar::Int32},     {"int32", Scalar::Int32},
      {"uint", Scalar::UInt32},   {"uint32", Scalar::UInt32},
      {"float", Scalar::Float32}, {"float32", Scalar::Float32},
      {"double", Scalar::Float64}, {"float64", Scalar::Float64}};
  const auto it = table.find(name);
  if (it == table.end())
    fail(ErrorKind::Parse, path.string() + ": unknown PLY type '" + name + "'");
  return it->second;
}

struct Property {
  std::string name;
  Scalar type = Scalar::Float32;
  bool is_list = false;
  Scalar count_type = Scalar::UInt8;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
};

struct PlyHeader {
  PlyFormat format = PlyFormat::Ascii;
  std::vector<Element> elements;
};

template <typename V>
V read_raw(std::istream& in) {
  V v;
  in.read(reinterpret_cast<char*>(&v), sizeof(V));
  return v;
}

double read_binary(std::istream& in, Scalar type) {
  switch (type) {
    case Scalar::Int8: return read_raw<std::int8_t>(in);
    case Scalar::UInt8: return read_raw<std::uint8_t>(in);
    case Scalar::Int16: return read_raw<std::int16_t>(in);
    case Scalar::UInt16: return read_raw<std::uint16_t>(in);
    case Scalar::Int32: return read_raw<std::int32_t>(in);
    case Scalar::UInt32: return read_raw<std::uint32_t>(in);
    case Scalar::Float32: return read_raw<float>(in);
    case Scalar::Float64: return read_raw<double>(in);
  }
  return 0.0;
}

PlyHeader read_header(std::istream& in, const fs::path& path) {
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0)
    fail(ErrorKind::Parse, path.string() + ": missing 'ply' magic");
  PlyHeader header;
  bool have_format = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "format") {
      std::string fmt;
      ss >> fmt;
      if (fmt == "ascii") header.format = PlyFormat::Ascii;
      else if (fmt == "binary_little_endian")
        header.format = PlyFormat::BinaryLittleEndian;
      else
        fail(ErrorKind::Parse,
             path.string() + ": unsupported PLY format '" + fmt + "'");
      have_format = true;
    } else if (key == "element") {
      Element e;
      ss >> e.name >> e.count;
      if (ss.fail()) fail(ErrorKind::Parse, path.string() + ": bad element line");
      header.elements.push_back(e);
    } else if (key == "property") {
      if (header.elements.empty())
        fail(ErrorKind::Parse, path.string() + ": property before element");
      Property p;
      std::string type;
      ss >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ss >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_scalar(count_type, path);
        p.type = parse_scalar(item_type, path);
      } else {
        ss >> p.name;
        p.type = parse_scalar(type, path);
      }
      header.elements.back().props.push_back(p);
    } else if (key == "end_header") {
      if (!have_format) fail(ErrorKind::Parse, path.string() + ": no format line");
      return header;
    }
    // comment / obj_info lines fall through
  }
  fail(ErrorKind::Parse, path.string() + ": unterminated PLY header");
}

struct PlyData {
  std::vector<Vec3d> positions;
  std::vector<Vec3d> normals;
  std::vector<Face> faces;
};

PlyData read_ply(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  const PlyHeader header = read_header(in, path);
  PlyData data;

  for (const auto& element : header.elements) {
    const bool is_vertex = element.name == "vertex";
    const bool is_face = element.name == "face";
    std::map<std::string, int> slot;
    for (std::size_t i = 0; i < element.props.size(); ++i)
      slot[element.props[i].name] = static_cast<int>(i);
    const bool has_xyz = slot.count("x") && slot.count("y") && slot.count("z");
    const bool has_n = slot.count("nx") && slot.count("ny") && slot.count("nz");
    if (is_vertex && !has_xyz)
      fail(ErrorKind::Parse, path.string() + ": vertex element lacks x/y/z");

    std::vector<double> scalars(element.props.size());
    std::vector<double> list;
    std::vector<double> face_list;
    std::string line;
    for (std::size_t row = 0; row < element.count; ++row) {
      std::istringstream ascii_row;
      if (header.format == PlyFormat::Ascii) {
        do {
          if (!std::getline(in, line))
            fail(ErrorKind::Parse, path.string() + ": truncated ASCII body");
        } while (line.find_first_not_of(" \t\r") == std::string::npos);
        ascii_row.str(line);
      }
      auto next = [&](Scalar type) -> double {
        if (header.format == PlyFormat::Ascii) {
          double v;
          if (!(ascii_row >> v))
            fail(ErrorKind::Parse, path.string() + ": malformed row " +
                                       std::to_string(row) + " in " + element.name);
          return v;
        }
        const double v = read_binary(in, type);
        if (!in) fail(ErrorKind::Parse, path.string() + ": truncated binary body");
        return v;
      };
      for (std::size_t p = 0; p < element.props.size(); ++p) {
        const auto& prop = element.props[p];
        if (prop.is_list) {
          const auto n = static_cast<std::size_t>(next(prop.count_type));
          list.resize(n);
          for (std::size_t k = 0; k < n; ++k) list[k] = next(prop.type);
          if (is_face &&
              (prop.name == "vertex_indices" || prop.name == "vertex_index"))
            face_list = list;
        } else {
          scalars[p] = next(prop.type);
        }
      }
      if (is_vertex) {
        data.positions.emplace_back(scalars[slot["x"]], scalars[slot["y"]],
                                    scalars[slot["z"]]);
        if (has_n)
          data.normals.emplace_back(scalars[slot["nx"]], scalars[slot["ny"]],
                                    scalars[slot["nz"]]);
      } else if (is_face) {
        if (face_list.size() != 3)
          fail(ErrorKind::Parse, path.string() + ": face " + std::to_string(row) +
                                     " is not a triangle");
        data.faces.push_back({static_cast<int>(face_list[0]),
                              static_cast<int>(face_list[1]),
                              static_cast<int>(face_list[2])});
      }
    }
  }
  return data;
}

void check_stream(const std::ofstream& out, const fs::path& path) {
  if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

// Trailing integer of the stem, or nullopt.
std::optional<long long> trailing_number(const std::string& stem) {
  std::size_t end = stem.size();
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1])))
    --begin;
  if (begin == end) return std::nullopt;
  return std::stoll(stem.substr(begin, end - begin));
}

}  // namespace

PointCloud read_ply_cloud(const fs::path& path) {
  PlyData data = read_ply(path);
  PointCloud cloud;
  cloud.points = std::move(data.positions);
  cloud.normals = std::move(data.normals);
  return cloud;
}

void write_ply_cloud(const fs::path& path, const PointCloud& cloud,
                     PlyFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  const bool normals = cloud.has_normals();
  const char* type = "double";
  out << "ply\n"
      << (format == PlyFormat::Ascii ? "format ascii 1.0\n"
                                     : "format binary_little_endian 1.0\n")
      << "element vertex " << cloud.points.size() << "\n"
      << "property " << type << " x\nproperty " << type << " y\nproperty "
      << type << " z\n";
  if (normals)
    out << "property " << type << " nx\nproperty " << type << " ny\nproperty "
        << type << " nz\n";
  out << "end_header\n";
  if (format == PlyFormat::Ascii) {
    char buf[160];
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      const Vec3d& p = cloud.points[i];
      int n = std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g", p.x(), p.y(),
                            p.z());
      out.write(buf, n);
      if (normals) {
        const Vec3d& q = cloud.normals[i];
        n = std::snprintf(buf, sizeof(buf), " %.17g %.17g %.17g", q.x(), q.y(),
                          q.z());
        out.write(buf, n);
      }
      out << '\n';
    }
  } else {
    for (std::size_t i = 0; i < cloud.points.size(); ++i) {
      out.write(reinterpret_cast<const char*>(cloud.points[i].data()),
                3 * sizeof(double));
      if (normals)
        out.write(reinterpret_cast<const char*>(cloud.normals[i].data()),
                  3 * sizeof(double));
    }
  }
  check_stream(out, path);
}

TriMesh read_ply_mesh(const fs::path& path) {
  PlyData data = read_ply(path);
  TriMesh mesh;
  mesh.vertices = std::move(data.positions);
  mesh.faces = std::move(data.faces);
  finalize_mesh(mesh);
  return mesh;
}

TriMesh read_obj_mesh(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  TriMesh mesh;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key) || key[0] == '#') continue;
    if (key == "v") {
      Vec3d v;
      if (!(ss >> v.x() >> v.y() >> v.z()))
        fail(ErrorKind::Parse,
             path.string() + ":" + std::to_string(lineno) + ": bad vertex");
      mesh.vertices.push_back(v);
    } else if (key == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ss >> tok) {
        // "a", "a/b", "a//c", "a/b/c"; negative indices are relative.
        const long v = std::stol(tok.substr(0, tok.find('/')));
        const long resolved =
            v < 0 ? static_cast<long>(mesh.vertices.size()) + v : v - 1;
        idx.push_back(static_cast<int>(resolved));
      }
      if (idx.size() != 3)
        fail(ErrorKind::Parse, path.string() + ":" + std::to_string(lineno) +
                                   ": only triangle faces are supported");
      mesh.faces.push_back({idx[0], idx[1], idx[2]});
    }
  }
  finalize_mesh(mesh);
  return mesh;
}

TriMesh read_mesh(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::Io, "no such file: " + path.string());
  const std::string ext = path.extension().string();
  if (ext == ".obj" || ext == ".OBJ") return read_obj_mesh(path);
  if (ext == ".ply" || ext == ".PLY") return read_ply_mesh(path);
  fail(ErrorKind::Parse, path.string() + ": unknown mesh extension");
}

void write_obj_mesh(const fs::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  char buf[128];
  for (const auto& v : mesh.vertices) {
    const int n = std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x(),
                                v.y(), v.z());
    out.write(buf, n);
  }
  for (const auto& f : mesh.faces) {
    const int n = std::snprintf(buf, sizeof(buf), "f %d %d %d\n", f[0] + 1,
                                f[1] + 1, f[2] + 1);
    out.write(buf, n);
  }
  check_stream(out, path);
}

std::vector<fs::path> list_frame_files(const fs::path& dir,
                                       const std::vector<std::string>& extensions) {
  if (!fs::is_directory(dir))
    fail(ErrorKind::Io, "not a directory: " + dir.string());
  std::vector<std::pair<long long, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (std::find(extensions.begin(), extensions.end(), ext) == extensions.end())
      continue;
    const auto num = trailing_number(entry.path().stem().string());
    found.emplace_back(num.value_or(-1), entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  out.reserve(found.size());
  for (auto& [num, p] : found) out.push_back(std::move(p));
  return out;
}

}  // namespace neupig::io
