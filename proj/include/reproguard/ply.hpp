#pragma once

// ASCII PLY vertex I/O for voxel clouds.

#include <array>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "reproguard/error.hpp"
#include "reproguard/octree_codec.hpp"

namespace reproguard {

struct PlyPoints {
  std::vector<std::array<double, 3>> points;
  bool integer_coords = false;  // x, y, z declared with integer types
  std::optional<int> bit_depth;  // from a "comment bit_depth N" line
};

namespace detail {

inline bool ply_integer_type(const std::string& t) {
  return t == "char" || t == "uchar" || t == "short" || t == "ushort" || t == "int" || t == "uint" || t == "int8" ||
         t == "uint8" || t == "int16" || t == "uint16" || t == "int32" || t == "uint32";
}

inline bool ply_float_type(const std::string& t) {
  return t == "float" || t == "double" || t == "float32" || t == "float64";
}

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> props;
  std::vector<std::string> types;
};

}  // namespace detail

inline PlyPoints parse_ply(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0 || (line.size() > 3 && line[3] != '\r'))
    fail(ErrorKind::Parse, "missing 'ply' magic line");
  PlyPoints out;
  std::vector<detail::PlyElement> elements;
  bool saw_format = false, saw_end = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key.empty()) continue;
    if (key == "end_header") {
      saw_end = true;
      break;
    }
    if (key == "format") {
      std::string fmt, ver;
      ls >> fmt >> ver;
      if (fmt != "ascii") fail(ErrorKind::Parse, "only ASCII PLY is supported, got '" + fmt + "'");
      saw_format = true;
    } else if (key == "comment") {
      std::string tag;
      int depth = 0;
      if (ls >> tag && tag == "bit_depth" && ls >> depth) out.bit_depth = depth;
    } else if (key == "obj_info") {
    } else if (key == "element") {
      detail::PlyElement e;
      long long count = -1;
      if (!(ls >> e.name >> count) || count < 0) fail(ErrorKind::Parse, "malformed element line: " + line);
      e.count = static_cast<std::size_t>(count);
      elements.push_back(e);
    } else if (key == "property") {
      if (elements.empty()) fail(ErrorKind::Parse, "property before any element");
      std::string type, name;
      ls >> type;
      if (type == "list") {
        std::string ct, it;
        ls >> ct >> it >> name;
        type = "list";
      } else {
        ls >> name;
        if (!detail::ply_integer_type(type) && !detail::ply_float_type(type))
          fail(ErrorKind::Parse, "unknown property type '" + type + "'");
      }
      if (name.empty()) fail(ErrorKind::Parse, "malformed property line: " + line);
      elements.back().props.push_back(name);
      elements.back().types.push_back(type);
    } else {
      fail(ErrorKind::Parse, "unexpected header keyword '" + key + "'");
    }
  }
  if (!saw_end) fail(ErrorKind::Parse, "header missing end_header");
  if (!saw_format) fail(ErrorKind::Parse, "header missing format line");

  bool found_vertex = false;
  for (const auto& e : elements) {
    if (e.name != "vertex") {
      for (std::size_t i = 0; i < e.count; ++i)
        if (!std::getline(in, line)) fail(ErrorKind::TruncatedStream, "body ended inside element '" + e.name + "'");
      continue;
    }
    found_vertex = true;
    std::array<int, 3> col{-1, -1, -1};
    for (std::size_t p = 0; p < e.props.size(); ++p) {
      const int axis = e.props[p] == "x" ? 0 : e.props[p] == "y" ? 1 : e.props[p] == "z" ? 2 : -1;
      if (axis < 0) continue;
      if (e.types[p] == "list") fail(ErrorKind::Parse, "coordinate property declared as a list");
      col[axis] = static_cast<int>(p);
    }
    if (col[0] < 0 || col[1] < 0 || col[2] < 0) fail(ErrorKind::Parse, "vertex element lacks x, y, z");
    out.integer_coords = true;
    for (int a = 0; a < 3; ++a)
      out.integer_coords = out.integer_coords && detail::ply_integer_type(e.types[static_cast<std::size_t>(col[a])]);
    for (const auto& t : e.types)
      if (t == "list") fail(ErrorKind::Parse, "list properties on vertices are not supported");
    out.points.reserve(e.count);
    std::vector<double> row(e.props.size());
    for (std::size_t i = 0; i < e.count; ++i) {
      if (!std::getline(in, line)) fail(ErrorKind::TruncatedStream, "body ended after " + std::to_string(i) + " vertices");
      std::istringstream ls(line);
      for (double& v : row)
        if (!(ls >> v)) fail(ErrorKind::Parse, "malformed vertex line " + std::to_string(i));
      out.points.push_back({row[static_cast<std::size_t>(col[0])], row[static_cast<std::size_t>(col[1])],
                            row[static_cast<std::size_t>(col[2])]});
    }
  }
  if (!found_vertex) fail(ErrorKind::Parse, "no vertex element");
  return out;
}

inline PlyPoints read_ply_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path);
  return parse_ply(in);
}

// Integer coordinates are taken as voxels as-is; float coordinates are
// voxelized at the given (or commented) bit depth.
inline VoxelCloud cloud_from_ply(const PlyPoints& ply, std::optional<int> bit_depth = std::nullopt) {
  std::optional<int> depth = bit_depth ? bit_depth : ply.bit_depth;
  if (!ply.integer_coords) {
    if (!depth) fail(ErrorKind::InvalidInput, "float PLY needs a bit depth to voxelize");
    return voxelize(ply.points, *depth);
  }
  if (ply.points.empty()) fail(ErrorKind::InvalidInput, "PLY has no vertices");
  std::vector<Voxel> voxels;
  voxels.reserve(ply.points.size());
  double top = 0.0;
  for (const auto& p : ply.points) {
    Voxel v;
    for (int a = 0; a < 3; ++a) {
      if (p[a] < 0.0 || p[a] >= 2097152.0 || p[a] != std::floor(p[a]))
        fail(ErrorKind::InvalidInput, "integer coordinate outside [0, 2^21)");
      v[a] = static_cast<std::uint32_t>(p[a]);
      top = std::max(top, p[a]);
    }
    voxels.push_back(v);
  }
  if (!depth) {
    int n = 1;
    while (n < kMaxBitDepth && static_cast<double>(std::uint64_t{1} << n) <= top) ++n;
    depth = n;
  }
  return VoxelCloud::from_voxels(*depth, voxels);
}

inline VoxelCloud read_ply(const std::string& path, std::optional<int> bit_depth = std::nullopt) {
  return cloud_from_ply(read_ply_points(path), bit_depth);
}

inline void format_ply(std::ostream& out, const VoxelCloud& cloud) {
  out << "ply\nformat ascii 1.0\ncomment bit_depth " << cloud.bit_depth() << "\nelement vertex " << cloud.size()
      << "\nproperty int x\nproperty int y\nproperty int z\nend_header\n";
  for (std::uint64_t c : cloud.codes()) {
    const Voxel v = morton::decode(c);
    out << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  }
}

inline void write_ply(const std::string& path, const VoxelCloud& cloud) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot write " + path);
  format_ply(out, cloud);
  if (!out) fail(ErrorKind::Io, "write failed for " + path);
}

}  // namespace reproguard
