#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "trapheat/common.hpp"
#include "trapheat/mesh.hpp"

namespace trapheat {

// ---------------------------------------------------------------------------
// Native ASCII format:
//   trapmesh v1
//   v <x> <y> <z>              (meters, full double precision)
//   f <i> <j> <k> <electrode_id> [<scalar>]
// Indices are 0-based. The optional per-face scalar column carries heatmap
// values. Round-trips bit-exactly.

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline void write_trapmesh(std::ostream& os, const TriangleMesh& m,
                           const std::vector<double>* face_scalar = nullptr) {
  if (face_scalar && face_scalar->size() != m.face_count())
    throw ParamError("face_scalar", "size does not match face count");
  os << "trapmesh v1\n";
  for (const auto& v : m.vertices)
    os << "v " << format_double(v.x()) << ' ' << format_double(v.y()) << ' '
       << format_double(v.z()) << '\n';
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    os << "f " << m.faces[f][0] << ' ' << m.faces[f][1] << ' ' << m.faces[f][2]
       << ' ' << m.electrode_names[m.face_electrode[f]];
    if (face_scalar) os << ' ' << format_double((*face_scalar)[f]);
    os << '\n';
  }
}

inline void export_trapmesh(const TriangleMesh& m, const std::string& path,
                            const std::vector<double>* face_scalar = nullptr) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open for writing: " + path);
  write_trapmesh(os, m, face_scalar);
  if (!os) throw ParseError("write failed: " + path);
}

struct LoadedMesh {
  TriangleMesh mesh;
  std::optional<std::vector<double>> face_scalar;
};

inline LoadedMesh read_trapmesh(std::istream& is,
                                const std::string& origin = "<stream>") {
  LoadedMesh out;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line))
    throw ParseError(origin + ": empty file");
  ++lineno;
  if (line != "trapmesh v1")
    throw ParseError(origin + ":1: expected header 'trapmesh v1'");
  bool any_scalar = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      double x, y, z;
      if (!(ss >> x >> y >> z))
        throw ParseError(origin + ":" + std::to_string(lineno) +
                         ": malformed vertex line");
      out.mesh.vertices.emplace_back(x, y, z);
    } else if (tag == "f") {
      int i, j, k;
      std::string elec;
      if (!(ss >> i >> j >> k >> elec))
        throw ParseError(origin + ":" + std::to_string(lineno) +
                         ": malformed face line");
      out.mesh.faces.push_back({i, j, k});
      out.mesh.face_electrode.push_back(out.mesh.electrode_index(elec));
      double s;
      if (ss >> s) {
        if (!out.face_scalar)
          out.face_scalar.emplace(out.mesh.face_count() - 1, 0.0);
        out.face_scalar->push_back(s);
        any_scalar = true;
      } else if (any_scalar) {
        throw ParseError(origin + ":" + std::to_string(lineno) +
                         ": missing scalar column");
      }
    } else {
      throw ParseError(origin + ":" + std::to_string(lineno) +
                       ": unknown record '" + tag + "'");
    }
  }
  validate_mesh(out.mesh);
  return out;
}

inline LoadedMesh load_trapmesh(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open: " + path);
  return read_trapmesh(is, path);
}

// ---------------------------------------------------------------------------
// STL import/export. STL itself carries no labels; electrode ids come from a
// sidecar mapping keyed by solid name ("*" = fallback for unnamed/binary).

using SolidLabelMap = std::map<std::string, std::string>;

namespace detail {

// Welds exactly-equal vertices so edge-manifoldness can be checked.
class VertexWelder {
 public:
  explicit VertexWelder(TriangleMesh& m) : mesh_(m) {}
  int index(const Vec3& v) {
    const std::array<double, 3> key = {v.x(), v.y(), v.z()};
    auto it = map_.find(key);
    if (it != map_.end()) return it->second;
    mesh_.vertices.push_back(v);
    const int idx = static_cast<int>(mesh_.vertices.size()) - 1;
    map_[key] = idx;
    return idx;
  }

 private:
  TriangleMesh& mesh_;
  std::map<std::array<double, 3>, int> map_;
};

inline void check_manifold(const TriangleMesh& m,
                           std::vector<std::string>* warnings) {
  if (!warnings) return;
  std::map<std::pair<int, int>, int> edge_count;
  for (const auto& f : m.faces)
    for (int k = 0; k < 3; ++k) {
      auto e = std::minmax(f[k], f[(k + 1) % 3]);
      ++edge_count[e];
    }
  std::size_t bad = 0;
  for (const auto& [e, c] : edge_count)
    if (c > 2) ++bad;
  if (bad > 0)
    warnings->push_back("non-manifold mesh: " + std::to_string(bad) +
                        " edges shared by more than two faces");
}

inline std::string lookup_label(const SolidLabelMap& labels,
                                const std::string& solid,
                                const std::string& origin) {
  auto it = labels.find(solid);
  if (it != labels.end()) return it->second;
  it = labels.find("*");
  if (it != labels.end()) return it->second;
  throw ParseError(origin + ": no electrode label for solid '" + solid + "'");
}

}  // namespace detail

inline TriangleMesh load_stl(const std::string& path,
                             const SolidLabelMap& labels,
                             std::vector<std::string>* warnings = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open: " + path);
  std::string content((std::istreambuf_iterator<char>(is)),
                      std::istreambuf_iterator<char>());
  if (content.empty()) throw ParseError(path + ": empty file");

  TriangleMesh mesh;
  detail::VertexWelder weld(mesh);

  const bool ascii = content.rfind("solid", 0) == 0 &&
                     content.find("facet") != std::string::npos;
  if (ascii) {
    std::istringstream ss(content);
    std::string tok;
    std::string solid = "";
    int label = -1;
    std::vector<Vec3> loop;
    std::size_t lineno = 0;
    std::string line;
    while (std::getline(ss, line)) {
      ++lineno;
      std::istringstream ls(line);
      if (!(ls >> tok)) continue;
      if (tok == "solid") {
        std::getline(ls, solid);
        solid.erase(0, solid.find_first_not_of(" \t"));
        label =
            mesh.electrode_index(detail::lookup_label(labels, solid, path));
      } else if (tok == "vertex") {
        double x, y, z;
        if (!(ls >> x >> y >> z))
          throw ParseError(path + ":" + std::to_string(lineno) +
                           ": malformed vertex");
        loop.emplace_back(x, y, z);
      } else if (tok == "endfacet") {
        if (loop.size() != 3)
          throw ParseError(path + ":" + std::to_string(lineno) +
                           ": facet does not have exactly 3 vertices");
        if (label < 0)
          throw ParseError(path + ":" + std::to_string(lineno) +
                           ": facet outside of a solid");
        mesh.faces.push_back(
            {weld.index(loop[0]), weld.index(loop[1]), weld.index(loop[2])});
        mesh.face_electrode.push_back(label);
        loop.clear();
      } else if (tok == "facet" || tok == "outer" || tok == "endloop" ||
                 tok == "endsolid") {
        // structural keywords; nothing to record
      } else {
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": unexpected token '" + tok + "'");
      }
    }
    if (mesh.faces.empty())
      throw ParseError(path + ": no facets found");
  } else {
    if (content.size() < 84) throw ParseError(path + ": truncated binary STL");
    std::uint32_t n = 0;
    std::memcpy(&n, content.data() + 80, 4);
    const std::size_t expect = 84 + static_cast<std::size_t>(n) * 50;
    if (content.size() < expect)
      throw ParseError(path + ": binary STL truncated (expected " +
                       std::to_string(expect) + " bytes)");
    const int label =
        mesh.electrode_index(detail::lookup_label(labels, "*", path));
    for (std::uint32_t t = 0; t < n; ++t) {
      const char* rec = content.data() + 84 + static_cast<std::size_t>(t) * 50;
      float raw[12];
      std::memcpy(raw, rec, 48);
      Vec3 v[3];
      for (int k = 0; k < 3; ++k)
        v[k] = Vec3(raw[3 + 3 * k], raw[4 + 3 * k], raw[5 + 3 * k]);
      mesh.faces.push_back(
          {weld.index(v[0]), weld.index(v[1]), weld.index(v[2])});
      mesh.face_electrode.push_back(label);
    }
  }
  validate_mesh(mesh);
  detail::check_manifold(mesh, warnings);
  return mesh;
}

inline void export_stl(const TriangleMesh& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open for writing: " + path);
  for (std::size_t e = 0; e < m.electrode_names.size(); ++e) {
    os << "solid " << m.electrode_names[e] << "\n";
    for (std::size_t f = 0; f < m.face_count(); ++f) {
      if (m.face_electrode[f] != static_cast<int>(e)) continue;
      const auto t = m.triangle(f);
      const Vec3 n = triangle_normal(t[0], t[1], t[2]);
      os << " facet normal " << format_double(n.x()) << ' '
         << format_double(n.y()) << ' ' << format_double(n.z()) << "\n"
         << "  outer loop\n";
      for (int k = 0; k < 3; ++k)
        os << "   vertex " << format_double(t[k].x()) << ' '
           << format_double(t[k].y()) << ' ' << format_double(t[k].z())
           << "\n";
      os << "  endloop\n endfacet\n";
    }
    os << "endsolid " << m.electrode_names[e] << "\n";
  }
  if (!os) throw ParseError("write failed: " + path);
}

}  // namespace trapheat
