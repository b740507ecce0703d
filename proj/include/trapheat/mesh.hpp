#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "trapheat/common.hpp"
#include "trapheat/parallel.hpp"

namespace trapheat {

// Labeled triangle surface mesh. Electrode labels are interned: faces carry
// an index into electrode_names. Coordinates are meters.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
  std::vector<int> face_electrode;           // index into electrode_names
  std::vector<std::string> electrode_names;  // unique, insertion-ordered

  int electrode_index(const std::string& name) {
    for (std::size_t i = 0; i < electrode_names.size(); ++i)
      if (electrode_names[i] == name) return static_cast<int>(i);
    electrode_names.push_back(name);
    return static_cast<int>(electrode_names.size()) - 1;
  }

  int find_electrode(const std::string& name) const {
    for (std::size_t i = 0; i < electrode_names.size(); ++i)
      if (electrode_names[i] == name) return static_cast<int>(i);
    return -1;
  }

  std::size_t face_count() const { return faces.size(); }

  void add_face(const Vec3& a, const Vec3& b, const Vec3& c, int electrode) {
    const int base = static_cast<int>(vertices.size());
    vertices.push_back(a);
    vertices.push_back(b);
    vertices.push_back(c);
    faces.push_back({base, base + 1, base + 2});
    face_electrode.push_back(electrode);
  }

  // Quad split along the (a,c) diagonal; corners in cyclic order.
  void add_quad(const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d,
                int electrode) {
    add_face(a, b, c, electrode);
    add_face(a, c, d, electrode);
  }

  void append(const TriangleMesh& other) {
    const int vbase = static_cast<int>(vertices.size());
    vertices.insert(vertices.end(), other.vertices.begin(),
                    other.vertices.end());
    std::vector<int> emap(other.electrode_names.size());
    for (std::size_t e = 0; e < other.electrode_names.size(); ++e)
      emap[e] = electrode_index(other.electrode_names[e]);
    for (std::size_t f = 0; f < other.faces.size(); ++f) {
      faces.push_back({other.faces[f][0] + vbase, other.faces[f][1] + vbase,
                       other.faces[f][2] + vbase});
      face_electrode.push_back(emap[other.face_electrode[f]]);
    }
  }

  std::array<Vec3, 3> triangle(std::size_t f) const {
    return {vertices[faces[f][0]], vertices[faces[f][1]],
            vertices[faces[f][2]]};
  }
};

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

inline Vec3 triangle_normal(const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 n = (b - a).cross(c - a);
  const double len = n.norm();
  return len > 0.0 ? Vec3(n / len) : Vec3(0, 0, 1);
}

inline double face_area(const TriangleMesh& m, std::size_t f) {
  const auto t = m.triangle(f);
  return triangle_area(t[0], t[1], t[2]);
}

inline Vec3 face_centroid(const TriangleMesh& m, std::size_t f) {
  const auto t = m.triangle(f);
  return (t[0] + t[1] + t[2]) / 3.0;
}

inline double mesh_area(const TriangleMesh& m) {
  std::vector<double> areas(m.face_count());
  for (std::size_t f = 0; f < m.face_count(); ++f) areas[f] = face_area(m, f);
  return pairwise_sum(areas);
}

// Structural validation: index bounds and degenerate faces.
inline void validate_mesh(const TriangleMesh& m) {
  const int nv = static_cast<int>(m.vertices.size());
  if (m.faces.size() != m.face_electrode.size())
    throw ParseError("mesh: face/electrode array size mismatch");
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int idx = m.faces[f][k];
      if (idx < 0 || idx >= nv)
        throw ParseError("mesh: face " + std::to_string(f) +
                         " references vertex " + std::to_string(idx) +
                         " out of range");
    }
    const auto t = m.triangle(f);
    double le = std::max({(t[1] - t[0]).norm(), (t[2] - t[1]).norm(),
                          (t[0] - t[2]).norm()});
    if (!(triangle_area(t[0], t[1], t[2]) > 1e-12 * le * le))
      throw ParseError("mesh: degenerate face " + std::to_string(f));
    const int e = m.face_electrode[f];
    if (e < 0 || e >= static_cast<int>(m.electrode_names.size()))
      throw ParseError("mesh: face " + std::to_string(f) +
                       " has invalid electrode index");
  }
}

// Exact point-to-triangle distance (closest-point construction).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a,
                                      const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0)
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);

  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

inline double point_triangle_distance(const Vec3& p, const Vec3& a,
                                      const Vec3& b, const Vec3& c) {
  return (p - closest_point_on_triangle(p, a, b, c)).norm();
}

inline double min_point_mesh_distance(const Vec3& p, const TriangleMesh& m) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < m.face_count(); ++f) {
    const auto t = m.triangle(f);
    best = std::min(best, point_triangle_distance(p, t[0], t[1], t[2]));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Structured refinement. Each base triangle is split into n^2 congruent
// children on the barycentric lattice; n is chosen so children satisfy the
// max-edge cap. Exactly partitions the parent, deterministic face order.

inline int subdivision_order(const Vec3& a, const Vec3& b, const Vec3& c,
                             double target_edge) {
  const double le = std::max(
      {(b - a).norm(), (c - b).norm(), (a - c).norm()});
  const double area = triangle_area(a, b, c);
  const double by_edge = le / (1.5 * target_edge);
  const double by_area = std::sqrt(2.0 * area) / target_edge;
  const int n = static_cast<int>(std::ceil(std::max(by_edge, by_area) - 1e-9));
  return std::max(1, n);
}

inline TriangleMesh subdivide_mesh(const TriangleMesh& base,
                                   double target_edge) {
  if (!(target_edge > 0.0))
    throw ParamError("target_edge", "must be positive");
  TriangleMesh out;
  out.electrode_names = base.electrode_names;
  for (std::size_t f = 0; f < base.face_count(); ++f) {
    const auto t = base.triangle(f);
    const int e = base.face_electrode[f];
    const int n = subdivision_order(t[0], t[1], t[2], target_edge);
    const Vec3 du = (t[1] - t[0]) / n;
    const Vec3 dv = (t[2] - t[0]) / n;
    // Lattice points p(i,j) = a + i*du + j*dv, i + j <= n.
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i + j < n; ++i) {
        const Vec3 p00 = t[0] + i * du + j * dv;
        const Vec3 p10 = t[0] + (i + 1) * du + j * dv;
        const Vec3 p01 = t[0] + i * du + (j + 1) * dv;
        out.add_face(p00, p10, p01, e);
        if (i + j < n - 1) {
          const Vec3 p11 = t[0] + (i + 1) * du + (j + 1) * dv;
          out.add_face(p10, p11, p01, e);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// PatchSet: per-face collocation data for the boundary-element machinery.

struct PatchSet {
  TriangleMesh mesh;  // refined mesh; patch i is face i
  Vec3 ion = Vec3::Zero();
  double target_edge = 0.0;

  std::vector<Vec3> centroid;
  std::vector<Vec3> normal;
  std::vector<double> area;
  std::vector<double> diameter;  // longest edge, drives quadrature depth
  std::vector<double> distance_to_ion;
  std::vector<int> electrode;  // mirror of mesh.face_electrode

  std::size_t size() const { return centroid.size(); }

  const std::string& electrode_name(std::size_t i) const {
    return mesh.electrode_names[electrode[i]];
  }

  double total_area() const { return pairwise_sum(area); }
};

inline PatchSet make_patchset(TriangleMesh refined, const Vec3& ion,
                              double target_edge) {
  PatchSet ps;
  ps.mesh = std::move(refined);
  ps.ion = ion;
  ps.target_edge = target_edge;
  const std::size_t n = ps.mesh.face_count();
  ps.centroid.resize(n);
  ps.normal.resize(n);
  ps.area.resize(n);
  ps.diameter.resize(n);
  ps.distance_to_ion.resize(n);
  ps.electrode = ps.mesh.face_electrode;
  for (std::size_t f = 0; f < n; ++f) {
    const auto t = ps.mesh.triangle(f);
    ps.centroid[f] = (t[0] + t[1] + t[2]) / 3.0;
    ps.normal[f] = triangle_normal(t[0], t[1], t[2]);
    ps.area[f] = triangle_area(t[0], t[1], t[2]);
    ps.diameter[f] = std::max(
        {(t[1] - t[0]).norm(), (t[2] - t[1]).norm(), (t[0] - t[2]).norm()});
    ps.distance_to_ion[f] = (ps.centroid[f] - ion).norm();
  }
  return ps;
}

}  // namespace trapheat
