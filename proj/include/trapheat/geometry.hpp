#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "trapheat/common.hpp"
#include "trapheat/mesh.hpp"

namespace trapheat {

enum class ElectrodeRole { RF, DC, GROUND };

struct Electrode {
  std::string id;
  ElectrodeRole role = ElectrodeRole::GROUND;
};

inline const char* role_name(ElectrodeRole r) {
  switch (r) {
    case ElectrodeRole::RF: return "RF";
    case ElectrodeRole::DC: return "DC";
    default: return "GROUND";
  }
}

// ---------------------------------------------------------------------------
// Parameter blocks. All lengths are meters.

// Segmented-wire quadrupole: four axial rails of hexagonal wire prisms
// ("teeth") plus a pair of DC endcap rings. tooth_width is the axial length
// of each wire segment; tooth_gap the break between adjacent segments.
struct SkeletonParams {
  double wire_diameter = 20e-6;
  double tooth_width = 170e-6;
  double tooth_gap = 9e-6;
  double opposing_distance = 400e-6;  // 2 x ion-electrode distance
  double axial_extent = 0.0;          // 0 = derive from teeth_count
  int teeth_count = 9;                // per rail; odd keeps a tooth centered

  double nominal_distance() const { return 0.5 * opposing_distance; }
  double pitch() const { return tooth_width + tooth_gap; }

  // Hexagonal wire cross-section sized to straddle the nominal cylinder.
  double hex_radius() const {
    return wire_diameter / (1.0 + std::cos(constants::pi / 6.0));
  }
  double hex_inradius() const {
    return hex_radius() * std::cos(constants::pi / 6.0);
  }

  void validate() const {
    if (!(wire_diameter > 0)) throw ParamError("wire_diameter", "must be > 0");
    if (!(tooth_width > 0)) throw ParamError("tooth_width", "must be > 0");
    if (!(tooth_gap > 0))
      throw ParamError("tooth_gap",
                       "must be > 0 (zero merges teeth into a solid rail)");
    if (!(tooth_gap < tooth_width))
      throw ParamError("tooth_gap", "must be smaller than tooth_width");
    if (!(opposing_distance > 0))
      throw ParamError("opposing_distance", "must be > 0");
    if (teeth_count < 1 && !(axial_extent > 0))
      throw ParamError("teeth_count", "need teeth_count >= 1 or axial_extent");
    if (!(tooth_width > wire_diameter))
      throw ParamError("tooth_width", "must exceed wire_diameter");
  }

  // Fills whichever of teeth_count / axial_extent was left to derive.
  SkeletonParams resolved() const {
    validate();
    SkeletonParams p = *this;
    if (p.teeth_count < 1)
      p.teeth_count = std::max(
          1, static_cast<int>(std::floor((p.axial_extent + p.tooth_gap) /
                                         p.pitch())));
    p.axial_extent =
        p.teeth_count * p.tooth_width + (p.teeth_count - 1) * p.tooth_gap;
    return p;
  }
};

// Conventional four-blade quadrupole with on-axis DC endcap discs.
struct BladeParams {
  double ion_electrode_distance = 200e-6;
  double blade_length = 2e-3;
  double blade_tip_angle = 45.0 * constants::pi / 180.0;  // full wedge angle
  double blade_depth = 0.5e-3;
  double endcap_separation = 1e-3;  // disc-centre to disc-centre

  double nominal_distance() const { return ion_electrode_distance; }

  void validate() const {
    if (!(ion_electrode_distance > 0))
      throw ParamError("ion_electrode_distance", "must be > 0");
    if (!(blade_length > 0)) throw ParamError("blade_length", "must be > 0");
    if (!(blade_depth > 0)) throw ParamError("blade_depth", "must be > 0");
    if (!(blade_tip_angle > 0 && blade_tip_angle < constants::pi / 2))
      throw ParamError("blade_tip_angle", "must lie in (0, 90) degrees");
    if (!(endcap_separation > 0))
      throw ParamError("endcap_separation", "must be > 0");
  }
};

// Catch-all for oracle rigs (spheres, plates, discs, boxes).
struct GenericParams {
  double nominal_distance = 0.0;
};

using TrapParams = std::variant<SkeletonParams, BladeParams, GenericParams>;

struct TrapGeometry {
  std::string name;
  TriangleMesh mesh;
  std::vector<Electrode> electrodes;
  Vec3 ion_nominal = Vec3::Zero();
  TrapParams params = GenericParams{};
  Vec3 axial_direction = Vec3(0, 0, 1);

  double nominal_distance() const {
    return std::visit([](const auto& p) { return p.nominal_distance(); },
                      params);
  }

  const Electrode* find_electrode(const std::string& id) const {
    for (const auto& e : electrodes)
      if (e.id == id) return &e;
    return nullptr;
  }

  std::vector<std::string> electrode_ids_with_role(ElectrodeRole r) const {
    std::vector<std::string> out;
    for (const auto& e : electrodes)
      if (e.role == r) out.push_back(e.id);
    return out;
  }
};

inline double min_ion_electrode_distance(const TrapGeometry& g) {
  return min_point_mesh_distance(g.ion_nominal, g.mesh);
}

inline void validate_geometry(const TrapGeometry& g, double tol = 0.01) {
  validate_mesh(g.mesh);
  for (std::size_t i = 0; i < g.electrodes.size(); ++i)
    for (std::size_t j = i + 1; j < g.electrodes.size(); ++j)
      if (g.electrodes[i].id == g.electrodes[j].id)
        throw ParamError("electrodes", "duplicate id " + g.electrodes[i].id);
  for (const auto& name : g.mesh.electrode_names)
    if (!g.find_electrode(name))
      throw ParamError("electrodes", "mesh label " + name + " has no role");
  const double dmin = min_ion_electrode_distance(g);
  if (!(dmin > 0))
    throw ParamError("ion_nominal", "ion lies on an electrode surface");
  const double dnom = g.nominal_distance();
  if (dnom > 0 && std::abs(dmin - dnom) > tol * dnom)
    throw ParamError("ion_nominal",
                     "min ion-electrode distance deviates from nominal by "
                     "more than " + std::to_string(100 * tol) + "%");
}

// ---------------------------------------------------------------------------
// Mesh-building primitives.

// Right prism over a CCW 2D polygon (x,y), spanning [z0, z1], with caps.
inline void add_prism(TriangleMesh& m,
                      const std::vector<std::array<double, 2>>& poly,
                      double z0, double z1, int electrode) {
  const int n = static_cast<int>(poly.size());
  auto at = [&](int j, double z) {
    return Vec3(poly[j % n][0], poly[j % n][1], z);
  };
  for (int j = 0; j < n; ++j)
    m.add_quad(at(j, z0), at(j + 1, z0), at(j + 1, z1), at(j, z1), electrode);
  // Caps as fans: +z cap CCW (outward +z), -z cap reversed.
  for (int j = 1; j + 1 < n; ++j) {
    m.add_face(at(0, z1), at(j, z1), at(j + 1, z1), electrode);
    m.add_face(at(0, z0), at(j + 1, z0), at(j, z0), electrode);
  }
}

// Exact quarter-turn about +z: (x, y) -> (-y, x).
inline TriangleMesh rotate_z90(const TriangleMesh& m) {
  TriangleMesh out = m;
  for (auto& v : out.vertices) v = Vec3(-v.y(), v.x(), v.z());
  return out;
}

// Reflection z -> -z with winding flipped to keep normals outward.
inline TriangleMesh mirror_z(const TriangleMesh& m) {
  TriangleMesh out = m;
  for (auto& v : out.vertices) v.z() = -v.z();
  for (auto& f : out.faces) std::swap(f[1], f[2]);
  return out;
}

inline void relabel_all(TriangleMesh& m, const std::string& name) {
  m.electrode_names = {name};
  std::fill(m.face_electrode.begin(), m.face_electrode.end(), 0);
}

namespace detail {

// Hexagonal cross-section for a wire run along +z at radial station rho
// (rail on +x): flat facet faces the ion (-x side).
inline std::vector<std::array<double, 2>> wire_hexagon(double rho, double R) {
  std::vector<std::array<double, 2>> pts;
  pts.reserve(6);
  for (int j = 0; j < 6; ++j) {
    const double psi = j * constants::pi / 3.0;
    // CCW in (x, y); x = radial, flat at x = rho - R*cos(30 deg).
    pts.push_back({rho + R * std::sin(psi), R * std::cos(psi)});
  }
  // Reorder to CCW: as j increases, (sin, cos) traces clockwise; reverse.
  std::reverse(pts.begin(), pts.end());
  return pts;
}

// Hexagonal torus: wire ring of centreline radius rho at height z.
inline void add_wire_ring(TriangleMesh& m, double rho, double z, double R,
                          int segments, int electrode) {
  std::vector<std::vector<Vec3>> rings(segments);
  for (int s = 0; s < segments; ++s) {
    const double th = 2.0 * constants::pi * s / segments;
    const Vec3 rad(std::cos(th), std::sin(th), 0.0);
    const Vec3 up(0, 0, 1);
    rings[s].reserve(6);
    for (int j = 0; j < 6; ++j) {
      const double psi = j * constants::pi / 3.0;
      rings[s].push_back(Vec3(rho * rad.x(), rho * rad.y(), z) +
                         R * std::sin(psi) * rad + R * std::cos(psi) * up);
    }
  }
  for (int s = 0; s < segments; ++s) {
    const auto& a = rings[s];
    const auto& b = rings[(s + 1) % segments];
    for (int j = 0; j < 6; ++j) {
      const int k = (j + 1) % 6;
      m.add_quad(a[j], a[k], b[k], b[j], electrode);
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Trap builders.

inline TrapGeometry build_skeleton(const SkeletonParams& params_in) {
  const SkeletonParams p = params_in.resolved();
  const double d = p.nominal_distance();
  const double R = p.hex_radius();
  const double rho0 = d + p.hex_inradius();  // inner flat exactly at d

  // Master rail along +x: teeth_count capped hexagonal prisms.
  TriangleMesh rail;
  const int rf_label = rail.electrode_index("rf");
  const auto hex = detail::wire_hexagon(rho0, R);
  const double z_first = -0.5 * p.axial_extent;
  for (int t = 0; t < p.teeth_count; ++t) {
    const double z0 = z_first + t * p.pitch();
    add_prism(rail, hex, z0, z0 + p.tooth_width, rf_label);
  }

  TriangleMesh mesh = rail;  // +x, RF
  TriangleMesh r90 = rotate_z90(rail);
  relabel_all(r90, "dc");
  mesh.append(r90);  // +y, DC
  TriangleMesh r180 = rotate_z90(rotate_z90(rail));
  mesh.append(r180);  // -x, RF (labels preserved)
  TriangleMesh r270 = rotate_z90(r90);
  mesh.append(r270);  // -y, DC

  // DC endcap rings just beyond the rail ends.
  const double z_ec = 0.5 * p.axial_extent + 100e-6;
  TriangleMesh ring_p;
  detail::add_wire_ring(ring_p, d, z_ec, R, 32,
                        ring_p.electrode_index("endcap_p"));
  TriangleMesh ring_m = mirror_z(ring_p);
  relabel_all(ring_m, "endcap_m");
  mesh.append(ring_p);
  mesh.append(ring_m);

  TrapGeometry g;
  g.name = "skeleton";
  g.mesh = std::move(mesh);
  g.electrodes = {{"rf", ElectrodeRole::RF},
                  {"dc", ElectrodeRole::DC},
                  {"endcap_p", ElectrodeRole::DC},
                  {"endcap_m", ElectrodeRole::DC}};
  g.ion_nominal = Vec3::Zero();
  g.params = p;
  validate_geometry(g);
  return g;
}

inline TrapGeometry build_blade(const BladeParams& p) {
  p.validate();
  const double d = p.ion_electrode_distance;
  const double w = p.blade_depth * std::tan(0.5 * p.blade_tip_angle);

  // Master blade along +x: wedge cross-section, tip edge at x = d.
  TriangleMesh blade;
  const int rf_label = blade.electrode_index("rf");
  const std::vector<std::array<double, 2>> wedge = {
      {d, 0.0}, {d + p.blade_depth, -w}, {d + p.blade_depth, +w}};
  add_prism(blade, wedge, -0.5 * p.blade_length, 0.5 * p.blade_length,
            rf_label);

  TriangleMesh mesh = blade;
  TriangleMesh b90 = rotate_z90(blade);
  relabel_all(b90, "dc");
  mesh.append(b90);
  mesh.append(rotate_z90(rotate_z90(blade)));
  mesh.append(rotate_z90(b90));

  // On-axis DC endcap discs (squat 16-gon cylinders).
  const double disc_r = 150e-6;
  const double disc_t = 60e-6;
  std::vector<std::array<double, 2>> disc;
  for (int j = 0; j < 16; ++j) {
    const double th = 2.0 * constants::pi * j / 16;
    disc.push_back({disc_r * std::cos(th), disc_r * std::sin(th)});
  }
  TriangleMesh cap_p;
  add_prism(cap_p, disc, 0.5 * p.endcap_separation - 0.5 * disc_t,
            0.5 * p.endcap_separation + 0.5 * disc_t,
            cap_p.electrode_index("endcap_p"));
  TriangleMesh cap_m = mirror_z(cap_p);
  relabel_all(cap_m, "endcap_m");
  mesh.append(cap_p);
  mesh.append(cap_m);

  TrapGeometry g;
  g.name = "blade";
  g.mesh = std::move(mesh);
  g.electrodes = {{"rf", ElectrodeRole::RF},
                  {"dc", ElectrodeRole::DC},
                  {"endcap_p", ElectrodeRole::DC},
                  {"endcap_m", ElectrodeRole::DC}};
  g.ion_nominal = Vec3::Zero();
  g.params = p;
  validate_geometry(g);
  return g;
}

// ---------------------------------------------------------------------------
// Discretization.

inline PatchSet discretize(const TrapGeometry& g, double target_edge) {
  if (!(target_edge > 0)) throw ParamError("target_edge", "must be positive");
  if (const auto* sp = std::get_if<SkeletonParams>(&g.params)) {
    if (target_edge > sp->tooth_gap)
      throw FeatureResolutionError(
          "target_edge",
          "cannot resolve tooth_gap of " +
              std::to_string(sp->tooth_gap * 1e6) + " um at target edge " +
              std::to_string(target_edge * 1e6) + " um");
  }
  return make_patchset(subdivide_mesh(g.mesh, target_edge), g.ion_nominal,
                       target_edge);
}

// ---------------------------------------------------------------------------
// Oracle rigs.

// Icosphere: 20 * 4^subdiv faces, vertices on radius R about the origin.
inline TrapGeometry build_sphere(double R, int subdiv,
                                 const std::string& label = "sphere") {
  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  std::vector<Vec3> v = {{-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0},
                         {1, -phi, 0}, {0, -1, phi},  {0, 1, phi},
                         {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1},
                         {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : v) p = p.normalized() * R;
  std::vector<std::array<int, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdiv; ++s) {
    std::vector<std::array<int, 3>> nf;
    nf.reserve(f.size() * 4);
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const Vec3 m = (0.5 * (v[a] + v[b])).normalized() * R;
      v.push_back(m);
      const int idx = static_cast<int>(v.size()) - 1;
      midpoint[key] = idx;
      return idx;
    };
    for (const auto& t : f) {
      const int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]),
                ca = mid(t[2], t[0]);
      nf.push_back({t[0], ab, ca});
      nf.push_back({t[1], bc, ab});
      nf.push_back({t[2], ca, bc});
      nf.push_back({ab, bc, ca});
    }
    f = std::move(nf);
  }
  TrapGeometry g;
  g.name = "sphere";
  g.mesh.vertices = std::move(v);
  g.mesh.faces = std::move(f);
  const int lab = g.mesh.electrode_index(label);
  g.mesh.face_electrode.assign(g.mesh.faces.size(), lab);
  g.electrodes = {{label, ElectrodeRole::DC}};
  g.ion_nominal = Vec3::Zero();
  g.params = GenericParams{0.0};
  return g;
}

// Unit-style square plate in the z=0 plane with the ion at height d above
// its centre. Base mesh is the two-triangle split of the square.
inline TrapGeometry build_square_plate(double side, double d,
                                       const std::string& label = "plate") {
  TrapGeometry g;
  g.name = "square_plate";
  const int lab = g.mesh.electrode_index(label);
  const double h = 0.5 * side;
  g.mesh.add_quad(Vec3(-h, -h, 0), Vec3(h, -h, 0), Vec3(h, h, 0),
                  Vec3(-h, h, 0), lab);
  g.electrodes = {{label, ElectrodeRole::DC}};
  g.ion_nominal = Vec3(0, 0, d);
  g.params = GenericParams{d};
  return g;
}

// Two square plates (side x side) at z = +/- gap/2.
inline TrapGeometry build_parallel_plates(double side, double gap) {
  TrapGeometry g;
  g.name = "parallel_plates";
  const int top = g.mesh.electrode_index("plate_p");
  const int bot = g.mesh.electrode_index("plate_m");
  const double h = 0.5 * side;
  g.mesh.add_quad(Vec3(-h, -h, gap / 2), Vec3(h, -h, gap / 2),
                  Vec3(h, h, gap / 2), Vec3(-h, h, gap / 2), top);
  g.mesh.add_quad(Vec3(-h, -h, -gap / 2), Vec3(h, -h, -gap / 2),
                  Vec3(h, h, -gap / 2), Vec3(-h, h, -gap / 2), bot);
  g.electrodes = {{"plate_p", ElectrodeRole::DC},
                  {"plate_m", ElectrodeRole::DC}};
  g.ion_nominal = Vec3::Zero();
  g.params = GenericParams{gap / 2};
  return g;
}

// Radially graded disc in the z=0 plane, ion at height d above the centre.
// Panel size grows geometrically with radius so the near-axis kernel is
// resolved without meshing the rim finely.
inline TrapGeometry build_graded_disc(double d, double R_disc,
                                      const std::string& label = "plane") {
  TrapGeometry g;
  g.name = "graded_disc";
  const int lab = g.mesh.electrode_index(label);
  std::vector<double> radii = {0.0, d / 6.0};
  while (radii.back() < R_disc) radii.push_back(radii.back() * 1.35);
  radii.back() = R_disc;

  // Centre fan.
  {
    const int nth = 12;
    for (int s = 0; s < nth; ++s) {
      const double t0 = 2 * constants::pi * s / nth;
      const double t1 = 2 * constants::pi * (s + 1) / nth;
      g.mesh.add_face(Vec3::Zero(),
                      Vec3(radii[1] * std::cos(t0), radii[1] * std::sin(t0), 0),
                      Vec3(radii[1] * std::cos(t1), radii[1] * std::sin(t1), 0),
                      lab);
    }
  }
  for (std::size_t k = 1; k + 1 < radii.size(); ++k) {
    const double r0 = radii[k], r1 = radii[k + 1];
    const double dr = r1 - r0;
    int nth = static_cast<int>(std::round(2 * constants::pi * r0 / dr));
    nth = std::clamp(nth, 12, 96);
    for (int s = 0; s < nth; ++s) {
      const double t0 = 2 * constants::pi * s / nth;
      const double t1 = 2 * constants::pi * (s + 1) / nth;
      const Vec3 a(r0 * std::cos(t0), r0 * std::sin(t0), 0);
      const Vec3 b(r1 * std::cos(t0), r1 * std::sin(t0), 0);
      const Vec3 c(r1 * std::cos(t1), r1 * std::sin(t1), 0);
      const Vec3 e(r0 * std::cos(t1), r0 * std::sin(t1), 0);
      g.mesh.add_quad(a, b, c, e, lab);
    }
  }
  g.electrodes = {{label, ElectrodeRole::DC}};
  g.ion_nominal = Vec3(0, 0, d);
  g.params = GenericParams{d};
  return g;
}

// Closed axis-aligned box (outward normals), for toy coupling rigs.
inline TrapGeometry build_box(const Vec3& half, const Vec3& ion,
                              const std::string& label = "box") {
  TrapGeometry g;
  g.name = "box";
  const int lab = g.mesh.electrode_index(label);
  const double x = half.x(), y = half.y(), z = half.z();
  // +x, -x, +y, -y, +z, -z faces, CCW seen from outside.
  g.mesh.add_quad({x, -y, -z}, {x, y, -z}, {x, y, z}, {x, -y, z}, lab);
  g.mesh.add_quad({-x, y, -z}, {-x, -y, -z}, {-x, -y, z}, {-x, y, z}, lab);
  g.mesh.add_quad({x, y, -z}, {-x, y, -z}, {-x, y, z}, {x, y, z}, lab);
  g.mesh.add_quad({-x, -y, -z}, {x, -y, -z}, {x, -y, z}, {-x, -y, z}, lab);
  g.mesh.add_quad({-x, -y, z}, {x, -y, z}, {x, y, z}, {-x, y, z}, lab);
  g.mesh.add_quad({x, -y, -z}, {-x, -y, -z}, {-x, y, -z}, {x, y, -z}, lab);
  g.electrodes = {{label, ElectrodeRole::DC}};
  g.ion_nominal = ion;
  g.params = GenericParams{0.0};
  return g;
}

}  // namespace trapheat
