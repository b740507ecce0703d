#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trapheat/common.hpp"
#include "trapheat/geometry.hpp"
#include "trapheat/mesh.hpp"
#include "trapheat/parallel.hpp"

namespace trapheat {

struct EvalDiag {
  bool too_close = false;
  double min_distance = std::numeric_limits<double>::infinity();
  double local_size = 0.0;
};

namespace panel {

// Integral of 1/r over triangle (P, A, B) evaluated at the in-plane corner P.
inline double corner_integral(const Vec3& P, const Vec3& A, const Vec3& B) {
  const Vec3 u = A - P;
  const Vec3 v = B - P;
  const double cross = u.cross(v).norm();
  if (cross <= 0.0) return 0.0;
  const double gamma = std::atan2(cross, u.dot(v));
  const Vec3 dA = P - A;
  const Vec3 dB = B - A;
  const double alpha = std::atan2(cross, dA.dot(dB));
  const double c = u.norm();
  const double t0 = std::tan(0.5 * alpha);
  const double t1 = std::tan(0.5 * (alpha + gamma));
  if (!(t0 > 0.0) || !(t1 > 0.0)) return 0.0;
  return c * std::sin(alpha) * std::log(t1 / t0);
}

// Exact integral of 1/r over a triangle from its own centroid.
inline double self_integral(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 g = (a + b + c) / 3.0;
  return corner_integral(g, a, b) + corner_integral(g, b, c) +
         corner_integral(g, c, a);
}

// Degree-2 midpoint rule for 1/r.
inline double midpoint3_integral(const Vec3& x, const Vec3& a, const Vec3& b,
                                 const Vec3& c) {
  const double w = triangle_area(a, b, c) / 3.0;
  return w * (1.0 / (x - 0.5 * (a + b)).norm() +
              1.0 / (x - 0.5 * (b + c)).norm() +
              1.0 / (x - 0.5 * (c + a)).norm());
}

inline double subdivided_integral(const Vec3& x, const Vec3& a, const Vec3& b,
                                  const Vec3& c, int depth) {
  if (depth <= 0) return midpoint3_integral(x, a, b, c);
  const Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  return subdivided_integral(x, a, ab, ca, depth - 1) +
         subdivided_integral(x, ab, b, bc, depth - 1) +
         subdivided_integral(x, ca, bc, c, depth - 1) +
         subdivided_integral(x, ab, bc, ca, depth - 1);
}

// Quadrature depth from the distance-to-size ratio; 0 = single midpoint rule.
inline int depth_for(double dist, double diam) {
  const double ratio = dist / diam;
  if (ratio >= 2.0) return 0;
  if (ratio >= 1.0) return 1;
  if (ratio >= 0.5) return 2;
  if (ratio >= 0.25) return 3;
  return 4;
}

// Integral of 1/r over a panel seen from x (x off the panel), without the
// Coulomb prefactor.
inline double potential_integral(const Vec3& x, const Vec3& a, const Vec3& b,
                                 const Vec3& c, const Vec3& centroid,
                                 double area, double diam) {
  const double dist = (x - centroid).norm();
  if (dist >= 4.0 * diam) return area / dist;
  return subdivided_integral(x, a, b, c, depth_for(dist, diam));
}

// Vector kernel (x - y)/|x - y|^3 under the same quadrature ladder.
inline Vec3 field_kernel_1pt(const Vec3& x, const Vec3& y, double w) {
  const Vec3 d = x - y;
  const double r2 = d.squaredNorm();
  return w * d / (r2 * std::sqrt(r2));
}

inline Vec3 field_midpoint3(const Vec3& x, const Vec3& a, const Vec3& b,
                            const Vec3& c) {
  const double w = triangle_area(a, b, c) / 3.0;
  return field_kernel_1pt(x, 0.5 * (a + b), w) +
         field_kernel_1pt(x, 0.5 * (b + c), w) +
         field_kernel_1pt(x, 0.5 * (c + a), w);
}

inline Vec3 field_subdivided(const Vec3& x, const Vec3& a, const Vec3& b,
                             const Vec3& c, int depth) {
  if (depth <= 0) return field_midpoint3(x, a, b, c);
  const Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  return field_subdivided(x, a, ab, ca, depth - 1) +
         field_subdivided(x, ab, b, bc, depth - 1) +
         field_subdivided(x, ca, bc, c, depth - 1) +
         field_subdivided(x, ab, bc, ca, depth - 1);
}

inline Vec3 field_integral(const Vec3& x, const Vec3& a, const Vec3& b,
                           const Vec3& c, const Vec3& centroid, double area,
                           double diam) {
  const double dist = (x - centroid).norm();
  if (dist >= 4.0 * diam) return field_kernel_1pt(x, centroid, area);
  return field_subdivided(x, a, b, c, depth_for(dist, diam));
}

// Jacobian kernel d/dx [(x-y)/r^3] = I/r^3 - 3 dd^T/r^5.
inline Mat3 jacobian_kernel_1pt(const Vec3& x, const Vec3& y, double w) {
  const Vec3 d = x - y;
  const double r2 = d.squaredNorm();
  const double r = std::sqrt(r2);
  const double inv_r3 = 1.0 / (r2 * r);
  return w * (Mat3::Identity() * inv_r3 -
              3.0 * d * d.transpose() * (inv_r3 / r2));
}

inline Mat3 jacobian_midpoint3(const Vec3& x, const Vec3& a, const Vec3& b,
                               const Vec3& c) {
  const double w = triangle_area(a, b, c) / 3.0;
  return jacobian_kernel_1pt(x, 0.5 * (a + b), w) +
         jacobian_kernel_1pt(x, 0.5 * (b + c), w) +
         jacobian_kernel_1pt(x, 0.5 * (c + a), w);
}

inline Mat3 jacobian_subdivided(const Vec3& x, const Vec3& a, const Vec3& b,
                                const Vec3& c, int depth) {
  if (depth <= 0) return jacobian_midpoint3(x, a, b, c);
  const Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  return jacobian_subdivided(x, a, ab, ca, depth - 1) +
         jacobian_subdivided(x, ab, b, bc, depth - 1) +
         jacobian_subdivided(x, ca, bc, c, depth - 1) +
         jacobian_subdivided(x, ab, bc, ca, depth - 1);
}

inline Mat3 jacobian_integral(const Vec3& x, const Vec3& a, const Vec3& b,
                              const Vec3& c, const Vec3& centroid, double area,
                              double diam) {
  const double dist = (x - centroid).norm();
  if (dist >= 4.0 * diam) return jacobian_kernel_1pt(x, centroid, area);
  return jacobian_subdivided(x, a, b, c, depth_for(dist, diam));
}

}  // namespace panel

// ---------------------------------------------------------------------------
// Dirichlet solution: per-patch surface charge density plus the boundary
// voltages that produced it.

struct DirichletSolution {
  std::shared_ptr<const PatchSet> patches;
  Eigen::VectorXd sigma;  // C/m^2
  std::map<std::string, double> boundary_voltages;
  double residual_max = 0.0;
};

struct PatchCouplings {
  Vec3 direction = Vec3::UnitZ();
  Eigen::VectorXd c;  // field at the ion per volt on patch i, 1/m
  enum class Method { direct, adjoint } method = Method::adjoint;
};

struct AssembleOptions {
  double max_bytes = 2.6e9;  // matrix + factorization memory guard
  int dense_cap = 20000;     // above this, matrix-free iterative solves
};

// Single-layer collocation operator: M_ij = potential at centroid i per unit
// charge density on panel j (so M sigma = boundary voltages).
class BemOperator {
 public:
  BemOperator(std::shared_ptr<const PatchSet> patches, AssembleOptions opts)
      : patches_(std::move(patches)), opts_(opts) {
    const std::size_t n = patches_->size();
    if (n == 0) throw ParamError("patches", "empty patch set");
    dense_ = n <= static_cast<std::size_t>(opts_.dense_cap);
    if (dense_) {
      const double bytes = 2.0 * 8.0 * static_cast<double>(n) * n;
      if (bytes > opts_.max_bytes)
        throw SizeError("dense operator needs " + std::to_string(bytes) +
                        " bytes, above the configured cap of " +
                        std::to_string(opts_.max_bytes));
      assemble_dense();
    } else {
      assemble_diagonal();
    }
  }

  const PatchSet& patches() const { return *patches_; }
  std::shared_ptr<const PatchSet> patches_ptr() const { return patches_; }
  bool dense() const { return dense_; }
  std::size_t size() const { return patches_->size(); }
  const Eigen::MatrixXd& matrix() const {
    if (!dense_) throw SizeError("operator is matrix-free; no dense matrix");
    return M_;
  }

  double entry(std::size_t i, std::size_t j) const {
    const auto& ps = *patches_;
    const auto t = ps.mesh.triangle(j);
    double raw;
    if (i == j) {
      raw = panel::self_integral(t[0], t[1], t[2]);
    } else {
      const double dist = (ps.centroid[i] - ps.centroid[j]).norm();
      if (dist <= 0.0)
        throw ParamError("patches", "coincident centroids at " +
                                        std::to_string(i) + "," +
                                        std::to_string(j));
      raw = panel::potential_integral(ps.centroid[i], t[0], t[1], t[2],
                                      ps.centroid[j], ps.area[j],
                                      ps.diameter[j]);
    }
    return raw / (4.0 * constants::pi * constants::vacuum_permittivity);
  }

  // Solves M sigma = rhs and enforces the residual contract.
  Eigen::VectorXd solve_raw(const Eigen::VectorXd& rhs) const {
    const double vmax = rhs.cwiseAbs().maxCoeff();
    if (vmax == 0.0) return Eigen::VectorXd::Zero(rhs.size());
    Eigen::VectorXd sigma;
    if (dense_) {
      factorize();
      sigma = lu_->solve(rhs);
    } else {
      sigma = bicgstab(rhs);
    }
    const double res = residual_max(sigma, rhs);
    if (res > 1e-10 * vmax) {
      std::string cond;
      if (dense_) cond = ", rcond ~ " + std::to_string(lu_->rcond());
      throw NumericalError("boundary solve residual " + std::to_string(res) +
                           " exceeds 1e-10 * max|v| = " +
                           std::to_string(1e-10 * vmax) + cond);
    }
    return sigma;
  }

  double residual_max(const Eigen::VectorXd& sigma,
                      const Eigen::VectorXd& rhs) const {
    return (apply(sigma) - rhs).cwiseAbs().maxCoeff();
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& sigma) const {
    if (dense_) return M_ * sigma;
    const std::size_t n = size();
    Eigen::VectorXd out(n);
    parallel_for(n, [&](std::size_t i) {
      std::vector<double> row(n);
      for (std::size_t j = 0; j < n; ++j) row[j] = entry(i, j) * sigma[j];
      out[i] = pairwise_sum(row);
    });
    return out;
  }

  void factorize() const {
    if (!lu_) lu_.emplace(M_);
  }

 private:
  void assemble_dense() {
    const std::size_t n = size();
    M_.resize(n, n);
    parallel_for(n, [&](std::size_t i) {
      for (std::size_t j = 0; j < n; ++j) M_(i, j) = entry(i, j);
    });
  }

  void assemble_diagonal() {
    const std::size_t n = size();
    diag_.resize(n);
    parallel_for(n, [&](std::size_t i) { diag_[i] = entry(i, i); });
  }

  // Jacobi-preconditioned BiCGSTAB for the matrix-free path. Fixed operation
  // order keeps reruns bit-identical.
  Eigen::VectorXd bicgstab(const Eigen::VectorXd& b) const {
    const std::size_t n = size();
    Eigen::VectorXd x = b.cwiseQuotient(diag_);
    Eigen::VectorXd r = b - apply(x);
    const Eigen::VectorXd r0 = r;
    Eigen::VectorXd p = r, v = Eigen::VectorXd::Zero(n),
                    s(n), t(n);
    double rho = 1, alpha = 1, omega = 1;
    const double bnorm = b.norm();
    for (int it = 0; it < 2000; ++it) {
      const double rho1 = r0.dot(r);
      if (rho1 == 0.0) break;
      if (it > 0) {
        const double beta = (rho1 / rho) * (alpha / omega);
        p = r + beta * (p - omega * v);
      }
      rho = rho1;
      const Eigen::VectorXd ph = p.cwiseQuotient(diag_);
      v = apply(ph);
      alpha = rho / r0.dot(v);
      s = r - alpha * v;
      x += alpha * ph;
      if (s.norm() <= 1e-13 * bnorm) return x;
      const Eigen::VectorXd sh = s.cwiseQuotient(diag_);
      t = apply(sh);
      omega = t.dot(s) / t.dot(t);
      x += omega * sh;
      r = s - omega * t;
      if (r.norm() <= 1e-13 * bnorm) return x;
    }
    throw NumericalError("matrix-free BiCGSTAB did not converge");
  }

  std::shared_ptr<const PatchSet> patches_;
  AssembleOptions opts_;
  bool dense_ = true;
  Eigen::MatrixXd M_;
  Eigen::VectorXd diag_;
  mutable std::optional<Eigen::PartialPivLU<Eigen::MatrixXd>> lu_;
};

inline BemOperator assemble(std::shared_ptr<const PatchSet> patches,
                            AssembleOptions opts = {}) {
  return BemOperator(std::move(patches), opts);
}

// ---------------------------------------------------------------------------
// Boundary-value solves.

inline Eigen::VectorXd electrode_voltage_vector(
    const PatchSet& ps, const std::map<std::string, double>& voltages) {
  // Every electrode present in the mesh must be assigned a voltage.
  std::vector<double> per_label(ps.mesh.electrode_names.size());
  for (std::size_t e = 0; e < ps.mesh.electrode_names.size(); ++e) {
    auto it = voltages.find(ps.mesh.electrode_names[e]);
    if (it == voltages.end())
      throw ParamError("voltages", "no voltage assigned to electrode " +
                                       ps.mesh.electrode_names[e]);
    per_label[e] = it->second;
  }
  Eigen::VectorXd v(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i)
    v[i] = per_label[ps.electrode[i]];
  return v;
}

inline DirichletSolution solve_dirichlet(
    const BemOperator& op, const std::map<std::string, double>& voltages) {
  DirichletSolution sol;
  sol.patches = op.patches_ptr();
  sol.boundary_voltages = voltages;
  const Eigen::VectorXd v = electrode_voltage_vector(op.patches(), voltages);
  sol.sigma = op.solve_raw(v);
  sol.residual_max = op.residual_max(sol.sigma, v);
  return sol;
}

// Unit voltage on a single patch, all other surfaces grounded.
inline DirichletSolution solve_single_patch(const BemOperator& op,
                                            std::size_t patch) {
  DirichletSolution sol;
  sol.patches = op.patches_ptr();
  Eigen::VectorXd v = Eigen::VectorXd::Zero(op.size());
  v[patch] = 1.0;
  sol.sigma = op.solve_raw(v);
  sol.residual_max = op.residual_max(sol.sigma, v);
  return sol;
}

// ---------------------------------------------------------------------------
// Off-surface evaluation. The field is the exact gradient of the quadrature
// representation, never a finite difference of the potential.

namespace detail {
template <typename Kernel>
auto eval_sum(const PatchSet& ps, const Eigen::VectorXd& sigma, const Vec3& x,
              EvalDiag* diag, Kernel&& kernel) {
  const std::size_t n = ps.size();
  using Out = decltype(kernel(std::size_t{0}));
  std::vector<Out> contrib(n);
  std::vector<double> closeness(n);
  parallel_for(n, [&](std::size_t j) {
    contrib[j] = kernel(j);
    closeness[j] = (x - ps.centroid[j]).norm() / ps.diameter[j];
  });
  (void)sigma;
  if (diag) {
    for (std::size_t j = 0; j < n; ++j) {
      const double dist = closeness[j] * ps.diameter[j];
      if (dist < diag->min_distance) {
        diag->min_distance = dist;
        diag->local_size = ps.diameter[j];
      }
      if (closeness[j] < 0.1) diag->too_close = true;
    }
  }
  if constexpr (std::is_same_v<Out, double>) {
    return pairwise_sum(contrib);
  } else {
    // Component-wise pairwise reduction keeps determinism for vectors.
    Out total = Out::Zero();
    std::vector<double> comp(n);
    for (int c = 0; c < total.size(); ++c) {
      for (std::size_t j = 0; j < n; ++j)
        comp[j] = contrib[j](static_cast<Eigen::Index>(c));
      total(static_cast<Eigen::Index>(c)) = pairwise_sum(comp);
    }
    return total;
  }
}
}  // namespace detail

inline double potential_at(const DirichletSolution& sol, const Vec3& x,
                           EvalDiag* diag = nullptr) {
  const PatchSet& ps = *sol.patches;
  const double pref = 1.0 / (4.0 * constants::pi *
                             constants::vacuum_permittivity);
  return detail::eval_sum(ps, sol.sigma, x, diag, [&](std::size_t j) {
    const auto t = ps.mesh.triangle(j);
    return pref * sol.sigma[j] *
           panel::potential_integral(x, t[0], t[1], t[2], ps.centroid[j],
                                     ps.area[j], ps.diameter[j]);
  });
}

inline Vec3 field_at(const DirichletSolution& sol, const Vec3& x,
                     EvalDiag* diag = nullptr) {
  const PatchSet& ps = *sol.patches;
  const double pref = 1.0 / (4.0 * constants::pi *
                             constants::vacuum_permittivity);
  return detail::eval_sum(ps, sol.sigma, x, diag, [&](std::size_t j) {
    const auto t = ps.mesh.triangle(j);
    return Vec3(pref * sol.sigma[j] *
                panel::field_integral(x, t[0], t[1], t[2], ps.centroid[j],
                                      ps.area[j], ps.diameter[j]));
  });
}

inline Mat3 field_jacobian_at(const DirichletSolution& sol, const Vec3& x,
                              EvalDiag* diag = nullptr) {
  const PatchSet& ps = *sol.patches;
  const double pref = 1.0 / (4.0 * constants::pi *
                             constants::vacuum_permittivity);
  const std::size_t n = ps.size();
  std::vector<Mat3> contrib(n);
  parallel_for(n, [&](std::size_t j) {
    const auto t = ps.mesh.triangle(j);
    contrib[j] = pref * sol.sigma[j] *
                 panel::jacobian_integral(x, t[0], t[1], t[2], ps.centroid[j],
                                          ps.area[j], ps.diameter[j]);
  });
  (void)diag;
  Mat3 total = Mat3::Zero();
  std::vector<double> comp(n);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      for (std::size_t j = 0; j < n; ++j) comp[j] = contrib[j](r, c);
      total(r, c) = pairwise_sum(comp);
    }
  return total;
}

// ---------------------------------------------------------------------------
// Patch-to-ion couplings.

// One solve per patch: 1 V on the patch, everything else grounded.
inline Vec3 patch_coupling_direct(const BemOperator& op, std::size_t patch,
                                  const Vec3& ion) {
  const DirichletSolution sol = solve_single_patch(op, patch);
  return field_at(sol, ion);
}

namespace detail {
// Incident potential of the +/- unit-charge pair realizing the dipole;
// difference computed in a cancellation-safe form.
inline Eigen::VectorXd dipole_pair_rhs(const PatchSet& ps, const Vec3& ion,
                                       const Vec3& k_unit, double sep) {
  const double pref = 1.0 / (4.0 * constants::pi *
                             constants::vacuum_permittivity);
  const Vec3 p_plus = ion + 0.5 * sep * k_unit;
  const Vec3 p_minus = ion - 0.5 * sep * k_unit;
  Eigen::VectorXd rhs(ps.size());
  parallel_for(ps.size(), [&](std::size_t i) {
    const Vec3 dp = ps.centroid[i] - p_plus;
    const Vec3 dm = ps.centroid[i] - p_minus;
    const double rp = dp.norm(), rm = dm.norm();
    // 1/rp - 1/rm = (rm^2 - rp^2) / (rp rm (rm + rp))
    const double diff_sq = (sep * k_unit).dot(dm + dp);
    rhs[i] = -pref * diff_sq / (rp * rm * (rm + rp));
  });
  return rhs;
}
}  // namespace detail

// Reciprocity route: a unit dipole along k at the ion with all conductors
// grounded; the induced charge on each patch is its coupling. One solve
// yields every patch at once.
inline PatchCouplings patch_couplings_adjoint(const BemOperator& op,
                                              const Vec3& ion,
                                              const Vec3& k) {
  const PatchSet& ps = op.patches();
  const Vec3 k_unit = k.normalized();
  const double scale = min_point_mesh_distance(ion, ps.mesh);
  if (!(scale > 0))
    throw NumericalError("dipole source lies on an electrode surface");
  const double sep = 1e-4 * scale;

  PatchCouplings out;
  out.direction = k_unit;
  out.method = PatchCouplings::Method::adjoint;
  const Eigen::VectorXd rhs = detail::dipole_pair_rhs(ps, ion, k_unit, sep);
  const Eigen::VectorXd sigma = op.solve_raw(rhs);
  out.c.resize(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i)
    out.c[i] = ps.area[i] * sigma[i] / sep;
  return out;
}

// Couplings along the three canonical axes, as an N x 3 matrix. Couplings
// for any direction k follow by linearity: c_k = C * k.
inline Eigen::Matrix<double, Eigen::Dynamic, 3> couplings_canonical(
    const BemOperator& op, const Vec3& ion) {
  Eigen::Matrix<double, Eigen::Dynamic, 3> C(op.size(), 3);
  for (int axis = 0; axis < 3; ++axis) {
    const PatchCouplings pc =
        patch_couplings_adjoint(op, ion, Vec3::Unit(axis));
    C.col(axis) = pc.c;
  }
  return C;
}

// ---------------------------------------------------------------------------
// Influence-matrix debug dump: uint64 dimension, then row-major doubles.

inline void write_matrix(const BemOperator& op, const std::string& path) {
  const Eigen::MatrixXd& M = op.matrix();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open for writing: " + path);
  const std::uint64_t n = static_cast<std::uint64_t>(M.rows());
  os.write(reinterpret_cast<const char*>(&n), 8);
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < n; ++j) {
      const double x = M(i, j);
      os.write(reinterpret_cast<const char*>(&x), 8);
    }
  if (!os) throw ParseError("write failed: " + path);
}

inline Eigen::MatrixXd read_matrix(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open: " + path);
  std::uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), 8);
  if (!is) throw ParseError(path + ": truncated matrix header");
  Eigen::MatrixXd M(n, n);
  for (std::uint64_t i = 0; i < n; ++i)
    for (std::uint64_t j = 0; j < n; ++j) {
      double x;
      is.read(reinterpret_cast<char*>(&x), 8);
      if (!is) throw ParseError(path + ": truncated matrix data");
      M(i, j) = x;
    }
  return M;
}

}  // namespace trapheat
