#pragma once

// Linear 3D frame finite elements (Euler-Bernoulli, 6 DOF per node) used as the
// reference solver for voxel lattices. Fixed DOFs are eliminated; actuator and
// anchor constraints are enforced with Lagrange multipliers.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "voxpom/error.hpp"
#include "voxpom/lattice.hpp"

namespace voxpom::fea {

inline constexpr int kDofPerNode = 6;
inline constexpr double kPi = 3.14159265358979323846;

using Matrix12 = Eigen::Matrix<double, 12, 12>;
using SparseMatrix = Eigen::SparseMatrix<double>;

enum Dof : int { kUx = 0, kUy, kUz, kRx, kRy, kRz };

inline const char* dof_name(int dof) {
  static constexpr std::array<const char*, 6> names{"ux", "uy", "uz", "rx", "ry", "rz"};
  return (dof >= 0 && dof < 6) ? names[static_cast<std::size_t>(dof)] : "?";
}

inline std::optional<int> parse_dof(const std::string& s) {
  for (int d = 0; d < kDofPerNode; ++d) {
    if (s == dof_name(d)) return d;
  }
  return std::nullopt;
}

/// Section and material properties in consistent units (SI for lattices).
/// The default is a 2 mm x 1 mm strip (E = 2 GPa, nu = 0.35) whose wide side
/// lies in the plane of its voxel square: Iy is the in-square bending moment,
/// Iz the out-of-square one.
struct Material {
  double E = 2.0e9;
  double G = 2.0e9 / (2.0 * 1.35);
  double A = 2.0e-6;
  double Iy = 1e-3 * 8e-9 / 12.0;
  double Iz = 2e-3 * 1e-9 / 12.0;
  double J = rectangular_torsion(2e-3, 1e-3);

  /// Solid circular section of radius r with Poisson ratio nu.
  static Material circular(double E, double nu, double r) {
    Material m;
    m.E = E;
    m.G = E / (2.0 * (1.0 + nu));
    m.A = kPi * r * r;
    m.Iy = m.Iz = kPi * r * r * r * r / 4.0;
    m.J = kPi * r * r * r * r / 2.0;
    return m;
  }

  /// Rectangular strip: `width` along local z (in the square plane), `thickness`
  /// along local y (the square normal).
  static Material strip(double E, double nu, double width, double thickness) {
    Material m;
    m.E = E;
    m.G = E / (2.0 * (1.0 + nu));
    m.A = width * thickness;
    m.Iy = thickness * width * width * width / 12.0;
    m.Iz = width * thickness * thickness * thickness / 12.0;
    m.J = rectangular_torsion(width, thickness);
    return m;
  }

  /// Saint-Venant torsion constant of a solid rectangle (Roark's approximation).
  static constexpr double rectangular_torsion(double w, double t) {
    const double a = (w > t ? w : t) / 2.0;
    const double b = (w > t ? t : w) / 2.0;
    const double r4 = (b / a) * (b / a) * (b / a) * (b / a);
    return a * b * b * b * (16.0 / 3.0 - 3.36 * (b / a) * (1.0 - r4 / 12.0));
  }

  void validate() const {
    for (double v : {E, G, A, Iy, Iz, J}) {
      if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("material properties must be strictly positive");
    }
  }
};

/// Stiffness in the element frame: local x along the beam, DOFs
/// [u1 v1 w1 rx1 ry1 rz1 u2 v2 w2 rx2 ry2 rz2].
inline Matrix12 local_stiffness(double L, const Material& m) {
  if (!(L > 0.0)) throw InvalidArgument("degenerate beam of zero length");
  Matrix12 k = Matrix12::Zero();
  const double L2 = L * L;
  const double L3 = L2 * L;

  const double ea = m.E * m.A / L;
  k(0, 0) = k(6, 6) = ea;
  k(0, 6) = k(6, 0) = -ea;

  const double gj = m.G * m.J / L;
  k(3, 3) = k(9, 9) = gj;
  k(3, 9) = k(9, 3) = -gj;

  // bending in the local x-y plane (about z)
  const double ez = m.E * m.Iz;
  k(1, 1) = k(7, 7) = 12 * ez / L3;
  k(1, 7) = k(7, 1) = -12 * ez / L3;
  k(1, 5) = k(5, 1) = k(1, 11) = k(11, 1) = 6 * ez / L2;
  k(5, 7) = k(7, 5) = k(7, 11) = k(11, 7) = -6 * ez / L2;
  k(5, 5) = k(11, 11) = 4 * ez / L;
  k(5, 11) = k(11, 5) = 2 * ez / L;

  // bending in the local x-z plane (about y)
  const double ey = m.E * m.Iy;
  k(2, 2) = k(8, 8) = 12 * ey / L3;
  k(2, 8) = k(8, 2) = -12 * ey / L3;
  k(2, 4) = k(4, 2) = k(2, 10) = k(10, 2) = -6 * ey / L2;
  k(4, 8) = k(8, 4) = k(8, 10) = k(10, 8) = 6 * ey / L2;
  k(4, 4) = k(10, 10) = 4 * ey / L;
  k(4, 10) = k(10, 4) = 2 * ey / L;
  return k;
}

/// Global axis least aligned with `axis` (first on ties).
inline Vec3 default_reference(const Vec3& axis) {
  int best = 0;
  for (int a = 1; a < 3; ++a) {
    if (std::abs(axis[a]) < std::abs(axis[best])) best = a;
  }
  return Vec3::Unit(best);
}

/// Rows are the element's local x, y, z axes in global coordinates. Local y is
/// the component of `reference` orthogonal to the beam axis.
inline Eigen::Matrix3d element_rotation(const Vec3& a, const Vec3& b, const Vec3& reference) {
  const Vec3 d = b - a;
  const double L = d.norm();
  if (!(L > 0.0)) throw InvalidArgument("degenerate beam of zero length");
  const Vec3 x = d / L;
  Vec3 y = reference - reference.dot(x) * x;
  if (y.norm() < 1e-9 * reference.norm()) throw InvalidArgument("beam reference vector is parallel to the beam");
  y.normalize();
  const Vec3 z = x.cross(y);
  Eigen::Matrix3d r;
  r.row(0) = x;
  r.row(1) = y;
  r.row(2) = z;
  return r;
}

inline Matrix12 block_rotation(const Eigen::Matrix3d& r) {
  Matrix12 t = Matrix12::Zero();
  for (int i = 0; i < 4; ++i) t.block<3, 3>(3 * i, 3 * i) = r;
  return t;
}

/// Global-frame 12x12 stiffness of the beam a-b.
inline Matrix12 element_stiffness(const Vec3& a, const Vec3& b, const Vec3& reference, const Material& m) {
  const Matrix12 t = block_rotation(element_rotation(a, b, reference));
  return t.transpose() * local_stiffness((b - a).norm(), m) * t;
}

inline Matrix12 element_stiffness(const Vec3& a, const Vec3& b, const Material& m) {
  return element_stiffness(a, b, default_reference((b - a).normalized()), m);
}

struct Element {
  std::size_t a = 0;
  std::size_t b = 0;
  /// Direction of the section's local y axis; zero picks default_reference().
  Vec3 reference = Vec3::Zero();
};

struct FixedDof {
  std::size_t node = 0;
  int dof = 0;
  double value = 0.0;
};

/// (u_b - u_a) . direction = displacement
struct RelativeConstraint {
  std::size_t a = 0;
  std::size_t b = 0;
  Vec3 direction = Vec3::UnitX();
  double displacement = 0.0;
};

/// Mean translation of the listed nodes is held at zero.
struct Anchor {
  std::vector<std::size_t> nodes;
};

struct NodalLoad {
  std::size_t node = 0;
  Vec3 force = Vec3::Zero();
  Vec3 moment = Vec3::Zero();
};

struct FrameModel {
  std::vector<Vec3> positions;
  std::vector<Element> elements;
  Material material;
  std::vector<FixedDof> fixed;
  std::vector<RelativeConstraint> relative;
  std::vector<Anchor> anchors;
  std::vector<NodalLoad> loads;

  std::size_t num_dofs() const noexcept { return kDofPerNode * positions.size(); }
};

inline SparseMatrix assemble(const FrameModel& model) {
  model.material.validate();
  const auto n = static_cast<Eigen::Index>(model.num_dofs());
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(model.elements.size() * 144);
  for (const auto& e : model.elements) {
    if (e.a >= model.positions.size() || e.b >= model.positions.size() || e.a == e.b) {
      throw InvalidArgument("element references invalid nodes");
    }
    const Vec3& pa = model.positions[e.a];
    const Vec3& pb = model.positions[e.b];
    const Matrix12 ke = e.reference.isZero(0.0) ? element_stiffness(pa, pb, model.material)
                                                : element_stiffness(pa, pb, e.reference, model.material);
    const std::array<std::size_t, 2> base{kDofPerNode * e.a, kDofPerNode * e.b};
    for (int i = 0; i < 12; ++i) {
      const auto gi = static_cast<Eigen::Index>(base[static_cast<std::size_t>(i / 6)] + static_cast<std::size_t>(i % 6));
      for (int j = 0; j < 12; ++j) {
        const auto gj = static_cast<Eigen::Index>(base[static_cast<std::size_t>(j / 6)] + static_cast<std::size_t>(j % 6));
        triplets.emplace_back(gi, gj, ke(i, j));
      }
    }
  }
  SparseMatrix k(n, n);
  k.setFromTriplets(triplets.begin(), triplets.end());
  return k;
}

struct FrameSolution {
  Eigen::VectorXd u;          // all DOFs, model units
  Eigen::VectorXd reactions;  // K u - f
  Eigen::VectorXd lambda;     // multipliers of the independent constraint rows
  Eigen::VectorXd g;          // right-hand side of those rows
  double residual = 0.0;      // relative residual of the KKT system
};

namespace detail {

struct ConstraintRows {
  // Each row: (dof, coefficient) pairs plus a right-hand side.
  std::vector<std::vector<std::pair<std::size_t, double>>> coeffs;
  std::vector<double> rhs;
  std::vector<std::string> labels;
};

inline ConstraintRows constraint_rows(const FrameModel& model) {
  ConstraintRows rows;
  const auto nn = model.positions.size();
  for (const auto& r : model.relative) {
    if (r.a >= nn || r.b >= nn || r.a == r.b) throw InvalidArgument("actuator must join two distinct nodes");
    const double norm = r.direction.norm();
    if (!(norm > 0.0)) throw InvalidArgument("actuator direction must be nonzero");
    const Vec3 dir = r.direction / norm;
    std::vector<std::pair<std::size_t, double>> c;
    for (int k = 0; k < 3; ++k) {
      if (dir[k] == 0.0) continue;
      c.emplace_back(kDofPerNode * r.b + static_cast<std::size_t>(k), dir[k]);
      c.emplace_back(kDofPerNode * r.a + static_cast<std::size_t>(k), -dir[k]);
    }
    rows.coeffs.push_back(std::move(c));
    rows.rhs.push_back(r.displacement);
    rows.labels.push_back("actuator " + std::to_string(r.a) + "-" + std::to_string(r.b));
  }
  for (const auto& an : model.anchors) {
    if (an.nodes.empty()) throw InvalidArgument("anchor without nodes");
    const double w = 1.0 / static_cast<double>(an.nodes.size());
    for (int k = 0; k < 3; ++k) {
      std::vector<std::pair<std::size_t, double>> c;
      for (auto node : an.nodes) {
        if (node >= nn) throw InvalidArgument("anchor references invalid node");
        c.emplace_back(kDofPerNode * node + static_cast<std::size_t>(k), w);
      }
      rows.coeffs.push_back(std::move(c));
      rows.rhs.push_back(0.0);
      rows.labels.push_back(std::string("anchor ") + dof_name(k));
    }
  }
  return rows;
}

inline std::vector<std::size_t> components(const FrameModel& model, std::size_t& count) {
  const auto nn = model.positions.size();
  std::vector<std::size_t> parent(nn);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : model.elements) parent[find(e.a)] = find(e.b);
  std::map<std::size_t, std::size_t> label;
  std::vector<std::size_t> comp(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    auto root = find(i);
    auto [it, inserted] = label.emplace(root, label.size());
    comp[i] = it->second;
  }
  count = label.size();
  return comp;
}

inline std::string describe_mode(const Eigen::VectorXd& v) {
  static constexpr std::array<const char*, 6> names{"translation x", "translation y", "translation z",
                                                    "rotation x",    "rotation y",    "rotation z"};
  std::string out;
  const auto comps = v.size() / 6;
  for (Eigen::Index c = 0; c < comps; ++c) {
    for (int k = 0; k < 6; ++k) {
      const double w = v[6 * c + k];
      if (std::abs(w) < 1e-6) continue;
      if (!out.empty()) out += " + ";
      out += std::to_string(w).substr(0, 6) + "*" + names[static_cast<std::size_t>(k)];
      if (comps > 1) out += " of component " + std::to_string(c);
    }
  }
  return out;
}

// Every connected component has six rigid-body modes; the fixed DOFs and
// constraint rows together must restrain all of them.
inline void check_rigid_modes(const FrameModel& model, const ConstraintRows& rows) {
  std::size_t ncomp = 0;
  const auto comp = components(model, ncomp);
  const auto nn = model.positions.size();
  std::vector<Vec3> centroid(ncomp, Vec3::Zero());
  std::vector<double> count(ncomp, 0.0);
  for (std::size_t i = 0; i < nn; ++i) {
    centroid[comp[i]] += model.positions[i];
    count[comp[i]] += 1.0;
  }
  for (std::size_t c = 0; c < ncomp; ++c) centroid[c] /= count[c];

  // value of mode (component c, kind k) at global dof
  auto mode_value = [&](std::size_t dof, std::size_t c, int k) -> double {
    const std::size_t node = dof / kDofPerNode;
    const int local = static_cast<int>(dof % kDofPerNode);
    if (comp[node] != c) return 0.0;
    if (k < 3) return local == k ? 1.0 : 0.0;
    const Vec3 w = Vec3::Unit(k - 3);
    if (local >= 3) return local - 3 == k - 3 ? 1.0 : 0.0;
    return w.cross(model.positions[node] - centroid[c])[local];
  };

  const auto nrows = model.fixed.size() + rows.coeffs.size();
  const auto ncols = 6 * ncomp;
  if (nrows < 6) {
    throw SingularSystemError("at least 6 independent constraints are required, got " + std::to_string(nrows));
  }
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(ncols));
  Eigen::Index r = 0;
  for (const auto& f : model.fixed) {
    const std::size_t dof = kDofPerNode * f.node + static_cast<std::size_t>(f.dof);
    for (std::size_t c = 0; c < ncomp; ++c)
      for (int k = 0; k < 6; ++k) b(r, static_cast<Eigen::Index>(6 * c) + k) = mode_value(dof, c, k);
    ++r;
  }
  for (const auto& row : rows.coeffs) {
    for (const auto& [dof, w] : row)
      for (std::size_t c = 0; c < ncomp; ++c)
        for (int k = 0; k < 6; ++k) b(r, static_cast<Eigen::Index>(6 * c) + k) += w * mode_value(dof, c, k);
    ++r;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s[0] : 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(ncols); ++i) {
    const double si = i < s.size() ? s[i] : 0.0;
    if (si <= 1e-10 * std::max(smax, 1.0)) {
      throw SingularSystemError("unrestrained rigid-body direction: " + describe_mode(svd.matrixV().col(i)));
    }
  }
}

}  // namespace detail

/// Equilibrium displacements of the constrained frame.
inline FrameSolution solve(const FrameModel& model) {
  model.material.validate();
  const std::size_t n = model.num_dofs();
  const auto nn = model.positions.size();

  std::vector<std::optional<double>> prescribed(n);
  for (const auto& f : model.fixed) {
    if (f.node >= nn || f.dof < 0 || f.dof >= kDofPerNode) throw InvalidArgument("fixed DOF out of range");
    const std::size_t dof = kDofPerNode * f.node + static_cast<std::size_t>(f.dof);
    if (prescribed[dof] && *prescribed[dof] != f.value) {
      throw InconsistentError("DOF fixed to two different values", std::abs(*prescribed[dof] - f.value));
    }
    prescribed[dof] = f.value;
  }

  const auto rows = detail::constraint_rows(model);
  detail::check_rigid_modes(model, rows);

  std::vector<Eigen::Index> free_index(n, -1);
  Eigen::Index nf = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!prescribed[i]) free_index[i] = nf++;
  }

  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (const auto& l : model.loads) {
    if (l.node >= nn) throw InvalidArgument("load references invalid node");
    const auto base = static_cast<Eigen::Index>(kDofPerNode * l.node);
    f.segment<3>(base) += l.force;
    f.segment<3>(base + 3) += l.moment;
  }
  Eigen::VectorXd uc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (prescribed[i]) uc[static_cast<Eigen::Index>(i)] = *prescribed[i];
  }

  const SparseMatrix k = assemble(model);

  // Constraint rows restricted to free DOFs; prescribed contributions move to the rhs.
  const auto m_all = static_cast<Eigen::Index>(rows.coeffs.size());
  Eigen::MatrixXd cf = Eigen::MatrixXd::Zero(m_all, nf);
  Eigen::VectorXd g(m_all);
  for (Eigen::Index r = 0; r < m_all; ++r) {
    double rhs = rows.rhs[static_cast<std::size_t>(r)];
    for (const auto& [dof, w] : rows.coeffs[static_cast<std::size_t>(r)]) {
      if (prescribed[dof]) {
        rhs -= w * *prescribed[dof];
      } else {
        cf(r, free_index[dof]) += w;
      }
    }
    g[r] = rhs;
  }

  // Drop linearly dependent rows, rejecting inconsistent ones.
  std::vector<Eigen::Index> keep;
  if (m_all > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(cf.transpose());
    qr.setThreshold(1e-12);
    const auto rank = qr.rank();
    for (Eigen::Index i = 0; i < rank; ++i) keep.push_back(qr.colsPermutation().indices()[i]);
    std::sort(keep.begin(), keep.end());
    if (rank < m_all) {
      Eigen::MatrixXd ck(static_cast<Eigen::Index>(keep.size()), nf);
      Eigen::VectorXd gk(static_cast<Eigen::Index>(keep.size()));
      for (std::size_t i = 0; i < keep.size(); ++i) {
        ck.row(static_cast<Eigen::Index>(i)) = cf.row(keep[i]);
        gk[static_cast<Eigen::Index>(i)] = g[keep[i]];
      }
      // any x satisfying the kept rows must satisfy the dropped ones as well
      const Eigen::VectorXd x0 = ck.transpose() * (ck * ck.transpose()).ldlt().solve(gk);
      const double res = (cf * x0 - g).norm();
      if (res > 1e-9 * std::max(1.0, g.norm())) throw InconsistentError("over-constrained system", res);
    }
  }
  const auto m = static_cast<Eigen::Index>(keep.size());

  // KKT matrix [K_ff C^T; C 0]
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(k.nonZeros()) + static_cast<std::size_t>(2 * m * 8));
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nf + m);
  const Eigen::VectorXd kuc = k * uc;
  for (std::size_t i = 0; i < n; ++i) {
    if (free_index[i] >= 0) rhs[free_index[i]] = f[static_cast<Eigen::Index>(i)] - kuc[static_cast<Eigen::Index>(i)];
  }
  for (Eigen::Index col = 0; col < k.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
      const auto fi = free_index[static_cast<std::size_t>(it.row())];
      const auto fj = free_index[static_cast<std::size_t>(it.col())];
      if (fi >= 0 && fj >= 0) trip.emplace_back(fi, fj, it.value());
    }
  }
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto src = keep[static_cast<std::size_t>(r)];
    for (Eigen::Index j = 0; j < nf; ++j) {
      const double w = cf(src, j);
      if (w == 0.0) continue;
      trip.emplace_back(nf + r, j, w);
      trip.emplace_back(j, nf + r, w);
    }
    rhs[nf + r] = g[src];
  }
  SparseMatrix kkt(nf + m, nf + m);
  kkt.setFromTriplets(trip.begin(), trip.end());
  kkt.makeCompressed();

  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(kkt);
  if (lu.info() != Eigen::Success) {
    throw SingularSystemError("frame system is singular: " + lu.lastErrorMessage());
  }
  const Eigen::VectorXd x = lu.solve(rhs);
  const double rel = (kkt * x - rhs).norm() / std::max(rhs.norm(), 1e-300);
  if (!x.allFinite() || rel > 1e-8) {
    throw SingularSystemError("frame solve did not converge (relative residual " + std::to_string(rel) + ")");
  }

  FrameSolution sol;
  sol.u = uc;
  for (std::size_t i = 0; i < n; ++i) {
    if (free_index[i] >= 0) sol.u[static_cast<Eigen::Index>(i)] = x[free_index[i]];
  }
  sol.lambda = x.tail(m);
  sol.g.resize(m);
  for (Eigen::Index r = 0; r < m; ++r) sol.g[r] = g[keep[static_cast<std::size_t>(r)]];
  sol.reactions = k * sol.u - f;
  sol.residual = rel;
  return sol;
}

}  // namespace voxpom::fea
