#pragma once

// Planes-of-motion kinematics: a control node displaced inside the plane whose
// normal is `d` rotates every voxel square of that plane, alternating the sense
// of rotation from voxel to voxel. The displacement of end effector j is
//
//   x_j = sum_i a(d_i, n_j) * c_ij * q_i
//
// and the same linear map is inverted (masked least squares) for IK.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "voxpom/error.hpp"
#include "voxpom/lattice.hpp"

namespace voxpom {

using Vec3i = std::array<int, 3>;

namespace detail {
// kActuation[d][row][n]
inline constexpr std::array<std::array<std::array<int, 6>, 3>, 3> kActuation{{
    {{{0, 0, 0, 0, 0, 0}, {0, 0, 1, 0, 0, -1}, {0, -1, 0, 0, 1, 0}}},
    {{{0, 0, 1, 0, 0, -1}, {0, 0, 0, 0, 0, 0}, {-1, 0, 0, 1, 0, 0}}},
    {{{0, -1, 0, 0, 1, 0}, {1, 0, 0, -1, 0, 0}, {0, 0, 0, 0, 0, 0}}},
}};
}  // namespace detail

inline void require_axis(int d) {
  if (d < 0 || d > 2) throw InvalidArgument("axis " + std::to_string(d) + " outside 0..2");
}

/// Column n of the actuation matrix for plane normal d.
inline Vec3i actuation_column(int d, int n) {
  require_axis(d);
  require_node_index(n);
  const auto& m = detail::kActuation[static_cast<std::size_t>(d)];
  const auto c = static_cast<std::size_t>(n);
  return {m[0][c], m[1][c], m[2][c]};
}

inline Vec3 actuation_vector(int d, int n) {
  const Vec3i c = actuation_column(d, n);
  return {static_cast<double>(c[0]), static_cast<double>(c[1]), static_cast<double>(c[2])};
}

/// A node driven by an actuator inside the plane with normal `d`.
/// q > 0 moves it along +a(d, host_index) of its canonical host.
struct ControlNode {
  NodeKey key;
  int d = 0;
  VoxelCoord host{};
  int host_index = 0;
  std::string name;

  /// Half-unit coordinate of the activated plane along its normal.
  int plane_coord() const { return key[d]; }
};

struct EndEffector {
  NodeKey key;
  VoxelCoord host{};
  int n = 0;
  std::string name;
};

inline NodeRef canonical_host(const Lattice& lattice, const NodeKey& key) {
  auto hs = hosts(key, lattice.grid());
  if (hs.empty()) throw InvalidArgument("node " + key.str() + " is not in the lattice");
  return hs.front();
}

inline ControlNode make_control(const Lattice& lattice, const NodeKey& key, int d, std::string name = {}) {
  require_axis(d);
  if (!key.valid()) throw InvalidArgument("invalid node key " + key.str());
  if (key.type() == d) {
    throw InvalidArgument("control " + key.str() + " lies on a face normal to axis " + std::to_string(d) +
                          " and is outside every plane with that normal");
  }
  const NodeRef host = canonical_host(lattice, key);
  return {key, d, host.voxel, host.node_index, std::move(name)};
}

inline ControlNode make_control(const Lattice& lattice, const NodeRef& ref, int d, std::string name = {}) {
  return make_control(lattice, canonical_node_key(ref), d, std::move(name));
}

inline EndEffector make_effector(const Lattice& lattice, const NodeKey& key, std::string name = {}) {
  const NodeRef host = canonical_host(lattice, key);
  return {key, host.voxel, host.node_index, std::move(name)};
}

inline EndEffector make_effector(const Lattice& lattice, const NodeRef& ref, std::string name = {}) {
  return make_effector(lattice, canonical_node_key(ref), std::move(name));
}

/// Lattice nodes sharing the control's plane of motion (sorted).
inline std::vector<NodeKey> plane_members(const Lattice& lattice, const ControlNode& control) {
  require_axis(control.d);
  if (control.key.type() == control.d) {
    throw InvalidArgument("control " + control.key.str() + " is not inside a plane with normal " +
                          std::to_string(control.d));
  }
  std::vector<NodeKey> out;
  for (const auto& k : lattice.nodes()) {
    if (k[control.d] == control.plane_coord()) out.push_back(k);
  }
  return out;
}

/// Checkerboard sign coupling control and effector; 0 when off-plane.
inline int connectivity(const ControlNode& control, const EndEffector& effector) {
  if (effector.key[control.d] != control.plane_coord()) return 0;
  int parity = 0;
  for (int a = 0; a < 3; ++a) {
    if (a == control.d) continue;
    const auto ai = static_cast<std::size_t>(a);
    parity += effector.host[ai] - control.host[ai];
  }
  return is_even(parity) ? 1 : -1;
}

struct DisjointPlanesReport {
  bool ok = true;
  /// Index pairs of controls sharing a plane of motion.
  std::vector<std::pair<std::size_t, std::size_t>> conflicts;
};

inline DisjointPlanesReport check_disjoint_planes(const std::vector<ControlNode>& controls) {
  DisjointPlanesReport report;
  for (std::size_t i = 0; i < controls.size(); ++i) {
    for (std::size_t j = i + 1; j < controls.size(); ++j) {
      if (controls[i].d == controls[j].d && controls[i].plane_coord() == controls[j].plane_coord()) {
        report.ok = false;
        report.conflicts.emplace_back(i, j);
      }
    }
  }
  return report;
}

/// Desired displacement of one end effector; std::nullopt components are free.
struct Target {
  std::array<std::optional<double>, 3> c{};

  static Target full(const Vec3& v) { return {{v[0], v[1], v[2]}}; }
  static Target none() { return {}; }
};

struct InverseOptions {
  double abs_tol = 1e-9;  // mm
  double rel_tol = 1e-9;  // relative to the norm of the specified components
};

struct InverseResult {
  Eigen::VectorXd q;
  double residual = 0.0;  // 2-norm over specified components, mm
};

struct ActuationSequence {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> q;

  std::size_t size() const noexcept { return times.size(); }
};

class PomModel {
 public:
  PomModel(std::vector<ControlNode> controls, std::vector<EndEffector> effectors)
      : controls_(std::move(controls)), effectors_(std::move(effectors)) {
    const auto report = check_disjoint_planes(controls_);
    if (!report.ok) {
      const auto [i, j] = report.conflicts.front();
      throw InvalidArgument("controls " + label(i) + " and " + label(j) + " share a plane of motion");
    }
    const auto m = controls_.size();
    const auto nj = effectors_.size();
    connectivity_.resize(static_cast<Eigen::Index>(nj), static_cast<Eigen::Index>(m));
    gain_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(3 * nj), static_cast<Eigen::Index>(m));
    for (std::size_t j = 0; j < nj; ++j) {
      for (std::size_t i = 0; i < m; ++i) {
        const int c = connectivity(controls_[i], effectors_[j]);
        connectivity_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = c;
        if (c == 0) continue;
        const Vec3 col = actuation_vector(controls_[i].d, effectors_[j].n) * c;
        gain_.block<3, 1>(static_cast<Eigen::Index>(3 * j), static_cast<Eigen::Index>(i)) = col;
      }
    }
  }

  const std::vector<ControlNode>& controls() const noexcept { return controls_; }
  const std::vector<EndEffector>& effectors() const noexcept { return effectors_; }
  std::size_t num_controls() const noexcept { return controls_.size(); }
  std::size_t num_effectors() const noexcept { return effectors_.size(); }

  /// J x M matrix of c_ij.
  const Eigen::MatrixXi& connectivity_matrix() const noexcept { return connectivity_; }

  /// 3J x M linear map from q to stacked effector displacements.
  const Eigen::MatrixXd& gain() const noexcept { return gain_; }

  std::vector<Vec3> forward(const Eigen::VectorXd& q) const {
    require_size(q);
    std::vector<Vec3> x(effectors_.size(), Vec3::Zero());
    for (std::size_t j = 0; j < effectors_.size(); ++j) {
      for (std::size_t i = 0; i < controls_.size(); ++i) {
        const auto ji = static_cast<Eigen::Index>(j);
        const auto ii = static_cast<Eigen::Index>(i);
        const int c = connectivity_(ji, ii);
        if (c == 0) continue;
        x[j] += actuation_vector(controls_[i].d, effectors_[j].n) * (c * q[ii]);
      }
    }
    return x;
  }

  InverseResult inverse(const std::vector<Target>& desired, const InverseOptions& opts = {}) const {
    if (desired.size() != effectors_.size()) {
      throw InvalidArgument("expected " + std::to_string(effectors_.size()) + " targets, got " +
                            std::to_string(desired.size()));
    }
    std::vector<Eigen::Index> rows;
    std::vector<double> values;
    for (std::size_t j = 0; j < desired.size(); ++j) {
      for (std::size_t a = 0; a < 3; ++a) {
        if (!desired[j].c[a]) continue;
        const double v = *desired[j].c[a];
        if (!std::isfinite(v)) throw InvalidArgument("non-finite target for " + effector_label(j));
        rows.push_back(static_cast<Eigen::Index>(3 * j + a));
        values.push_back(v);
      }
    }
    const auto m = static_cast<Eigen::Index>(controls_.size());
    const auto r = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd a(r, m);
    Eigen::VectorXd b(r);
    for (Eigen::Index k = 0; k < r; ++k) {
      a.row(k) = gain_.row(rows[static_cast<std::size_t>(k)]);
      b[k] = values[static_cast<std::size_t>(k)];
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      if (r == 0 || a.col(i).cwiseAbs().maxCoeff() == 0.0) {
        throw RankDeficientError("control " + label(static_cast<std::size_t>(i)) +
                                     " affects none of the specified components",
                                 static_cast<int>(i));
      }
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < m) {
      const auto bad = static_cast<std::size_t>(qr.colsPermutation().indices()[qr.rank()]);
      throw RankDeficientError("control " + label(bad) + " is not independently determined by the specified components",
                               static_cast<int>(bad));
    }
    InverseResult out;
    out.q = qr.solve(b);
    out.residual = (a * out.q - b).norm();
    const double tol = opts.abs_tol + opts.rel_tol * b.norm();
    if (!(out.residual <= tol)) throw InconsistentError("inconsistent effector specification", out.residual);
    return out;
  }

  std::string label(std::size_t i) const {
    const auto& c = controls_.at(i);
    return c.name.empty() ? "#" + std::to_string(i) + " " + c.key.str() : c.name;
  }

  std::string effector_label(std::size_t j) const {
    const auto& e = effectors_.at(j);
    return e.name.empty() ? "#" + std::to_string(j) + " " + e.key.str() : e.name;
  }

 private:
  void require_size(const Eigen::VectorXd& q) const {
    if (static_cast<std::size_t>(q.size()) != controls_.size()) {
      throw InvalidArgument("expected " + std::to_string(controls_.size()) + " control displacements, got " +
                            std::to_string(q.size()));
    }
  }

  std::vector<ControlNode> controls_;
  std::vector<EndEffector> effectors_;
  Eigen::MatrixXi connectivity_;
  Eigen::MatrixXd gain_;
};

}  // namespace voxpom
