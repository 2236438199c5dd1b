#pragma once

// Frame analysis of voxel lattices: scenario description in lattice terms
// (node keys, mm), conversion to a SI frame model, and the pattern and
// dissipation metrics evaluated on the resulting displacement field.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "voxpom/error.hpp"
#include "voxpom/fea.hpp"
#include "voxpom/lattice.hpp"

namespace voxpom::fea {

inline constexpr double kMmPerM = 1000.0;

struct NodeDof {
  NodeKey node;
  int dof = 0;
  double value = 0.0;  // mm for translations, rad for rotations
};

/// Linear actuator between two nodes along a global axis. Positive
/// displacement extends it: (u_b - u_a) . e_axis = displacement_mm.
struct Actuator {
  NodeKey a;
  NodeKey b;
  int axis = 0;
  double displacement_mm = 0.0;
  bool lock_rotations = true;
};

struct NodeLoad {
  NodeKey node;
  Vec3 force_n = Vec3::Zero();
  Vec3 moment_nm = Vec3::Zero();
};

struct LatticeScenario {
  Material material;
  std::vector<NodeDof> fixed;
  std::vector<Actuator> actuators;
  std::vector<std::vector<NodeKey>> anchors;
  std::vector<NodeLoad> loads;
};

/// Plane of nodes whose `normal` half-unit coordinate equals `coord`.
struct Plane {
  int normal = 2;
  int coord = 1;

  bool contains(const NodeKey& k) const { return k[normal] == coord; }
};

struct DisplacementField {
  std::vector<NodeKey> nodes;
  std::vector<Vec3> translation_mm;
  std::vector<Vec3> rotation_rad;

  std::size_t size() const noexcept { return nodes.size(); }

  std::size_t index_of(const NodeKey& key) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), key);
    if (it == nodes.end() || *it != key) throw InvalidArgument("node " + key.str() + " not in field");
    return static_cast<std::size_t>(it - nodes.begin());
  }
};

inline FrameModel to_frame_model(const Lattice& lattice, const LatticeScenario& scenario) {
  FrameModel model;
  model.material = scenario.material;
  for (const auto& k : lattice.nodes()) model.positions.push_back(lattice.position(k) / kMmPerM);
  // section y axis along the normal of the voxel square the beam belongs to
  for (const auto& b : lattice.beams()) {
    const int normal = 3 - b.a.type() - b.b.type();
    model.elements.push_back({lattice.index_of(b.a), lattice.index_of(b.b), Vec3::Unit(normal)});
  }

  for (const auto& f : scenario.fixed) {
    if (f.dof < 0 || f.dof >= kDofPerNode) throw InvalidArgument("fixed DOF out of range");
    const double scale = f.dof < 3 ? 1.0 / kMmPerM : 1.0;
    model.fixed.push_back({lattice.index_of(f.node), f.dof, f.value * scale});
  }
  for (const auto& a : scenario.actuators) {
    if (a.axis < 0 || a.axis > 2) throw InvalidArgument("actuator axis outside 0..2");
    if (a.a == a.b) throw InvalidArgument("actuator must join two distinct nodes");
    const auto ia = lattice.index_of(a.a);
    const auto ib = lattice.index_of(a.b);
    model.relative.push_back({ia, ib, Vec3::Unit(a.axis), a.displacement_mm / kMmPerM});
    if (a.lock_rotations) {
      for (auto node : {ia, ib})
        for (int r = kRx; r <= kRz; ++r) model.fixed.push_back({node, r, 0.0});
    }
  }
  for (const auto& group : scenario.anchors) {
    Anchor an;
    for (const auto& k : group) an.nodes.push_back(lattice.index_of(k));
    model.anchors.push_back(std::move(an));
  }
  for (const auto& l : scenario.loads) model.loads.push_back({lattice.index_of(l.node), l.force_n, l.moment_nm});

  // the same rotation may be locked twice by two actuators sharing a node
  std::sort(model.fixed.begin(), model.fixed.end(), [](const FixedDof& x, const FixedDof& y) {
    return std::tie(x.node, x.dof) < std::tie(y.node, y.dof);
  });
  model.fixed.erase(std::unique(model.fixed.begin(), model.fixed.end(),
                                [](const FixedDof& x, const FixedDof& y) {
                                  return x.node == y.node && x.dof == y.dof && x.value == y.value;
                                }),
                    model.fixed.end());
  return model;
}

inline DisplacementField to_field(const Lattice& lattice, const FrameSolution& sol) {
  DisplacementField field;
  field.nodes = lattice.nodes();
  for (std::size_t i = 0; i < field.nodes.size(); ++i) {
    const auto base = static_cast<Eigen::Index>(kDofPerNode * i);
    field.translation_mm.push_back(sol.u.segment<3>(base) * kMmPerM);
    field.rotation_rad.push_back(sol.u.segment<3>(base + 3));
  }
  return field;
}

inline DisplacementField solve(const Lattice& lattice, const LatticeScenario& scenario) {
  return to_field(lattice, solve(to_frame_model(lattice, scenario)));
}

/// Single actuator with rotation-locked mounts whose pair centroid is anchored;
/// the minimal symmetric support that removes all rigid-body modes.
inline LatticeScenario actuator_scenario(const NodeKey& a, const NodeKey& b, int axis, double stroke_mm,
                                         Material material = {}) {
  LatticeScenario s;
  s.material = material;
  s.actuators.push_back({a, b, axis, stroke_mm, true});
  s.anchors.push_back({a, b});
  return s;
}

/// The two x-face nodes straddling the middle of an nx*ny box along y, in the
/// layer with half-unit coordinate `layer`. Drive them along y to activate the
/// z = layer plane.
inline std::pair<NodeKey, NodeKey> central_pair(int nx, int ny, int layer = 1) {
  // x-face nodes have even hx; the closest even value to the x-center
  int hx = nx;
  if (!is_even(hx)) hx -= 1;
  int hy = ny;
  if (!is_even(hy)) hy -= 1;
  return {NodeKey{{hx, hy - 1, layer}}, NodeKey{{hx, hy + 1, layer}}};
}

struct NodeSign {
  NodeKey key;
  double value = 0.0;
  int sign = 0;
};

struct PatternOptions {
  bool subtract_mean = false;
};

/// Sign of one translation component for every in-plane node.
/// Magnitudes below 1e-12 of the plane maximum (before any mean removal) count as zero.
inline std::vector<NodeSign> pattern_signs(const DisplacementField& field, const Plane& plane, int component,
                                           const PatternOptions& opts = {}) {
  if (component < 0 || component > 2) throw InvalidArgument("component outside 0..2");
  std::vector<NodeSign> out;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (plane.contains(field.nodes[i])) out.push_back({field.nodes[i], field.translation_mm[i][component], 0});
  }
  if (out.empty()) throw InvalidArgument("plane contains no nodes");
  double raw = 0.0;
  for (const auto& s : out) raw = std::max(raw, std::abs(s.value));
  if (opts.subtract_mean) {
    double mean = 0.0;
    for (const auto& s : out) mean += s.value;
    mean /= static_cast<double>(out.size());
    for (auto& s : out) s.value -= mean;
  }
  double vmax = 0.0;
  for (const auto& s : out) vmax = std::max(vmax, std::abs(s.value));
  const double floor = 1e-12 * std::max(vmax, raw);
  for (auto& s : out) {
    if (std::abs(s.value) <= floor || vmax == 0.0) {
      s.sign = 0;
    } else {
      s.sign = s.value > 0 ? 1 : -1;
    }
  }
  return out;
}

inline Vec3 in_plane(const Vec3& v, int normal) {
  Vec3 p = v;
  p[normal] = 0.0;
  return p;
}

/// 1 - mean in-plane translation of the other in-plane nodes relative to the
/// control node's translation, clamped to [0, 1].
inline double dissipation(const DisplacementField& field, const Plane& plane, const NodeKey& control) {
  if (!plane.contains(control)) throw InvalidArgument("control " + control.str() + " is not in the plane");
  const double ref = in_plane(field.translation_mm[field.index_of(control)], plane.normal).norm();
  if (!(ref > 0.0)) throw InvalidArgument("control displacement is zero");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (!plane.contains(field.nodes[i]) || field.nodes[i] == control) continue;
    sum += in_plane(field.translation_mm[i], plane.normal).norm();
    ++count;
  }
  if (count == 0) return 0.0;
  return std::clamp(1.0 - sum / (static_cast<double>(count) * ref), 0.0, 1.0);
}

namespace detail {

inline std::string fmt_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v == 0.0 ? 0.0 : v);
  return buf;
}

// Blue (negative) - white - red (positive); t in [-1, 1].
inline std::string diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  const double w = 1.0 - std::abs(t);
  int r = 0, g = 0, b = 0;
  if (t >= 0) {
    r = 178 + static_cast<int>(std::lround(77 * w));
    g = static_cast<int>(std::lround(24 + 231 * w));
    b = static_cast<int>(std::lround(43 + 212 * w));
  } else {
    r = static_cast<int>(std::lround(33 + 222 * w));
    g = static_cast<int>(std::lround(102 + 153 * w));
    b = 172 + static_cast<int>(std::lround(83 * w));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace detail

/// SVG map of one translation component over the in-plane nodes, colored on a
/// diverging scale symmetric about zero.
inline std::string heatmap_svg(const DisplacementField& field, const Plane& plane, int component) {
  const auto signs = pattern_signs(field, plane, component);
  const int ua = plane.normal == 0 ? 1 : 0;
  const int va = plane.normal == 2 ? 1 : 2;
  int umin = 1 << 30, umax = -(1 << 30), vmin = 1 << 30, vmax = -(1 << 30);
  double amax = 0.0;
  for (const auto& s : signs) {
    umin = std::min(umin, s.key[ua]);
    umax = std::max(umax, s.key[ua]);
    vmin = std::min(vmin, s.key[va]);
    vmax = std::max(vmax, s.key[va]);
    amax = std::max(amax, std::abs(s.value));
  }
  const double cell = 24.0;
  const double margin = 30.0;
  const double width = (umax - umin) * cell + 2 * margin;
  const double height = (vmax - vmin) * cell + 2 * margin + 20;
  static constexpr std::array<char, 3> axis_names{'x', 'y', 'z'};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt_num(width) << "\" height=\""
     << detail::fmt_num(height) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  os << "<text x=\"" << margin << "\" y=\"16\" font-family=\"sans-serif\" font-size=\"12\">u"
     << axis_names[static_cast<std::size_t>(component)] << " on plane h" << axis_names[static_cast<std::size_t>(plane.normal)]
     << "=" << plane.coord << ", max |u| = " << detail::fmt_num(amax) << " mm</text>\n";
  for (const auto& s : signs) {
    const double x = margin + (s.key[ua] - umin) * cell;
    const double y = 20 + margin + (vmax - s.key[va]) * cell;
    const double t = amax > 0 ? s.value / amax : 0.0;
    os << "<circle cx=\"" << detail::fmt_num(x) << "\" cy=\"" << detail::fmt_num(y) << "\" r=\"9\" fill=\""
       << detail::diverging_color(t) << "\" stroke=\"#333333\" stroke-width=\"0.5\"><title>" << s.key.str() << " "
       << detail::fmt_num(s.value) << "</title></circle>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace voxpom::fea
