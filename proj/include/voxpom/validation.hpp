#pragma once

// Compares a frame solution against the planes-of-motion prediction for the
// same actuator: sign pattern, out-of-plane leakage and dissipation.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "voxpom/error.hpp"
#include "voxpom/lattice_fea.hpp"
#include "voxpom/pom.hpp"

namespace voxpom {

/// Dissipation reported in the literature for the 4x4x1 actuation test.
inline constexpr double kReferenceDissipation = 0.049;

struct ValidationReport {
  fea::Plane plane;
  NodeKey control;
  double pom_q_mm = 0.0;
  std::size_t active_nodes = 0;
  std::size_t sign_matches = 0;
  double sign_agreement = 0.0;
  double max_in_plane_mm = 0.0;
  double max_out_of_plane_mm = 0.0;
  double out_of_plane_ratio = 0.0;
  double dissipation = 0.0;
};

/// Plane activated by an actuator between two nodes of the same type driven
/// along `axis`: its normal is the axis orthogonal to both.
inline fea::Plane actuated_plane(const fea::Actuator& act) {
  const int t = act.a.type();
  if (act.b.type() != t) throw InvalidArgument("actuator nodes must be of the same type");
  if (t == act.axis) throw InvalidArgument("actuator axis is normal to the face of its nodes");
  const int normal = 3 - t - act.axis;
  if (act.a[normal] != act.b[normal]) throw InvalidArgument("actuator nodes are not in a common plane of motion");
  return {normal, act.a[normal]};
}

/// POM displacements of every plane member for the scenario's first actuator,
/// scaled so that the actuator extension matches.
inline std::vector<std::pair<NodeKey, Vec3>> pom_prediction(const Lattice& lattice, const fea::Actuator& act,
                                                            double* q_out = nullptr) {
  const auto plane = actuated_plane(act);
  const ControlNode control = make_control(lattice, act.a, plane.normal);
  std::vector<EndEffector> effectors;
  const auto members = plane_members(lattice, control);
  for (const auto& k : members) effectors.push_back(make_effector(lattice, k));
  const PomModel model({control}, effectors);

  Eigen::VectorXd unit(1);
  unit[0] = 1.0;
  const auto ia = static_cast<std::size_t>(std::find(members.begin(), members.end(), act.a) - members.begin());
  const auto ib = static_cast<std::size_t>(std::find(members.begin(), members.end(), act.b) - members.begin());
  const auto x1 = model.forward(unit);
  const double gain = x1.at(ib)[act.axis] - x1.at(ia)[act.axis];
  if (gain == 0.0) throw InvalidArgument("actuator pair does not move apart under the planes-of-motion model");
  Eigen::VectorXd q(1);
  q[0] = act.displacement_mm / gain;
  if (q_out) *q_out = q[0];
  const auto x = model.forward(q);
  std::vector<std::pair<NodeKey, Vec3>> out;
  for (std::size_t j = 0; j < members.size(); ++j) out.emplace_back(members[j], x[j]);
  return out;
}

inline ValidationReport validate(const Lattice& lattice, const fea::LatticeScenario& scenario,
                                 const fea::DisplacementField& field) {
  if (scenario.actuators.empty()) throw InvalidArgument("scenario has no actuator");
  const auto& act = scenario.actuators.front();
  ValidationReport rep;
  rep.plane = actuated_plane(act);
  rep.control = act.a;
  const auto predicted = pom_prediction(lattice, act, &rep.pom_q_mm);

  std::array<std::vector<fea::NodeSign>, 3> signs;
  for (int c = 0; c < 3; ++c) {
    if (c != rep.plane.normal) signs[static_cast<std::size_t>(c)] = fea::pattern_signs(field, rep.plane, c);
  }
  for (std::size_t j = 0; j < predicted.size(); ++j) {
    const Vec3& p = predicted[j].second;
    if (p.isZero(0.0)) continue;
    ++rep.active_nodes;
    bool match = true;
    for (int c = 0; c < 3; ++c) {
      if (c == rep.plane.normal || p[c] == 0.0) continue;
      const auto& row = signs[static_cast<std::size_t>(c)];
      auto it = std::find_if(row.begin(), row.end(), [&](const fea::NodeSign& s) { return s.key == predicted[j].first; });
      const int want = p[c] > 0 ? 1 : -1;
      if (it == row.end() || it->sign != want) match = false;
    }
    if (match) ++rep.sign_matches;
  }
  rep.sign_agreement =
      rep.active_nodes ? static_cast<double>(rep.sign_matches) / static_cast<double>(rep.active_nodes) : 0.0;

  for (std::size_t i = 0; i < field.size(); ++i) {
    const double mag = field.translation_mm[i].norm();
    if (rep.plane.contains(field.nodes[i])) {
      rep.max_in_plane_mm = std::max(rep.max_in_plane_mm, mag);
    } else {
      rep.max_out_of_plane_mm = std::max(rep.max_out_of_plane_mm, mag);
    }
  }
  rep.out_of_plane_ratio = rep.max_in_plane_mm > 0 ? rep.max_out_of_plane_mm / rep.max_in_plane_mm : 0.0;
  rep.dissipation = fea::dissipation(field, rep.plane, rep.control);
  return rep;
}

}  // namespace voxpom
