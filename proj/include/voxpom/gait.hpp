#pragma once

// Tripod-gait robot preset and the gait compiler: foot keyframes are
// interpolated per timestep, inverted through the planes-of-motion map to
// actuator displacements, and pushed forward again to predict the markers.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "voxpom/error.hpp"
#include "voxpom/lattice.hpp"
#include "voxpom/pom.hpp"

namespace voxpom::gait {

inline constexpr double kStrokeLimitMm = 5.0;
inline constexpr int kDefaultStepsPerCycle = 50;
inline constexpr std::size_t kMarkers = 4;

struct Foot {
  std::string name;
  std::size_t effector = 0;               // index into RobotConfig::model effectors
  std::array<bool, 3> constrained{};      // components driven by the gait
  bool front = false;
  Vec3 offset_mm = Vec3::Zero();          // rest offset of the foot from its node
};

struct RobotConfig {
  Lattice lattice;
  /// Effectors 0..3 are markers 1..4; any further effectors are front-foot attachments.
  PomModel model;
  std::vector<Foot> feet;
  double stroke_limit_mm = kStrokeLimitMm;

  std::size_t marker_count() const noexcept { return kMarkers; }

  const Foot& foot(const std::string& name) const {
    for (const auto& f : feet) {
      if (f.name == name) return f;
    }
    throw InvalidArgument("unknown foot '" + name + "'");
  }

  Vec3 rest_position(std::size_t effector) const {
    return lattice.position(model.effectors().at(effector).key);
  }
};

/// 2x2x2 core with two front voxels on the corner voxel (1,1,0); the robot
/// walks along the lattice diagonal +x+y. Four vertical actuators, one per
/// vertical plane of the core, carry the control nodes on the bottom layer.
///
///   q0: plane y = 1 (normal y), control (2,1,1)
///   q1: plane y = 3 (normal y), control (2,3,1)
///   q2: plane x = 1 (normal x), control (1,2,1)
///   q3: plane x = 3 (normal x), control (3,2,1)
///
/// Markers sit on the four bottom face nodes, each on the crossing of one
/// x-normal and one y-normal plane. Markers 1 and 4 are also the back feet.
inline RobotConfig tripod_preset(double pitch_mm = 76.2) {
  std::set<VoxelCoord> cells;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int z = 0; z < 2; ++z) cells.insert({x, y, z});
  cells.insert({2, 1, 0});  // front right
  cells.insert({1, 2, 0});  // front left
  Lattice lattice(VoxelGrid(cells, pitch_mm));

  std::vector<ControlNode> controls{
      make_control(lattice, NodeKey{{2, 1, 1}}, 1, "q0"),
      make_control(lattice, NodeKey{{2, 3, 1}}, 1, "q1"),
      make_control(lattice, NodeKey{{1, 2, 1}}, 0, "q2"),
      make_control(lattice, NodeKey{{3, 2, 1}}, 0, "q3"),
  };
  std::vector<EndEffector> effectors{
      make_effector(lattice, NodeKey{{1, 3, 0}}, "marker1"),
      make_effector(lattice, NodeKey{{3, 3, 0}}, "marker2"),
      make_effector(lattice, NodeKey{{1, 1, 0}}, "marker3"),
      make_effector(lattice, NodeKey{{3, 1, 0}}, "marker4"),
      make_effector(lattice, NodeKey{{3, 4, 1}}, "front_left_mount"),
      make_effector(lattice, NodeKey{{4, 3, 1}}, "front_right_mount"),
  };
  PomModel model(std::move(controls), std::move(effectors));

  std::vector<Foot> feet{
      {"back_left", 0, {true, true, false}, false, Vec3::Zero()},
      {"back_right", 3, {true, true, false}, false, Vec3::Zero()},
      {"front_left", 4, {false, false, true}, true, Vec3(0.0, pitch_mm, 0.0)},
      {"front_right", 5, {false, false, true}, true, Vec3(pitch_mm, 0.0, 0.0)},
  };
  return RobotConfig{std::move(lattice), std::move(model), std::move(feet), kStrokeLimitMm};
}

struct Keyframe {
  double phase = 0.0;  // [0, 1)
  Vec3 displacement_mm = Vec3::Zero();
};

/// Per-foot keyframe tracks; feet without a track are unconstrained.
struct GaitKeyframes {
  std::map<std::string, std::vector<Keyframe>> feet;
  int steps_per_cycle = kDefaultStepsPerCycle;
};

inline void normalize(std::vector<Keyframe>& track, const std::string& foot) {
  if (track.empty()) throw InvalidArgument("foot '" + foot + "' has an empty keyframe track");
  for (const auto& k : track) {
    if (!(k.phase >= 0.0 && k.phase < 1.0)) throw InvalidArgument("keyframe phase outside [0, 1) for '" + foot + "'");
    if (!k.displacement_mm.allFinite()) throw InvalidArgument("non-finite keyframe for '" + foot + "'");
  }
  std::sort(track.begin(), track.end(), [](const Keyframe& a, const Keyframe& b) { return a.phase < b.phase; });
  for (std::size_t i = 1; i < track.size(); ++i) {
    if (track[i].phase == track[i - 1].phase) throw InvalidArgument("duplicate keyframe phase for '" + foot + "'");
  }
}

/// Same gait run backwards: phase p becomes 1 - p (0 stays 0).
inline GaitKeyframes reversed(const GaitKeyframes& gait) {
  GaitKeyframes out = gait;
  for (auto& [name, track] : out.feet) {
    for (auto& k : track) k.phase = k.phase == 0.0 ? 0.0 : 1.0 - k.phase;
    normalize(track, name);
  }
  return out;
}

namespace detail {

inline double smoothstep(double u) { return u * u * (3.0 - 2.0 * u); }

// Positions are measured in samples ("ticks") so that reversing a track maps
// every interpolation weight w to exactly 1 - w.
inline Vec3 sample_track(const std::vector<Keyframe>& track, int tick, int steps) {
  const double n = steps;
  const double x = tick;
  const std::size_t m = track.size();
  if (m == 1) return track.front().displacement_mm;
  double start = 0.0, end = 0.0;
  std::size_t i0 = 0, i1 = 0;
  const double first = track.front().phase * n;
  const double last = track.back().phase * n;
  if (x < first) {
    i0 = m - 1;
    i1 = 0;
    start = last - n;
    end = first;
  } else if (x >= last) {
    i0 = m - 1;
    i1 = 0;
    start = last;
    end = first + n;
  } else {
    i1 = 1;
    while (track[i1].phase * n <= x) ++i1;
    i0 = i1 - 1;
    start = track[i0].phase * n;
    end = track[i1].phase * n;
  }
  const double num = x - start;
  const double den = end - start;
  const double w1 = smoothstep(num / den);
  const double w0 = smoothstep((den - num) / den);
  return track[i0].displacement_mm * w0 + track[i1].displacement_mm * w1;
}

}  // namespace detail

/// Desired foot displacement at sample `tick` of the cycle.
inline Vec3 foot_displacement(const std::vector<Keyframe>& track, int tick, int steps_per_cycle) {
  const int t = ((tick % steps_per_cycle) + steps_per_cycle) % steps_per_cycle;
  return detail::sample_track(track, t, steps_per_cycle);
}

struct CompiledGait {
  ActuationSequence sequence;
  double max_residual_mm = 0.0;
};

inline std::vector<Target> gait_targets(const RobotConfig& config, const GaitKeyframes& gait, int tick) {
  std::vector<Target> targets(config.model.num_effectors());
  for (const auto& foot : config.feet) {
    auto it = gait.feet.find(foot.name);
    if (it == gait.feet.end()) continue;
    const Vec3 d = foot_displacement(it->second, tick, gait.steps_per_cycle);
    for (std::size_t a = 0; a < 3; ++a) {
      if (!foot.constrained[a]) continue;
      if (std::abs(d[static_cast<Eigen::Index>(a)]) > config.stroke_limit_mm) {
        throw StrokeLimitError("foot '" + foot.name + "' demands " + std::to_string(d[static_cast<Eigen::Index>(a)]) +
                               " mm, beyond the " + std::to_string(config.stroke_limit_mm) + " mm stroke");
      }
      targets[foot.effector].c[a] = d[static_cast<Eigen::Index>(a)];
    }
  }
  return targets;
}

/// Actuator sequence realizing the foot keyframes, one sample per `timestep_s`.
inline CompiledGait compile_gait(const RobotConfig& config, GaitKeyframes gait, double timestep_s, int cycles = 1) {
  if (!(timestep_s > 0.0)) throw InvalidArgument("timestep must be positive");
  if (gait.steps_per_cycle <= 0) throw InvalidArgument("steps per cycle must be positive");
  if (cycles <= 0) throw InvalidArgument("cycle count must be positive");
  for (auto& [name, track] : gait.feet) {
    config.foot(name);
    normalize(track, name);
  }
  CompiledGait out;
  const int total = gait.steps_per_cycle * cycles;
  for (int k = 0; k < total; ++k) {
    const auto targets = gait_targets(config, gait, k);
    auto sol = config.model.inverse(targets);
    for (Eigen::Index i = 0; i < sol.q.size(); ++i) {
      if (std::abs(sol.q[i]) > config.stroke_limit_mm) {
        throw StrokeLimitError("actuator " + config.model.label(static_cast<std::size_t>(i)) + " needs " +
                               std::to_string(sol.q[i]) + " mm at sample " + std::to_string(k));
      }
    }
    out.max_residual_mm = std::max(out.max_residual_mm, sol.residual);
    out.sequence.times.push_back(k * timestep_s);
    out.sequence.q.push_back(std::move(sol.q));
  }
  return out;
}

/// Body-frame marker displacements (mm) for every sample of the sequence.
struct MarkerPrediction {
  std::vector<double> times;
  std::vector<std::array<Vec3, kMarkers>> markers;
};

inline MarkerPrediction predicted_markers(const RobotConfig& config, const ActuationSequence& sequence) {
  if (sequence.q.size() != sequence.times.size()) throw InvalidArgument("sequence times and values differ in length");
  MarkerPrediction out;
  out.times = sequence.times;
  for (const auto& q : sequence.q) {
    const auto x = config.model.forward(q);
    std::array<Vec3, kMarkers> m;
    for (std::size_t j = 0; j < kMarkers; ++j) m[j] = x[j];
    out.markers.push_back(m);
  }
  return out;
}

struct FrontFootState {
  std::string name;
  Vec3 position_mm = Vec3::Zero();      // rest position plus displacement
  Vec3 displacement_mm = Vec3::Zero();
  double lift_mm = 0.0;                 // vertical component
};

struct FrontFeet {
  std::vector<FrontFootState> feet;
  /// atan(dz / span) between the two front mounts (left minus right).
  double tilt_rad = 0.0;
};

/// Front feet as rigid extensions of their mounts, given every effector's displacement.
inline FrontFeet front_foot_positions(const RobotConfig& config, std::span<const Vec3> effector_displacements) {
  if (effector_displacements.size() != config.model.num_effectors()) {
    throw InvalidArgument("expected one displacement per effector");
  }
  FrontFeet out;
  std::vector<const Foot*> fronts;
  for (const auto& f : config.feet) {
    if (!f.front) continue;
    fronts.push_back(&f);
    const Vec3 d = effector_displacements[f.effector];
    FrontFootState s;
    s.name = f.name;
    s.displacement_mm = d;
    s.position_mm = config.rest_position(f.effector) + f.offset_mm + d;
    s.lift_mm = d.z();
    out.feet.push_back(s);
  }
  if (fronts.size() == 2) {
    Vec3 span = config.rest_position(fronts[0]->effector) - config.rest_position(fronts[1]->effector);
    span.z() = 0.0;
    out.tilt_rad = std::atan((out.feet[0].lift_mm - out.feet[1].lift_mm) / span.norm());
  }
  return out;
}

/// Lateral kinematics for the front feet: recover q from the four marker
/// displacements, then push it forward to the mounts.
inline FrontFeet front_foot_positions_from_markers(const RobotConfig& config,
                                                   const std::array<Vec3, kMarkers>& markers) {
  std::vector<Target> targets(config.model.num_effectors());
  for (std::size_t j = 0; j < kMarkers; ++j) targets[j] = Target::full(markers[j]);
  const auto sol = config.model.inverse(targets);
  const auto x = config.model.forward(sol.q);
  return front_foot_positions(config, x);
}

/// Qualitative reconstruction of the published foot-fall pattern: the right
/// front foot lifts, then the left one, while the back feet sweep a loop
/// between heel and toe. Keyframes every eighth of a cycle.
inline GaitKeyframes default_gait() {
  constexpr double lift = 4.0;
  constexpr double sweep = 3.0;
  constexpr std::array<double, 8> right{0, 0.5, 1, 0.5, 0, 0, 0, 0};
  constexpr std::array<double, 8> left{0, 0, 0, 0, 0, 0.5, 1, 0.5};
  GaitKeyframes g;
  for (std::size_t k = 0; k < 8; ++k) {
    const double p = static_cast<double>(k) / 8.0;
    // actuator values of the tripod preset at this keyframe
    const double q0 = sweep * std::cos(2 * std::numbers::pi * p);
    const double q1 = lift * right[k];
    const double q2 = sweep * std::sin(2 * std::numbers::pi * p);
    const double q3 = lift * left[k];
    g.feet["back_left"].push_back({p, Vec3(-q1, q2, 0)});
    g.feet["back_right"].push_back({p, Vec3(q0, -q3, 0)});
    g.feet["front_left"].push_back({p, Vec3(0, 0, q3)});
    g.feet["front_right"].push_back({p, Vec3(0, 0, q1)});
  }
  return g;
}

}  // namespace voxpom::gait
