#include <gtest/gtest.h>

#include <cmath>

#include "voxpom/gait.hpp"

using namespace voxpom;
using namespace voxpom::gait;

namespace {

GaitKeyframes zeros() {
  GaitKeyframes g;
  for (const char* f : {"back_left", "back_right", "front_left", "front_right"}) g.feet[f] = {{0.0, Vec3::Zero()}};
  return g;
}

}  // namespace

TEST(Preset, Shape) {
  const auto c = tripod_preset();
  EXPECT_TRUE(check_disjoint_planes(c.model.controls()).ok);
  EXPECT_EQ(c.model.num_controls(), 4u);
  EXPECT_EQ(c.marker_count(), 4u);
  for (std::size_t j = 0; j < kMarkers; ++j) {
    const Eigen::MatrixXd rows = c.model.gain().block(static_cast<Eigen::Index>(3 * j), 0, 3, 4);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(rows);
    EXPECT_EQ(lu.rank(), 2) << "marker " << j + 1;
    EXPECT_TRUE(rows.row(2).isZero(0.0));
  }
}

TEST(Compile, ZeroTrajectoriesGiveZeroSequence) {
  const auto c = tripod_preset();
  const auto out = compile_gait(c, zeros(), 0.02);
  ASSERT_EQ(out.sequence.size(), 50u);
  for (const auto& q : out.sequence.q) EXPECT_TRUE(q.isZero(0.0));
  EXPECT_DOUBLE_EQ(out.sequence.times[10], 0.2);
}

TEST(Compile, BackLeftStepUsesOnlyItsPlanes) {
  const auto c = tripod_preset();
  GaitKeyframes g;
  g.feet["back_left"] = {{0.0, Vec3::Zero()}, {0.5, Vec3(2.0, 0, 0)}};
  g.feet["back_right"] = {{0.0, Vec3::Zero()}};
  const auto out = compile_gait(c, g, 0.02);
  const auto& conn = c.model.connectivity_matrix();
  bool moved = false;
  for (const auto& q : out.sequence.q) {
    for (Eigen::Index i = 0; i < 4; ++i) {
      if (q[i] != 0.0) {
        EXPECT_NE(conn(0, i), 0) << "control " << i;
        moved = true;
      }
    }
  }
  EXPECT_TRUE(moved);
}

TEST(Compile, RoundTripReproducesConstrainedComponents) {
  const auto c = tripod_preset();
  const auto g = default_gait();
  const auto out = compile_gait(c, g, 0.02);
  for (std::size_t k = 0; k < out.sequence.size(); ++k) {
    const auto x = c.model.forward(out.sequence.q[k]);
    for (const auto& foot : c.feet) {
      const Vec3 want = foot_displacement(g.feet.at(foot.name), static_cast<int>(k), g.steps_per_cycle);
      for (int a = 0; a < 3; ++a) {
        if (foot.constrained[static_cast<std::size_t>(a)]) {
          EXPECT_NEAR(x[foot.effector][a], want[a], 1e-9);
        }
      }
    }
    EXPECT_LE(out.sequence.q[k].cwiseAbs().maxCoeff(), kStrokeLimitMm);
  }
}

TEST(Compile, RightFrontLiftsBeforeLeft) {
  const auto c = tripod_preset();
  const auto out = compile_gait(c, default_gait(), 0.02);
  int right_peak = -1, left_peak = -1;
  double right_max = 0, left_max = 0;
  for (std::size_t k = 0; k < out.sequence.size(); ++k) {
    const auto feet = front_foot_positions(c, c.model.forward(out.sequence.q[k]));
    if (feet.feet[1].lift_mm > right_max) right_max = feet.feet[1].lift_mm, right_peak = static_cast<int>(k);
    if (feet.feet[0].lift_mm > left_max) left_max = feet.feet[0].lift_mm, left_peak = static_cast<int>(k);
  }
  EXPECT_GT(right_max, 3.0);
  EXPECT_GT(left_max, 3.0);
  EXPECT_LT(right_peak, left_peak);
}

TEST(Compile, ReversedKeyframesGiveReversedSequence) {
  const auto c = tripod_preset();
  const auto fwd = compile_gait(c, default_gait(), 0.02);
  const auto bwd = compile_gait(c, reversed(default_gait()), 0.02);
  const int n = 50;
  for (int k = 0; k < n; ++k) {
    EXPECT_TRUE((bwd.sequence.q[static_cast<std::size_t>((n - k) % n)].array() ==
                 fwd.sequence.q[static_cast<std::size_t>(k)].array())
                    .all())
        << k;
  }
}

TEST(Compile, PeriodicOverCycles) {
  const auto c = tripod_preset();
  auto g = default_gait();
  g.steps_per_cycle = 32;
  const auto out = compile_gait(c, g, 0.01, 3);
  ASSERT_EQ(out.sequence.size(), 96u);
  for (std::size_t k = 0; k < 32; ++k) {
    EXPECT_TRUE((out.sequence.q[k].array() == out.sequence.q[k + 32].array()).all());
    EXPECT_TRUE((out.sequence.q[k].array() == out.sequence.q[k + 64].array()).all());
  }
}

TEST(Compile, KeyframesHitExactlyOnSampleTicks) {
  std::vector<Keyframe> t{{0.0, Vec3(1, 2, 3)}, {0.5, Vec3(-1, 0, 0.5)}};
  EXPECT_EQ(foot_displacement(t, 0, 50), Vec3(1, 2, 3));
  EXPECT_EQ(foot_displacement(t, 25, 50), Vec3(-1, 0, 0.5));
  EXPECT_EQ(foot_displacement(t, 50, 50), Vec3(1, 2, 3));
  // smoothstep midpoint between keyframes
  EXPECT_NEAR(foot_displacement(t, 12, 48).x(), 0.0, 1e-15);
}

TEST(Compile, Errors) {
  const auto c = tripod_preset();
  GaitKeyframes big;
  big.feet["back_left"] = {{0.0, Vec3(5.5, 0, 0)}};
  big.feet["back_right"] = {{0.0, Vec3::Zero()}};
  EXPECT_THROW(compile_gait(c, big, 0.02), StrokeLimitError);
  EXPECT_THROW(compile_gait(c, zeros(), 0.0), InvalidArgument);
  GaitKeyframes unknown = zeros();
  unknown.feet["tail"] = {{0.0, Vec3::Zero()}};
  EXPECT_THROW(compile_gait(c, unknown, 0.02), InvalidArgument);
  GaitKeyframes partial;
  partial.feet["front_left"] = {{0.0, Vec3::Zero()}};
  EXPECT_THROW(compile_gait(c, partial, 0.02), RankDeficientError);
  GaitKeyframes clash = zeros();
  clash.feet["front_right"] = {{0.0, Vec3(0, 0, 1)}};
  EXPECT_THROW(compile_gait(c, clash, 0.02), InconsistentError);
  GaitKeyframes phase = zeros();
  phase.feet["back_left"] = {{1.0, Vec3::Zero()}};
  EXPECT_THROW(compile_gait(c, phase, 0.02), InvalidArgument);
}

TEST(Predict, ZeroSequenceLeavesMarkersAtRest) {
  const auto c = tripod_preset();
  ActuationSequence seq;
  seq.times = {0.0, 0.1};
  seq.q = {Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4)};
  const auto p = predicted_markers(c, seq);
  for (const auto& s : p.markers)
    for (const auto& m : s) {
      EXPECT_TRUE(m.isZero(0.0));
    }
  seq.q.pop_back();
  EXPECT_THROW(predicted_markers(c, seq), InvalidArgument);
}

TEST(FrontFeet, RigidExtension) {
  const auto c = tripod_preset();
  std::vector<Vec3> d(c.model.num_effectors(), Vec3::Zero());
  auto rest = front_foot_positions(c, d);
  ASSERT_EQ(rest.feet.size(), 2u);
  EXPECT_TRUE(rest.feet[0].position_mm.isApprox(c.rest_position(4) + Vec3(0, 76.2, 0)));
  EXPECT_TRUE(rest.feet[1].position_mm.isApprox(c.rest_position(5) + Vec3(76.2, 0, 0)));
  EXPECT_EQ(rest.tilt_rad, 0.0);
  d[5] = Vec3(0, 0, 3);
  const auto lifted = front_foot_positions(c, d);
  EXPECT_TRUE((lifted.feet[1].position_mm - rest.feet[1].position_mm).isApprox(Vec3(0, 0, 3)));
  EXPECT_EQ(lifted.feet[1].lift_mm, 3.0);
}

// atan(dz / span) against a bar of length span rotated rigidly by theta.
TEST(FrontFeet, TiltMatchesExactRotation) {
  const auto c = tripod_preset();
  Vec3 span = c.rest_position(4) - c.rest_position(5);
  span.z() = 0;
  const double len = span.norm();
  for (double dz = -5.0; dz <= 5.0; dz += 0.25) {
    const double theta = std::asin(dz / len);
    std::vector<Vec3> d(c.model.num_effectors(), Vec3::Zero());
    d[4] = Vec3(0, 0, 0.5 * len * std::sin(theta));
    d[5] = Vec3(0, 0, -0.5 * len * std::sin(theta));
    EXPECT_NEAR(front_foot_positions(c, d).tilt_rad, theta, 1e-3);
  }
}

TEST(FrontFeet, FromMarkersMatchesForward) {
  const auto c = tripod_preset();
  Eigen::VectorXd q(4);
  q << 1.0, -2.0, 0.5, 3.0;
  const auto x = c.model.forward(q);
  std::array<Vec3, kMarkers> m{x[0], x[1], x[2], x[3]};
  const auto a = front_foot_positions_from_markers(c, m);
  const auto b = front_foot_positions(c, x);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_LE((a.feet[i].position_mm - b.feet[i].position_mm).norm(), 1e-12);
}
