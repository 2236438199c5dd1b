#pragma once

// Motion-capture correction: four planar markers recorded in the lab frame
// are moved into the robot body frame by removing their centroid and their
// common rotation at every sample, then compared with predicted trajectories.

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voxpom/csv.hpp"
#include "voxpom/error.hpp"

namespace voxpom::mocap {

using Vec2 = Eigen::Vector2d;
inline constexpr std::size_t kMarkers = 4;
using Sample = std::array<Vec2, kMarkers>;

enum class Frame { kLab, kBody };

struct MarkerTrajectory {
  std::vector<double> times;
  std::vector<Sample> samples;
  Frame frame = Frame::kLab;

  std::size_t size() const noexcept { return times.size(); }
};

inline void check(const MarkerTrajectory& t) {
  if (t.times.size() != t.samples.size()) throw InvalidArgument("times and samples differ in length");
  for (std::size_t k = 1; k < t.times.size(); ++k) {
    if (!(t.times[k] > t.times[k - 1])) throw InvalidArgument("times are not strictly increasing");
  }
}

struct LoadResult {
  MarkerTrajectory trajectory;
  std::size_t dropped = 0;
};

inline std::vector<std::string> marker_columns() {
  std::vector<std::string> names{"time_s"};
  for (std::size_t i = 1; i <= kMarkers; ++i) {
    names.push_back("m" + std::to_string(i) + "_x");
    names.push_back("m" + std::to_string(i) + "_y");
  }
  return names;
}

/// Header must be exactly time_s,m1_x,m1_y,...,m4_y. Rows with a missing or
/// NaN coordinate are dropped and counted.
inline LoadResult load_markers(std::istream& in, Frame frame = Frame::kLab) {
  const auto table = csv::read(in);
  if (table.header != marker_columns()) throw SchemaError("marker header must be time_s,m1_x,m1_y,...,m4_y", 1);
  LoadResult out;
  out.trajectory.frame = frame;
  for (const auto& row : table.rows) {
    if (!row.values[0] || !std::isfinite(*row.values[0])) throw SchemaError("missing time", row.line);
    bool complete = true;
    Sample s;
    for (std::size_t i = 0; i < kMarkers; ++i) {
      const auto& x = row.values[1 + 2 * i];
      const auto& y = row.values[2 + 2 * i];
      if (!x || !y || !std::isfinite(*x) || !std::isfinite(*y)) {
        complete = false;
        break;
      }
      s[i] = Vec2(*x, *y);
    }
    if (!complete) {
      ++out.dropped;
      continue;
    }
    const double t = *row.values[0];
    if (!out.trajectory.times.empty() && !(t > out.trajectory.times.back())) {
      throw SchemaError("time is not strictly increasing", row.line);
    }
    out.trajectory.times.push_back(t);
    out.trajectory.samples.push_back(s);
  }
  return out;
}

inline void write_markers(std::ostream& os, const MarkerTrajectory& t) {
  csv::write_header(os, marker_columns());
  for (std::size_t k = 0; k < t.size(); ++k) {
    std::vector<double> row{t.times[k]};
    for (const auto& p : t.samples[k]) {
      row.push_back(p.x());
      row.push_back(p.y());
    }
    csv::write_row(os, row);
  }
}

namespace detail {

inline double circular_mean(const double* angles, std::size_t n) {
  double s = 0.0, c = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s += std::sin(angles[i]);
    c += std::cos(angles[i]);
  }
  return std::atan2(s, c);
}

inline Vec2 rotate(const Vec2& p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x() - s * p.y(), s * p.x() + c * p.y()};
}

inline Vec2 centroid(const Sample& s) {
  Vec2 c = Vec2::Zero();
  for (const auto& p : s) c += p;
  return c / static_cast<double>(kMarkers);
}

// Per-marker time-average angle (circular).
inline std::array<double, kMarkers> mean_angles(const std::vector<Sample>& samples) {
  std::array<double, kMarkers> out{};
  for (std::size_t i = 0; i < kMarkers; ++i) {
    double s = 0.0, c = 0.0;
    for (const auto& smp : samples) {
      const double a = std::atan2(smp[i].y(), smp[i].x());
      s += std::sin(a);
      c += std::cos(a);
    }
    out[i] = std::atan2(s, c);
  }
  return out;
}

// Common rotation of one sample relative to the per-marker mean angles.
inline double common_rotation(const Sample& s, const std::array<double, kMarkers>& mean) {
  std::array<double, kMarkers> dev{};
  for (std::size_t i = 0; i < kMarkers; ++i) dev[i] = std::atan2(s[i].y(), s[i].x()) - mean[i];
  return circular_mean(dev.data(), kMarkers);
}

// Total squared deviation of every marker from its own time mean, per coordinate.
inline double deviation_variance(const std::vector<Sample>& samples) {
  if (samples.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < kMarkers; ++i) {
    Vec2 mean = Vec2::Zero();
    for (const auto& s : samples) mean += s[i];
    mean /= static_cast<double>(samples.size());
    for (const auto& s : samples) total += (s[i] - mean).squaredNorm();
  }
  return total / static_cast<double>(2 * kMarkers * samples.size());
}

}  // namespace detail

/// Nominal marker angles of a square layout in marker order 1..4.
inline std::array<double, kMarkers> square_layout_angles() {
  constexpr double q = std::numbers::pi / 4;
  return {3 * q, q, -q, -3 * q};
}

struct CorrectionOptions {
  /// Body-frame angle of each marker at rest; fixes the constant rotation
  /// that the per-sample correction leaves undetermined.
  std::array<double, kMarkers> nominal_angles = square_layout_angles();
  /// Multiply the result by sqrt(Var_lab / Var_body). Off by default: it is
  /// not invariant to rigid motion in the lab frame.
  bool rescale_variance = false;
  int max_iterations = 100;
  double tolerance_rad = 1e-13;
};

/// Nominal angles of a rest layout about its centroid.
inline std::array<double, kMarkers> layout_angles(const Sample& rest) {
  const Vec2 c = detail::centroid(rest);
  std::array<double, kMarkers> out{};
  for (std::size_t i = 0; i < kMarkers; ++i) {
    const Vec2 p = rest[i] - c;
    if (p.norm() == 0.0) throw InvalidArgument("marker " + std::to_string(i + 1) + " sits on the layout centroid");
    out[i] = std::atan2(p.y(), p.x());
  }
  return out;
}

inline MarkerTrajectory body_frame_correct(const MarkerTrajectory& lab, const CorrectionOptions& opts = {}) {
  check(lab);
  MarkerTrajectory body;
  body.frame = Frame::kBody;
  body.times = lab.times;
  body.samples = lab.samples;
  if (body.samples.empty()) return body;

  double scale = 0.0;
  for (auto& s : body.samples) {
    const Vec2 c = detail::centroid(s);
    for (auto& p : s) {
      p -= c;
      scale = std::max(scale, p.norm());
    }
  }
  const double floor = 1e-9 * std::max(scale, 1.0);
  for (std::size_t k = 0; k < body.size(); ++k) {
    for (std::size_t i = 0; i < kMarkers; ++i) {
      if (body.samples[k][i].norm() <= floor) {
        throw InvalidArgument("marker " + std::to_string(i + 1) + " coincides with the centroid at t = " +
                              std::to_string(body.times[k]));
      }
    }
  }

  // Removing the common rotation shifts the time-average angles it is measured
  // against, so iterate to the fixed point where no common rotation remains.
  for (int it = 0; it < opts.max_iterations; ++it) {
    const auto mean = detail::mean_angles(body.samples);
    double worst = 0.0;
    for (auto& s : body.samples) {
      const double theta = detail::common_rotation(s, mean);
      worst = std::max(worst, std::abs(theta));
      for (auto& p : s) p = detail::rotate(p, -theta);
    }
    if (worst < opts.tolerance_rad) break;
  }

  const auto mean = detail::mean_angles(body.samples);
  std::array<double, kMarkers> offset{};
  for (std::size_t i = 0; i < kMarkers; ++i) offset[i] = mean[i] - opts.nominal_angles[i];
  const double gauge = detail::circular_mean(offset.data(), kMarkers);
  for (auto& s : body.samples) {
    for (auto& p : s) p = detail::rotate(p, -gauge);
    const Vec2 c = detail::centroid(s);
    for (auto& p : s) p -= c;
  }

  if (opts.rescale_variance) {
    const double vb = detail::deviation_variance(body.samples);
    if (vb > 0.0) {
      const double s = std::sqrt(detail::deviation_variance(lab.samples) / vb);
      for (auto& smp : body.samples)
        for (auto& p : smp) p *= s;
    }
  }
  return body;
}

/// Largest common rotation left in a trajectory, measured as above.
inline double residual_rotation(const MarkerTrajectory& t) {
  const auto mean = detail::mean_angles(t.samples);
  double worst = 0.0;
  for (const auto& s : t.samples) worst = std::max(worst, std::abs(detail::common_rotation(s, mean)));
  return worst;
}

struct MarkerComparison {
  double rms_mm = 0.0;   // per coordinate, over the aligned overlap
  double shift_s = 0.0;  // measured(t) ~ predicted(t - shift)
  double area_ratio = std::numeric_limits<double>::quiet_NaN();  // signed loop area, measured / predicted
  std::size_t samples = 0;
};

struct CompareOptions {
  /// Search window for the shift is +-period/2; 0 means the predicted duration plus one step.
  double period_s = 0.0;
  /// Minimum fraction of the shorter trajectory that must overlap for a shift to count.
  double min_overlap = 0.5;
};

struct CompareReport {
  std::array<MarkerComparison, kMarkers> markers;
};

namespace detail {

inline std::vector<std::array<Vec2, kMarkers>> deviations(const MarkerTrajectory& t) {
  auto out = t.samples;
  for (std::size_t i = 0; i < kMarkers; ++i) {
    Vec2 mean = Vec2::Zero();
    for (const auto& s : t.samples) mean += s[i];
    mean /= static_cast<double>(t.size());
    for (auto& s : out) s[i] -= mean;
  }
  return out;
}

// Linear interpolation of marker i at time t; nullopt outside the support.
inline std::optional<Vec2> interpolate(const std::vector<double>& times, const std::vector<Sample>& s, std::size_t i,
                                       double t) {
  const double eps = 1e-9 * std::max(1.0, std::abs(times.back()));
  if (t < times.front() - eps || t > times.back() + eps) return std::nullopt;
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return s.front()[i];
  if (it == times.end()) return s.back()[i];
  const auto k = static_cast<std::size_t>(it - times.begin());
  const double u = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return s[k - 1][i] * (1.0 - u) + s[k][i] * u;
}

inline double loop_area(const std::vector<Vec2>& pts) {
  double a = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const Vec2& p = pts[k];
    const Vec2& q = pts[(k + 1) % pts.size()];
    a += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * a;
}

}  // namespace detail

/// Per-marker agreement of two body-frame trajectories after removing each
/// marker's time mean and aligning in time by the best whole-step shift.
inline CompareReport compare(const MarkerTrajectory& predicted, const MarkerTrajectory& measured,
                             const CompareOptions& opts = {}) {
  check(predicted);
  check(measured);
  if (predicted.size() < 2 || measured.size() < 2) throw InvalidArgument("need at least two samples per trajectory");
  if (measured.times.back() < predicted.times.front() || predicted.times.back() < measured.times.front()) {
    throw InvalidArgument("predicted and measured time ranges are disjoint");
  }
  const double dt = (predicted.times.back() - predicted.times.front()) / static_cast<double>(predicted.size() - 1);
  const double period = opts.period_s > 0 ? opts.period_s : predicted.times.back() - predicted.times.front() + dt;
  const auto reach = static_cast<long>(std::floor(period / (2 * dt) + 1e-9));
  const auto pdev = detail::deviations(predicted);
  const auto mdev = detail::deviations(measured);
  const auto need = static_cast<std::size_t>(
      std::ceil(opts.min_overlap * static_cast<double>(std::min(predicted.size(), measured.size()))));

  // candidate shifts ordered 0, -1, +1, -2, ... so ties keep the smallest
  std::vector<long> steps{0};
  for (long k = 1; k <= reach; ++k) {
    steps.push_back(-k);
    steps.push_back(k);
  }

  CompareReport report;
  for (std::size_t i = 0; i < kMarkers; ++i) {
    double best = std::numeric_limits<double>::infinity();
    long best_k = 0;
    std::size_t best_n = 0;
    for (long k : steps) {
      const double shift = static_cast<double>(k) * dt;
      double sum = 0.0;
      std::size_t n = 0;
      for (std::size_t m = 0; m < measured.size(); ++m) {
        const auto p = detail::interpolate(predicted.times, pdev, i, measured.times[m] - shift);
        if (!p) continue;
        sum += (mdev[m][i] - *p).squaredNorm();
        ++n;
      }
      if (n < std::max<std::size_t>(need, 1)) continue;
      const double mse = sum / static_cast<double>(2 * n);
      if (mse < best) {
        best = mse;
        best_k = k;
        best_n = n;
      }
    }
    if (best_n == 0) throw InvalidArgument("no time shift gives enough overlap");
    auto& out = report.markers[i];
    out.shift_s = static_cast<double>(best_k) * dt;
    out.rms_mm = std::sqrt(best);
    out.samples = best_n;

    std::vector<Vec2> ploop, mloop;
    for (std::size_t m = 0; m < measured.size(); ++m) {
      const auto p = detail::interpolate(predicted.times, pdev, i, measured.times[m] - out.shift_s);
      if (!p) continue;
      ploop.push_back(*p);
      mloop.push_back(mdev[m][i]);
    }
    const double ap = detail::loop_area(ploop);
    if (std::abs(ap) > 1e-12) out.area_ratio = detail::loop_area(mloop) / ap;
  }
  return report;
}

/// Rigid planar motion applied to every marker: p -> R(angle) p + offset.
inline Sample rigid_motion(const Sample& s, double angle, const Vec2& offset) {
  Sample out;
  for (std::size_t i = 0; i < kMarkers; ++i) out[i] = detail::rotate(s[i], angle) + offset;
  return out;
}

}  // namespace voxpom::mocap
