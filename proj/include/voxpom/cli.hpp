#pragma once

// Subcommands of the voxpom tool. Every command reads files, writes files and
// returns a process exit code; nothing here touches global state.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "voxpom/error.hpp"
#include "voxpom/gait.hpp"
#include "voxpom/io.hpp"
#include "voxpom/lattice_fea.hpp"
#include "voxpom/mocap.hpp"
#include "voxpom/pom.hpp"
#include "voxpom/validation.hpp"

namespace voxpom::cli {

enum Exit : int { kOk = 0, kFailure = 1, kSchema = 2, kIkFailure = 3, kFeaFailure = 4 };

inline constexpr double kIkResidualLimitMm = 1e-6;

namespace detail {

namespace fs = std::filesystem;

inline std::string out_path(const std::string& dir, const std::string& name) {
  fs::create_directories(dir);
  return (fs::path(dir) / name).string();
}

inline std::string dump(const io::json& j) { return j.dump(2) + "\n"; }

inline Lattice load_lattice(const std::string& path) {
  return io::parse_lattice(io::parse_json(io::read_file(path), path));
}

inline PomModel load_model(const std::string& path, const Lattice& lattice) {
  return io::parse_model(io::parse_json(io::read_file(path), path), lattice);
}

inline std::ifstream open(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  return in;
}

inline mocap::MarkerTrajectory prediction_positions(const gait::RobotConfig& config,
                                                    const gait::MarkerPrediction& pred) {
  mocap::MarkerTrajectory t;
  t.frame = mocap::Frame::kBody;
  t.times = pred.times;
  for (const auto& m : pred.markers) {
    mocap::Sample s;
    for (std::size_t j = 0; j < gait::kMarkers; ++j) s[j] = (config.rest_position(j) + m[j]).head<2>();
    t.samples.push_back(s);
  }
  return t;
}

inline mocap::Sample mean_sample(const mocap::MarkerTrajectory& t) {
  mocap::Sample m;
  for (auto& p : m) p.setZero();
  for (const auto& s : t.samples)
    for (std::size_t i = 0; i < mocap::kMarkers; ++i) m[i] += s[i];
  for (auto& p : m) p /= static_cast<double>(t.size());
  return m;
}

}  // namespace detail

struct FkArgs {
  std::string lattice, model, sequence, out;
};

inline int cmd_fk(const FkArgs& a, std::ostream& log) {
  const auto lattice = detail::load_lattice(a.lattice);
  const auto model = detail::load_model(a.model, lattice);
  auto in = detail::open(a.sequence);
  const auto seq = io::read_sequence(in, model);
  std::vector<std::vector<Vec3>> x;
  for (const auto& q : seq.q) x.push_back(model.forward(q));
  std::ostringstream os;
  io::write_effector_rows(os, model, model.num_effectors(), seq.times, x);
  io::write_file(a.out, os.str());
  log << "fk: " << seq.size() << " samples -> " << a.out << "\n";
  return kOk;
}

struct IkArgs {
  std::string lattice, model, trajectories, out;
};

inline int cmd_ik(const IkArgs& a, std::ostream& log) {
  const auto lattice = detail::load_lattice(a.lattice);
  const auto model = detail::load_model(a.model, lattice);
  auto in = detail::open(a.trajectories);
  const auto rows = io::read_effector_rows(in, model);
  ActuationSequence seq;
  double worst = 0.0;
  const InverseOptions opts{kIkResidualLimitMm, 0.0};
  for (std::size_t k = 0; k < rows.times.size(); ++k) {
    auto sol = model.inverse(rows.targets[k], opts);
    worst = std::max(worst, sol.residual);
    seq.times.push_back(rows.times[k]);
    seq.q.push_back(std::move(sol.q));
  }
  std::ostringstream os;
  io::write_sequence(os, seq, model);
  io::write_file(a.out, os.str());
  log << "ik: " << seq.size() << " samples, max residual " << csv::format(worst) << " mm -> " << a.out << "\n";
  return kOk;
}

struct ValidateArgs {
  std::string lattice, scenario, material, out;
};

inline int cmd_validate(const ValidateArgs& a, std::ostream& log) {
  const auto lattice = detail::load_lattice(a.lattice);
  fea::Material base;
  if (!a.material.empty()) base = io::parse_material(io::parse_json(io::read_file(a.material), a.material));
  const auto file = io::parse_scenario(io::parse_json(io::read_file(a.scenario), a.scenario), base);
  if (file.scenario.actuators.empty()) throw SchemaError("scenario needs at least one actuator");
  const auto field = fea::solve(lattice, file.scenario);
  const auto rep = validate(lattice, file.scenario, field);
  const int component = file.heatmap_component >= 0 ? file.heatmap_component : file.scenario.actuators.front().axis;

  io::json j;
  j["plane"] = {{"normal", rep.plane.normal}, {"coord", rep.plane.coord}};
  j["control"] = io::node_json(rep.control);
  j["pom_q_mm"] = rep.pom_q_mm;
  j["active_nodes"] = rep.active_nodes;
  j["sign_matches"] = rep.sign_matches;
  j["sign_agreement"] = rep.sign_agreement;
  j["max_in_plane_mm"] = rep.max_in_plane_mm;
  j["max_out_of_plane_mm"] = rep.max_out_of_plane_mm;
  j["out_of_plane_ratio"] = rep.out_of_plane_ratio;
  j["dissipation"] = rep.dissipation;
  j["reference_dissipation"] = kReferenceDissipation;
  io::write_file(detail::out_path(a.out, "report.json"), detail::dump(j));
  io::write_file(detail::out_path(a.out, "heatmap.svg"), fea::heatmap_svg(field, rep.plane, component));
  log << "validate: sign agreement " << csv::format(rep.sign_agreement) << ", out-of-plane ratio "
      << csv::format(rep.out_of_plane_ratio) << ", dissipation " << csv::format(rep.dissipation) << "\n";
  return kOk;
}

struct PresetArgs {
  std::string out;
  double pitch_mm = 76.2;
};

inline int cmd_preset(const PresetArgs& a, std::ostream& log) {
  const auto config = gait::tripod_preset(a.pitch_mm);
  io::write_file(detail::out_path(a.out, "lattice.json"), detail::dump(io::lattice_json(config.lattice)));
  io::write_file(detail::out_path(a.out, "model.json"), detail::dump(io::model_json(config.model)));
  io::write_file(detail::out_path(a.out, "keyframes.json"), detail::dump(io::keyframes_json(gait::default_gait())));
  log << "preset: tripod robot written to " << a.out << "\n";
  return kOk;
}

struct GaitArgs {
  std::string keyframes, out;
  double timestep_s = 0.02;
  double pitch_mm = 76.2;
  int cycles = 1;
  bool reverse = false;
};

inline int cmd_gait(const GaitArgs& a, std::ostream& log) {
  const auto config = gait::tripod_preset(a.pitch_mm);
  auto kf = a.keyframes.empty() ? gait::default_gait()
                                : io::parse_keyframes(io::parse_json(io::read_file(a.keyframes), a.keyframes));
  if (a.reverse) kf = gait::reversed(kf);
  const auto compiled = gait::compile_gait(config, kf, a.timestep_s, a.cycles);
  const auto& seq = compiled.sequence;

  std::ostringstream os;
  io::write_sequence(os, seq, config.model);
  io::write_file(detail::out_path(a.out, "sequence.csv"), os.str());

  const auto pred = gait::predicted_markers(config, seq);
  std::vector<std::vector<Vec3>> x;
  for (const auto& m : pred.markers) x.emplace_back(m.begin(), m.end());
  std::ostringstream om;
  io::write_effector_rows(om, config.model, gait::kMarkers, pred.times, x);
  io::write_file(detail::out_path(a.out, "predicted_markers.csv"), om.str());

  std::ostringstream op;
  mocap::write_markers(op, detail::prediction_positions(config, pred));
  io::write_file(detail::out_path(a.out, "predicted_mocap.csv"), op.str());

  std::ostringstream of;
  csv::write_header(of, {"time_s", "front_left_z", "front_right_z", "tilt_rad"});
  for (std::size_t k = 0; k < seq.size(); ++k) {
    const auto feet = gait::front_foot_positions(config, config.model.forward(seq.q[k]));
    csv::write_row(of, {seq.times[k], feet.feet[0].lift_mm, feet.feet[1].lift_mm, feet.tilt_rad});
  }
  io::write_file(detail::out_path(a.out, "front_feet.csv"), of.str());
  log << "gait: " << seq.size() << " samples, max residual " << csv::format(compiled.max_residual_mm) << " mm -> "
      << a.out << "\n";
  return kOk;
}

struct MocapArgs {
  std::string predicted, measured, out;
  bool rescale_variance = false;
};

inline int cmd_mocap(const MocapArgs& a, std::ostream& log) {
  auto pin = detail::open(a.predicted);
  auto min = detail::open(a.measured);
  const auto predicted = mocap::load_markers(pin, mocap::Frame::kBody);
  const auto measured = mocap::load_markers(min, mocap::Frame::kLab);
  if (predicted.trajectory.size() < 2 || measured.trajectory.size() < 2) {
    throw SchemaError("marker files need at least two complete rows");
  }
  mocap::CorrectionOptions opts;
  opts.nominal_angles = mocap::layout_angles(detail::mean_sample(predicted.trajectory));
  opts.rescale_variance = a.rescale_variance;
  const auto body = mocap::body_frame_correct(measured.trajectory, opts);
  mocap::CorrectionOptions popts = opts;
  popts.rescale_variance = false;
  const auto reference = mocap::body_frame_correct(predicted.trajectory, popts);
  const auto rep = mocap::compare(reference, body);

  std::ostringstream os;
  mocap::write_markers(os, body);
  io::write_file(detail::out_path(a.out, "corrected.csv"), os.str());
  io::json j = io::json::object();
  for (std::size_t i = 0; i < mocap::kMarkers; ++i) {
    const auto& m = rep.markers[i];
    io::json e{{"rms_mm", m.rms_mm}, {"shift_s", m.shift_s}, {"samples", m.samples}};
    e["area_ratio"] = std::isfinite(m.area_ratio) ? io::json(m.area_ratio) : io::json(nullptr);
    j["m" + std::to_string(i + 1)] = e;
  }
  j["dropped_rows"] = measured.dropped;
  io::write_file(detail::out_path(a.out, "compare.json"), detail::dump(j));
  log << "mocap: " << body.size() << " samples corrected, " << measured.dropped << " rows dropped -> " << a.out
      << "\n";
  return kOk;
}

struct SynthArgs {
  std::string predicted, out;
  std::uint64_t seed = 1;
  double noise_mm = 0.5;
  double drift_mm = 100.0;
  double sway_deg = 15.0;
};

/// Lab-frame recording synthesized from a body-frame trajectory: seeded
/// time-varying rigid motion plus white noise on every coordinate.
inline int cmd_synth(const SynthArgs& a, std::ostream& log) {
  auto in = detail::open(a.predicted);
  const auto body = mocap::load_markers(in, mocap::Frame::kBody).trajectory;
  std::mt19937_64 rng(a.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
  const double heading = uniform(rng);
  const double phase = uniform(rng);
  const double t0 = body.times.empty() ? 0.0 : body.times.front();
  const double span = body.times.empty() ? 1.0 : std::max(body.times.back() - t0, 1e-9);
  mocap::MarkerTrajectory lab;
  lab.frame = mocap::Frame::kLab;
  lab.times = body.times;
  for (std::size_t k = 0; k < body.size(); ++k) {
    const double u = (body.times[k] - t0) / span;
    const double angle = heading + a.sway_deg * std::numbers::pi / 180.0 * std::sin(2 * std::numbers::pi * u + phase);
    const mocap::Vec2 offset(a.drift_mm * u * std::cos(heading), a.drift_mm * u * std::sin(heading));
    auto s = mocap::rigid_motion(body.samples[k], angle, offset);
    for (auto& p : s) {
      const double nx = normal(rng);
      const double ny = normal(rng);
      p += mocap::Vec2(a.noise_mm * nx, a.noise_mm * ny);
    }
    lab.samples.push_back(s);
  }
  std::ostringstream os;
  mocap::write_markers(os, lab);
  io::write_file(a.out, os.str());
  log << "synth-mocap: " << lab.size() << " samples, seed " << a.seed << " -> " << a.out << "\n";
  return kOk;
}

/// Maps library errors onto exit codes.
template <class F>
int guarded(F&& f, std::ostream& err) {
  try {
    return f();
  } catch (const SchemaError& e) {
    err << "error: " << e.what() << "\n";
    return kSchema;
  } catch (const io::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kSchema;
  } catch (const RankDeficientError& e) {
    err << "error: " << e.what() << "\n";
    return kIkFailure;
  } catch (const InconsistentError& e) {
    err << "error: " << e.what() << "\n";
    return kIkFailure;
  } catch (const StrokeLimitError& e) {
    err << "error: " << e.what() << "\n";
    return kIkFailure;
  } catch (const SingularSystemError& e) {
    err << "error: " << e.what() << "\n";
    return kFeaFailure;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kSchema;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Planes-of-motion kinematics for voxel robots"};
  app.require_subcommand(1);

  FkArgs fk;
  auto* c_fk = app.add_subcommand("fk", "marker displacements from an actuation sequence");
  c_fk->add_option("--lattice", fk.lattice, "lattice JSON")->required();
  c_fk->add_option("--model", fk.model, "model JSON")->required();
  c_fk->add_option("--sequence", fk.sequence, "sequence CSV")->required();
  c_fk->add_option("--out", fk.out, "output CSV")->required();

  IkArgs ik;
  auto* c_ik = app.add_subcommand("ik", "actuation sequence from effector trajectories");
  c_ik->add_option("--lattice", ik.lattice, "lattice JSON")->required();
  c_ik->add_option("--model", ik.model, "model JSON")->required();
  c_ik->add_option("--trajectories", ik.trajectories, "trajectory CSV")->required();
  c_ik->add_option("--out", ik.out, "output CSV")->required();

  ValidateArgs va;
  auto* c_va = app.add_subcommand("validate", "frame analysis against the planes-of-motion prediction");
  c_va->add_option("--lattice", va.lattice, "lattice JSON")->required();
  c_va->add_option("--scenario", va.scenario, "scenario JSON")->required();
  c_va->add_option("--material", va.material, "material JSON");
  c_va->add_option("--out", va.out, "output directory")->required();

  PresetArgs pr;
  auto* c_pr = app.add_subcommand("preset", "write the tripod robot lattice, model and default keyframes");
  c_pr->add_option("--out", pr.out, "output directory")->required();
  c_pr->add_option("--pitch", pr.pitch_mm, "voxel pitch in mm");

  GaitArgs ga;
  auto* c_ga = app.add_subcommand("gait", "compile foot keyframes for the tripod robot");
  c_ga->add_option("--keyframes", ga.keyframes, "keyframe JSON (default gait when omitted)");
  c_ga->add_option("--timestep", ga.timestep_s, "seconds per sample");
  c_ga->add_option("--cycles", ga.cycles, "number of gait cycles");
  c_ga->add_option("--pitch", ga.pitch_mm, "voxel pitch in mm");
  c_ga->add_flag("--reverse", ga.reverse, "run the gait backwards");
  c_ga->add_option("--out", ga.out, "output directory")->required();

  MocapArgs mo;
  auto* c_mo = app.add_subcommand("mocap", "correct a marker recording and compare it with a prediction");
  c_mo->add_option("--predicted", mo.predicted, "predicted marker CSV (body frame)")->required();
  c_mo->add_option("--measured", mo.measured, "measured marker CSV (lab frame)")->required();
  c_mo->add_flag("--rescale-variance", mo.rescale_variance, "rescale by the lab/body deviation variance ratio");
  c_mo->add_option("--out", mo.out, "output directory")->required();

  SynthArgs sy;
  auto* c_sy = app.add_subcommand("synth-mocap", "synthetic lab-frame recording from a body-frame trajectory");
  c_sy->add_option("--predicted", sy.predicted, "body-frame marker CSV")->required();
  c_sy->add_option("--seed", sy.seed, "random seed");
  c_sy->add_option("--noise", sy.noise_mm, "white noise per coordinate, mm");
  c_sy->add_option("--drift", sy.drift_mm, "translation over the recording, mm");
  c_sy->add_option("--sway", sy.sway_deg, "rotation amplitude, degrees");
  c_sy->add_option("--out", sy.out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kFailure;
  }

  return guarded(
      [&]() -> int {
        if (c_fk->parsed()) return cmd_fk(fk, out);
        if (c_ik->parsed()) return cmd_ik(ik, out);
        if (c_va->parsed()) return cmd_validate(va, out);
        if (c_pr->parsed()) return cmd_preset(pr, out);
        if (c_ga->parsed()) return cmd_gait(ga, out);
        if (c_mo->parsed()) return cmd_mocap(mo, out);
        return cmd_synth(sy, out);
      },
      err);
}

}  // namespace voxpom::cli
