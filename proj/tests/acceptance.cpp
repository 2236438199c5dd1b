// Acceptance checks, one line per criterion. Exit status is nonzero when any fails.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "voxpom/gait.hpp"
#include "voxpom/io.hpp"
#include "voxpom/lattice_fea.hpp"
#include "voxpom/mocap.hpp"
#include "voxpom/validation.hpp"

using namespace voxpom;
namespace fs = std::filesystem;

namespace {

std::string g_cli;
fs::path g_data;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1 -------------------------------------------------------------------------

constexpr int kTable[3][3][6] = {
    {{0, 0, 0, 0, 0, 0}, {0, 0, 1, 0, 0, -1}, {0, -1, 0, 0, 1, 0}},
    {{0, 0, 1, 0, 0, -1}, {0, 0, 0, 0, 0, 0}, {-1, 0, 0, 1, 0, 0}},
    {{0, -1, 0, 0, 1, 0}, {1, 0, 0, -1, 0, 0}, {0, 0, 0, 0, 0, 0}},
};

Outcome matrix_fidelity() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  int matched = 0;
  bool structure = true;
  for (int d = 0; d < 3; ++d) {
    for (int n = 0; n < 6; ++n) {
      const auto c = actuation_column(d, n);
      const auto opp = actuation_column(d, (n + 3) % 6);
      for (int r = 0; r < 3; ++r) {
        const auto rr = static_cast<std::size_t>(r);
        if (c[rr] == kTable[d][r][n]) ++matched;
        if (c[rr] != -opp[rr]) structure = false;
      }
      if (c[static_cast<std::size_t>(d)] != 0) structure = false;
      if ((n == d || n == d + 3) && c != Vec3i{0, 0, 0}) structure = false;
    }
  }
  const double t = seconds_since(t0);
  o.require(matched == 54, "entries " + std::to_string(matched) + "/54");
  o.require(structure, "structural invariants");
  o.require(t < 1.0, "runtime " + num(t) + " s");
  o.note("54/54 entries, invariants hold, " + num(t) + " s");
  return o;
}

// 2-4 -----------------------------------------------------------------------

ValidationReport run_scenario(const std::string& lattice_file, const std::string& scenario_file, double* secs) {
  const auto lattice = io::parse_lattice(io::parse_json(io::read_file((g_data / lattice_file).string())));
  const auto s = io::parse_scenario(io::parse_json(io::read_file((g_data / scenario_file).string())));
  const auto t0 = std::chrono::steady_clock::now();
  const auto field = fea::solve(lattice, s.scenario);
  auto rep = validate(lattice, s.scenario, field);
  if (secs) *secs = seconds_since(t0);
  return rep;
}

Outcome checkerboard() {
  Outcome o;
  double t = 0;
  const auto rep = run_scenario("lattice_4x4x1.json", "scenario_4x4x1.json", &t);
  o.require(rep.active_nodes > 0 && rep.sign_matches == rep.active_nodes, "sign agreement");
  o.require(t < 10.0, "runtime " + num(t) + " s");
  o.note(std::to_string(rep.sign_matches) + "/" + std::to_string(rep.active_nodes) + " active nodes, " + num(t) +
         " s");
  return o;
}

Outcome confinement() {
  Outcome o;
  for (const char* name : {"2x2x1", "2x2x2"}) {
    const auto rep = run_scenario(std::string("lattice_") + name + ".json", std::string("scenario_") + name + ".json",
                                  nullptr);
    o.require(rep.out_of_plane_ratio <= 0.10, std::string(name) + " ratio");
    o.note(std::string(name) + " out-of-plane/in-plane " + num(rep.out_of_plane_ratio));
  }
  return o;
}

Outcome dissipation_bound() {
  Outcome o;
  const auto rep = run_scenario("lattice_4x4x1.json", "scenario_4x4x1.json", nullptr);
  o.require(rep.dissipation <= 0.10, "bound");
  o.note("dissipation " + num(rep.dissipation) + " (reference " + num(kReferenceDissipation) + ")");
  return o;
}

// 5 -------------------------------------------------------------------------

Outcome fea_oracle() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const double P = 1.0, L = 0.1, r = 1e-3;
  const auto m = fea::Material::circular(2e9, 0.35, r);
  const double expect = P * L * L * L / (3.0 * m.E * fea::kPi * std::pow(r, 4) / 4.0);
  double worst_rel = 0;
  for (int segments : {1, 3, 8}) {
    fea::FrameModel model;
    model.material = m;
    for (int i = 0; i <= segments; ++i) model.positions.push_back(Vec3(L * i / segments, 0, 0));
    for (int i = 0; i < segments; ++i)
      model.elements.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(i + 1), Vec3::Zero()});
    for (int d = 0; d < fea::kDofPerNode; ++d) model.fixed.push_back({0, d, 0.0});
    model.loads.push_back({static_cast<std::size_t>(segments), Vec3(0, P, 0), Vec3::Zero()});
    const auto sol = fea::solve(model);
    worst_rel = std::max(worst_rel, std::abs(sol.u[fea::kDofPerNode * segments + 1] - expect) / expect);
  }
  o.require(worst_rel <= 1e-9, "cantilever");

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  std::normal_distribution<double> n;
  bool modes = true;
  double worst_conj = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 a(u(rng), u(rng), u(rng));
    const Vec3 b = a + Vec3(u(rng), u(rng), u(rng));
    const Vec3 ref(n(rng), n(rng), n(rng));
    const auto mat = fea::Material::strip(2e9, 0.35, 2e-3, 1e-3);
    const fea::Matrix12 k = fea::element_stiffness(a, b, ref, mat);
    Eigen::SelfAdjointEigenSolver<fea::Matrix12> es(k);
    const double top = es.eigenvalues().cwiseAbs().maxCoeff();
    int zeros = 0;
    for (int i = 0; i < 12; ++i) zeros += std::abs(es.eigenvalues()[i]) <= 1e-8 * top;
    if (zeros != 6) modes = false;
    const Eigen::Matrix3d rot = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
    const fea::Matrix12 t = fea::block_rotation(rot);
    const fea::Matrix12 k1 = fea::element_stiffness(rot * a, rot * b, rot * ref, mat);
    worst_conj = std::max(worst_conj, (k1 - t * k * t.transpose()).cwiseAbs().maxCoeff() / k.cwiseAbs().maxCoeff());
  }
  o.require(modes, "six rigid-body modes");
  o.require(worst_conj <= 1e-10, "conjugation");
  const double secs = seconds_since(t0);
  o.require(secs < 1.0, "runtime " + num(secs) + " s");
  o.note("cantilever rel err " + num(worst_rel) + ", conjugation " + num(worst_conj) + ", " + num(secs) + " s");
  return o;
}

// 6 -------------------------------------------------------------------------

Outcome duality() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uq(-5, 5);
  std::uniform_int_distribution<int> dim(1, 4), axis(0, 2);
  int models = 0, attempts = 0;
  double worst = 0;
  std::size_t shared = 0;
  bool invariant = true;
  while (models < 1000 && attempts < 20000) {
    ++attempts;
    Lattice l(VoxelGrid::box(dim(rng), dim(rng), dim(rng), 10.0));
    const auto& nodes = l.nodes();
    std::uniform_int_distribution<std::size_t> pick(0, nodes.size() - 1);
    std::vector<ControlNode> controls;
    std::set<std::pair<int, int>> planes;
    for (int tries = 0; tries < 5; ++tries) {
      const auto k = nodes[pick(rng)];
      int d = axis(rng);
      if (d == k.type()) d = (d + 1) % 3;
      if (!planes.insert({d, k[d]}).second) continue;
      controls.push_back(make_control(l, k, d));
    }
    std::vector<EndEffector> effectors;
    for (int j = 0; j < 8; ++j) effectors.push_back(make_effector(l, nodes[pick(rng)]));
    PomModel model(controls, effectors);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(model.gain());
    if (lu.rank() < static_cast<Eigen::Index>(model.num_controls())) continue;  // q not determined
    ++models;
    Eigen::VectorXd q(static_cast<Eigen::Index>(model.num_controls()));
    for (auto& v : q) v = uq(rng);
    std::vector<Target> t;
    for (const auto& x : model.forward(q)) t.push_back(Target::full(x));
    worst = std::max(worst, (model.inverse(t).q - q).cwiseAbs().maxCoeff());

    // Every node shared by two voxels moves identically whichever host labels it.
    for (const auto& k : nodes) {
      const auto hs = hosts(k, l.grid());
      if (hs.size() < 2) continue;
      ++shared;
      for (const auto& c : controls) {
        Vec3 via[2];
        for (int h = 0; h < 2; ++h) {
          const auto& ref = hs[static_cast<std::size_t>(h)];
          int parity = 0;
          for (int a = 0; a < 3; ++a)
            if (a != c.d) parity += ref.voxel[static_cast<std::size_t>(a)] - c.host[static_cast<std::size_t>(a)];
          via[h] = Vec3::Zero();
          if (k[c.d] == c.plane_coord()) via[h] = actuation_vector(c.d, ref.node_index) * ((parity % 2 == 0) ? 1.0 : -1.0);
        }
        if (via[0] != via[1]) invariant = false;
      }
    }
  }
  o.require(models == 1000, "only " + std::to_string(models) + " full-rank models");
  o.require(worst <= 1e-9, "recovery");
  o.require(invariant, "label invariance");
  o.note(std::to_string(models) + " models (" + std::to_string(attempts - models) +
         " rank-deficient draws skipped), max |dq| " + num(worst) + ", " + std::to_string(shared) +
         " shared nodes label-invariant");
  return o;
}

// 7 -------------------------------------------------------------------------

Outcome gait_round_trip() {
  Outcome o;
  const auto config = gait::tripod_preset();
  const auto g = gait::default_gait();
  const auto fwd = gait::compile_gait(config, g, 0.02);
  const auto bwd = gait::compile_gait(config, gait::reversed(g), 0.02);
  double peak = 0, residual = 0;
  bool reversed = true;
  const int n = static_cast<int>(fwd.sequence.size());
  for (int k = 0; k < n; ++k) {
    const auto& q = fwd.sequence.q[static_cast<std::size_t>(k)];
    peak = std::max(peak, q.cwiseAbs().maxCoeff());
    const auto x = config.model.forward(q);
    for (const auto& foot : config.feet) {
      const Vec3 want = gait::foot_displacement(g.feet.at(foot.name), k, g.steps_per_cycle);
      for (int a = 0; a < 3; ++a)
        if (foot.constrained[static_cast<std::size_t>(a)]) residual = std::max(residual, std::abs(x[foot.effector][a] - want[a]));
    }
    if (!(bwd.sequence.q[static_cast<std::size_t>((n - k) % n)].array() == q.array()).all()) reversed = false;
  }
  o.require(peak <= gait::kStrokeLimitMm, "stroke");
  o.require(residual <= 1e-9, "round trip");
  o.require(reversed, "time reversal");
  o.note("max |q| " + num(peak) + " mm, round-trip residual " + num(residual) + " mm, reversal exact");
  return o;
}

// 8 -------------------------------------------------------------------------

double rms(const mocap::MarkerTrajectory& a, const mocap::MarkerTrajectory& b) {
  double s = 0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < mocap::kMarkers; ++i, n += 2) s += (a.samples[k][i] - b.samples[k][i]).squaredNorm();
  return std::sqrt(s / static_cast<double>(n));
}

Outcome mocap_pipeline() {
  Outcome o;
  const auto config = gait::tripod_preset();
  const auto compiled = gait::compile_gait(config, gait::default_gait(), 0.02, 2);
  const auto pred = gait::predicted_markers(config, compiled.sequence);
  mocap::MarkerTrajectory body;
  body.frame = mocap::Frame::kBody;
  body.times = pred.times;
  mocap::Sample rest;
  for (std::size_t i = 0; i < mocap::kMarkers; ++i) rest[i] = config.rest_position(i).head<2>();
  for (const auto& m : pred.markers) {
    mocap::Sample s;
    for (std::size_t i = 0; i < mocap::kMarkers; ++i) s[i] = rest[i] + m[i].head<2>();
    body.samples.push_back(s);
  }
  mocap::CorrectionOptions opts;
  opts.nominal_angles = mocap::layout_angles(rest);
  const auto canonical = mocap::body_frame_correct(body, opts);

  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.5);
  auto lab_of = [&](bool noisy) {
    const double heading = 2 * std::numbers::pi * u(rng), phase = 2 * std::numbers::pi * u(rng);
    const double sway = 0.5 * u(rng), drift = 500 * u(rng);
    mocap::MarkerTrajectory lab = canonical;
    lab.frame = mocap::Frame::kLab;
    for (std::size_t k = 0; k < lab.size(); ++k) {
      const double s = static_cast<double>(k) / static_cast<double>(lab.size());
      const double angle = heading + sway * std::sin(2 * std::numbers::pi * 3 * s + phase) + 0.01 * u(rng);
      lab.samples[k] = mocap::rigid_motion(lab.samples[k], angle,
                                           mocap::Vec2(drift * s * std::cos(heading), drift * s * std::sin(heading)));
      if (noisy)
        for (auto& p : lab.samples[k]) p += mocap::Vec2(noise(rng), noise(rng));
    }
    return lab;
  };

  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) worst = std::max(worst, rms(mocap::body_frame_correct(lab_of(false), opts), canonical));
  const double idem = rms(mocap::body_frame_correct(canonical, opts), canonical);
  o.require(worst <= 1e-6, "rigid recovery");
  o.require(idem <= 1e-9, "idempotence");

  double mean = 0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    const auto rep = mocap::compare(canonical, mocap::body_frame_correct(lab_of(true), opts));
    for (const auto& m : rep.markers) mean += m.rms_mm / (mocap::kMarkers * trials);
  }
  o.require(mean >= 0.4 && mean <= 0.6, "noisy compare RMS " + num(mean) + " mm outside [0.4, 0.6]");
  o.note("recovery RMS " + num(worst) + " mm, idempotence " + num(idem) + " mm, noisy compare RMS " + num(mean) + " mm");
  return o;
}

// 9 -------------------------------------------------------------------------

int shell(const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + g_cli + "\" " + args + " >\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / ("voxpom_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
  const auto d = [&](const char* f) { return q(g_data / f); };
  const std::vector<std::pair<std::string, std::function<std::string(const fs::path&)>>> commands{
      {"fk", [&](const fs::path& out) {
         return "fk --lattice " + d("tripod/lattice.json") + " --model " + d("tripod/model.json") + " --sequence " +
                d("tripod/sequence.csv") + " --out " + q(out / "x.csv");
       }},
      {"ik", [&](const fs::path& out) {
         return "ik --lattice " + d("tripod/lattice.json") + " --model " + d("tripod/model.json") +
                " --trajectories " + d("tripod/markers_golden.csv") + " --out " + q(out / "q.csv");
       }},
      {"validate", [&](const fs::path& out) {
         return "validate --lattice " + d("lattice_4x4x1.json") + " --scenario " + d("scenario_4x4x1.json") +
                " --out " + q(out);
       }},
      {"preset", [&](const fs::path& out) { return "preset --out " + q(out); }},
      {"gait", [&](const fs::path& out) { return "gait --keyframes " + d("tripod/keyframes.json") + " --out " + q(out); }},
      {"mocap", [&](const fs::path& out) {
         return "mocap --predicted " + d("tripod/predicted_mocap.csv") + " --measured " +
                d("tripod/measured_mocap.csv") + " --out " + q(out);
       }},
      {"synth-mocap", [&](const fs::path& out) {
         return "synth-mocap --predicted " + d("tripod/predicted_mocap.csv") + " --seed 3 --out " + q(out / "m.csv");
       }},
  };
  std::size_t files = 0;
  for (const auto& [name, args] : commands) {
    std::vector<std::map<std::string, std::string>> runs;
    for (int r = 0; r < 2; ++r) {
      const fs::path out = root / name / std::to_string(r);
      fs::create_directories(out);
      const int code = shell(args(out), root / (name + std::to_string(r) + ".log"));
      o.require(code == 0, name + " exit " + std::to_string(code));
      std::map<std::string, std::string> contents;
      for (const auto& e : fs::directory_iterator(out)) contents[e.path().filename().string()] = io::read_file(e.path().string());
      runs.push_back(std::move(contents));
    }
    o.require(!runs[0].empty() && runs[0] == runs[1], name + " outputs differ");
    files += runs[0].size();
  }
  fs::remove_all(root);
  o.note(std::to_string(commands.size()) + " subcommands, " + std::to_string(files) + " output files byte-identical");
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <voxpom binary> <data dir>\n");
    return 2;
  }
  g_cli = argv[1];
  g_data = argv[2];
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"matrix fidelity", matrix_fidelity},   {"checkerboard pattern", checkerboard},
      {"plane confinement", confinement},     {"dissipation bound", dissipation_bound},
      {"FEA oracle", fea_oracle},             {"FK/IK duality", duality},
      {"gait round trip", gait_round_trip},   {"mocap pipeline", mocap_pipeline},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed ? 1 : 0;
}
