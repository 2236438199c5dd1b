#pragma once

// File formats: JSON for lattices, models, materials, scenarios and gait
// keyframes; CSV for actuation sequences and marker trajectories.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "voxpom/csv.hpp"
#include "voxpom/error.hpp"
#include "voxpom/fea.hpp"
#include "voxpom/gait.hpp"
#include "voxpom/lattice.hpp"
#include "voxpom/lattice_fea.hpp"
#include "voxpom/pom.hpp"

namespace voxpom::io {

using json = nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("failed writing '" + path + "'");
}

/// Parses JSON text, reporting syntax errors with their line.
inline json parse_json(const std::string& text, const std::string& what = "document") {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    const auto end = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i + 1 < end; ++i) {
      if (text[i] == '\n') ++line;
    }
    throw SchemaError(what + ": malformed JSON", line);
  }
}

namespace detail {

inline const json& need(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw SchemaError(where + ": missing '" + key + "'");
  return j.at(key);
}

inline double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw SchemaError(where + ": expected a number");
  return j.get<double>();
}

inline int integer(const json& j, const std::string& where) {
  if (!j.is_number_integer()) throw SchemaError(where + ": expected an integer");
  return j.get<int>();
}

inline std::array<int, 3> int3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(where + ": expected three integers");
  return {integer(j[0], where), integer(j[1], where), integer(j[2], where)};
}

inline Vec3 vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw SchemaError(where + ": expected three numbers");
  return {number(j[0], where), number(j[1], where), number(j[2], where)};
}

inline int axis(const json& j, const std::string& where) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "x") return 0;
    if (s == "y") return 1;
    if (s == "z") return 2;
    throw SchemaError(where + ": axis must be x, y or z");
  }
  const int a = integer(j, where);
  if (a < 0 || a > 2) throw SchemaError(where + ": axis outside 0..2");
  return a;
}

}  // namespace detail

/// A node is either a half-pitch key [hx, hy, hz] or {"voxel": [...], "node": i}.
inline NodeKey parse_node(const json& j, const std::string& where) {
  if (j.is_array()) {
    NodeKey k{detail::int3(j, where)};
    if (!k.valid()) throw SchemaError(where + ": " + k.str() + " is not a face-center node");
    return k;
  }
  if (j.is_object()) {
    const auto v = detail::int3(detail::need(j, "voxel", where), where + ".voxel");
    const int n = detail::integer(detail::need(j, "node", where), where + ".node");
    if (n < 0 || n >= kNodesPerVoxel) throw SchemaError(where + ": node index outside 0..5");
    return canonical_node_key({v, n});
  }
  throw SchemaError(where + ": expected a node key or {voxel, node}");
}

inline json node_json(const NodeKey& k) { return json::array({k[0], k[1], k[2]}); }

/// {"pitch_mm": p, "voxels": [[x,y,z], ...]} or {"pitch_mm": p, "box": [nx,ny,nz]}.
inline Lattice parse_lattice(const json& j) {
  const double pitch = j.contains("pitch_mm") ? detail::number(j.at("pitch_mm"), "lattice.pitch_mm") : 76.2;
  if (!(pitch > 0)) throw SchemaError("lattice.pitch_mm must be positive");
  if (j.contains("box")) {
    const auto b = detail::int3(j.at("box"), "lattice.box");
    if (b[0] <= 0 || b[1] <= 0 || b[2] <= 0) throw SchemaError("lattice.box dimensions must be positive");
    return Lattice(VoxelGrid::box(b[0], b[1], b[2], pitch));
  }
  const auto& vox = detail::need(j, "voxels", "lattice");
  if (!vox.is_array() || vox.empty()) throw SchemaError("lattice.voxels must be a nonempty array");
  std::set<VoxelCoord> cells;
  for (std::size_t i = 0; i < vox.size(); ++i) cells.insert(detail::int3(vox[i], "lattice.voxels[" + std::to_string(i) + "]"));
  return Lattice(VoxelGrid(cells, pitch));
}

inline json lattice_json(const Lattice& lattice) {
  json vox = json::array();
  for (const auto& v : lattice.grid().occupied()) vox.push_back(json::array({v[0], v[1], v[2]}));
  return json{{"pitch_mm", lattice.pitch()}, {"voxels", vox}};
}

/// {"controls": [{"node": ..., "plane_normal": d, "name": s}], "effectors": [{"node": ..., "name": s}]}
/// where "node" may be replaced by "voxel" + "node" index at the top level.
inline PomModel parse_model(const json& j, const Lattice& lattice) {
  auto node_of = [](const json& e, const std::string& where) {
    if (e.contains("key")) return parse_node(e.at("key"), where + ".key");
    if (e.contains("voxel")) return parse_node(json{{"voxel", e.at("voxel")}, {"node", detail::need(e, "node", where)}}, where);
    return parse_node(detail::need(e, "node", where), where + ".node");
  };
  const auto& cs = detail::need(j, "controls", "model");
  const auto& es = detail::need(j, "effectors", "model");
  if (!cs.is_array() || !es.is_array()) throw SchemaError("model: controls and effectors must be arrays");
  std::vector<ControlNode> controls;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const std::string where = "model.controls[" + std::to_string(i) + "]";
    const NodeKey k = node_of(cs[i], where);
    const int d = detail::axis(detail::need(cs[i], "plane_normal", where), where + ".plane_normal");
    const std::string name = cs[i].value("name", "q" + std::to_string(i));
    controls.push_back(make_control(lattice, k, d, name));
  }
  std::vector<EndEffector> effectors;
  for (std::size_t i = 0; i < es.size(); ++i) {
    const std::string where = "model.effectors[" + std::to_string(i) + "]";
    const NodeKey k = node_of(es[i], where);
    effectors.push_back(make_effector(lattice, k, es[i].value("name", "e" + std::to_string(i))));
  }
  return PomModel(std::move(controls), std::move(effectors));
}

inline json model_json(const PomModel& model) {
  json cs = json::array(), es = json::array();
  for (std::size_t i = 0; i < model.num_controls(); ++i) {
    const auto& c = model.controls()[i];
    cs.push_back({{"key", node_json(c.key)}, {"plane_normal", c.d}, {"name", model.label(i)}});
  }
  for (std::size_t j = 0; j < model.num_effectors(); ++j) {
    es.push_back({{"key", node_json(model.effectors()[j].key)}, {"name", model.effector_label(j)}});
  }
  return json{{"controls", cs}, {"effectors", es}};
}

/// Overrides on top of `base`: E_pa, nu, and a section
/// {"shape": "strip", "width_m", "thickness_m"} or {"shape": "circular", "radius_m"}.
inline fea::Material parse_material(const json& j, fea::Material base = {}) {
  if (!j.is_object()) throw SchemaError("material must be an object");
  const double e = j.contains("E_pa") ? detail::number(j.at("E_pa"), "material.E_pa") : base.E;
  const double nu = j.contains("nu") ? detail::number(j.at("nu"), "material.nu") : base.E / (2.0 * base.G) - 1.0;
  fea::Material m = base;
  if (j.contains("section")) {
    const auto& s = j.at("section");
    const std::string shape = s.value("shape", "");
    if (shape == "strip") {
      m = fea::Material::strip(e, nu, detail::number(detail::need(s, "width_m", "section"), "section.width_m"),
                               detail::number(detail::need(s, "thickness_m", "section"), "section.thickness_m"));
    } else if (shape == "circular") {
      m = fea::Material::circular(e, nu, detail::number(detail::need(s, "radius_m", "section"), "section.radius_m"));
    } else {
      throw SchemaError("material.section.shape must be strip or circular");
    }
  } else {
    m.E = e;
    m.G = e / (2.0 * (1.0 + nu));
  }
  try {
    m.validate();
  } catch (const InvalidArgument& ex) {
    throw SchemaError(std::string("material: ") + ex.what());
  }
  return m;
}

struct ScenarioFile {
  fea::LatticeScenario scenario;
  int heatmap_component = -1;  // -1: the actuator axis
};

inline ScenarioFile parse_scenario(const json& j, fea::Material base = {}) {
  ScenarioFile out;
  auto& s = out.scenario;
  s.material = j.contains("material") ? parse_material(j.at("material"), base) : base;
  if (j.contains("fixed")) {
    const auto& fs = j.at("fixed");
    for (std::size_t i = 0; i < fs.size(); ++i) {
      const std::string where = "scenario.fixed[" + std::to_string(i) + "]";
      const NodeKey k = parse_node(detail::need(fs[i], "node", where), where + ".node");
      const double value = fs[i].contains("value") ? detail::number(fs[i].at("value"), where + ".value") : 0.0;
      const auto& dofs = detail::need(fs[i], "dofs", where);
      if (!dofs.is_array()) throw SchemaError(where + ".dofs must be an array");
      for (const auto& d : dofs) {
        if (!d.is_string()) throw SchemaError(where + ".dofs entries must be strings");
        const auto name = d.get<std::string>();
        if (name == "all") {
          for (int q = 0; q < fea::kDofPerNode; ++q) s.fixed.push_back({k, q, value});
          continue;
        }
        const auto dof = fea::parse_dof(name);
        if (!dof) throw SchemaError(where + ": unknown dof '" + name + "'");
        s.fixed.push_back({k, *dof, value});
      }
    }
  }
  if (j.contains("actuators")) {
    const auto& as = j.at("actuators");
    for (std::size_t i = 0; i < as.size(); ++i) {
      const std::string where = "scenario.actuators[" + std::to_string(i) + "]";
      fea::Actuator a;
      a.a = parse_node(detail::need(as[i], "a", where), where + ".a");
      a.b = parse_node(detail::need(as[i], "b", where), where + ".b");
      a.axis = detail::axis(detail::need(as[i], "axis", where), where + ".axis");
      a.displacement_mm = detail::number(detail::need(as[i], "displacement_mm", where), where + ".displacement_mm");
      a.lock_rotations = as[i].value("lock_rotations", true);
      s.actuators.push_back(a);
    }
  }
  if (j.contains("anchors")) {
    const auto& an = j.at("anchors");
    for (std::size_t i = 0; i < an.size(); ++i) {
      std::vector<NodeKey> group;
      for (std::size_t k = 0; k < an[i].size(); ++k) {
        group.push_back(parse_node(an[i][k], "scenario.anchors[" + std::to_string(i) + "]"));
      }
      s.anchors.push_back(std::move(group));
    }
  }
  if (j.contains("loads")) {
    const auto& ls = j.at("loads");
    for (std::size_t i = 0; i < ls.size(); ++i) {
      const std::string where = "scenario.loads[" + std::to_string(i) + "]";
      fea::NodeLoad l;
      l.node = parse_node(detail::need(ls[i], "node", where), where + ".node");
      if (ls[i].contains("force_n")) l.force_n = detail::vec3(ls[i].at("force_n"), where + ".force_n");
      if (ls[i].contains("moment_nm")) l.moment_nm = detail::vec3(ls[i].at("moment_nm"), where + ".moment_nm");
      s.loads.push_back(l);
    }
  }
  if (j.contains("heatmap_component")) {
    out.heatmap_component = detail::axis(j.at("heatmap_component"), "scenario.heatmap_component");
  }
  return out;
}

/// {"steps_per_cycle": n, "feet": {"back_left": [{"phase": p, "displacement_mm": [x,y,z]}, ...], ...}}
inline gait::GaitKeyframes parse_keyframes(const json& j) {
  gait::GaitKeyframes g;
  if (j.contains("steps_per_cycle")) {
    g.steps_per_cycle = detail::integer(j.at("steps_per_cycle"), "keyframes.steps_per_cycle");
    if (g.steps_per_cycle <= 0) throw SchemaError("keyframes.steps_per_cycle must be positive");
  }
  const auto& feet = detail::need(j, "feet", "keyframes");
  if (!feet.is_object()) throw SchemaError("keyframes.feet must be an object");
  for (const auto& [name, track] : feet.items()) {
    const std::string where = "keyframes.feet." + name;
    if (!track.is_array()) throw SchemaError(where + " must be an array");
    auto& out = g.feet[name];
    for (std::size_t i = 0; i < track.size(); ++i) {
      const std::string w = where + "[" + std::to_string(i) + "]";
      out.push_back({detail::number(detail::need(track[i], "phase", w), w + ".phase"),
                     detail::vec3(detail::need(track[i], "displacement_mm", w), w + ".displacement_mm")});
    }
  }
  return g;
}

inline json keyframes_json(const gait::GaitKeyframes& g) {
  json feet = json::object();
  for (const auto& [name, track] : g.feet) {
    json arr = json::array();
    for (const auto& k : track) {
      arr.push_back({{"phase", k.phase},
                     {"displacement_mm", json::array({k.displacement_mm.x(), k.displacement_mm.y(), k.displacement_mm.z()})}});
    }
    feet[name] = arr;
  }
  return json{{"steps_per_cycle", g.steps_per_cycle}, {"feet", feet}};
}

inline std::vector<std::string> control_names(const PomModel& model) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < model.num_controls(); ++i) out.push_back(model.label(i));
  return out;
}

inline std::vector<std::string> effector_columns(const PomModel& model, std::size_t count) {
  std::vector<std::string> out{"time_s"};
  for (std::size_t j = 0; j < count; ++j) {
    const auto name = model.effector_label(j);
    for (const char* s : {"_x", "_y", "_z"}) out.push_back(name + s);
  }
  return out;
}

/// Header time_s followed by one column per control, in model order.
inline ActuationSequence read_sequence(std::istream& in, const PomModel& model) {
  const auto table = csv::read(in);
  std::vector<std::string> want{"time_s"};
  for (const auto& n : control_names(model)) want.push_back(n);
  if (table.header != want) {
    std::string h;
    for (const auto& w : want) h += (h.empty() ? "" : ",") + w;
    throw SchemaError("sequence header must be " + h, 1);
  }
  ActuationSequence seq;
  for (const auto& row : table.rows) {
    Eigen::VectorXd q(static_cast<Eigen::Index>(model.num_controls()));
    for (std::size_t c = 0; c < row.values.size(); ++c) {
      if (!row.values[c] || !std::isfinite(*row.values[c])) throw SchemaError("missing or non-finite value", row.line);
      if (c > 0) q[static_cast<Eigen::Index>(c - 1)] = *row.values[c];
    }
    if (!seq.times.empty() && !(*row.values[0] > seq.times.back())) {
      throw SchemaError("time is not strictly increasing", row.line);
    }
    seq.times.push_back(*row.values[0]);
    seq.q.push_back(q);
  }
  return seq;
}

inline void write_sequence(std::ostream& os, const ActuationSequence& seq, const PomModel& model) {
  std::vector<std::string> header{"time_s"};
  for (const auto& n : control_names(model)) header.push_back(n);
  csv::write_header(os, header);
  for (std::size_t k = 0; k < seq.size(); ++k) {
    std::vector<double> row{seq.times[k]};
    for (Eigen::Index i = 0; i < seq.q[k].size(); ++i) row.push_back(seq.q[k][i]);
    csv::write_row(os, row);
  }
}

/// Effector displacement rows: time_s then <name>_x,_y,_z per effector.
/// Empty fields in a trajectory file leave that component unconstrained.
struct EffectorRows {
  std::vector<double> times;
  std::vector<std::vector<Target>> targets;
};

inline EffectorRows read_effector_rows(std::istream& in, const PomModel& model) {
  const auto table = csv::read(in);
  const auto want = effector_columns(model, model.num_effectors());
  if (table.header != want) throw SchemaError("trajectory header must be time_s then <effector>_x,_y,_z per effector", 1);
  EffectorRows out;
  for (const auto& row : table.rows) {
    if (!row.values[0]) throw SchemaError("missing time", row.line);
    if (!out.times.empty() && !(*row.values[0] > out.times.back())) {
      throw SchemaError("time is not strictly increasing", row.line);
    }
    std::vector<Target> t(model.num_effectors());
    for (std::size_t j = 0; j < model.num_effectors(); ++j) {
      for (std::size_t a = 0; a < 3; ++a) {
        const auto& v = row.values[1 + 3 * j + a];
        if (v && !std::isfinite(*v)) throw SchemaError("non-finite target", row.line);
        t[j].c[a] = v;
      }
    }
    out.times.push_back(*row.values[0]);
    out.targets.push_back(std::move(t));
  }
  return out;
}

inline void write_effector_rows(std::ostream& os, const PomModel& model, std::size_t count,
                                const std::vector<double>& times, const std::vector<std::vector<Vec3>>& x) {
  csv::write_header(os, effector_columns(model, count));
  for (std::size_t k = 0; k < times.size(); ++k) {
    std::vector<double> row{times[k]};
    for (std::size_t j = 0; j < count; ++j) {
      for (int a = 0; a < 3; ++a) row.push_back(x[k][j][a]);
    }
    csv::write_row(os, row);
  }
}

}  // namespace voxpom::io
