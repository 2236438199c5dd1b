#pragma once

// Voxel lattice topology. Node positions are stored in half-pitch units so
// that node identity, node type and plane membership are exact integer tests.
//
// Node index convention inside a voxel: index i in {0,1,2} is the face-center
// node on the +e_i face, index i+3 the node on the -e_i face.

#include <array>
#include <cmath>
#include <compare>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "voxpom/error.hpp"

namespace voxpom {

using Vec3 = Eigen::Vector3d;
using VoxelCoord = std::array<int, 3>;

inline constexpr int kNodesPerVoxel = 6;
inline constexpr int kBeamsPerVoxel = 12;

inline constexpr bool is_even(int v) noexcept { return (v % 2) == 0; }

/// Node position in units of pitch/2. Exactly one coordinate is even.
struct NodeKey {
  std::array<int, 3> h{};

  constexpr int operator[](int axis) const { return h[static_cast<std::size_t>(axis)]; }
  friend constexpr auto operator<=>(const NodeKey&, const NodeKey&) = default;

  constexpr bool valid() const noexcept {
    return (is_even(h[0]) ? 1 : 0) + (is_even(h[1]) ? 1 : 0) + (is_even(h[2]) ? 1 : 0) == 1;
  }

  /// Axis of the even coordinate: the face normal the node sits on.
  constexpr int type() const noexcept {
    for (int a = 0; a < 3; ++a) {
      if (is_even(h[static_cast<std::size_t>(a)])) return a;
    }
    return -1;
  }

  std::string str() const {
    return "(" + std::to_string(h[0]) + "," + std::to_string(h[1]) + "," + std::to_string(h[2]) + ")";
  }
};

struct NodeRef {
  VoxelCoord voxel{};
  int node_index = 0;

  friend constexpr bool operator==(const NodeRef&, const NodeRef&) = default;
};

inline std::string voxel_str(const VoxelCoord& v) {
  return "(" + std::to_string(v[0]) + "," + std::to_string(v[1]) + "," + std::to_string(v[2]) + ")";
}

inline void require_node_index(int node_index) {
  if (node_index < 0 || node_index >= kNodesPerVoxel) {
    throw InvalidArgument("node index " + std::to_string(node_index) + " outside 0..5");
  }
}

inline NodeKey canonical_node_key(const NodeRef& ref) {
  require_node_index(ref.node_index);
  const int axis = ref.node_index % 3;
  const int step = ref.node_index < 3 ? 1 : -1;
  NodeKey key;
  for (std::size_t a = 0; a < 3; ++a) key.h[a] = 2 * ref.voxel[a] + 1;
  key.h[static_cast<std::size_t>(axis)] += step;
  return key;
}

/// Set of occupied voxels plus the edge length (mm) of their bounding cubes.
class VoxelGrid {
 public:
  VoxelGrid(std::set<VoxelCoord> occupied, double pitch_mm)
      : occupied_(std::move(occupied)), pitch_(pitch_mm) {
    if (occupied_.empty()) throw InvalidArgument("voxel grid must contain at least one voxel");
    if (!(pitch_ > 0.0) || !std::isfinite(pitch_)) throw InvalidArgument("voxel pitch must be positive");
  }

  /// nx*ny*nz box with its minimum corner at the origin.
  static VoxelGrid box(int nx, int ny, int nz, double pitch_mm) {
    std::set<VoxelCoord> cells;
    for (int x = 0; x < nx; ++x)
      for (int y = 0; y < ny; ++y)
        for (int z = 0; z < nz; ++z) cells.insert({x, y, z});
    return VoxelGrid(std::move(cells), pitch_mm);
  }

  const std::set<VoxelCoord>& occupied() const noexcept { return occupied_; }
  double pitch() const noexcept { return pitch_; }
  bool contains(const VoxelCoord& v) const { return occupied_.count(v) != 0; }
  std::size_t size() const noexcept { return occupied_.size(); }

 private:
  std::set<VoxelCoord> occupied_;
  double pitch_;
};

/// Occupied voxels whose face-center set contains `key`. The host on whose +face
/// the node lies comes first.
inline std::vector<NodeRef> hosts(const NodeKey& key, const VoxelGrid& grid) {
  if (!key.valid()) throw InvalidArgument("invalid node key " + key.str());
  const int t = key.type();
  std::vector<NodeRef> out;
  VoxelCoord base{};
  for (std::size_t a = 0; a < 3; ++a) {
    // odd coordinates: (h-1)/2 is exact
    base[a] = (key.h[a] - 1) / 2;
  }
  const auto ti = static_cast<std::size_t>(t);
  VoxelCoord plus = base;   // node is this voxel's +e_t face
  plus[ti] = (key.h[ti] - 2) / 2;
  VoxelCoord minus = base;  // node is this voxel's -e_t face
  minus[ti] = key.h[ti] / 2;
  if (grid.contains(plus)) out.push_back({plus, t});
  if (grid.contains(minus)) out.push_back({minus, t + 3});
  return out;
}

inline Vec3 node_position(const NodeKey& key, double pitch_mm) {
  if (!(pitch_mm > 0.0)) throw InvalidArgument("pitch must be positive");
  const double half = 0.5 * pitch_mm;
  return {half * key.h[0], half * key.h[1], half * key.h[2]};
}

struct Beam {
  NodeKey a;
  NodeKey b;
};

/// Deduplicated node set (sorted) plus the 12 beams of each voxel.
class Lattice {
 public:
  explicit Lattice(VoxelGrid grid) : grid_(std::move(grid)) {
    std::set<NodeKey> keys;
    for (const auto& v : grid_.occupied()) {
      std::array<NodeKey, kNodesPerVoxel> local;
      for (int n = 0; n < kNodesPerVoxel; ++n) {
        local[static_cast<std::size_t>(n)] = canonical_node_key({v, n});
        keys.insert(local[static_cast<std::size_t>(n)]);
      }
      // every pair of nodes except the three antipodal pairs
      for (int i = 0; i < kNodesPerVoxel; ++i) {
        for (int j = i + 1; j < kNodesPerVoxel; ++j) {
          if (j == i + 3) continue;
          beams_.push_back({local[static_cast<std::size_t>(i)], local[static_cast<std::size_t>(j)]});
        }
      }
    }
    nodes_.assign(keys.begin(), keys.end());
    for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i], i);
  }

  const VoxelGrid& grid() const noexcept { return grid_; }
  double pitch() const noexcept { return grid_.pitch(); }
  const std::vector<NodeKey>& nodes() const noexcept { return nodes_; }
  const std::vector<Beam>& beams() const noexcept { return beams_; }

  bool contains(const NodeKey& key) const { return index_.count(key) != 0; }

  std::size_t index_of(const NodeKey& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) throw InvalidArgument("node " + key.str() + " is not in the lattice");
    return it->second;
  }

  Vec3 position(const NodeKey& key) const { return node_position(key, pitch()); }

  double beam_length() const noexcept { return pitch() / std::sqrt(2.0); }

 private:
  VoxelGrid grid_;
  std::vector<NodeKey> nodes_;
  std::map<NodeKey, std::size_t> index_;
  std::vector<Beam> beams_;
};

inline Lattice build_lattice(const VoxelGrid& grid) { return Lattice(grid); }

}  // namespace voxpom
