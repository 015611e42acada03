#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "blapose/error.hpp"

namespace blapose {

// J x 3 joint positions in meters; row i is joint i.
using Pose = Eigen::Matrix<double, Eigen::Dynamic, 3>;
// (J-1) bone lengths; entry b-1 belongs to bone b (child joint b -> parent).
using BoneLengths = Eigen::VectorXd;
// (J-1) x 3 unit vectors, same row convention as BoneLengths.
using BoneDirections = Eigen::Matrix<double, Eigen::Dynamic, 3>;

inline constexpr double kDegenerateBoneLength = 1e-12;
inline constexpr double kUnitTolerance = 1e-6;

struct BoneDecomposition {
  BoneLengths lengths;
  BoneDirections directions;
};

// Joint tree in topological order. Bones are named by their child joint, so
// bone b (1 <= b < J) is the edge b -> parents[b].
class SkeletonTopology {
 public:
  SkeletonTopology() = default;

  SkeletonTopology(std::vector<int> parents, std::vector<std::string> bone_names,
                   std::vector<std::pair<int, int>> symmetry_pairs)
      : parents_(std::move(parents)),
        bone_names_(std::move(bone_names)),
        symmetry_pairs_(std::move(symmetry_pairs)) {
    validate();
  }

  // The 17-joint Human3.6M skeleton with the pelvis as root.
  static SkeletonTopology h36m17() {
    return SkeletonTopology(
        {-1, 0, 1, 2, 0, 4, 5, 0, 7, 8, 9, 8, 11, 12, 8, 14, 15},
        {"r_hip", "r_thigh", "r_shin", "l_hip", "l_thigh", "l_shin", "spine", "thorax", "neck",
         "head", "l_shoulder", "l_upper_arm", "l_forearm", "r_shoulder", "r_upper_arm",
         "r_forearm"},
        {{1, 4}, {2, 5}, {3, 6}, {11, 14}, {12, 15}, {13, 16}});
  }

  static SkeletonTopology from_json(const nlohmann::json& j) {
    try {
      const int joint_count = j.at("joint_count").get<int>();
      auto parents = j.at("parents").get<std::vector<int>>();
      auto names = j.at("bone_names").get<std::vector<std::string>>();
      std::vector<std::pair<int, int>> pairs;
      for (const auto& p : j.at("symmetry_pairs")) {
        if (!p.is_array() || p.size() != 2) throw SchemaError("symmetry pair must be [int,int]");
        pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
      }
      if (static_cast<int>(parents.size()) != joint_count)
        throw SchemaError("topology: parents length does not match joint_count");
      return SkeletonTopology(std::move(parents), std::move(names), std::move(pairs));
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("topology: ") + e.what());
    }
  }

  static SkeletonTopology load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open topology file " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path.string() + ": " + e.what());
    }
    return from_json(j);
  }

  nlohmann::json to_json() const {
    nlohmann::json pairs = nlohmann::json::array();
    for (auto [a, b] : symmetry_pairs_) pairs.push_back({a, b});
    return {{"joint_count", joint_count()},
            {"parents", parents_},
            {"bone_names", bone_names_},
            {"symmetry_pairs", pairs}};
  }

  int joint_count() const noexcept { return static_cast<int>(parents_.size()); }
  int bone_count() const noexcept { return joint_count() - 1; }
  int parent(int joint) const { return parents_.at(joint); }
  const std::vector<int>& parents() const noexcept { return parents_; }
  const std::vector<std::string>& bone_names() const noexcept { return bone_names_; }
  const std::vector<std::pair<int, int>>& symmetry_pairs() const noexcept {
    return symmetry_pairs_;
  }

  // For every joint, the joint it maps to under a left/right mirror.
  // Bone pairs (a, b) swap child joints a and b.
  std::vector<int> joint_mirror() const {
    std::vector<int> mirror(parents_.size());
    for (int i = 0; i < joint_count(); ++i) mirror[i] = i;
    for (auto [a, b] : symmetry_pairs_) std::swap(mirror[a], mirror[b]);
    return mirror;
  }

  // Counterpart bone of each bone (itself when unpaired), 1-based as usual;
  // entry 0 is unused.
  std::vector<int> bone_partner() const { return joint_mirror(); }

  friend bool operator==(const SkeletonTopology&, const SkeletonTopology&) = default;

 private:
  void validate() const {
    if (parents_.empty()) throw ValidationError("topology: no joints");
    if (parents_[0] != -1) throw ValidationError("topology: joint 0 must be the root (-1)");
    for (int i = 1; i < joint_count(); ++i) {
      if (parents_[i] < 0 || parents_[i] >= i)
        throw ValidationError("topology: parents[" + std::to_string(i) +
                              "] must satisfy 0 <= parent < " + std::to_string(i));
    }
    if (static_cast<int>(bone_names_.size()) != bone_count())
      throw ValidationError("topology: expected " + std::to_string(bone_count()) +
                            " bone names");
    std::vector<bool> used(parents_.size(), false);
    for (auto [a, b] : symmetry_pairs_) {
      for (int bone : {a, b}) {
        if (bone < 1 || bone >= joint_count())
          throw ValidationError("topology: symmetry pair references bone " +
                                std::to_string(bone));
        if (used[bone])
          throw ValidationError("topology: bone " + std::to_string(bone) +
                                " appears in more than one symmetry pair");
        used[bone] = true;
      }
      if (a == b) throw ValidationError("topology: bone paired with itself");
    }
  }

  std::vector<int> parents_;
  std::vector<std::string> bone_names_;
  std::vector<std::pair<int, int>> symmetry_pairs_;
};

inline void check_pose(const Pose& pose, const SkeletonTopology& topo) {
  if (pose.rows() != topo.joint_count())
    throw DimensionMismatch("pose joint count", topo.joint_count(), pose.rows());
}

inline BoneDecomposition decompose_pose(const Pose& pose, const SkeletonTopology& topo) {
  check_pose(pose, topo);
  const int bones = topo.bone_count();
  BoneDecomposition out{BoneLengths(bones), BoneDirections(bones, 3)};
  for (int b = 1; b <= bones; ++b) {
    const Eigen::RowVector3d offset = pose.row(b) - pose.row(topo.parent(b));
    const double len = offset.norm();
    if (!(len >= kDegenerateBoneLength)) throw DegenerateBone(b);
    out.lengths(b - 1) = len;
    out.directions.row(b - 1) = offset / len;
  }
  return out;
}

inline Pose reconstruct_pose(const BoneLengths& lengths, const BoneDirections& dirs,
                             const Eigen::Vector3d& root, const SkeletonTopology& topo) {
  const int bones = topo.bone_count();
  if (lengths.size() != bones) throw DimensionMismatch("bone lengths", bones, lengths.size());
  if (dirs.rows() != bones) throw DimensionMismatch("bone directions", bones, dirs.rows());
  for (int b = 0; b < bones; ++b) {
    if (std::abs(dirs.row(b).norm() - 1.0) > kUnitTolerance)
      throw ValidationError("bone direction " + std::to_string(b + 1) + " is not a unit vector");
  }
  Pose pose(topo.joint_count(), 3);
  pose.row(0) = root.transpose();
  for (int b = 1; b <= bones; ++b)
    pose.row(b) = pose.row(topo.parent(b)) + lengths(b - 1) * dirs.row(b - 1);
  return pose;
}

inline Pose replace_lengths(const Pose& pose, const BoneLengths& new_lengths,
                            const SkeletonTopology& topo) {
  const auto parts = decompose_pose(pose, topo);
  return reconstruct_pose(new_lengths, parts.directions, pose.row(0).transpose(), topo);
}

// Lengths only; cheaper than a full decomposition and never throws on
// degenerate bones.
inline BoneLengths bone_lengths_of(const Pose& pose, const SkeletonTopology& topo) {
  check_pose(pose, topo);
  BoneLengths out(topo.bone_count());
  for (int b = 1; b < topo.joint_count(); ++b)
    out(b - 1) = (pose.row(b) - pose.row(topo.parent(b))).norm();
  return out;
}

}  // namespace blapose
