#pragma once

#include <cmath>

#include <blapose/blapose.hpp>

namespace testing_support {

using namespace blapose;

inline CameraIntrinsics h36m_camera() {
  return CameraIntrinsics::load(BLAPOSE_DATA_DIR "/camera.json");
}

// Random directions with lengths in [lo, hi], root anywhere in a unit cube.
inline Pose random_pose(const SkeletonTopology& topo, Rng& rng, double lo = 0.05, double hi = 0.5) {
  BoneLengths len(topo.bone_count());
  BoneDirections dirs(topo.bone_count(), 3);
  for (int b = 0; b < topo.bone_count(); ++b) {
    len(b) = rng.uniform(lo, hi);
    Eigen::Vector3d d;
    do d = rng.normal3(1.0); while (d.norm() < 1e-3);
    dirs.row(b) = d.normalized().transpose();
  }
  const Eigen::Vector3d root(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  return reconstruct_pose(len, dirs, root, topo);
}

inline Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Vector4d q(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
  return Eigen::Quaterniond(q.normalized()).toRotationMatrix();
}

// Three-joint chain 0 <- 1 <- 2 with one symmetric-free topology.
inline SkeletonTopology chain3() { return SkeletonTopology({-1, 0, 1}, {"a", "b"}, {}); }

}  // namespace testing_support
