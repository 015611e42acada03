#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "blapose/error.hpp"
#include "blapose/skeleton.hpp"

namespace blapose {

// J x 2 pixel (or normalized) keypoints of one frame.
using Keypoints = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct SequenceInfo {
  std::string name;
  std::string subject;
  std::string action;
  std::string camera;
  double fps = 50.0;

  friend bool operator==(const SequenceInfo&, const SequenceInfo&) = default;
};

struct PoseSequence {
  SequenceInfo info;
  std::vector<Pose> frames;

  long size() const noexcept { return static_cast<long>(frames.size()); }
};

struct KeypointSequence {
  SequenceInfo info;
  std::vector<Keypoints> frames;
  // Empty, or one J-vector per frame with entries in [0, 1].
  std::vector<Eigen::VectorXd> confidence;

  long size() const noexcept { return static_cast<long>(frames.size()); }
  int joint_count() const noexcept {
    return frames.empty() ? 0 : static_cast<int>(frames.front().rows());
  }
};

// Row-major flattening (u0, v0, u1, v1, ...) used as the model input vector.
inline Eigen::VectorXd flatten(const Keypoints& kp) {
  Eigen::VectorXd x(kp.rows() * 2);
  for (Eigen::Index j = 0; j < kp.rows(); ++j) {
    x(2 * j) = kp(j, 0);
    x(2 * j + 1) = kp(j, 1);
  }
  return x;
}

// N x 2J matrix, one flattened frame per row.
inline Eigen::MatrixXd to_matrix(const KeypointSequence& seq) {
  if (seq.frames.empty()) return {};
  Eigen::MatrixXd out(seq.size(), seq.joint_count() * 2);
  for (long t = 0; t < seq.size(); ++t) out.row(t) = flatten(seq.frames[t]).transpose();
  return out;
}

inline Pose root_relative(const Pose& pose) {
  Pose out = pose;
  out.rowwise() -= pose.row(0);
  return out;
}

}  // namespace blapose
