#pragma once

#include <cmath>

#include <Eigen/Core>
#include <Eigen/SVD>

#include "blapose/error.hpp"
#include "blapose/skeleton.hpp"

namespace blapose {

inline constexpr double kMillimetersPerMeter = 1000.0;

inline void check_same_shape(const Pose& pred, const Pose& truth) {
  if (pred.rows() != truth.rows()) throw DimensionMismatch("joint count", truth.rows(), pred.rows());
  if (pred.rows() == 0) throw DimensionMismatch("poses must have at least one joint");
}

// Mean per-joint Euclidean distance in meters. Callers pass root-relative
// poses for Protocol 1.
inline double mpjpe_m(const Pose& pred, const Pose& truth) {
  check_same_shape(pred, truth);
  return (pred - truth).rowwise().norm().mean();
}

inline double mpjpe(const Pose& pred, const Pose& truth) {
  return kMillimetersPerMeter * mpjpe_m(pred, truth);
}

struct Similarity {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose apply(const Pose& p) const {
    Pose out = (scale * (p * rotation.transpose())).eval();
    out.rowwise() += translation.transpose();
    return out;
  }
};

// Least-squares similarity taking `from` onto `to` (closed form from the SVD
// of the centered cross-covariance). Rotations are proper unless
// allow_reflection is set.
inline Similarity align_similarity(const Pose& from, const Pose& to, bool allow_reflection = false) {
  check_same_shape(from, to);
  const Eigen::RowVector3d mu_from = from.colwise().mean();
  const Eigen::RowVector3d mu_to = to.colwise().mean();
  const Pose a = from.rowwise() - mu_from;
  const Pose b = to.rowwise() - mu_to;
  const double var_from = a.squaredNorm();
  if (!(var_from > 1e-300)) throw DegenerateConfiguration("prediction has zero spread");

  const Eigen::Matrix3d cov = b.transpose() * a;  // sum_i b_i a_i^T
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d sign = Eigen::Vector3d::Ones();
  if (!allow_reflection && (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0)
    sign(2) = -1.0;

  Similarity s;
  s.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
  s.scale = svd.singularValues().dot(sign) / var_from;
  s.translation = mu_to.transpose() - s.scale * s.rotation * mu_from.transpose();
  return s;
}

// Protocol 2: MPJPE after the optimal similarity alignment, in mm.
inline double p_mpjpe(const Pose& pred, const Pose& truth, bool allow_reflection = false) {
  check_same_shape(pred, truth);
  if (pred.rows() < 3) throw DimensionMismatch("P-MPJPE needs at least 3 joints");
  return mpjpe(align_similarity(pred, truth, allow_reflection).apply(pred), truth);
}

// Mean absolute bone-length difference in mm.
inline double bone_length_error(const BoneLengths& pred, const BoneLengths& truth) {
  if (pred.size() != truth.size()) throw DimensionMismatch("bone lengths", truth.size(), pred.size());
  if (pred.size() == 0) throw DimensionMismatch("bone lengths must be non-empty");
  return kMillimetersPerMeter * (pred - truth).cwiseAbs().mean();
}

// Mean Euclidean distance between corresponding unit bone directions.
inline double direction_loss(const BoneDirections& pred, const BoneDirections& truth) {
  if (pred.rows() != truth.rows()) throw DimensionMismatch("bone count", truth.rows(), pred.rows());
  if (pred.rows() == 0) throw DimensionMismatch("bone directions must be non-empty");
  return (pred - truth).rowwise().norm().mean();
}

// Direction loss plus position error (meters), both with weight one.
inline double total_loss(const Pose& pred, const Pose& truth, const SkeletonTopology& topo) {
  const auto dp = decompose_pose(pred, topo);
  const auto dt = decompose_pose(truth, topo);
  return direction_loss(dp.directions, dt.directions) + mpjpe_m(pred, truth);
}

}  // namespace blapose
