#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "blapose/error.hpp"
#include "blapose/evaluation.hpp"
#include "blapose/length_model.hpp"
#include "blapose/metrics.hpp"
#include "blapose/random.hpp"
#include "blapose/sequence.hpp"
#include "blapose/skeleton.hpp"

namespace blapose {

// Stand-in lifting model: an affine map from a (2w+1)-frame window of
// normalized keypoints to the J-1 non-root joints, root-relative. The root
// is pinned at the origin. Windows at the ends replicate the edge frame.
class ToyLifter {
 public:
  ToyLifter() = default;
  ToyLifter(int joints, int half_width)
      : joints_(joints), half_width_(half_width),
        weights_(Eigen::MatrixXd::Zero(3 * (joints - 1), window_dim(joints, half_width) + 1)) {
    if (joints < 2 || half_width < 0) throw ValidationError("toy lifter: bad dimensions");
  }

  static int window_dim(int joints, int half_width) { return (2 * half_width + 1) * 2 * joints; }

  int joints() const noexcept { return joints_; }
  int half_width() const noexcept { return half_width_; }
  // 3(J-1) x (window_dim + 1); last column is the bias.
  Eigen::MatrixXd& weights() noexcept { return weights_; }
  const Eigen::MatrixXd& weights() const noexcept { return weights_; }

  // Feature vector [window; 1] for frame t of an N x 2J input.
  Eigen::VectorXd features(const Eigen::MatrixXd& frames, long t) const {
    const long n = frames.rows();
    const int width = 2 * joints_;
    Eigen::VectorXd f(window_dim(joints_, half_width_) + 1);
    for (int k = -half_width_; k <= half_width_; ++k) {
      const long src = std::clamp(t + k, 0L, n - 1);
      f.segment(static_cast<Eigen::Index>(k + half_width_) * width, width) = frames.row(src).transpose();
    }
    f(f.size() - 1) = 1.0;
    return f;
  }

  static Pose unflatten(const Eigen::VectorXd& y, int joints) {
    Pose p = Pose::Zero(joints, 3);
    for (int j = 1; j < joints; ++j) p.row(j) = y.segment(3 * (j - 1), 3).transpose();
    return p;
  }

  static Eigen::VectorXd flatten_pose(const Pose& rel) {
    Eigen::VectorXd y(3 * (rel.rows() - 1));
    for (Eigen::Index j = 1; j < rel.rows(); ++j) y.segment(3 * (j - 1), 3) = rel.row(j).transpose();
    return y;
  }

  Pose lift_frame(const Eigen::MatrixXd& frames, long t) const {
    return unflatten(weights_ * features(frames, t), joints_);
  }

  PoseSequence lift(const Eigen::MatrixXd& frames, const SequenceInfo& info = {}) const {
    if (frames.cols() != 2 * joints_) throw DimensionMismatch("lifter input width", 2 * joints_, frames.cols());
    PoseSequence out;
    out.info = info;
    out.frames.reserve(static_cast<std::size_t>(frames.rows()));
    for (long t = 0; t < frames.rows(); ++t) out.frames.push_back(lift_frame(frames, t));
    return out;
  }

 private:
  int joints_ = 0;
  int half_width_ = 0;
  Eigen::MatrixXd weights_;
};

// One training/evaluation sequence for the lifter.
struct LiftSample {
  Eigen::MatrixXd inputs;  // N x 2J normalized keypoints
  PoseSequence truth;      // 3D poses (any root position; made root-relative internally)
};

// Ridge-regularized least squares on root-relative targets.
inline ToyLifter fit_toy_lifter(const std::vector<LiftSample>& data, int joints, int half_width,
                                double ridge = 1e-6) {
  ToyLifter lifter(joints, half_width);
  const Eigen::Index dim = lifter.weights().cols();
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(dim, lifter.weights().rows());
  long frames = 0;
  for (const auto& s : data) {
    if (s.inputs.rows() != s.truth.size()) throw DimensionMismatch("lift sample frame count");
    for (long t = 0; t < s.inputs.rows(); ++t) {
      const Eigen::VectorXd f = lifter.features(s.inputs, t);
      gram.selfadjointView<Eigen::Lower>().rankUpdate(f);
      cross.noalias() += f * ToyLifter::flatten_pose(root_relative(s.truth.frames[t])).transpose();
      ++frames;
    }
  }
  if (frames == 0) throw ValidationError("toy lifter: no training frames");
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += ridge * static_cast<double>(frames);
  lifter.weights() = gram.ldlt().solve(cross).transpose();
  return lifter;
}

// ---- fine-tuning ------------------------------------------------------------

// Per-frame fine-tuning objective on the lifter output `rel` (root at 0):
// direction loss of the lifted bones plus MPJPE (meters) of the pose rebuilt
// from those directions and the fixed `lengths`.
struct FrameLoss {
  double loss = 0.0;
  Pose grad;  // d loss / d rel, root row zero
};

inline FrameLoss adjusted_frame_loss(const Pose& rel, const Pose& truth_rel, const BoneLengths& lengths,
                                     const SkeletonTopology& topo) {
  const int joints = topo.joint_count();
  const int bones = topo.bone_count();
  const auto pred = decompose_pose(rel, topo);
  const auto gt = decompose_pose(truth_rel, topo);
  const Pose rebuilt = reconstruct_pose(lengths, pred.directions, Eigen::Vector3d::Zero(), topo);

  FrameLoss out{0.0, Pose::Zero(joints, 3)};
  BoneDirections dd = BoneDirections::Zero(bones, 3);

  // Direction term.
  for (int b = 0; b < bones; ++b) {
    const Eigen::RowVector3d e = pred.directions.row(b) - gt.directions.row(b);
    const double n = e.norm();
    out.loss += n / bones;
    if (n > 0.0) dd.row(b) += e / (n * bones);
  }
  // Position term on the rebuilt pose; subtree sums carry each joint's
  // gradient up to every bone on its root path.
  Pose subtree = Pose::Zero(joints, 3);
  for (int j = 0; j < joints; ++j) {
    const Eigen::RowVector3d e = rebuilt.row(j) - truth_rel.row(j);
    const double n = e.norm();
    out.loss += n / joints;
    if (n > 0.0) subtree.row(j) = e / (n * joints);
  }
  for (int j = joints - 1; j >= 1; --j) subtree.row(topo.parent(j)) += subtree.row(j);
  for (int b = 1; b <= bones; ++b) dd.row(b - 1) += lengths(b - 1) * subtree.row(b);

  // Through the normalization d = v / |v|.
  for (int b = 1; b <= bones; ++b) {
    const Eigen::RowVector3d d = pred.directions.row(b - 1);
    const Eigen::RowVector3d g = dd.row(b - 1);
    const Eigen::RowVector3d dv = (g - d * d.dot(g)) / pred.lengths(b - 1);
    out.grad.row(b) += dv;
    out.grad.row(topo.parent(b)) -= dv;
  }
  out.grad.row(0).setZero();
  return out;
}

struct FinetuneSample {
  Eigen::MatrixXd inputs;  // N x 2J normalized keypoints
  PoseSequence truth;
  BoneLengths lengths;     // frozen length-model prediction for the sequence
};

// Mean per-frame objective over a set of (sequence, frame) pairs and its
// gradient w.r.t. the lifter weights.
inline double finetune_loss_and_gradient(const ToyLifter& lifter,
                                         const std::vector<FinetuneSample>& data,
                                         const std::vector<std::pair<std::size_t, long>>& frames,
                                         const SkeletonTopology& topo, Eigen::MatrixXd* grad) {
  if (grad) *grad = Eigen::MatrixXd::Zero(lifter.weights().rows(), lifter.weights().cols());
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(frames.size());
  for (const auto& [s, t] : frames) {
    const auto& sample = data[s];
    const Eigen::VectorXd f = lifter.features(sample.inputs, t);
    const Pose rel = ToyLifter::unflatten(lifter.weights() * f, lifter.joints());
    const FrameLoss fl =
        adjusted_frame_loss(rel, root_relative(sample.truth.frames[t]), sample.lengths, topo);
    loss += fl.loss * inv;
    if (grad) grad->noalias() += (inv * ToyLifter::flatten_pose(fl.grad)) * f.transpose();
  }
  return loss;
}

struct FinetuneConfig {
  double learning_rate = 4e-5;
  double lr_decay = 0.95;
  int batch_size = 1024;
  int epochs = 5;
  std::uint64_t seed = 0;
};

struct FinetuneResult {
  ToyLifter lifter;
  std::vector<double> epoch_loss;
};

// The length model is frozen: its per-sequence predictions are computed once
// by the caller and enter the objective as constants.
inline FinetuneResult finetune_toy_lifter(ToyLifter lifter, const std::vector<FinetuneSample>& data,
                                          const FinetuneConfig& cfg, const SkeletonTopology& topo) {
  if (data.empty()) throw ValidationError("finetune: empty dataset");
  std::vector<std::pair<std::size_t, long>> all;
  for (std::size_t s = 0; s < data.size(); ++s)
    for (long t = 0; t < data[s].inputs.rows(); ++t) all.emplace_back(s, t);
  Rng rng(cfg.seed ^ 0xf1e7ULL);
  Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(lifter.weights().data(), lifter.weights().size());
  Adam adam(flat.size(), 0.9, 0.999, 1e-8);
  FinetuneResult result;
  long batch_index = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(all.begin(), all.end(), rng.engine());
    const double lr = cfg.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(epoch));
    double sum = 0.0;
    for (std::size_t start = 0; start < all.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::vector<std::pair<std::size_t, long>> batch(
          all.begin() + static_cast<long>(start),
          all.begin() + static_cast<long>(std::min(all.size(), start + static_cast<std::size_t>(cfg.batch_size))));
      Eigen::MatrixXd grad;
      const double loss = finetune_loss_and_gradient(lifter, data, batch, topo, &grad);
      if (!std::isfinite(loss) || !grad.allFinite()) throw NonFiniteLoss(batch_index);
      adam.step(flat, Eigen::Map<const Eigen::VectorXd>(grad.data(), grad.size()), lr);
      lifter.weights() = Eigen::Map<const Eigen::MatrixXd>(flat.data(), lifter.weights().rows(),
                                                           lifter.weights().cols());
      sum += loss * static_cast<double>(batch.size());
      ++batch_index;
    }
    result.epoch_loss.push_back(sum / static_cast<double>(all.size()));
  }
  result.lifter = std::move(lifter);
  return result;
}

// Adjusted Protocol-1 error of a lifter: lift, replace lengths, MPJPE (mm)
// averaged over all frames.
inline double adjusted_mpjpe(const ToyLifter& lifter, const std::vector<FinetuneSample>& data,
                             const SkeletonTopology& topo) {
  double sum = 0.0;
  long n = 0;
  for (const auto& s : data) {
    const PoseSequence adjusted = adjust_poses(lifter.lift(s.inputs), s.lengths, topo);
    for (long t = 0; t < adjusted.size(); ++t) {
      sum += mpjpe(root_relative(adjusted.frames[t]), root_relative(s.truth.frames[t]));
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

}  // namespace blapose
