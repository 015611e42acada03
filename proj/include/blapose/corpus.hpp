#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "blapose/augmentation.hpp"
#include "blapose/camera.hpp"
#include "blapose/error.hpp"
#include "blapose/evaluation.hpp"
#include "blapose/random.hpp"
#include "blapose/sequence.hpp"
#include "blapose/skeleton.hpp"

namespace blapose {

// Low-dimensional body-shape model for the 17-joint skeleton. Bone lengths
// are mean * exp(sum_k beta_k * basis_k) with beta ~ N(0, I); every basis
// vector treats left and right alike, so sampled bodies are symmetric.
// Bodies can also be dressed in a coarse "mesh" (a ring of vertices around
// each joint) to exercise mesh -> joint regression.
class BodyShapeModel {
 public:
  static constexpr int kRingVertices = 8;

  BodyShapeModel() : BodyShapeModel(SkeletonTopology::h36m17()) {}

  explicit BodyShapeModel(const SkeletonTopology& topo) : topo_(topo) {
    if (topo.joint_count() != 17)
      throw ValidationError("the built-in body model covers the 17-joint skeleton only");
    mean_.resize(16);
    // r_hip r_thigh r_shin l_hip l_thigh l_shin spine thorax neck head
    // l_shoulder l_upper_arm l_forearm r_shoulder r_upper_arm r_forearm
    mean_ << 0.133, 0.454, 0.445, 0.133, 0.454, 0.445, 0.233, 0.257, 0.121, 0.115, 0.151, 0.279,
        0.250, 0.151, 0.279, 0.250;
    auto component = [&](double scale, std::initializer_list<int> bones) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(16);
      for (int b : bones) v(b - 1) = scale;
      basis_.push_back(v);
    };
    component(0.01, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16});  // stature
    component(0.06, {2, 3, 5, 6});                                               // legs
    component(0.07, {7, 8});                                                     // torso
    component(0.07, {12, 15});                                                   // upper arms
    component(0.05, {13, 16});                                                   // forearms
    component(0.10, {1, 4});                                                     // hip width
    component(0.08, {11, 14});                                                   // shoulder width
    component(0.06, {9, 10});                                                    // neck and head
    Eigen::VectorXd knee = Eigen::VectorXd::Zero(16);                            // knee height
    knee << 0, 0.05, -0.05, 0, 0.05, -0.05, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0;
    basis_.push_back(knee);

    rest_dirs_.resize(16, 3);
    // Camera-style axes: x right, y down, z away from the camera.
    const Eigen::RowVector3d right(-1, 0, 0), left(1, 0, 0), down(0, 1, 0), up(0, -1, 0);
    rest_dirs_ << right, down, down, left, down, down, up, up,
        Eigen::RowVector3d(0, -1, -0.2).normalized(), up, left, down, down, right, down, down;
  }

  const SkeletonTopology& topology() const noexcept { return topo_; }
  const BoneLengths& mean_lengths() const noexcept { return mean_; }
  const BoneDirections& rest_directions() const noexcept { return rest_dirs_; }
  int shape_dims() const noexcept { return static_cast<int>(basis_.size()); }

  BoneLengths lengths(const Eigen::VectorXd& beta) const {
    Eigen::VectorXd log_scale = Eigen::VectorXd::Zero(16);
    for (int k = 0; k < shape_dims(); ++k) log_scale += beta(k) * basis_[k];
    return mean_.cwiseProduct(log_scale.array().exp().matrix());
  }

  BoneLengths sample_lengths(Rng& rng) const {
    Eigen::VectorXd beta(shape_dims());
    for (int k = 0; k < shape_dims(); ++k) beta(k) = rng.normal(0.0, 1.0);
    return lengths(beta);
  }

  Pose rest_pose(const BoneLengths& lengths) const {
    return reconstruct_pose(lengths, rest_dirs_, Eigen::Vector3d::Zero(), topo_);
  }

  // J * kRingVertices vertices: a ring in the sagittal (y-z) plane around
  // each joint whose radius is scaled by 1 + N(0, tissue_sd). Left and right
  // joints share one draw, so a mirrored body yields a mirrored mesh.
  Eigen::MatrixXd mesh(const Pose& joints, Rng& rng, double tissue_sd = 0.0) const {
    const auto mirror = topo_.joint_mirror();
    std::vector<double> tissue(static_cast<std::size_t>(joints.rows()), 1.0);
    for (Eigen::Index j = 0; j < joints.rows(); ++j) {
      const auto m = static_cast<std::size_t>(mirror[static_cast<std::size_t>(j)]);
      tissue[static_cast<std::size_t>(j)] =
          m < static_cast<std::size_t>(j) ? tissue[m] : 1.0 + rng.normal(0.0, tissue_sd);
    }
    Eigen::MatrixXd v(joints.rows() * kRingVertices, 3);
    for (Eigen::Index j = 0; j < joints.rows(); ++j) {
      const double r = ring_radius(static_cast<int>(j)) * tissue[static_cast<std::size_t>(j)];
      for (int k = 0; k < kRingVertices; ++k) {
        const double angle = 2.0 * M_PI * k / kRingVertices;
        v.row(j * kRingVertices + k) =
            joints.row(j) + Eigen::RowVector3d(0.0, r * std::cos(angle), r * std::sin(angle));
      }
    }
    return v;
  }

  // Convex joint regressor over mesh(). With bias 0 each joint is the mean
  // of its ring, which recovers the joint exactly; with bias > 0 weight
  // shifts toward one ring vertex per joint (the same one for left and right
  // counterparts), the way surface-derived joints drift from marker-derived
  // ones.
  Eigen::MatrixXd regressor(double bias = 0.0) const {
    static constexpr std::array<int, 17> pull{0, 0, 2, 4, 0, 2, 4, 6, 1, 3, 5, 7, 0, 2, 7, 0, 2};
    const int joints = topo_.joint_count();
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(joints, joints * kRingVertices);
    for (int j = 0; j < joints; ++j) {
      for (int k = 0; k < kRingVertices; ++k) r(j, j * kRingVertices + k) = (1.0 - bias) / kRingVertices;
      r(j, j * kRingVertices + pull[static_cast<std::size_t>(j)]) += bias;
    }
    return r;
  }

 private:
  static double ring_radius(int joint) {
    static constexpr std::array<double, 17> radii{0.12, 0.08, 0.05, 0.04, 0.08, 0.05, 0.04, 0.11, 0.10,
                                                  0.05, 0.08, 0.05, 0.04, 0.03, 0.05, 0.04, 0.03};
    return radii[static_cast<std::size_t>(joint)];
  }

  SkeletonTopology topo_;
  BoneLengths mean_;
  std::vector<Eigen::VectorXd> basis_;
  BoneDirections rest_dirs_;
};

// Bank of lengths regressed from sampled body meshes.
inline LengthBank synthetic_mesh_bank(const BodyShapeModel& model, long count, double regressor_bias,
                                      double tissue_sd, Rng& rng) {
  if (count < 1) throw ValidationError("bank size must be positive");
  const Eigen::MatrixXd reg = model.regressor(regressor_bias);
  Eigen::MatrixXd samples(count, model.topology().bone_count());
  for (long s = 0; s < count; ++s) {
    const Pose rest = model.rest_pose(model.sample_lengths(rng));
    const Eigen::MatrixXd mesh = model.mesh(rest, rng, tissue_sd);
    samples.row(s) = regress_joints_from_mesh(mesh, reg, model.topology()).transpose();
  }
  return LengthBank(std::move(samples), "synthetic-mesh");
}

struct CorpusConfig {
  int train_sequences = 200;
  int test_sequences = 40;
  int frames = 600;
  double angular_step = 0.05;  // max per-frame rotation of each bone (rad)
  double noise_px = 0.0;       // 2D Gaussian detector noise
  double fps = 50.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (train_sequences < 0 || test_sequences < 0) throw ValidationError("corpus: negative sequence count");
    if (frames < 1) throw ValidationError("corpus: frames must be >= 1");
    if (!(angular_step >= 0.0 && angular_step <= 0.05))
      throw ValidationError("corpus: angular_step must lie in [0, 0.05]");
    if (!(noise_px >= 0.0)) throw ValidationError("corpus: noise must be >= 0");
  }
};

struct CorpusSequence {
  PoseSequence poses;          // camera space, meters
  KeypointSequence keypoints;  // pixels
  BoneLengths lengths;         // ground truth
};

struct Corpus {
  std::vector<CorpusSequence> train;
  std::vector<CorpusSequence> test;
};

namespace detail {

inline Eigen::Vector3d random_unit(Rng& rng) {
  Eigen::Vector3d v;
  do {
    v = Eigen::Vector3d(rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1));
  } while (v.norm() < 1e-12);
  return v.normalized();
}

inline Eigen::Matrix3d axis_angle(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

// Per-action motion intensity as a fraction of the maximum angular step.
inline double action_activity(int action) {
  static constexpr std::array<double, 15> activity{0.5, 0.6, 0.4, 0.7, 0.4, 0.5, 0.5, 0.6,
                                                   0.3, 0.4, 0.4, 0.5, 0.9, 1.0, 0.9};
  return activity[static_cast<std::size_t>(action % 15)];
}

inline CorpusSequence make_sequence(const BodyShapeModel& body, const CameraIntrinsics& cam,
                                    const CorpusConfig& cfg, const SequenceInfo& info, int action,
                                    Rng& rng) {
  const auto& topo = body.topology();
  CorpusSequence seq;
  seq.lengths = body.sample_lengths(rng);

  // Starting directions: rest pose, each bone tilted a little, then the whole
  // body turned about the vertical axis.
  BoneDirections dirs = body.rest_directions();
  const Eigen::Matrix3d yaw = axis_angle(Eigen::Vector3d::UnitY(), rng.uniform(-M_PI, M_PI));
  for (Eigen::Index b = 0; b < dirs.rows(); ++b) {
    const Eigen::Vector3d tilted =
        axis_angle(random_unit(rng), rng.uniform(0.0, 0.4)) * dirs.row(b).transpose();
    dirs.row(b) = (yaw * tilted).normalized().transpose();
  }
  const Eigen::Vector3d root(rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3), rng.uniform(4.5, 5.5));
  const double step = cfg.angular_step * action_activity(action);

  seq.poses.info = info;
  seq.poses.frames.reserve(static_cast<std::size_t>(cfg.frames));
  for (int t = 0; t < cfg.frames; ++t) {
    if (t > 0 && step > 0.0) {
      for (Eigen::Index b = 0; b < dirs.rows(); ++b) {
        const Eigen::Vector3d d =
            axis_angle(random_unit(rng), rng.uniform(0.0, step)) * dirs.row(b).transpose();
        dirs.row(b) = d.normalized().transpose();
      }
    }
    seq.poses.frames.push_back(reconstruct_pose(seq.lengths, dirs, root, topo));
  }
  seq.keypoints = project_sequence(seq.poses, cam);
  if (cfg.noise_px > 0.0) {
    for (auto& f : seq.keypoints.frames)
      for (Eigen::Index j = 0; j < f.rows(); ++j) {
        f(j, 0) += rng.normal(0.0, cfg.noise_px);
        f(j, 1) += rng.normal(0.0, cfg.noise_px);
      }
  }
  return seq;
}

}  // namespace detail

// Desk-scale stand-in for a motion-capture dataset: bodies from the shape
// model, bone directions random-walking by at most `angular_step` per frame,
// projected through `cam`. Train subjects S1 S5 S6 S7 S8, test S9 S11,
// actions cycling through the 15 Human3.6M labels.
// Intrinsics of a typical Human3.6M camera; used when no camera file is given.
inline CameraIntrinsics h36m_like_camera() {
  CameraIntrinsics c;
  c.fx = 1145.04940458804;
  c.fy = 1143.78109572365;
  c.cx = 512.541504956548;
  c.cy = 515.4514869776;
  c.k1 = -0.207098910824901;
  c.k2 = 0.247775183068982;
  c.k3 = -0.00307515035078854;
  c.p1 = -0.00142447157470321;
  c.p2 = -0.000975698859470499;
  c.width = 1000;
  c.height = 1002;
  return c;
}

inline Corpus gen_synthetic_corpus(const CorpusConfig& cfg, const BodyShapeModel& body,
                                   const CameraIntrinsics& cam) {
  cfg.validate();
  cam.validate();
  static const std::array<const char*, 5> train_subjects{"S1", "S5", "S6", "S7", "S8"};
  static const std::array<const char*, 2> test_subjects{"S9", "S11"};
  Rng master(cfg.seed);
  Corpus corpus;
  auto build = [&](int count, const auto& subjects, const char* prefix,
                   std::vector<CorpusSequence>& out) {
    for (int i = 0; i < count; ++i) {
      Rng rng = master.split();
      const int action = i % 15;
      char name[32];
      std::snprintf(name, sizeof name, "%s%04d", prefix, i);
      SequenceInfo info{name, subjects[static_cast<std::size_t>(i / 15) % subjects.size()],
                        h36m_actions()[static_cast<std::size_t>(action)].first, "cam0", cfg.fps};
      out.push_back(detail::make_sequence(body, cam, cfg, info, action, rng));
    }
  };
  build(cfg.train_sequences, train_subjects, "train", corpus.train);
  build(cfg.test_sequences, test_subjects, "test", corpus.test);
  return corpus;
}

// Per-bone mean and population standard deviation of the corpus bodies.
inline LengthBank corpus_length_bank(const std::vector<CorpusSequence>& seqs) {
  if (seqs.empty()) throw ValidationError("no sequences");
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(seqs.size()), seqs.front().lengths.size());
  for (std::size_t i = 0; i < seqs.size(); ++i) samples.row(static_cast<Eigen::Index>(i)) = seqs[i].lengths.transpose();
  return LengthBank(std::move(samples), "dataset");
}

}  // namespace blapose
