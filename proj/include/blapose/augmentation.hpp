#pragma once

#include <cmath>
#include <concepts>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "blapose/camera.hpp"
#include "blapose/error.hpp"
#include "blapose/random.hpp"
#include "blapose/sequence.hpp"
#include "blapose/skeleton.hpp"

namespace blapose {

// Anything that can hand out uniform and normal draws. Rng is the production
// stream; tests substitute deterministic stubs.
template <typename R>
concept RandomSource = requires(R& r, double a, double b) {
  { r.uniform(a, b) } -> std::convertible_to<double>;
  { r.normal(a, b) } -> std::convertible_to<double>;
};

inline constexpr int kMaxResample = 100;

enum class LengthStrategy { uniform, normal, synthetic };

inline const char* to_string(LengthStrategy s) {
  switch (s) {
    case LengthStrategy::uniform: return "uniform";
    case LengthStrategy::normal: return "normal";
    case LengthStrategy::synthetic: return "synthetic";
  }
  return "?";
}

inline LengthStrategy parse_strategy(const std::string& s) {
  if (s == "uniform") return LengthStrategy::uniform;
  if (s == "normal") return LengthStrategy::normal;
  if (s == "synthetic") return LengthStrategy::synthetic;
  throw ValidationError("unknown length strategy '" + s + "'");
}

enum class MeanAlignment { additive, multiplicative };

struct AugmentationConfig {
  LengthStrategy strategy = LengthStrategy::synthetic;
  double uniform_range = 0.3;
  double shift_sigma = 0.5;
  bool enforce_symmetry = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(uniform_range > 0.0 && uniform_range < 1.0))
      throw ValidationError("augmentation: uniform_range must lie in (0, 1)");
    if (!(shift_sigma >= 0.0)) throw ValidationError("augmentation: shift_sigma must be >= 0");
  }
};

// S x (J-1) samples of plausible bone lengths plus their per-bone moments.
class LengthBank {
 public:
  LengthBank() = default;
  LengthBank(Eigen::MatrixXd samples, std::string source)
      : samples_(std::move(samples)), source_(std::move(source)) {
    if (samples_.rows() == 0 || samples_.cols() == 0) throw ValidationError("length bank is empty");
    if (!(samples_.array() > 0.0).all() || !samples_.allFinite())
      throw ValidationError("length bank contains non-positive or non-finite lengths");
    refresh_stats();
  }

  const Eigen::MatrixXd& samples() const noexcept { return samples_; }
  const std::string& source() const noexcept { return source_; }
  const BoneLengths& mean() const noexcept { return mean_; }
  // Population standard deviation per bone.
  const BoneLengths& stddev() const noexcept { return stddev_; }
  long size() const noexcept { return samples_.rows(); }
  int bone_count() const noexcept { return static_cast<int>(samples_.cols()); }

  BoneLengths sample(long row) const { return samples_.row(row).transpose(); }

 private:
  void refresh_stats() {
    mean_ = samples_.colwise().mean().transpose();
    const Eigen::MatrixXd centered = samples_.rowwise() - mean_.transpose();
    stddev_ = (centered.array().square().colwise().sum() / static_cast<double>(samples_.rows()))
                  .sqrt()
                  .transpose();
  }

  Eigen::MatrixXd samples_;
  std::string source_;
  BoneLengths mean_;
  BoneLengths stddev_;
};

namespace detail {

// Upper-indexed partner of each pair maps to the lower-indexed bone;
// everything else maps to itself. 1-based, entry 0 unused.
inline std::vector<int> symmetry_source(const SkeletonTopology& topo, bool enforce) {
  std::vector<int> src(topo.joint_count());
  for (int b = 0; b < topo.joint_count(); ++b) src[b] = b;
  if (enforce) {
    for (auto [a, b] : topo.symmetry_pairs()) src[std::max(a, b)] = std::min(a, b);
  }
  return src;
}

template <typename Draw>
BoneLengths generate_lengths(const SkeletonTopology& topo, bool enforce_symmetry, Draw&& draw) {
  const auto src = symmetry_source(topo, enforce_symmetry);
  BoneLengths out(topo.bone_count());
  for (int b = 1; b <= topo.bone_count(); ++b) {
    if (src[b] != b) {
      out(b - 1) = out(src[b] - 1);
      continue;
    }
    int tries = 0;
    double v = draw(b);
    while (!(v > 0.0)) {
      if (++tries >= kMaxResample)
        throw NonPositiveResult("bone " + std::to_string(b) + " stayed non-positive after " +
                                std::to_string(kMaxResample) + " draws");
      v = draw(b);
    }
    out(b - 1) = v;
  }
  return out;
}

}  // namespace detail

// l'_b = l_b + r_b * mean_b with r_b ~ U(-r_max, r_max). With symmetry on,
// the lower-indexed bone of each pair is drawn and its partner copies it.
template <RandomSource R>
BoneLengths gen_lengths_uniform(const BoneLengths& base, const BoneLengths& batch_mean,
                                const SkeletonTopology& topo, const AugmentationConfig& cfg,
                                R& rng) {
  if (base.size() != topo.bone_count() || batch_mean.size() != topo.bone_count())
    throw DimensionMismatch("bone lengths", topo.bone_count(), base.size());
  if (!(batch_mean.array() > 0.0).all()) throw ValidationError("batch mean must be positive");
  return detail::generate_lengths(topo, cfg.enforce_symmetry, [&](int b) {
    const double r = rng.uniform(-cfg.uniform_range, cfg.uniform_range);
    return base(b - 1) + r * batch_mean(b - 1);
  });
}

template <RandomSource R>
BoneLengths gen_lengths_normal(const BoneLengths& base, const BoneLengths& sigmas,
                               const SkeletonTopology& topo, const AugmentationConfig& cfg,
                               R& rng) {
  if (base.size() != topo.bone_count() || sigmas.size() != topo.bone_count())
    throw DimensionMismatch("bone lengths", topo.bone_count(), base.size());
  if (!(sigmas.array() >= 0.0).all()) throw ValidationError("sigmas must be non-negative");
  return detail::generate_lengths(
      topo, cfg.enforce_symmetry, [&](int b) { return rng.normal(base(b - 1), sigmas(b - 1)); });
}

// A uniformly chosen row of the bank.
inline BoneLengths gen_lengths_synthetic(const LengthBank& bank, Rng& rng) {
  return bank.sample(static_cast<long>(rng.index(static_cast<std::size_t>(bank.size()))));
}

// joints = regressor * mesh; regressor rows are convex vertex weights.
inline Pose regress_joints(const Eigen::MatrixXd& mesh, const Eigen::MatrixXd& regressor) {
  if (mesh.cols() != 3) throw DimensionMismatch("mesh columns", 3, mesh.cols());
  if (regressor.cols() != mesh.rows())
    throw DimensionMismatch("regressor columns", mesh.rows(), regressor.cols());
  for (Eigen::Index j = 0; j < regressor.rows(); ++j) {
    if (std::abs(regressor.row(j).sum() - 1.0) > 1e-6)
      throw ValidationError("regressor row " + std::to_string(j) + " does not sum to 1");
  }
  return regressor * mesh;
}

inline BoneLengths regress_joints_from_mesh(const Eigen::MatrixXd& mesh,
                                            const Eigen::MatrixXd& regressor,
                                            const SkeletonTopology& topo) {
  const Pose joints = regress_joints(mesh, regressor);
  return decompose_pose(joints, topo).lengths;
}

// Shift every sample so the per-bone means equal target_mean. The additive
// form keeps each bone's spread intact; the multiplicative form rescales it.
inline LengthBank align_bank_mean(const LengthBank& bank, const BoneLengths& target_mean,
                                  MeanAlignment mode = MeanAlignment::additive) {
  if (bank.size() == 0) throw ValidationError("cannot align an empty bank");
  if (target_mean.size() != bank.bone_count())
    throw DimensionMismatch("target mean", bank.bone_count(), target_mean.size());
  Eigen::MatrixXd shifted = bank.samples();
  if (mode == MeanAlignment::additive) {
    const Eigen::RowVectorXd delta = (target_mean - bank.mean()).transpose();
    shifted.rowwise() += delta;
  } else {
    const Eigen::RowVectorXd ratio = target_mean.cwiseQuotient(bank.mean()).transpose();
    shifted.array().rowwise() *= ratio.array();
  }
  if (!(shifted.array() > 0.0).all())
    throw NonPositiveResult("mean alignment produced a non-positive length");
  return LengthBank(std::move(shifted), bank.source());
}

// Exchange the lengths of left/right counterparts (what a mirrored body has).
inline BoneLengths mirror_lengths(const BoneLengths& lengths, const SkeletonTopology& topo) {
  BoneLengths out = lengths;
  for (auto [a, b] : topo.symmetry_pairs()) std::swap(out(a - 1), out(b - 1));
  return out;
}

// Replace every frame's lengths and translate the whole sequence by `shift`.
inline PoseSequence reshape_and_shift(const PoseSequence& poses, const BoneLengths& lengths,
                                      const Eigen::Vector3d& shift, const SkeletonTopology& topo) {
  PoseSequence out;
  out.info = poses.info;
  out.frames.reserve(poses.frames.size());
  for (long t = 0; t < poses.size(); ++t) {
    Pose p;
    try {
      p = replace_lengths(poses.frames[t], lengths, topo);
    } catch (const DegenerateBone& e) {
      throw DegenerateBone(e.bone(), t);
    }
    p.rowwise() += shift.transpose();
    out.frames.push_back(std::move(p));
  }
  return out;
}

struct AugmentedSequence {
  KeypointSequence keypoints;
  BoneLengths lengths;
  Eigen::Vector3d shift = Eigen::Vector3d::Zero();
};

// One shift s ~ N(0, shift_sigma I) per sequence, applied to every joint of
// every frame. Draws that put a joint behind the camera are retried.
template <RandomSource R>
AugmentedSequence augment_sequence(const PoseSequence& poses, const BoneLengths& lengths,
                                   const SkeletonTopology& topo, const AugmentationConfig& cfg,
                                   const CameraIntrinsics& cam, R& rng) {
  if (poses.frames.empty()) throw ValidationError("cannot augment an empty sequence");
  if (lengths.size() != topo.bone_count())
    throw DimensionMismatch("bone lengths", topo.bone_count(), lengths.size());
  if (!(lengths.array() > 0.0).all()) throw ValidationError("target lengths must be positive");
  const PoseSequence reshaped = reshape_and_shift(poses, lengths, Eigen::Vector3d::Zero(), topo);
  for (int attempt = 0;; ++attempt) {
    const Eigen::Vector3d shift(rng.normal(0.0, cfg.shift_sigma),
                                rng.normal(0.0, cfg.shift_sigma),
                                rng.normal(0.0, cfg.shift_sigma));
    PoseSequence moved = reshaped;
    for (auto& f : moved.frames) f.rowwise() += shift.transpose();
    try {
      return {project_sequence(moved, cam), lengths, shift};
    } catch (const BehindCamera&) {
      if (attempt + 1 >= kMaxResample) throw;
    }
  }
}

// Mirror about the vertical line through the principal point and swap
// left/right joint columns.
inline KeypointSequence flip_keypoints(const KeypointSequence& kps, const CameraIntrinsics& cam,
                                       const SkeletonTopology& topo) {
  const auto mirror = topo.joint_mirror();
  KeypointSequence out = kps;
  for (long t = 0; t < kps.size(); ++t) {
    const Keypoints& src = kps.frames[t];
    if (src.rows() != topo.joint_count())
      throw DimensionMismatch("keypoint joint count", topo.joint_count(), src.rows());
    Keypoints& dst = out.frames[t];
    for (int j = 0; j < topo.joint_count(); ++j) {
      dst(j, 0) = 2.0 * cam.cx - src(mirror[j], 0);
      dst(j, 1) = src(mirror[j], 1);
    }
    if (!kps.confidence.empty()) {
      for (int j = 0; j < topo.joint_count(); ++j)
        out.confidence[t](j) = kps.confidence[t](mirror[j]);
    }
  }
  return out;
}

// Normalized-coordinate flip: the principal point sits at 0 after
// normalize_keypoints, so the mirror is u -> -u.
inline Eigen::MatrixXd flip_normalized(const Eigen::MatrixXd& frames, const SkeletonTopology& topo) {
  const auto mirror = topo.joint_mirror();
  Eigen::MatrixXd out(frames.rows(), frames.cols());
  for (int j = 0; j < topo.joint_count(); ++j) {
    out.col(2 * j) = -frames.col(2 * mirror[j]);
    out.col(2 * j + 1) = frames.col(2 * mirror[j] + 1);
  }
  return out;
}

// ---- LengthBank CSV: header of bone names, one sample per row, meters ----

inline void write_bank_csv(const LengthBank& bank, const SkeletonTopology& topo,
                           const std::filesystem::path& path) {
  if (bank.bone_count() != topo.bone_count())
    throw DimensionMismatch("bank bone count", topo.bone_count(), bank.bone_count());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(std::numeric_limits<double>::max_digits10);
  const auto& names = topo.bone_names();
  for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
  out << '\n';
  for (long r = 0; r < bank.size(); ++r) {
    for (int c = 0; c < bank.bone_count(); ++c) out << (c ? "," : "") << bank.samples()(r, c);
    out << '\n';
  }
}

inline LengthBank read_bank_csv(const std::filesystem::path& path, const SkeletonTopology& topo,
                                std::string source = "dataset") {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open length bank " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path.string() + ": missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header != topo.bone_names())
    throw SchemaError(path.string() + ": header does not match topology bone names");
  std::vector<double> values;
  long rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int cols = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw SchemaError(path.string() + ": bad number '" + cell + "'");
      }
      ++cols;
    }
    if (cols != topo.bone_count())
      throw SchemaError(path.string() + ": row " + std::to_string(rows + 1) + " has " +
                        std::to_string(cols) + " columns");
    ++rows;
  }
  Eigen::MatrixXd samples(rows, topo.bone_count());
  for (long r = 0; r < rows; ++r)
    for (int c = 0; c < topo.bone_count(); ++c) samples(r, c) = values[r * topo.bone_count() + c];
  return LengthBank(std::move(samples), std::move(source));
}

}  // namespace blapose
