#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "blapose/augmentation.hpp"
#include "blapose/camera.hpp"
#include "blapose/corpus.hpp"
#include "blapose/length_model.hpp"
#include "blapose/random.hpp"
#include "blapose/toy_lifter.hpp"

namespace blapose {

inline Eigen::MatrixXd model_inputs(const KeypointSequence& kps, const CameraIntrinsics& cam) {
  return to_matrix(normalize_keypoints(kps, cam));
}

// Everything the per-epoch augmentation needs besides the sequences.
struct AugmentationPlan {
  AugmentationConfig config;
  std::optional<LengthBank> bank;  // strategy == synthetic
  BoneLengths sigmas;              // strategy == normal
  int group_size = 256;            // sequences sharing one batch mean (uniform)
};

// Fresh augmentation every epoch: each training sequence gets new target
// lengths from the configured strategy, one random shift, and is projected
// and normalized. The epoch's random stream depends only on (seed, epoch).
inline SampleSource augmented_source(const std::vector<CorpusSequence>& train,
                                     const SkeletonTopology& topo, const CameraIntrinsics& cam,
                                     AugmentationPlan plan) {
  plan.config.validate();
  if (train.empty()) throw ValidationError("augmentation: no training sequences");
  if (plan.config.strategy == LengthStrategy::synthetic && !plan.bank)
    throw ValidationError("synthetic strategy needs a length bank");
  if (plan.config.strategy == LengthStrategy::normal && plan.sigmas.size() != topo.bone_count())
    throw ValidationError("normal strategy needs per-bone sigmas");
  return [&train, topo, cam, plan](int epoch) {
    Rng rng(plan.config.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(epoch) + 1);
    std::vector<LengthSample> out;
    out.reserve(train.size());
    const std::size_t group = static_cast<std::size_t>(std::max(1, plan.group_size));
    for (std::size_t g0 = 0; g0 < train.size(); g0 += group) {
      const std::size_t g1 = std::min(train.size(), g0 + group);
      BoneLengths batch_mean = BoneLengths::Zero(topo.bone_count());
      for (std::size_t i = g0; i < g1; ++i) batch_mean += train[i].lengths;
      batch_mean /= static_cast<double>(g1 - g0);
      for (std::size_t i = g0; i < g1; ++i) {
        const auto& seq = train[i];
        BoneLengths target;
        switch (plan.config.strategy) {
          case LengthStrategy::uniform:
            target = gen_lengths_uniform(seq.lengths, batch_mean, topo, plan.config, rng);
            break;
          case LengthStrategy::normal:
            target = gen_lengths_normal(seq.lengths, plan.sigmas, topo, plan.config, rng);
            break;
          case LengthStrategy::synthetic:
            target = gen_lengths_synthetic(*plan.bank, rng);
            break;
        }
        const auto aug = augment_sequence(seq.poses, target, topo, plan.config, cam, rng);
        out.push_back({model_inputs(aug.keypoints, cam), target});
      }
    }
    return out;
  };
}

// Unaugmented samples (the stored keypoints with their true lengths).
inline std::vector<LengthSample> plain_samples(const std::vector<CorpusSequence>& seqs,
                                               const CameraIntrinsics& cam) {
  std::vector<LengthSample> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back({model_inputs(s.keypoints, cam), s.lengths});
  return out;
}

inline std::vector<BoneLengths> predict_corpus_lengths(const LengthModelParams& params,
                                                       const std::vector<CorpusSequence>& seqs,
                                                       const CameraIntrinsics& cam,
                                                       const SkeletonTopology& topo, bool flip) {
  std::vector<BoneLengths> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    const Eigen::MatrixXd x = model_inputs(s.keypoints, cam);
    out.push_back(flip ? predict_lengths_flip(x, params, topo) : predict_lengths(x, params));
  }
  return out;
}

// Online model: run every frame, keep the final frame's estimate.
inline std::vector<BoneLengths> predict_corpus_lengths_online(const LengthModelParams& params,
                                                              const std::vector<CorpusSequence>& seqs,
                                                              const CameraIntrinsics& cam) {
  std::vector<BoneLengths> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    const Eigen::MatrixXd x = model_inputs(s.keypoints, cam);
    OnlineState st = OnlineState::zero(params.dims());
    BoneLengths last = BoneLengths::Zero(params.dims().output_dim());
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      auto step = forward_online(st, x.row(t).transpose(), params);
      st = std::move(step.state);
      last = std::move(step.lengths);
    }
    out.push_back(last);
  }
  return out;
}

// Constant predictor baseline: the training-set mean length vector.
inline BoneLengths mean_lengths(const std::vector<CorpusSequence>& seqs) {
  return corpus_length_bank(seqs).mean();
}

inline std::vector<LiftSample> lift_samples(const std::vector<CorpusSequence>& seqs,
                                            const CameraIntrinsics& cam) {
  std::vector<LiftSample> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back({model_inputs(s.keypoints, cam), s.poses});
  return out;
}

inline std::vector<FinetuneSample> finetune_samples(const std::vector<CorpusSequence>& seqs,
                                                    const std::vector<BoneLengths>& lengths,
                                                    const CameraIntrinsics& cam) {
  if (seqs.size() != lengths.size()) throw DimensionMismatch("one length vector per sequence");
  std::vector<FinetuneSample> out;
  out.reserve(seqs.size());
  for (std::size_t i = 0; i < seqs.size(); ++i)
    out.push_back({model_inputs(seqs[i].keypoints, cam), seqs[i].poses, lengths[i]});
  return out;
}

// Multiply every bone of each sequence by one factor from U(lo, hi), keeping
// directions and roots.
inline std::vector<PoseSequence> corrupt_lengths(const std::vector<CorpusSequence>& seqs,
                                                 const SkeletonTopology& topo, double lo, double hi,
                                                 Rng& rng) {
  std::vector<PoseSequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    const double factor = rng.uniform(lo, hi);
    out.push_back(adjust_poses(s.poses, s.lengths * factor, topo));
  }
  return out;
}

inline std::vector<PoseSequence> poses_of(const std::vector<CorpusSequence>& seqs) {
  std::vector<PoseSequence> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) out.push_back(s.poses);
  return out;
}

}  // namespace blapose
