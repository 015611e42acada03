#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "blapose/augmentation.hpp"
#include "blapose/corpus.hpp"
#include "blapose/error.hpp"
#include "blapose/length_model.hpp"
#include "blapose/tensor_bundle.hpp"
#include "blapose/toy_lifter.hpp"

namespace blapose {

// ---- length model checkpoint -----------------------------------------------

inline TensorBundle checkpoint_bundle(const LengthModelParams& params, std::uint64_t seed) {
  TensorBundle b;
  const auto& d = params.dims();
  b.metadata() = {{"kind", "length-model"}, {"schema", 1},          {"c", d.c},
                  {"c_prime", d.c_prime},   {"J", d.joints},        {"bidirectional", d.bidirectional},
                  {"seed", seed}};
  for (std::size_t i = 0; i < params.slots().size(); ++i) {
    const auto& s = params.slots()[i];
    b.add_matrix(s.name, params.tensor(i), DType::f32, s.cols == 1);
  }
  return b;
}

inline LengthModelParams params_from_bundle(const TensorBundle& b) {
  const auto& m = b.metadata();
  ModelDims dims;
  try {
    if (m.at("kind").get<std::string>() != "length-model") throw SchemaError("not a length-model checkpoint");
    if (m.at("schema").get<int>() != 1) throw SchemaError("unsupported checkpoint schema");
    dims.c = m.at("c").get<int>();
    dims.c_prime = m.at("c_prime").get<int>();
    dims.joints = m.at("J").get<int>();
    dims.bidirectional = m.at("bidirectional").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint header: ") + e.what());
  }
  LengthModelParams params(dims);
  if (b.arrays().size() != params.slots().size())
    throw SchemaError("checkpoint has " + std::to_string(b.arrays().size()) + " tensors, expected " +
                      std::to_string(params.slots().size()));
  for (std::size_t i = 0; i < params.slots().size(); ++i) {
    const auto& s = params.slots()[i];
    const auto& a = b.arrays()[i];
    if (a.name != s.name) throw SchemaError("checkpoint tensor " + std::to_string(i) + " is '" + a.name +
                                            "', expected '" + s.name + "'");
    const std::vector<std::int64_t> expect =
        s.cols == 1 ? std::vector<std::int64_t>{s.rows} : std::vector<std::int64_t>{s.rows, s.cols};
    if (a.shape != expect) throw SchemaError("checkpoint tensor '" + s.name + "' has the wrong shape");
    MutMap t = params.tensor(i);
    for (Eigen::Index r = 0; r < s.rows; ++r)
      for (Eigen::Index c = 0; c < s.cols; ++c) t(r, c) = a.values[static_cast<std::size_t>(r * s.cols + c)];
  }
  return params;
}

inline void save_checkpoint(const LengthModelParams& params, std::uint64_t seed,
                            const std::filesystem::path& path) {
  checkpoint_bundle(params, seed).save(path);
}

inline LengthModelParams load_checkpoint(const std::filesystem::path& path) {
  return params_from_bundle(TensorBundle::load(path));
}

// ---- online state (f64 so a save/restore cycle is exact) ---------------------

inline TensorBundle online_state_bundle(const OnlineState& s) {
  TensorBundle b;
  b.metadata() = {{"kind", "online-state"}, {"frames_seen", s.frames_seen}};
  b.add_matrix("h", s.h, DType::f64, true);
  return b;
}

inline OnlineState online_state_from_bundle(const TensorBundle& b) {
  if (b.metadata().value("kind", "") != "online-state") throw SchemaError("not an online-state bundle");
  return {b.vector("h"), b.metadata().at("frames_seen").get<long>()};
}

// ---- toy lifter ----------------------------------------------------------------

inline TensorBundle lifter_bundle(const ToyLifter& l) {
  TensorBundle b;
  b.metadata() = {{"kind", "toy-lifter"}, {"J", l.joints()}, {"half_width", l.half_width()}};
  b.add_matrix("weights", l.weights());
  return b;
}

inline ToyLifter lifter_from_bundle(const TensorBundle& b) {
  const auto& m = b.metadata();
  if (m.value("kind", "") != "toy-lifter") throw SchemaError("not a toy-lifter bundle");
  ToyLifter l(m.at("J").get<int>(), m.at("half_width").get<int>());
  const Eigen::MatrixXd w = b.matrix("weights");
  if (w.rows() != l.weights().rows() || w.cols() != l.weights().cols())
    throw SchemaError("toy-lifter weights have the wrong shape");
  l.weights() = w;
  return l;
}

// ---- sequence sets (corpus splits, predictions, predicted lengths) ------------
//
// Per sequence `name`: optional arrays "<name>/poses3d" [N,J,3],
// "<name>/keypoints" [N,J,2] (pixels) and "<name>/lengths" [J-1]. Metadata
// lists the sequences in order, plus whatever the caller adds.

struct SequenceSet {
  std::vector<CorpusSequence> sequences;
  nlohmann::json metadata = nlohmann::json::object();
};

inline TensorBundle sequence_bundle(const SequenceSet& set) {
  TensorBundle b;
  b.metadata() = set.metadata;
  nlohmann::json listing = nlohmann::json::array();
  for (const auto& s : set.sequences) {
    const SequenceInfo& info = !s.poses.frames.empty() ? s.poses.info : s.keypoints.info;
    listing.push_back({{"name", info.name},
                       {"subject", info.subject},
                       {"action", info.action},
                       {"camera", info.camera},
                       {"fps", info.fps}});
    if (!s.poses.frames.empty()) {
      const auto n = static_cast<std::int64_t>(s.poses.frames.size());
      const auto j = static_cast<std::int64_t>(s.poses.frames.front().rows());
      std::vector<double> v;
      v.reserve(static_cast<std::size_t>(n * j * 3));
      for (const auto& f : s.poses.frames)
        for (Eigen::Index r = 0; r < f.rows(); ++r)
          for (int c = 0; c < 3; ++c) v.push_back(f(r, c));
      b.add(info.name + "/poses3d", {n, j, 3}, std::move(v));
    }
    if (!s.keypoints.frames.empty()) {
      const auto n = static_cast<std::int64_t>(s.keypoints.frames.size());
      const auto j = static_cast<std::int64_t>(s.keypoints.frames.front().rows());
      std::vector<double> v;
      v.reserve(static_cast<std::size_t>(n * j * 2));
      for (const auto& f : s.keypoints.frames)
        for (Eigen::Index r = 0; r < f.rows(); ++r)
          for (int c = 0; c < 2; ++c) v.push_back(f(r, c));
      b.add(info.name + "/keypoints", {n, j, 2}, std::move(v));
    }
    if (s.lengths.size() > 0) b.add_matrix(info.name + "/lengths", s.lengths, DType::f32, true);
  }
  b.metadata()["sequences"] = listing;
  return b;
}

inline SequenceSet sequence_set_from_bundle(const TensorBundle& b) {
  SequenceSet set;
  set.metadata = b.metadata();
  try {
    for (const auto& entry : b.metadata().at("sequences")) {
      SequenceInfo info{entry.at("name").get<std::string>(), entry.value("subject", ""),
                        entry.value("action", ""), entry.value("camera", ""), entry.value("fps", 50.0)};
      CorpusSequence s;
      s.poses.info = info;
      s.keypoints.info = info;
      if (b.contains(info.name + "/poses3d")) {
        const auto& a = b.at(info.name + "/poses3d");
        if (a.shape.size() != 3 || a.shape[2] != 3) throw SchemaError(a.name + " must be [N,J,3]");
        for (std::int64_t t = 0; t < a.shape[0]; ++t) {
          Pose p(a.shape[1], 3);
          for (std::int64_t j = 0; j < a.shape[1]; ++j)
            for (int c = 0; c < 3; ++c) p(j, c) = a.values[static_cast<std::size_t>((t * a.shape[1] + j) * 3 + c)];
          s.poses.frames.push_back(std::move(p));
        }
      }
      if (b.contains(info.name + "/keypoints")) {
        const auto& a = b.at(info.name + "/keypoints");
        if (a.shape.size() != 3 || a.shape[2] != 2) throw SchemaError(a.name + " must be [N,J,2]");
        for (std::int64_t t = 0; t < a.shape[0]; ++t) {
          Keypoints k(a.shape[1], 2);
          for (std::int64_t j = 0; j < a.shape[1]; ++j)
            for (int c = 0; c < 2; ++c) k(j, c) = a.values[static_cast<std::size_t>((t * a.shape[1] + j) * 2 + c)];
          s.keypoints.frames.push_back(std::move(k));
        }
      }
      if (b.contains(info.name + "/lengths")) s.lengths = b.vector(info.name + "/lengths");
      set.sequences.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("sequence bundle: ") + e.what());
  }
  return set;
}

inline void save_sequence_set(const SequenceSet& set, const std::filesystem::path& path) {
  sequence_bundle(set).save(path);
}

inline SequenceSet load_sequence_set(const std::filesystem::path& path) {
  return sequence_set_from_bundle(TensorBundle::load(path));
}

// ---- length bank as a bundle ----------------------------------------------------

inline TensorBundle bank_bundle(const LengthBank& bank) {
  TensorBundle b;
  b.metadata() = {{"kind", "length-bank"}, {"source", bank.source()}};
  b.add_matrix("samples", bank.samples());
  return b;
}

inline LengthBank bank_from_bundle(const TensorBundle& b) {
  return LengthBank(b.matrix("samples"), b.metadata().value("source", "dataset"));
}

// CSV or bundle, by extension.
inline LengthBank load_bank(const std::filesystem::path& path, const SkeletonTopology& topo) {
  if (path.extension() == ".csv") return read_bank_csv(path, topo);
  LengthBank bank = bank_from_bundle(TensorBundle::load(path));
  if (bank.bone_count() != topo.bone_count())
    throw SchemaError(path.string() + ": bank bone count does not match topology");
  return bank;
}

}  // namespace blapose
