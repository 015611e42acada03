#include <filesystem>
#include <limits>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace blapose;
using namespace testing_support;

namespace {

TensorBundle sample_bundle() {
  TensorBundle b;
  b.metadata() = {{"kind", "test"}, {"note", "x"}};
  b.add("a", {2, 3}, {1, 2, 3, 4, 5, 6});
  b.add("tiny", {1}, {std::numeric_limits<float>::denorm_min()});
  b.add("empty", {0, 4}, {});
  b.add("exact", {2}, {0.1, -1e300}, DType::f64);
  return b;
}

}  // namespace

TEST(Bundle, LayoutIsDocumentedFraming) {
  const std::string bytes = sample_bundle().serialize();
  EXPECT_EQ(bytes.substr(0, 8), std::string("BLAPTB1\n"));
  std::uint64_t mlen = 0;
  for (int i = 0; i < 8; ++i) mlen |= std::uint64_t(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
  const auto manifest = nlohmann::json::parse(bytes.substr(16, mlen));
  EXPECT_EQ(manifest["schema"], 1);
  EXPECT_EQ(manifest["arrays"][0]["name"], "a");
  EXPECT_EQ(manifest["arrays"][0]["dtype"], "f32");
  EXPECT_EQ(bytes.size(), 16 + mlen + 6 * 4 + 4 + 0 + 2 * 8);
  // First f32 of the payload is 1.0f little-endian.
  EXPECT_EQ(static_cast<unsigned char>(bytes[16 + mlen + 3]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16 + mlen + 2]), 0x80);
}

TEST(Bundle, RoundTripIsBitExact) {
  const TensorBundle b = sample_bundle();
  const TensorBundle back = TensorBundle::deserialize(b.serialize());
  ASSERT_EQ(back.arrays().size(), b.arrays().size());
  for (std::size_t i = 0; i < b.arrays().size(); ++i) {
    EXPECT_EQ(back.arrays()[i].name, b.arrays()[i].name);
    EXPECT_EQ(back.arrays()[i].shape, b.arrays()[i].shape);
    EXPECT_EQ(back.arrays()[i].values, b.arrays()[i].values);
  }
  EXPECT_EQ(back.metadata(), b.metadata());
  EXPECT_EQ(back.serialize(), b.serialize());
  EXPECT_EQ(back.at("exact").values[0], 0.1);
}

TEST(Bundle, MatrixAndVectorViews) {
  TensorBundle b;
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  b.add_matrix("m", m);
  b.add_matrix("v", Eigen::Vector3d(1, 2, 3), DType::f32, true);
  EXPECT_EQ(b.matrix("m"), m);
  EXPECT_EQ(b.at("v").shape, std::vector<std::int64_t>{3});
  EXPECT_EQ(b.vector("v"), Eigen::Vector3d(1, 2, 3));
  EXPECT_THROW(b.add_matrix("m", m), ValidationError);
  EXPECT_THROW(b.add("bad", {2, 2}, {1, 2, 3}), DimensionMismatch);
  EXPECT_THROW(b.at("nope"), SchemaError);
}

TEST(Bundle, CorruptInputsRejected) {
  const std::string good = sample_bundle().serialize();
  EXPECT_THROW(TensorBundle::deserialize("short"), SchemaError);
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(TensorBundle::deserialize(bad), SchemaError);
  EXPECT_THROW(TensorBundle::deserialize(good.substr(0, good.size() - 1)), SchemaError);
  EXPECT_THROW(TensorBundle::deserialize(good + "z"), SchemaError);
  bad = good;
  bad[8] = static_cast<char>(0xff);
  EXPECT_THROW(TensorBundle::deserialize(bad), SchemaError);
  // Manifest that parses but names the same array twice.
  TensorBundle dup;
  dup.add("x", {1}, {1});
  std::string d = dup.serialize();
  const std::string one = R"({"dtype":"f32","name":"x","shape":[1]})";
  const auto pos = d.find(one);
  ASSERT_NE(pos, std::string::npos);
  std::string manifest = d.substr(16, d.size() - 16 - 4);
  manifest.replace(manifest.find(one), one.size(), one + "," + one);
  std::string rebuilt = d.substr(0, 8);
  for (int i = 0; i < 8; ++i) rebuilt.push_back(static_cast<char>((manifest.size() >> (8 * i)) & 0xff));
  rebuilt += manifest + d.substr(d.size() - 4) + d.substr(d.size() - 4);
  EXPECT_THROW(TensorBundle::deserialize(rebuilt), SchemaError);
}

TEST(Bundle, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "blapose_bundle_test.bin";
  sample_bundle().save(path);
  EXPECT_EQ(TensorBundle::load(path).serialize(), sample_bundle().serialize());
  std::filesystem::remove(path);
  EXPECT_THROW(TensorBundle::load(path), ValidationError);
}

TEST(Bundle, BankAndSequenceSets) {
  const auto topo = SkeletonTopology::h36m17();
  const auto cam = h36m_camera();
  CorpusConfig cfg;
  cfg.train_sequences = 2;
  cfg.test_sequences = 0;
  cfg.frames = 5;
  const Corpus c = gen_synthetic_corpus(cfg, BodyShapeModel(), cam);
  SequenceSet set{c.train, {{"split", "train"}}};
  const SequenceSet back = sequence_set_from_bundle(TensorBundle::deserialize(sequence_bundle(set).serialize()));
  ASSERT_EQ(back.sequences.size(), 2u);
  EXPECT_EQ(back.metadata["split"], "train");
  EXPECT_EQ(back.sequences[1].poses.info, c.train[1].poses.info);
  EXPECT_EQ(back.sequences[1].poses.size(), 5);
  EXPECT_LT((back.sequences[1].poses.frames[4] - c.train[1].poses.frames[4]).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT((back.sequences[0].keypoints.frames[2] - c.train[0].keypoints.frames[2]).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LT((back.sequences[0].lengths - c.train[0].lengths).cwiseAbs().maxCoeff(), 1e-7);

  const LengthBank bank = corpus_length_bank(c.train);
  const LengthBank bank_back = bank_from_bundle(TensorBundle::deserialize(bank_bundle(bank).serialize()));
  EXPECT_EQ(bank_back.samples(), bank.samples().cast<float>().cast<double>());
}
