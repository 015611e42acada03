#include <filesystem>

#include <gtest/gtest.h>

#include "support.hpp"

using namespace blapose;
using namespace testing_support;

namespace {

// Uniform draws land on the midpoint, normal draws on the mean.
struct CenterRng {
  double uniform(double lo, double hi) { return 0.5 * (lo + hi); }
  double normal(double mean, double) { return mean; }
};

// Always returns the same normal deviate; drives the resample path.
struct ConstantRng {
  double value;
  double uniform(double, double) { return value; }
  double normal(double, double) { return value; }
};

BoneLengths h36m_base() { return BodyShapeModel().mean_lengths(); }

void expect_pairs_equal(const BoneLengths& l, const SkeletonTopology& topo) {
  for (auto [a, b] : topo.symmetry_pairs()) EXPECT_EQ(l(a - 1), l(b - 1));
}

}  // namespace

TEST(Uniform, ZeroDrawReturnsBase) {
  const auto topo = SkeletonTopology::h36m17();
  CenterRng rng;
  AugmentationConfig cfg;
  const BoneLengths base = h36m_base();
  EXPECT_EQ(gen_lengths_uniform(base, base, topo, cfg, rng), base);
}

TEST(Uniform, BoundedSymmetricAndUnbiased) {
  const auto topo = SkeletonTopology::h36m17();
  AugmentationConfig cfg;
  cfg.enforce_symmetry = false;
  Rng rng(11);
  const BoneLengths base = h36m_base();
  BoneLengths mean = base * 1.1;
  const int draws = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(16);
  for (int i = 0; i < draws; ++i) {
    const BoneLengths l = gen_lengths_uniform(base, mean, topo, cfg, rng);
    const Eigen::VectorXd d = l - base;
    ASSERT_TRUE(((d.cwiseAbs() - cfg.uniform_range * mean).array() <= 1e-15).all());
    sum += d;
  }
  const Eigen::VectorXd avg = sum / draws;
  for (int b = 0; b < 16; ++b)
    EXPECT_LT(std::abs(avg(b)), 3.0 * cfg.uniform_range * mean(b) / std::sqrt(3.0 * draws)) << b;
}

TEST(Uniform, SymmetryPairsExactlyEqual) {
  const auto topo = SkeletonTopology::h36m17();
  AugmentationConfig cfg;
  Rng rng(12);
  const BoneLengths base = h36m_base();
  for (int i = 0; i < 1000; ++i) expect_pairs_equal(gen_lengths_uniform(base, base, topo, cfg, rng), topo);
}

TEST(Normal, ZeroSigmaReturnsBase) {
  const auto topo = SkeletonTopology::h36m17();
  Rng rng(13);
  AugmentationConfig cfg;
  const BoneLengths base = h36m_base();
  EXPECT_EQ(gen_lengths_normal(base, BoneLengths::Zero(16), topo, cfg, rng), base);
}

TEST(Normal, SampleStdWithinFivePercent) {
  const auto topo = SkeletonTopology::h36m17();
  AugmentationConfig cfg;
  Rng rng(14);
  const BoneLengths base = h36m_base();
  const BoneLengths sigma = 0.1 * base;
  const int draws = 100000;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(16), s2 = Eigen::VectorXd::Zero(16);
  for (int i = 0; i < draws; ++i) {
    const BoneLengths l = gen_lengths_normal(base, sigma, topo, cfg, rng);
    expect_pairs_equal(l, topo);
    s1 += l;
    s2 += l.cwiseAbs2();
  }
  const Eigen::VectorXd mean = s1 / draws;
  const Eigen::VectorXd sd = (s2 / draws - mean.cwiseAbs2()).cwiseSqrt();
  for (int b = 0; b < 16; ++b) {
    EXPECT_LT(std::abs(sd(b) / sigma(b) - 1.0), 0.05) << b;
    EXPECT_LT(std::abs(mean(b) - base(b)), 4.0 * sigma(b) / std::sqrt(double(draws))) << b;
  }
}

TEST(Normal, NonPositiveDrawsResampleThenFail) {
  const auto topo = chain3();
  AugmentationConfig cfg;
  ConstantRng bad{-1.0};
  EXPECT_THROW(gen_lengths_normal(BoneLengths::Ones(2), BoneLengths::Ones(2), topo, cfg, bad),
               NonPositiveResult);
  // Heavy left tail: every output must still be positive.
  Rng rng(15);
  for (int i = 0; i < 2000; ++i)
    EXPECT_TRUE((gen_lengths_normal(BoneLengths::Constant(2, 0.1), BoneLengths::Constant(2, 0.2), topo, cfg,
                                    rng)
                     .array() > 0)
                    .all());
}

TEST(Synthetic, DrawsBankRows) {
  Eigen::MatrixXd s(3, 2);
  s << 1, 2, 3, 4, 5, 6;
  LengthBank bank(s, "dataset");
  Rng rng(16);
  for (int i = 0; i < 50; ++i) {
    const BoneLengths l = gen_lengths_synthetic(bank, rng);
    bool found = false;
    for (int r = 0; r < 3; ++r) found = found || l == bank.sample(r);
    EXPECT_TRUE(found);
  }
}

TEST(Bank, StatsAndValidation) {
  Eigen::MatrixXd s(2, 2);
  s << 1, 2, 3, 4;
  LengthBank bank(s, "dataset");
  EXPECT_TRUE(bank.mean().isApprox(Eigen::Vector2d(2, 3)));
  EXPECT_TRUE(bank.stddev().isApprox(Eigen::Vector2d(1, 1)));
  s(0, 0) = 0.0;
  EXPECT_THROW(LengthBank(s, "dataset"), ValidationError);
}

TEST(AlignMean, WorkedExample) {
  Eigen::MatrixXd s(2, 2);
  s << 1, 2, 3, 4;
  const LengthBank out = align_bank_mean(LengthBank(s, "dataset"), Eigen::Vector2d(2.5, 2.5));
  Eigen::MatrixXd expect(2, 2);
  expect << 1.5, 1.5, 3.5, 3.5;
  EXPECT_TRUE(out.samples().isApprox(expect, 1e-15));
  const LengthBank same = align_bank_mean(LengthBank(s, "dataset"), Eigen::Vector2d(2, 3));
  EXPECT_EQ(same.samples(), s);
}

TEST(AlignMean, PreservesSpreadOnRandomBank) {
  Rng rng(17);
  Eigen::MatrixXd s(500, 16);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.uniform(0.2, 0.6);
  const LengthBank bank(s, "synthetic-mesh");
  const BoneLengths target = h36m_base() + BoneLengths::Constant(16, 0.2);
  const LengthBank out = align_bank_mean(bank, target);
  EXPECT_LT((out.mean() - target).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((out.stddev() - bank.stddev()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(out.source(), "synthetic-mesh");
  EXPECT_THROW(align_bank_mean(bank, BoneLengths::Constant(16, 0.01)), NonPositiveResult);
  const LengthBank mult = align_bank_mean(bank, target, MeanAlignment::multiplicative);
  EXPECT_LT((mult.mean() - target).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Regression, SelectorPicksVertices) {
  const SkeletonTopology one_bone({-1, 0}, {"a"}, {});
  Eigen::MatrixXd mesh(3, 3);
  mesh << 0, 0, 0, 1, 2, 2, 5, 5, 5;
  Eigen::MatrixXd reg = Eigen::MatrixXd::Zero(2, 3);
  reg(0, 0) = 1;
  reg(1, 1) = 1;
  EXPECT_DOUBLE_EQ(regress_joints_from_mesh(mesh, reg, one_bone)(0), 3.0);
  EXPECT_DOUBLE_EQ(regress_joints_from_mesh(2.0 * mesh, reg, one_bone)(0), 6.0);
  reg(0, 2) = 0.5;
  EXPECT_THROW(regress_joints(mesh, reg), ValidationError);
}

TEST(Regression, RandomConvexMatchesLoopOracle) {
  const auto topo = SkeletonTopology::h36m17();
  Rng rng(18);
  const int V = 60;
  Eigen::MatrixXd mesh(V, 3), reg(17, V);
  for (Eigen::Index i = 0; i < mesh.size(); ++i) mesh.data()[i] = rng.uniform(-1, 1);
  for (int j = 0; j < 17; ++j) {
    for (int v = 0; v < V; ++v) reg(j, v) = rng.uniform(0, 1);
    reg.row(j) /= reg.row(j).sum();
  }
  const BoneLengths got = regress_joints_from_mesh(mesh, reg, topo);
  for (int b = 1; b < 17; ++b) {
    double d2 = 0;
    for (int c = 0; c < 3; ++c) {
      double child = 0, parent = 0;
      for (int v = 0; v < V; ++v) {
        child += reg(b, v) * mesh(v, c);
        parent += reg(topo.parent(b), v) * mesh(v, c);
      }
      d2 += (child - parent) * (child - parent);
    }
    EXPECT_NEAR(got(b - 1), std::sqrt(d2), 1e-9);
  }
}

TEST(Augment, ZeroShiftOriginalLengthsIsPlainProjection) {
  const auto topo = SkeletonTopology::h36m17();
  const auto cam = h36m_camera();
  BodyShapeModel body;
  PoseSequence seq;
  for (int t = 0; t < 3; ++t) {
    Pose p = body.rest_pose(body.mean_lengths());
    p.col(2).array() += 5.0 + 0.1 * t;
    seq.frames.push_back(p);
  }
  AugmentationConfig cfg;
  cfg.shift_sigma = 0.0;
  Rng rng(19);
  const auto aug = augment_sequence(seq, body.mean_lengths(), topo, cfg, cam, rng);
  const auto plain = project_sequence(seq, cam);
  for (int t = 0; t < 3; ++t) EXPECT_LT((aug.keypoints.frames[t] - plain.frames[t]).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Augment, OneShiftPerSequenceAndTargetLengths) {
  const auto topo = SkeletonTopology::h36m17();
  const auto cam = h36m_camera();
  CameraIntrinsics pinhole = cam;
  pinhole.k1 = pinhole.k2 = pinhole.k3 = pinhole.p1 = pinhole.p2 = 0.0;
  BodyShapeModel body;
  Rng rng(20);
  PoseSequence seq;
  for (int t = 0; t < 2; ++t) {
    Pose p = random_pose(topo, rng, 0.1, 0.3);
    p.col(2).array() += 6.0;
    seq.frames.push_back(p);
  }
  const BoneLengths target = body.sample_lengths(rng);
  AugmentationConfig cfg;
  const auto aug = augment_sequence(seq, target, topo, cfg, pinhole, rng);
  EXPECT_EQ(aug.lengths, target);
  for (int t = 0; t < 2; ++t) {
    const Pose reshaped = replace_lengths(seq.frames[t], target, topo);
    EXPECT_LT((bone_lengths_of(reshaped, topo) - target).cwiseAbs().maxCoeff(), 1e-12);
    // Back-project every joint with its known shifted depth.
    for (int j = 0; j < 17; ++j) {
      const double z = reshaped(j, 2) + aug.shift.z();
      const double x = (aug.keypoints.frames[t](j, 0) - pinhole.cx) / pinhole.fx * z;
      const double y = (aug.keypoints.frames[t](j, 1) - pinhole.cy) / pinhole.fy * z;
      EXPECT_NEAR(x - reshaped(j, 0), aug.shift.x(), 1e-9);
      EXPECT_NEAR(y - reshaped(j, 1), aug.shift.y(), 1e-9);
    }
  }
}

TEST(Augment, RetriesShiftsBehindCamera) {
  const auto topo = SkeletonTopology::h36m17();
  const auto cam = h36m_camera();
  BodyShapeModel body;
  PoseSequence seq;
  Pose p = body.rest_pose(body.mean_lengths());
  p.col(2).array() += 1.5;
  seq.frames = {p};
  AugmentationConfig cfg;
  cfg.shift_sigma = 1.0;
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    const auto aug = augment_sequence(seq, body.mean_lengths(), topo, cfg, cam, rng);
    EXPECT_GT(aug.shift.z(), -1.5);
  }
  ConstantRng always_back{-10.0};
  EXPECT_THROW(augment_sequence(seq, body.mean_lengths(), topo, cfg, cam, always_back), BehindCamera);
}

TEST(FlipKeypoints, InvolutionAndFixedPoint) {
  const auto topo = SkeletonTopology::h36m17();
  const auto cam = h36m_camera();
  Rng rng(22);
  KeypointSequence seq;
  Keypoints k(17, 2);
  for (int j = 0; j < 17; ++j) k.row(j) << rng.uniform(0, 1000), rng.uniform(0, 1000);
  k(0, 0) = cam.cx;
  seq.frames = {k};
  seq.confidence = {Eigen::VectorXd::LinSpaced(17, 0, 1)};
  const auto once = flip_keypoints(seq, cam, topo);
  EXPECT_DOUBLE_EQ(once.frames[0](0, 0), cam.cx);
  EXPECT_EQ(once.frames[0](0, 1), k(0, 1));
  EXPECT_EQ(once.confidence[0](1), seq.confidence[0](4));
  const auto twice = flip_keypoints(once, cam, topo);
  EXPECT_LT((twice.frames[0] - k).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(twice.confidence[0], seq.confidence[0]);
}

TEST(FlipKeypoints, SymmetricRigKeepsKeypointSet) {
  // Rest pose facing the camera is left/right symmetric about x = 0.
  const auto topo = SkeletonTopology::h36m17();
  CameraIntrinsics cam{1100, 1100, 500, 500, -0.2, 0.2, 0, 0, 0, 1000, 1000};
  BodyShapeModel body;
  Pose p = body.rest_pose(body.mean_lengths());
  p.col(2).array() += 5.0;
  PoseSequence seq;
  seq.frames = {p};
  const auto kp = project_sequence(seq, cam);
  const auto flipped = flip_keypoints(kp, cam, topo);
  EXPECT_LT((flipped.frames[0] - kp.frames[0]).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(BankCsv, RoundTripIsExact) {
  const auto topo = SkeletonTopology::h36m17();
  BodyShapeModel body;
  Rng rng(23);
  const LengthBank bank = synthetic_mesh_bank(body, 50, 0.3, 0.05, rng);
  const auto path = std::filesystem::temp_directory_path() / "blapose_bank_test.csv";
  write_bank_csv(bank, topo, path);
  const LengthBank back = read_bank_csv(path, topo);
  EXPECT_EQ(back.samples(), bank.samples());
  std::filesystem::remove(path);
}

TEST(BankCsv, RejectsWrongHeader) {
  const auto topo = SkeletonTopology::h36m17();
  const auto path = std::filesystem::temp_directory_path() / "blapose_bad_bank.csv";
  {
    std::ofstream out(path);
    out << "a,b\n1,2\n";
  }
  EXPECT_THROW(read_bank_csv(path, topo), SchemaError);
  std::filesystem::remove(path);
}

TEST(MeshBank, SymmetricBodiesAndPositiveLengths) {
  const auto topo = SkeletonTopology::h36m17();
  BodyShapeModel body;
  Rng rng(24);
  const LengthBank bank = synthetic_mesh_bank(body, 200, 0.3, 0.05, rng);
  for (long r = 0; r < bank.size(); ++r) {
    const BoneLengths l = bank.sample(r);
    for (auto [a, b] : topo.symmetry_pairs()) EXPECT_NEAR(l(a - 1), l(b - 1), 1e-12);
  }
  // Zero bias and zero tissue noise recover the rest-pose lengths.
  const Pose rest = body.rest_pose(body.mean_lengths());
  const BoneLengths exact = regress_joints_from_mesh(body.mesh(rest, rng, 0.0), body.regressor(0.0), topo);
  EXPECT_LT((exact - body.mean_lengths()).cwiseAbs().maxCoeff(), 1e-12);
}
