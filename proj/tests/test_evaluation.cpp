#include <gtest/gtest.h>

#include "oracles.hpp"
#include "support.hpp"

using namespace blapose;
using namespace testing_support;

namespace {

PoseSequence random_sequence(const SkeletonTopology& topo, Rng& rng, const std::string& name,
                             const std::string& action, int frames) {
  PoseSequence s;
  s.info.name = name;
  s.info.action = action;
  for (int t = 0; t < frames; ++t) s.frames.push_back(random_pose(topo, rng));
  return s;
}

}  // namespace

TEST(Adjust, TrueLengthsRecoverTruth) {
  const auto topo = SkeletonTopology::h36m17();
  Rng rng(1);
  const PoseSequence truth = random_sequence(topo, rng, "s", "Walking", 5);
  // Same directions, every frame's bones stretched by 10%.
  PoseSequence stretched = truth;
  for (auto& f : stretched.frames) f = replace_lengths(f, 1.1 * bone_lengths_of(f, topo), topo);
  for (long t = 0; t < truth.size(); ++t) {
    const Pose fixed = replace_lengths(stretched.frames[t], bone_lengths_of(truth.frames[t], topo), topo);
    EXPECT_LT(mpjpe(root_relative(fixed), root_relative(truth.frames[t])), 1e-9);
  }
}

TEST(Adjust, SequenceLevelLengthsKeepDirections) {
  const auto topo = SkeletonTopology::h36m17();
  Rng rng(2);
  BodyShapeModel body;
  const PoseSequence pred = random_sequence(topo, rng, "s", "Eating", 8);
  const BoneLengths lengths = body.sample_lengths(rng);
  const PoseSequence out = adjust_poses(pred, lengths, topo);
  for (long t = 0; t < pred.size(); ++t) {
    const auto a = decompose_pose(pred.frames[t], topo), b = decompose_pose(out.frames[t], topo);
    for (int i = 0; i < 16; ++i) {
      const double cosang = std::clamp(a.directions.row(i).dot(b.directions.row(i)), -1.0, 1.0);
      EXPECT_LT(std::acos(cosang), 1e-7);  // acos near 1 loses half the digits
      EXPECT_LT((a.directions.row(i) - b.directions.row(i)).norm(), 1e-9);
    }
    EXPECT_LT((b.lengths - lengths).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(out.frames[t].row(0), pred.frames[t].row(0));
  }
  // Identity when the lengths already match.
  PoseSequence same;
  same.frames = {pred.frames[0]};
  const auto id = adjust_poses(same, bone_lengths_of(pred.frames[0], topo), topo);
  EXPECT_LT((id.frames[0] - pred.frames[0]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Adjust, DegenerateFrameReported) {
  const auto topo = SkeletonTopology::h36m17();
  Rng rng(3);
  PoseSequence s = random_sequence(topo, rng, "s", "Eating", 3);
  s.frames[2].row(5) = s.frames[2].row(4);
  try {
    adjust_poses(s, BoneLengths::Ones(16), topo);
    FAIL();
  } catch (const DegenerateBone& e) {
    EXPECT_EQ(e.frame(), 2);
    EXPECT_EQ(e.bone(), 5);
  }
}

TEST(Evaluate, PerfectPredictionsAreZero) {
  const auto topo = SkeletonTopology::h36m17();
  Rng rng(4);
  const std::vector<PoseSequence> truth{random_sequence(topo, rng, "a", "Walking", 4),
                                        random_sequence(topo, rng, "b", "Directions", 3)};
  const auto r = evaluate(truth, truth, topo);
  EXPECT_EQ(r.overall.frames, 7);
  EXPECT_LT(r.overall.mpjpe_mm, 1e-9);
  EXPECT_LT(r.overall.p_mpjpe_mm, 1e-6);
  EXPECT_EQ(r.overall.bone_len_err_mm, 0.0);
  ASSERT_EQ(r.actions.size(), 2u);
  EXPECT_EQ(r.actions[0].action, "Directions");  // table order, not input order
}

TEST(Evaluate, OverallIsFrameWeightedAndMatchesLoop) {
  const auto topo = SkeletonTopology::h36m17();
  Rng rng(5);
  std::vector<PoseSequence> truth, pred;
  const char* actions[] = {"Walking", "Eating", "Walking", "Sitting"};
  for (int i = 0; i < 4; ++i) {
    truth.push_back(random_sequence(topo, rng, "s" + std::to_string(i), actions[i], 2 + i));
    PoseSequence p = truth.back();
    for (auto& f : p.frames) f += 0.02 * random_pose(topo, rng);
    pred.push_back(p);
  }
  const auto r = evaluate(pred, truth, topo);
  double sum = 0, psum = 0;
  long n = 0;
  for (std::size_t s = 0; s < truth.size(); ++s)
    for (long t = 0; t < truth[s].size(); ++t) {
      sum += oracle::mean_distance_mm(root_relative(pred[s].frames[t]), root_relative(truth[s].frames[t]));
      psum += oracle::mean_distance_mm(oracle::horn_align(pred[s].frames[t], truth[s].frames[t]),
                                       truth[s].frames[t]);
      ++n;
    }
  EXPECT_NEAR(r.overall.mpjpe_mm, sum / n, 1e-9);
  EXPECT_NEAR(r.overall.p_mpjpe_mm, psum / n, 1e-9);
  EXPECT_NO_THROW(check_overall(r));
  const auto walking = std::find_if(r.actions.begin(), r.actions.end(), [](auto& m) { return m.action == "Walking"; });
  EXPECT_EQ(walking->frames, 2 + 4);
}

TEST(Evaluate, WeightedMeanArithmetic) {
  const std::vector<ActionMetrics> rows{{"A", 1, 10, 4, 2}, {"B", 3, 20, 8, 6}};
  const auto m = frame_weighted_mean(rows);
  EXPECT_EQ(m.frames, 4);
  EXPECT_DOUBLE_EQ(m.mpjpe_mm, 17.5);
  EXPECT_DOUBLE_EQ(m.p_mpjpe_mm, 7.0);
  EXPECT_DOUBLE_EQ(m.bone_len_err_mm, 5.0);
}

TEST(Evaluate, LabelMismatch) {
  const auto topo = SkeletonTopology::h36m17();
  Rng rng(6);
  const std::vector<PoseSequence> truth{random_sequence(topo, rng, "a", "Walking", 3)};
  auto pred = truth;
  pred[0].info.action = "Eating";
  EXPECT_THROW(evaluate(pred, truth, topo), LabelMismatch);
  pred = truth;
  pred[0].frames.pop_back();
  EXPECT_THROW(evaluate(pred, truth, topo), LabelMismatch);
  EXPECT_THROW(evaluate({}, truth, topo), LabelMismatch);
}

TEST(Report, CsvJsonAndConsistency) {
  const auto topo = SkeletonTopology::h36m17();
  Rng rng(7);
  const std::vector<PoseSequence> truth{random_sequence(topo, rng, "a", "Walking", 3)};
  auto pred = truth;
  for (auto& f : pred[0].frames) f.row(3) += Eigen::RowVector3d(0.01, 0, 0);
  const auto r = evaluate(pred, truth, topo);
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.rfind("action,frames,mpjpe_mm,p_mpjpe_mm,bone_len_err_mm\n", 0), 0u);
  EXPECT_NE(csv.find("\noverall,3,"), std::string::npos);
  const auto j = report_json(r);
  for (const char* k : {"mpjpe_mm", "p_mpjpe_mm", "bone_len_err_mm", "frames", "fingerprint", "actions"})
    EXPECT_TRUE(j.contains(k)) << k;
  const auto back = report_from_json(j);
  EXPECT_EQ(back.overall.mpjpe_mm, r.overall.mpjpe_mm);
  EXPECT_EQ(back.fingerprint, r.fingerprint);
  auto broken = r;
  broken.overall.mpjpe_mm += 1.0;
  EXPECT_THROW(report_csv(broken), ValidationError);
}

TEST(Report, MarkdownBoldsColumnBest) {
  EvaluationReport a, b;
  a.actions = {{"Walking", 2, 10.0, 5, 1}, {"Directions", 2, 30.0, 5, 1}};
  b.actions = {{"Walking", 2, 12.0, 5, 1}, {"Directions", 2, 20.0, 5, 1}};
  a.overall = frame_weighted_mean(a.actions);
  b.overall = frame_weighted_mean(b.actions);
  const std::string md = report_markdown({{"base", a}, {"adjusted", b}}, Metric::mpjpe, "MPJPE");
  EXPECT_NE(md.find("| MPJPE | Dir. | Walk | Avg |"), std::string::npos);
  EXPECT_NE(md.find("| base | 30.0 | **10.0** | 20.0 |"), std::string::npos);
  EXPECT_NE(md.find("| adjusted | **20.0** | 12.0 | **16.0** |"), std::string::npos);
}
