#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "blapose/length_model.hpp"
#include "blapose/skeleton.hpp"
#include "blapose/toy_lifter.hpp"

namespace blapose {

struct LatencyStats {
  double fps = 0.0;
  double median_us = 0.0;
  double p95_us = 0.0;
};

struct BenchReport {
  long repetitions = 0;
  LatencyStats update;         // online length update alone
  LatencyStats update_adjust;  // update + lift one frame + replace its lengths
};

namespace detail {

inline LatencyStats summarize(std::vector<double> us) {
  LatencyStats s;
  if (us.empty()) return s;
  double total = 0.0;
  for (double v : us) total += v;
  std::sort(us.begin(), us.end());
  s.median_us = us[us.size() / 2];
  s.p95_us = us[std::min(us.size() - 1, static_cast<std::size_t>(std::ceil(0.95 * us.size())) - 1)];
  s.fps = total > 0.0 ? 1e6 * static_cast<double>(us.size()) / total : 0.0;
  return s;
}

}  // namespace detail

// Single-threaded frame-by-frame timing over `repetitions` steps, cycling
// through the rows of `frames` (N x 2J normalized keypoints).
inline BenchReport bench_online(const LengthModelParams& params, const Eigen::MatrixXd& frames,
                                long repetitions, const ToyLifter& lifter, const SkeletonTopology& topo) {
  using clock = std::chrono::steady_clock;
  BenchReport report;
  report.repetitions = std::max(0L, repetitions);
  if (repetitions <= 0 || frames.rows() == 0) return report;

  std::vector<double> update_us, adjust_us;
  update_us.reserve(static_cast<std::size_t>(repetitions));
  adjust_us.reserve(static_cast<std::size_t>(repetitions));
  double sink = 0.0;

  OnlineState state = OnlineState::zero(params.dims());
  for (long i = 0; i < repetitions; ++i) {
    const Eigen::VectorXd x = frames.row(i % frames.rows()).transpose();
    const auto t0 = clock::now();
    auto step = forward_online(state, x, params);
    const auto t1 = clock::now();
    state = std::move(step.state);
    sink += step.lengths(0);
    update_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }

  state = OnlineState::zero(params.dims());
  for (long i = 0; i < repetitions; ++i) {
    const long t = i % frames.rows();
    const Eigen::VectorXd x = frames.row(t).transpose();
    const auto t0 = clock::now();
    auto step = forward_online(state, x, params);
    const Pose lifted = lifter.lift_frame(frames, t);
    BoneLengths lengths = step.lengths.cwiseMax(1e-3);  // an untrained model may emit <= 0
    const Pose adjusted = replace_lengths(lifted, lengths, topo);
    const auto t1 = clock::now();
    state = std::move(step.state);
    sink += adjusted(1, 0);
    adjust_us.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  static volatile double observed;
  observed = sink;
  report.update = detail::summarize(std::move(update_us));
  report.update_adjust = detail::summarize(std::move(adjust_us));
  return report;
}

inline nlohmann::json bench_json(const BenchReport& r) {
  auto stats = [](const LatencyStats& s) {
    return nlohmann::json{{"fps", s.fps}, {"median_us", s.median_us}, {"p95_us", s.p95_us}};
  };
  return {{"repetitions", r.repetitions}, {"update", stats(r.update)}, {"update_adjust", stats(r.update_adjust)}};
}

}  // namespace blapose
