#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blapose/error.hpp"
#include "blapose/metrics.hpp"
#include "blapose/sequence.hpp"
#include "blapose/skeleton.hpp"

namespace blapose {

// Replace each frame's bone lengths with one sequence-level length vector,
// keeping every bone direction and the root.
inline PoseSequence adjust_poses(const PoseSequence& pred, const BoneLengths& lengths,
                                 const SkeletonTopology& topo) {
  PoseSequence out;
  out.info = pred.info;
  out.frames.reserve(pred.frames.size());
  for (long t = 0; t < pred.size(); ++t) {
    try {
      out.frames.push_back(replace_lengths(pred.frames[t], lengths, topo));
    } catch (const DegenerateBone& e) {
      throw DegenerateBone(e.bone(), t);
    }
  }
  return out;
}

struct ActionMetrics {
  std::string action;
  long frames = 0;
  double mpjpe_mm = 0.0;
  double p_mpjpe_mm = 0.0;
  double bone_len_err_mm = 0.0;
};

struct EvaluationReport {
  std::vector<ActionMetrics> actions;
  ActionMetrics overall{"overall"};
  std::string fingerprint;
};

// Column order of the Human3.6M results tables.
inline const std::array<std::pair<const char*, const char*>, 15>& h36m_actions() {
  static const std::array<std::pair<const char*, const char*>, 15> names{{
      {"Directions", "Dir."},   {"Discussion", "Disc."}, {"Eating", "Eat"},
      {"Greeting", "Greet"},    {"Phoning", "Phone"},    {"Photo", "Photo"},
      {"Posing", "Pose"},       {"Purchases", "Purch."}, {"Sitting", "Sit"},
      {"SittingDown", "SitD."}, {"Smoking", "Smoke"},    {"Waiting", "Wait"},
      {"WalkDog", "WalkD."},    {"Walking", "Walk"},     {"WalkTogether", "WalkT."},
  }};
  return names;
}

namespace detail {

inline int action_rank(const std::string& a) {
  const auto& names = h36m_actions();
  for (std::size_t i = 0; i < names.size(); ++i)
    if (a == names[i].first) return static_cast<int>(i);
  return static_cast<int>(names.size());
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

struct Accumulator {
  long frames = 0;
  double mpjpe = 0.0, p_mpjpe = 0.0, bone = 0.0;
};

}  // namespace detail

inline ActionMetrics frame_weighted_mean(const std::vector<ActionMetrics>& rows) {
  ActionMetrics out{"overall"};
  for (const auto& r : rows) {
    out.frames += r.frames;
    out.mpjpe_mm += r.mpjpe_mm * static_cast<double>(r.frames);
    out.p_mpjpe_mm += r.p_mpjpe_mm * static_cast<double>(r.frames);
    out.bone_len_err_mm += r.bone_len_err_mm * static_cast<double>(r.frames);
  }
  if (out.frames > 0) {
    const double n = static_cast<double>(out.frames);
    out.mpjpe_mm /= n;
    out.p_mpjpe_mm /= n;
    out.bone_len_err_mm /= n;
  }
  return out;
}

// Protocol 1 on root-relative poses, Protocol 2 after similarity alignment,
// and bone-length error of the predicted skeleton, grouped by the truth's
// action label. Sequences are matched by position and must agree on name,
// action and frame count.
inline EvaluationReport evaluate(const std::vector<PoseSequence>& pred,
                                 const std::vector<PoseSequence>& truth,
                                 const SkeletonTopology& topo, bool allow_reflection = false) {
  if (pred.size() != truth.size())
    throw LabelMismatch("prediction has " + std::to_string(pred.size()) + " sequences, truth has " +
                        std::to_string(truth.size()));
  std::map<std::string, detail::Accumulator> acc;
  std::string signature = "root-relative;";
  signature += allow_reflection ? "reflect;" : "proper;";
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const auto& p = pred[s];
    const auto& g = truth[s];
    if (!p.info.name.empty() && p.info.name != g.info.name)
      throw LabelMismatch("sequence " + std::to_string(s) + ": '" + p.info.name + "' vs '" +
                          g.info.name + "'");
    if (!p.info.action.empty() && p.info.action != g.info.action)
      throw LabelMismatch("sequence '" + g.info.name + "': action '" + p.info.action + "' vs '" +
                          g.info.action + "'");
    if (p.size() != g.size())
      throw LabelMismatch("sequence '" + g.info.name + "': frame count " + std::to_string(p.size()) +
                          " vs " + std::to_string(g.size()));
    auto& a = acc[g.info.action];
    for (long t = 0; t < g.size(); ++t) {
      const Pose pr = root_relative(p.frames[t]);
      const Pose gr = root_relative(g.frames[t]);
      a.mpjpe += mpjpe(pr, gr);
      a.p_mpjpe += p_mpjpe(p.frames[t], g.frames[t], allow_reflection);
      a.bone += bone_length_error(bone_lengths_of(p.frames[t], topo), bone_lengths_of(g.frames[t], topo));
      ++a.frames;
    }
    signature += g.info.name + ":" + std::to_string(g.size()) + ";";
  }
  EvaluationReport report;
  for (const auto& [action, a] : acc) {
    const double n = static_cast<double>(std::max(1L, a.frames));
    report.actions.push_back({action, a.frames, a.mpjpe / n, a.p_mpjpe / n, a.bone / n});
  }
  std::stable_sort(report.actions.begin(), report.actions.end(),
                   [](const ActionMetrics& x, const ActionMetrics& y) {
                     const int rx = detail::action_rank(x.action), ry = detail::action_rank(y.action);
                     return rx != ry ? rx < ry : x.action < y.action;
                   });
  report.overall = frame_weighted_mean(report.actions);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(detail::fnv1a(signature)));
  report.fingerprint = buf;
  return report;
}

// ---- emission --------------------------------------------------------------

inline std::string format_mm(double v, int decimals = 1) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

// Overall row must be the frame-weighted mean of the action rows.
inline void check_overall(const EvaluationReport& r, double tol = 1e-9) {
  const ActionMetrics m = frame_weighted_mean(r.actions);
  auto close = [&](double a, double b) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); };
  if (m.frames != r.overall.frames || !close(m.mpjpe_mm, r.overall.mpjpe_mm) ||
      !close(m.p_mpjpe_mm, r.overall.p_mpjpe_mm) ||
      !close(m.bone_len_err_mm, r.overall.bone_len_err_mm))
    throw ValidationError("report overall row is not the frame-weighted mean of its actions");
}

inline std::string report_csv(const EvaluationReport& r) {
  check_overall(r);
  std::ostringstream out;
  out << "action,frames,mpjpe_mm,p_mpjpe_mm,bone_len_err_mm\n";
  auto row = [&](const ActionMetrics& m) {
    out << m.action << ',' << m.frames << ',' << format_mm(m.mpjpe_mm, 6) << ','
        << format_mm(m.p_mpjpe_mm, 6) << ',' << format_mm(m.bone_len_err_mm, 6) << '\n';
  };
  for (const auto& m : r.actions) row(m);
  row(r.overall);
  return out.str();
}

inline nlohmann::json report_json(const EvaluationReport& r) {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& m : r.actions)
    actions.push_back({{"action", m.action},
                       {"frames", m.frames},
                       {"mpjpe_mm", m.mpjpe_mm},
                       {"p_mpjpe_mm", m.p_mpjpe_mm},
                       {"bone_len_err_mm", m.bone_len_err_mm}});
  return {{"mpjpe_mm", r.overall.mpjpe_mm},
          {"p_mpjpe_mm", r.overall.p_mpjpe_mm},
          {"bone_len_err_mm", r.overall.bone_len_err_mm},
          {"frames", r.overall.frames},
          {"fingerprint", r.fingerprint},
          {"actions", actions}};
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  EvaluationReport r;
  try {
    for (const auto& a : j.at("actions"))
      r.actions.push_back({a.at("action").get<std::string>(), a.at("frames").get<long>(),
                           a.at("mpjpe_mm").get<double>(), a.at("p_mpjpe_mm").get<double>(),
                           a.at("bone_len_err_mm").get<double>()});
    r.overall = {"overall", j.at("frames").get<long>(), j.at("mpjpe_mm").get<double>(),
                 j.at("p_mpjpe_mm").get<double>(), j.at("bone_len_err_mm").get<double>()};
    r.fingerprint = j.value("fingerprint", "");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("report: ") + e.what());
  }
  return r;
}

enum class Metric { mpjpe, p_mpjpe, bone_length };

inline double metric_of(const ActionMetrics& m, Metric which) {
  switch (which) {
    case Metric::mpjpe: return m.mpjpe_mm;
    case Metric::p_mpjpe: return m.p_mpjpe_mm;
    case Metric::bone_length: return m.bone_len_err_mm;
  }
  return 0.0;
}

// One Markdown table per metric: actions as columns, one row per labeled
// report, average last. The best value in each column is bolded.
inline std::string report_markdown(const std::vector<std::pair<std::string, EvaluationReport>>& rows,
                                   Metric which, const std::string& title) {
  std::vector<std::string> actions;
  for (const auto& [label, r] : rows) {
    check_overall(r);
    for (const auto& m : r.actions)
      if (std::find(actions.begin(), actions.end(), m.action) == actions.end()) actions.push_back(m.action);
  }
  std::stable_sort(actions.begin(), actions.end(), [](const std::string& x, const std::string& y) {
    const int rx = detail::action_rank(x), ry = detail::action_rank(y);
    return rx != ry ? rx < ry : x < y;
  });
  auto short_name = [](const std::string& a) {
    for (const auto& [full, abbrev] : h36m_actions())
      if (a == full) return std::string(abbrev);
    return a;
  };
  auto cell = [&](const EvaluationReport& r, const std::string& action) -> const ActionMetrics* {
    for (const auto& m : r.actions)
      if (m.action == action) return &m;
    return nullptr;
  };

  const std::size_t cols = actions.size() + 1;
  std::vector<double> best(cols, 1e300);
  for (const auto& [label, r] : rows) {
    for (std::size_t c = 0; c < actions.size(); ++c)
      if (const auto* m = cell(r, actions[c])) best[c] = std::min(best[c], metric_of(*m, which));
    best.back() = std::min(best.back(), metric_of(r.overall, which));
  }

  std::ostringstream out;
  out << "| " << title << " |";
  for (const auto& a : actions) out << ' ' << short_name(a) << " |";
  out << " Avg |\n|---|";
  for (std::size_t c = 0; c < cols; ++c) out << "---:|";
  out << '\n';
  for (const auto& [label, r] : rows) {
    out << "| " << label << " |";
    auto emit = [&](double v, double b) {
      const std::string s = format_mm(v);
      out << ' ' << (rows.size() > 1 && s == format_mm(b) ? "**" + s + "**" : s) << " |";
    };
    for (std::size_t c = 0; c < actions.size(); ++c) {
      if (const auto* m = cell(r, actions[c]))
        emit(metric_of(*m, which), best[c]);
      else
        out << " - |";
    }
    emit(metric_of(r.overall, which), best.back());
    out << '\n';
  }
  return out.str();
}

}  // namespace blapose
