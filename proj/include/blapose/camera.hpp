#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "blapose/error.hpp"
#include "blapose/sequence.hpp"

namespace blapose {

inline constexpr double kMinDepth = 1e-9;

// Pinhole intrinsics with Brown-Conrady distortion (3 radial, 2 tangential).
struct CameraIntrinsics {
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  double k1 = 0.0, k2 = 0.0, k3 = 0.0;
  double p1 = 0.0, p2 = 0.0;
  double width = 1.0, height = 1.0;

  void validate() const {
    if (!(fx > 0 && fy > 0)) throw ValidationError("camera: focal lengths must be positive");
    if (!(width > 0 && height > 0)) throw ValidationError("camera: image size must be positive");
  }

  static CameraIntrinsics from_json(const nlohmann::json& j) {
    CameraIntrinsics c;
    try {
      c.fx = j.at("fx").get<double>();
      c.fy = j.at("fy").get<double>();
      c.cx = j.at("cx").get<double>();
      c.cy = j.at("cy").get<double>();
      const auto& k = j.at("k");
      const auto& p = j.at("p");
      if (k.size() != 3 || p.size() != 2)
        throw SchemaError("camera: k needs 3 entries and p needs 2");
      c.k1 = k[0].get<double>();
      c.k2 = k[1].get<double>();
      c.k3 = k[2].get<double>();
      c.p1 = p[0].get<double>();
      c.p2 = p[1].get<double>();
      c.width = j.at("width").get<double>();
      c.height = j.at("height").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(std::string("camera: ") + e.what());
    }
    c.validate();
    return c;
  }

  static CameraIntrinsics load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open camera file " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError(path.string() + ": " + e.what());
    }
    return from_json(j);
  }

  nlohmann::json to_json() const {
    return {{"fx", fx}, {"fy", fy}, {"cx", cx},     {"cy", cy},     {"k", {k1, k2, k3}},
            {"p", {p1, p2}}, {"width", width}, {"height", height}};
  }
};

inline Eigen::Vector2d project_point(const Eigen::Vector3d& p, const CameraIntrinsics& cam) {
  if (!(p.z() > kMinDepth)) throw BehindCamera();
  const double x = p.x() / p.z();
  const double y = p.y() / p.z();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (cam.k1 + r2 * (cam.k2 + r2 * cam.k3));
  const double xd = radial * x + 2.0 * cam.p1 * x * y + cam.p2 * (r2 + 2.0 * x * x);
  const double yd = radial * y + cam.p1 * (r2 + 2.0 * y * y) + 2.0 * cam.p2 * x * y;
  return {cam.fx * xd + cam.cx, cam.fy * yd + cam.cy};
}

inline Keypoints project_pose(const Pose& pose, const CameraIntrinsics& cam, long frame = 0) {
  Keypoints kp(pose.rows(), 2);
  for (Eigen::Index j = 0; j < pose.rows(); ++j) {
    try {
      kp.row(j) = project_point(pose.row(j).transpose(), cam).transpose();
    } catch (const BehindCamera&) {
      throw BehindCamera(frame, static_cast<int>(j));
    }
  }
  return kp;
}

inline KeypointSequence project_sequence(const PoseSequence& poses, const CameraIntrinsics& cam) {
  KeypointSequence out;
  out.info = poses.info;
  out.frames.reserve(poses.frames.size());
  out.confidence.reserve(poses.frames.size());
  for (long t = 0; t < poses.size(); ++t) {
    out.frames.push_back(project_pose(poses.frames[t], cam, t));
    out.confidence.push_back(Eigen::VectorXd::Ones(poses.frames[t].rows()));
  }
  return out;
}

// Pixels to model input: centered on the principal point and divided by the
// image width on both axes so the aspect ratio is preserved.
inline Keypoints normalize_keypoints(const Keypoints& kp, const CameraIntrinsics& cam) {
  Keypoints out(kp.rows(), 2);
  out.col(0) = (2.0 / cam.width) * (kp.col(0).array() - cam.cx);
  out.col(1) = (2.0 / cam.width) * (kp.col(1).array() - cam.cy);
  return out;
}

inline Keypoints denormalize_keypoints(const Keypoints& kp, const CameraIntrinsics& cam) {
  Keypoints out(kp.rows(), 2);
  out.col(0) = kp.col(0).array() * (cam.width / 2.0) + cam.cx;
  out.col(1) = kp.col(1).array() * (cam.width / 2.0) + cam.cy;
  return out;
}

inline KeypointSequence normalize_keypoints(const KeypointSequence& seq,
                                            const CameraIntrinsics& cam) {
  KeypointSequence out = seq;
  for (auto& f : out.frames) f = normalize_keypoints(f, cam);
  return out;
}

inline KeypointSequence denormalize_keypoints(const KeypointSequence& seq,
                                              const CameraIntrinsics& cam) {
  KeypointSequence out = seq;
  for (auto& f : out.frames) f = denormalize_keypoints(f, cam);
  return out;
}

// Tag stored next to normalized keypoints so readers can check the convention.
inline constexpr const char* kNormalizationTag = "center-principal-point/divide-width";

}  // namespace blapose
