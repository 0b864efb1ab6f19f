// Copyright 2026 The SmileFusion Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "smilefusion/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "smilefusion/error.hpp"

namespace smilefusion::geometry {

namespace {

constexpr double kDegenerateRatio = 1e-12;

}  // namespace

std::size_t KeyPointSet::max_index() const {
  return *std::max_element(indices.begin(), indices.end());
}

void LandmarkSequence::validate() const {
  if (frames.size() < 2) {
    throw InvalidArgument("landmark sequence needs at least 2 frames, got " +
                          std::to_string(frames.size()));
  }
  if (!std::isfinite(fps) || fps <= 0.0) {
    throw InvalidArgument("fps must be finite and positive");
  }
  if (label != 0 && label != 1) {
    throw InvalidArgument("label must be 0 or 1");
  }
  const std::size_t points = frames.front().size();
  if (points == 0) throw InvalidArgument("frames must contain points");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != points) {
      std::ostringstream msg;
      msg << "frame " << t << " has " << frames[t].size()
          << " points, expected " << points;
      throw InvalidArgument(msg.str());
    }
    for (const Point3& p : frames[t]) {
      if (!p.allFinite()) {
        throw InvalidArgument("frame " + std::to_string(t) +
                              " has a non-finite coordinate");
      }
    }
  }
}

LandmarkFrame select_keypoints(const LandmarkFrame& frame,
                               const KeyPointSet& keys) {
  if (frame.size() <= keys.max_index()) {
    throw IndexOutOfRange("frame has " + std::to_string(frame.size()) +
                          " points, key index " +
                          std::to_string(keys.max_index()) + " requested");
  }
  LandmarkFrame out;
  out.reserve(kKeyPointCount);
  for (std::size_t idx : keys.indices) out.push_back(frame[idx]);
  return out;
}

RigidPose estimate_pose(const LandmarkFrame& frame) {
  if (frame.size() != kKeyPointCount) {
    throw InvalidArgument("estimate_pose expects an 11-point frame");
  }
  const std::array<std::size_t, 5> ref{kRightEyeOuter, kRightEyeInner,
                                       kLeftEyeInner, kLeftEyeOuter, kNoseTip};
  Point3 centroid = Point3::Zero();
  for (std::size_t i : ref) centroid += frame[i];
  centroid /= static_cast<double>(ref.size());

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (std::size_t i : ref) {
    const Point3 d = frame[i] - centroid;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov);
  const Eigen::Vector3d& lambda = solver.eigenvalues();  // ascending
  // A planar point set has lambda(0) == 0; only a line (or a point) lacks a
  // well-defined plane, which shows up in the middle eigenvalue.
  if (!(lambda(2) > 0.0) || lambda(1) < kDegenerateRatio * lambda(2)) {
    throw DegenerateGeometry("eye and nose reference points are collinear");
  }
  Point3 normal = solver.eigenvectors().col(0).normalized();

  const Point3& right_outer = frame[kRightEyeOuter];
  const Point3& left_outer = frame[kLeftEyeOuter];
  const Point3 eye_axis = left_outer - right_outer;
  const double inter_ocular = eye_axis.norm();
  if (!(inter_ocular > 0.0)) {
    throw DegenerateGeometry("outer eye corners coincide");
  }
  const Point3 eye_mid = 0.5 * (right_outer + left_outer);
  if (normal.dot(eye_axis.cross(eye_mid - frame[kNoseTip])) < 0.0) {
    normal = -normal;
  }

  Point3 x_axis = eye_axis - eye_axis.dot(normal) * normal;
  const double x_norm = x_axis.norm();
  if (x_norm < kDegenerateRatio * inter_ocular) {
    throw DegenerateGeometry("eye axis is parallel to the face normal");
  }
  x_axis /= x_norm;
  const Point3 y_axis = normal.cross(x_axis);

  RigidPose pose;
  pose.rotation.col(0) = x_axis;
  pose.rotation.col(1) = y_axis;
  pose.rotation.col(2) = normal;
  pose.scale = inter_ocular;
  pose.translation = frame[kNoseTip];
  return pose;
}

LandmarkFrame normalize_frame(const LandmarkFrame& frame, const RigidPose& pose) {
  if (!(pose.scale > 0.0)) throw InvalidArgument("pose scale must be positive");
  const bool identity = pose.rotation == Eigen::Matrix3d::Identity() &&
                        pose.scale == 1.0 && pose.translation.isZero(0.0);
  if (identity) return frame;
  const Eigen::Matrix3d inv = pose.rotation.transpose();
  LandmarkFrame out;
  out.reserve(frame.size());
  for (const Point3& p : frame) {
    out.push_back(inv * (p - pose.translation) / pose.scale);
  }
  return out;
}

LandmarkFrame apply_pose(const LandmarkFrame& frame, const RigidPose& pose) {
  LandmarkFrame out;
  out.reserve(frame.size());
  for (const Point3& p : frame) {
    out.push_back(pose.scale * (pose.rotation * p) + pose.translation);
  }
  return out;
}

LandmarkSequence normalize_sequence(const LandmarkSequence& seq,
                                    const KeyPointSet& keys) {
  LandmarkSequence out;
  out.fps = seq.fps;
  out.subject_id = seq.subject_id;
  out.label = seq.label;
  out.frames.reserve(seq.frames.size());
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const LandmarkFrame& raw = seq.frames[t];
    LandmarkFrame key =
        raw.size() == kKeyPointCount ? raw : select_keypoints(raw, keys);
    try {
      out.frames.push_back(normalize_frame(key, estimate_pose(key)));
    } catch (const DegenerateGeometry& e) {
      throw DegenerateGeometry("frame " + std::to_string(t) + ": " + e.what());
    }
  }
  return out;
}

Eigen::Matrix3d rotation_from_euler(double roll, double pitch, double yaw) {
  return (Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(pitch, Eigen::Vector3d::UnitX()) *
          Eigen::AngleAxisd(roll, Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
}

}  // namespace smilefusion::geometry
