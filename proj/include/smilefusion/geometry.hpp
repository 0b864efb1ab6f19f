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

#ifndef SMILEFUSION_GEOMETRY_HPP_
#define SMILEFUSION_GEOMETRY_HPP_

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace smilefusion::geometry {

using Point3 = Eigen::Vector3d;
using LandmarkFrame = std::vector<Point3>;

inline constexpr std::size_t kKeyPointCount = 11;
inline constexpr std::size_t kFullMeshPointCount = 478;

// Positions inside an 11-point key frame. The mesh topology places index 362
// at the inner and 263 at the outer corner of the left eye, so the outer
// corners of both eyes are kRightEyeOuter and kLeftEyeOuter.
enum KeyPoint : std::size_t {
  kRightEyeOuter = 0,   // mesh 33
  kRightEyeCenter = 1,  // mesh 159
  kRightEyeInner = 2,   // mesh 133
  kLeftEyeInner = 3,    // mesh 362
  kLeftEyeCenter = 4,   // mesh 386
  kLeftEyeOuter = 5,    // mesh 263
  kRightCheek = 6,      // mesh 50
  kLeftCheek = 7,       // mesh 280
  kNoseTip = 8,         // mesh 1
  kRightLipCorner = 9,  // mesh 62
  kLeftLipCorner = 10,  // mesh 308
};

struct KeyPointSet {
  std::array<std::size_t, kKeyPointCount> indices{33, 159, 133, 362, 386, 263,
                                                   50, 280, 1,   62,  308};

  std::size_t max_index() const;
};

struct LandmarkSequence {
  std::vector<LandmarkFrame> frames;
  double fps = 25.0;
  std::string subject_id;
  int label = 0;  // 0 posed, 1 genuine

  std::size_t frame_count() const { return frames.size(); }
  std::size_t point_count() const {
    return frames.empty() ? 0 : frames.front().size();
  }

  // Throws InvalidArgument when fewer than two frames, ragged point counts,
  // non-finite coordinates or a bad fps/label are present.
  void validate() const;
};

// Similarity transform mapping canonical face coordinates to observed ones:
// observed = scale * rotation * canonical + translation.
struct RigidPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  double scale = 1.0;
  Point3 translation = Point3::Zero();
};

LandmarkFrame select_keypoints(const LandmarkFrame& frame,
                               const KeyPointSet& keys = {});

// Pose of an 11-point frame. The rotation columns are the canonical axes in
// observed coordinates: x runs from the right outer eye corner to the left
// outer eye corner, z is the normal of the least-squares plane through the
// four eye corners and the nose tip (oriented out of the face), y = z cross x
// points from the nose towards the eyes. Scale is the outer inter-ocular
// distance and translation the nose tip.
RigidPose estimate_pose(const LandmarkFrame& frame);

// p -> rotation^T (p - translation) / scale
LandmarkFrame normalize_frame(const LandmarkFrame& frame, const RigidPose& pose);

// p -> scale * rotation * p + translation (inverse of normalize_frame)
LandmarkFrame apply_pose(const LandmarkFrame& frame, const RigidPose& pose);

// Reduces full-mesh frames to the key points (11-point frames pass through)
// and normalizes every frame by its own estimated pose.
LandmarkSequence normalize_sequence(const LandmarkSequence& seq,
                                    const KeyPointSet& keys = {});

Eigen::Matrix3d rotation_from_euler(double roll, double pitch, double yaw);

}  // namespace smilefusion::geometry

#endif  // SMILEFUSION_GEOMETRY_HPP_
