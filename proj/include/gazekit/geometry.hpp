#pragma once

#include <Eigen/Dense>
#include <array>
#include <utility>

#include "gazekit/error.hpp"

namespace gazekit {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Tolerance for collinearity / parallelism tests on normalized cross products.
inline constexpr double kDegenerateTol = 1e-9;

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  Mat3 matrix() const {
    Mat3 k;
    k << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    return k;
  }

  bool valid() const { return fx > 0.0 && fy > 0.0; }

  /// Pinhole projection of a camera-space point (z > 0) to pixels.
  Vec2 project(const Vec3& p) const { return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy}; }
};

// Six landmarks in head coordinates (mm): eye corners then mouth corners.
// Order: right eye outer/inner, left eye inner/outer, right/left mouth corner.
// The head frame has x from the right-eye midpoint to the left-eye midpoint,
// y toward the mouth inside the eyes-mouth triangle plane, z = x cross y
// (pointing out the back of the head). Origin at the eyes midpoint.
struct FaceModel {
  std::array<Vec3, 6> landmarks;

  Vec3 right_eye_center() const { return 0.5 * (landmarks[0] + landmarks[1]); }
  Vec3 left_eye_center() const { return 0.5 * (landmarks[2] + landmarks[3]); }
  Vec3 mouth_center() const { return 0.5 * (landmarks[4] + landmarks[5]); }

  /// Person-independent default model used by the synthetic generator and CLI.
  static FaceModel generic();
};

enum class EyeSide { Left, Right };

inline char eye_side_char(EyeSide side) { return side == EyeSide::Left ? 'L' : 'R'; }

struct HeadPose {
  Mat3 rotation = Mat3::Identity();   // head frame -> camera frame
  Vec3 translation = Vec3::Zero();    // mm, camera coordinates
};

struct NormalizationSpec {
  double distance_mm = 600.0;
  CameraIntrinsics camera{960.0, 960.0, 30.0, 18.0};
  int out_width = 60;
  int out_height = 36;
};

// Per-eye transform into the normalized camera: rotation R, scale S,
// M = S * R, and the image warp W = C_n * M * C_r^-1.
struct NormalizationTransform {
  Mat3 rotation;
  Mat3 scale;
  Mat3 conversion;
  Mat3 image_warp;
};

struct GazeAngles {
  double yaw = 0.0;    // radians, positive looking toward camera x-negative
  double pitch = 0.0;  // radians, positive looking up (camera y-negative)
};

struct HeadAngles {
  double yaw = 0.0;
  double pitch = 0.0;
};

/// Recover the head frame from six landmarks given in any rigid placement.
/// Returns the frame rotation (head axes as columns, i.e. head -> input frame)
/// and the landmarks re-expressed in the head frame.
std::pair<Mat3, FaceModel> build_head_frame(const std::array<Vec3, 6>& landmarks);

/// Eye midpoint in camera coordinates: R_r * e_h + t_r.
Vec3 eye_center_camera(const HeadPose& pose, const FaceModel& face, EyeSide side);

/// Normalizing transform for one eye at camera-space position eye_center.
NormalizationTransform compute_normalization(const Vec3& eye_center, const Mat3& head_rotation,
                                             const NormalizationSpec& spec,
                                             const CameraIntrinsics& real_camera);

/// Gaze direction in normalized space: rotate by R, renormalize, to angles.
GazeAngles normalize_gaze(const Vec3& gaze_camera, const NormalizationTransform& xform);

/// Head orientation angles in normalized space (direction of the face normal).
/// Throws RollResidual if the rotated head x-axis has a y-component beyond tol.
HeadAngles normalize_head(const Mat3& head_rotation, const NormalizationTransform& xform,
                          double roll_tol = 1e-6);

Vec3 angles_to_vector(const GazeAngles& a);
GazeAngles vector_to_angles(const Vec3& v);

inline Vec3 angles_to_vector(const HeadAngles& a) { return angles_to_vector(GazeAngles{a.yaw, a.pitch}); }

/// Mirror rule for horizontal flips: (yaw, pitch) -> (-yaw, pitch).
inline GazeAngles mirror(const GazeAngles& a) { return {-a.yaw, a.pitch}; }
inline HeadAngles mirror(const HeadAngles& a) { return {-a.yaw, a.pitch}; }

/// Angle between two directions in degrees, in [0, 180].
double angular_error_deg(const Vec3& a, const Vec3& b);
double angular_error_deg(const GazeAngles& a, const GazeAngles& b);

struct GazeRay {
  Vec3 origin;
  Vec3 direction;
};

/// Mean gaze ray from both eyes: midpoint origin, normalized direction sum.
GazeRay fuse_both_eyes(const Vec3& gaze_left, const Vec3& gaze_right, const Vec3& eye_left,
                       const Vec3& eye_right);

/// Unit vector from the eye center toward a 3D target.
Vec3 gaze_target_to_vector(const Vec3& target, const Vec3& eye_center);

}  // namespace gazekit
