#include "gazekit/geometry.hpp"

#include <cmath>

namespace gazekit {

FaceModel FaceModel::generic() {
  // Millimetres. Eye corners sit slightly off the mouth plane so the six
  // points are not coplanar, which keeps pose initialization well-posed.
  FaceModel face;
  face.landmarks = {
      Vec3(-45.0, 0.0, 4.0),   // right eye, outer corner
      Vec3(-15.0, 0.0, -4.0),  // right eye, inner corner
      Vec3(15.0, 0.0, -4.0),   // left eye, inner corner
      Vec3(45.0, 0.0, 4.0),    // left eye, outer corner
      Vec3(-22.0, 55.0, 0.0),  // right mouth corner
      Vec3(22.0, 55.0, 0.0),   // left mouth corner
  };
  return face;
}

std::pair<Mat3, FaceModel> build_head_frame(const std::array<Vec3, 6>& landmarks) {
  const Vec3 right_eye = 0.5 * (landmarks[0] + landmarks[1]);
  const Vec3 left_eye = 0.5 * (landmarks[2] + landmarks[3]);
  const Vec3 mouth = 0.5 * (landmarks[4] + landmarks[5]);

  const Vec3 eye_axis = left_eye - right_eye;
  const double eye_dist = eye_axis.norm();
  if (eye_dist <= 0.0) fail(ErrorKind::DegenerateLandmarks, "eye midpoints coincide");
  const Vec3 x_axis = eye_axis / eye_dist;

  const Vec3 origin = 0.5 * (right_eye + left_eye);
  const Vec3 to_mouth = mouth - origin;
  Vec3 y_axis = to_mouth - to_mouth.dot(x_axis) * x_axis;
  const double y_norm = y_axis.norm();
  if (y_norm / std::max(1.0, to_mouth.norm()) < kDegenerateTol)
    fail(ErrorKind::DegenerateLandmarks, "eye and mouth midpoints are collinear");
  y_axis /= y_norm;

  const Vec3 z_axis = x_axis.cross(y_axis);

  Mat3 frame;  // head axes as columns: head -> input coordinates
  frame.col(0) = x_axis;
  frame.col(1) = y_axis;
  frame.col(2) = z_axis;

  FaceModel local;
  for (int i = 0; i < 6; ++i) local.landmarks[i] = frame.transpose() * (landmarks[i] - origin);
  return {frame, local};
}

Vec3 eye_center_camera(const HeadPose& pose, const FaceModel& face, EyeSide side) {
  const Vec3 eye_h = side == EyeSide::Left ? face.left_eye_center() : face.right_eye_center();
  return pose.rotation * eye_h + pose.translation;
}

NormalizationTransform compute_normalization(const Vec3& eye_center, const Mat3& head_rotation,
                                             const NormalizationSpec& spec,
                                             const CameraIntrinsics& real_camera) {
  const double dist = eye_center.norm();
  if (dist <= 0.0) fail(ErrorKind::DegenerateGeometry, "eye center at camera origin");
  if (eye_center.z() <= 0.0) fail(ErrorKind::DegenerateGeometry, "eye center behind camera");

  const Vec3 z_cam = eye_center / dist;
  const Vec3 head_x = head_rotation.col(0);
  Vec3 y_cam = z_cam.cross(head_x);
  const double y_norm = y_cam.norm();
  if (y_norm < kDegenerateTol)
    fail(ErrorKind::DegenerateGeometry, "head x-axis parallel to the view direction");
  y_cam /= y_norm;
  const Vec3 x_cam = y_cam.cross(z_cam);

  NormalizationTransform out;
  out.rotation.row(0) = x_cam.transpose();
  out.rotation.row(1) = y_cam.transpose();
  out.rotation.row(2) = z_cam.transpose();
  out.scale = Vec3(1.0, 1.0, spec.distance_mm / dist).asDiagonal();
  out.conversion = out.scale * out.rotation;
  out.image_warp = spec.camera.matrix() * out.conversion * real_camera.matrix().inverse();
  return out;
}

GazeAngles normalize_gaze(const Vec3& gaze_camera, const NormalizationTransform& xform) {
  // Directions are rotated only; the scale part of M acts on positions.
  const Vec3 g = (xform.rotation * gaze_camera).normalized();
  return vector_to_angles(g);
}

HeadAngles normalize_head(const Mat3& head_rotation, const NormalizationTransform& xform,
                          double roll_tol) {
  const Mat3 rotated = xform.rotation * head_rotation;
  const double roll = rotated(1, 0);  // y-component of the rotated head x-axis
  if (std::abs(roll) > roll_tol)
    fail(ErrorKind::RollResidual, "normalized head roll residual " + std::to_string(roll));
  // Face normal: the head z-axis points out the back of the head, so the
  // facing direction seen by the normalized camera is its negation.
  const Vec3 facing = -rotated.col(2);
  const GazeAngles a = vector_to_angles(facing.normalized());
  return HeadAngles{a.yaw, a.pitch};
}

Vec3 angles_to_vector(const GazeAngles& a) {
  const double cp = std::cos(a.pitch);
  return {-cp * std::sin(a.yaw), -std::sin(a.pitch), -cp * std::cos(a.yaw)};
}

GazeAngles vector_to_angles(const Vec3& v) {
  if (v.z() >= 0.0) fail(ErrorKind::OutOfHemisphere, "direction does not face the camera");
  const Vec3 u = v.normalized();
  GazeAngles a;
  a.pitch = std::asin(std::clamp(-u.y(), -1.0, 1.0));
  a.yaw = std::atan2(-u.x(), -u.z());
  return a;
}

double angular_error_deg(const Vec3& a, const Vec3& b) {
  const double d = a.normalized().dot(b.normalized());
  return std::acos(std::clamp(d, -1.0, 1.0)) * 180.0 / M_PI;
}

double angular_error_deg(const GazeAngles& a, const GazeAngles& b) {
  return angular_error_deg(angles_to_vector(a), angles_to_vector(b));
}

GazeRay fuse_both_eyes(const Vec3& gaze_left, const Vec3& gaze_right, const Vec3& eye_left,
                       const Vec3& eye_right) {
  const Vec3 sum = gaze_left + gaze_right;
  if (sum.norm() < 1e-6) fail(ErrorKind::OpposedDirections, "eye gaze directions cancel");
  return GazeRay{0.5 * (eye_left + eye_right), sum.normalized()};
}

Vec3 gaze_target_to_vector(const Vec3& target, const Vec3& eye_center) {
  const Vec3 d = target - eye_center;
  const double n = d.norm();
  if (n < 1e-9) fail(ErrorKind::CoincidentPoints, "gaze target coincides with the eye center");
  return d / n;
}

}  // namespace gazekit
