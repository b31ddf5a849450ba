#pragma once

#include <array>
#include <vector>

#include "gazekit/geometry.hpp"

namespace gazekit {

struct PnpOptions {
  int max_iterations = 50;
  double initial_lambda = 1e-3;
  double gradient_tol = 1e-10;
  double max_rms_px = 20.0;  // above this the pose is rejected as diverged
};

/// Root-mean-square reprojection error of a pose over the six landmarks, px.
double reprojection_rms(const FaceModel& face, const std::array<Vec2, 6>& points,
                        const CameraIntrinsics& camera, const HeadPose& pose);

/// Rigid pose of the face model from its six projected landmarks.
/// Linear (DLT) initialization refined by damped Gauss-Newton steps that
/// only ever accept error-decreasing iterates.
HeadPose estimate_head_pose(const FaceModel& face, const std::array<Vec2, 6>& points,
                            const CameraIntrinsics& camera, const PnpOptions& options = {});

}  // namespace gazekit
