#include "gazekit/pnp.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace gazekit {

namespace {

Mat3 closest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

Mat3 rodrigues(const Vec3& w) {
  const double theta = w.norm();
  if (theta < 1e-12) {
    Mat3 r = Mat3::Identity();
    r(0, 1) = -w.z(); r(0, 2) = w.y();
    r(1, 0) = w.z();  r(1, 2) = -w.x();
    r(2, 0) = -w.y(); r(2, 1) = w.x();
    return closest_rotation(r);
  }
  const Vec3 axis = w / theta;
  Mat3 k = Mat3::Zero();
  k(0, 1) = -axis.z(); k(0, 2) = axis.y();
  k(1, 0) = axis.z();  k(1, 2) = -axis.x();
  k(2, 0) = -axis.y(); k(2, 1) = axis.x();
  return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * k * k;
}

// Linear pose estimate from the 12-parameter projection matrix. Points are
// Hartley-normalized on both sides before solving the homogeneous system.
bool dlt_pose(const FaceModel& face, const std::array<Vec2, 6>& pts,
              const CameraIntrinsics& camera, HeadPose& out) {
  Vec3 c3 = Vec3::Zero();
  Vec2 c2 = Vec2::Zero();
  for (int i = 0; i < 6; ++i) {
    c3 += face.landmarks[i];
    c2 += pts[i];
  }
  c3 /= 6.0;
  c2 /= 6.0;
  double s3 = 0.0, s2 = 0.0;
  for (int i = 0; i < 6; ++i) {
    s3 += (face.landmarks[i] - c3).norm();
    s2 += (pts[i] - c2).norm();
  }
  if (s3 <= 0.0 || s2 <= 0.0) return false;
  const double k3 = std::sqrt(3.0) * 6.0 / s3;
  const double k2 = std::sqrt(2.0) * 6.0 / s2;

  Eigen::Matrix<double, 12, 12> a = Eigen::Matrix<double, 12, 12>::Zero();
  for (int i = 0; i < 6; ++i) {
    const Vec3 x = (face.landmarks[i] - c3) * k3;
    const Vec2 u = (pts[i] - c2) * k2;
    Eigen::Matrix<double, 1, 4> xh;
    xh << x.x(), x.y(), x.z(), 1.0;
    a.block<1, 4>(2 * i, 0) = xh;
    a.block<1, 4>(2 * i, 8) = -u.x() * xh;
    a.block<1, 4>(2 * i + 1, 4) = xh;
    a.block<1, 4>(2 * i + 1, 8) = -u.y() * xh;
  }

  Eigen::JacobiSVD<Eigen::Matrix<double, 12, 12>> svd(a, Eigen::ComputeFullV);
  const Eigen::Matrix<double, 12, 1> p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> proj;
  proj.row(0) = p.segment<4>(0).transpose();
  proj.row(1) = p.segment<4>(4).transpose();
  proj.row(2) = p.segment<4>(8).transpose();

  // Undo the normalizing similarities.
  Mat3 t2;
  t2 << k2, 0.0, -k2 * c2.x(), 0.0, k2, -k2 * c2.y(), 0.0, 0.0, 1.0;
  Eigen::Matrix4d t3 = Eigen::Matrix4d::Identity();
  t3.block<3, 3>(0, 0) = Mat3::Identity() * k3;
  t3.block<3, 1>(0, 3) = -k3 * c3;
  proj = t2.inverse() * proj * t3;

  Eigen::Matrix<double, 3, 4> m = camera.matrix().inverse() * proj;
  Mat3 b = m.block<3, 3>(0, 0);
  const double det = b.determinant();
  if (!std::isfinite(det) || std::abs(det) < 1e-18) return false;
  if (det < 0.0) {
    m = -m;
    b = -b;
  }
  Eigen::JacobiSVD<Mat3> bsvd(b);
  const double scale = bsvd.singularValues().mean();
  if (scale <= 0.0 || !std::isfinite(scale)) return false;
  if (bsvd.singularValues()(2) < 1e-6 * bsvd.singularValues()(0)) return false;

  out.rotation = closest_rotation(b);
  out.translation = m.block<3, 1>(0, 3) / scale;
  // A right-handed pose behind the camera means the data is inconsistent with
  // a physical face placement; let the caller fall back.
  return out.translation.allFinite() && out.translation.z() > 0.0;
}

// Coarse fallback: frontal orientation at a depth matched to the 2D spread.
HeadPose heuristic_pose(const FaceModel& face, const std::array<Vec2, 6>& pts,
                        const CameraIntrinsics& camera) {
  Vec3 c3 = Vec3::Zero();
  Vec2 c2 = Vec2::Zero();
  for (int i = 0; i < 6; ++i) {
    c3 += face.landmarks[i];
    c2 += pts[i];
  }
  c3 /= 6.0;
  c2 /= 6.0;
  double s3 = 0.0, s2 = 0.0;
  for (int i = 0; i < 6; ++i) {
    s3 += (face.landmarks[i] - c3).norm();
    s2 += (pts[i] - c2).norm();
  }
  const double depth = s2 > 0.0 ? camera.fx * s3 / s2 : 600.0;
  HeadPose pose;
  pose.translation =
      Vec3((c2.x() - camera.cx) * depth / camera.fx, (c2.y() - camera.cy) * depth / camera.fy,
           depth) - pose.rotation * c3;
  return pose;
}

double sum_squared_residuals(const FaceModel& face, const std::array<Vec2, 6>& pts,
                             const CameraIntrinsics& camera, const HeadPose& pose,
                             Eigen::Matrix<double, 12, 1>* residuals) {
  double sse = 0.0;
  for (int i = 0; i < 6; ++i) {
    const Vec3 p = pose.rotation * face.landmarks[i] + pose.translation;
    const Vec2 proj = camera.project(p);
    const Vec2 r = proj - pts[i];
    if (residuals) {
      (*residuals)(2 * i) = r.x();
      (*residuals)(2 * i + 1) = r.y();
    }
    sse += r.squaredNorm();
  }
  return sse;
}

}  // namespace

double reprojection_rms(const FaceModel& face, const std::array<Vec2, 6>& points,
                        const CameraIntrinsics& camera, const HeadPose& pose) {
  return std::sqrt(sum_squared_residuals(face, points, camera, pose, nullptr) / 12.0);
}

HeadPose estimate_head_pose(const FaceModel& face, const std::array<Vec2, 6>& points,
                            const CameraIntrinsics& camera, const PnpOptions& options) {
  if (!camera.valid()) fail(ErrorKind::InvalidArgument, "camera focal lengths must be positive");

  HeadPose pose;
  if (!dlt_pose(face, points, camera, pose) || pose.translation.z() <= 0.0)
    pose = heuristic_pose(face, points, camera);

  // Damped Gauss-Newton on (rotation, translation), rotation updated by
  // left-composed axis-angle increments.
  double lambda = options.initial_lambda;
  Eigen::Matrix<double, 12, 1> residuals;
  double sse = sum_squared_residuals(face, points, camera, pose, &residuals);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    Eigen::Matrix<double, 12, 6> jac;
    for (int i = 0; i < 6; ++i) {
      const Vec3 p = pose.rotation * face.landmarks[i] + pose.translation;
      const double inv_z = 1.0 / p.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << camera.fx * inv_z, 0.0, -camera.fx * p.x() * inv_z * inv_z,
               0.0, camera.fy * inv_z, -camera.fy * p.y() * inv_z * inv_z;
      const Vec3 rx = pose.rotation * face.landmarks[i];
      Mat3 drot;  // d(exp(w) rx)/dw at w = 0 is -[rx]x
      drot << 0.0, rx.z(), -rx.y(), -rx.z(), 0.0, rx.x(), rx.y(), -rx.x(), 0.0;
      jac.block<2, 3>(2 * i, 0) = dproj * drot;
      jac.block<2, 3>(2 * i, 3) = dproj;
    }

    const Eigen::Matrix<double, 6, 1> gradient = jac.transpose() * residuals;
    if (gradient.norm() < options.gradient_tol) break;

    const Eigen::Matrix<double, 6, 6> hessian = jac.transpose() * jac;
    bool accepted = false;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      Eigen::Matrix<double, 6, 6> damped = hessian;
      damped.diagonal().array() += lambda;
      const Eigen::Matrix<double, 6, 1> step = damped.ldlt().solve(-gradient);
      HeadPose trial;
      trial.rotation = rodrigues(step.head<3>()) * pose.rotation;
      trial.translation = pose.translation + step.tail<3>();
      Eigen::Matrix<double, 12, 1> trial_res;
      const double trial_sse = sum_squared_residuals(face, points, camera, trial, &trial_res);
      if (std::isfinite(trial_sse) && trial_sse < sse) {
        pose = trial;
        sse = trial_sse;
        residuals = trial_res;
        lambda = std::max(lambda * 0.1, 1e-14);
        accepted = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) break;
  }

  if (pose.translation.z() <= 0.0)
    fail(ErrorKind::BehindCamera, "estimated face position is behind the camera");
  const double rms = std::sqrt(sse / 12.0);
  if (rms > options.max_rms_px)
    fail(ErrorKind::PoseDivergence,
         "reprojection rms " + std::to_string(rms) + " px exceeds " +
             std::to_string(options.max_rms_px));
  return pose;
}

}  // namespace gazekit
