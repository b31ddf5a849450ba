#include "gazekit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>

#include "gazekit/dataset.hpp"
#include "gazekit/parallel.hpp"

namespace fs = std::filesystem;

namespace gazekit {

namespace {

constexpr double kDeg = M_PI / 180.0;
// Socket (eye-opening) displacement per unit tangent of the head angle.
constexpr double kSocketShiftPerTan = 6.0;

inline double mix(double a, double b, double alpha) { return a + (b - a) * alpha; }

// Signed coverage of a disc edge, ~1 inside, ~0 outside, linear over 1 px.
inline double disc_alpha(double dist, double radius) {
  return std::clamp(radius + 0.5 - dist, 0.0, 1.0);
}

std::uint64_t noise_stream(const EyeAppearance& app, const GazeAngles& g, const HeadAngles& h) {
  std::uint64_t bits = 0;
  const auto mixin = [&bits](double v) {
    std::uint64_t u;
    static_assert(sizeof(u) == sizeof(v));
    std::memcpy(&u, &v, sizeof(u));
    bits = splitmix64(bits ^ u);
  };
  mixin(g.yaw);
  mixin(g.pitch);
  mixin(h.yaw);
  mixin(h.pitch);
  return derive_seed(app.person_seed, bits);
}

Mat3 head_rotation_from_angles(double yaw, double pitch, double roll) {
  return (Eigen::AngleAxisd(yaw, Vec3::UnitY()) * Eigen::AngleAxisd(-pitch, Vec3::UnitX()) *
          Eigen::AngleAxisd(roll, Vec3::UnitZ()))
      .toRotationMatrix();
}

EyeAppearance sample_appearance(Rng& rng, double noise_sigma, std::uint64_t person_seed) {
  EyeAppearance app;
  app.iris_radius_px = rng.uniform(6.5, 8.5);
  app.sclera_level = rng.uniform(200.0, 240.0);
  app.iris_level = rng.uniform(40.0, 80.0);
  app.pupil_level = app.iris_level * 0.45;
  app.skin_level = rng.uniform(140.0, 190.0);
  app.eyelid_aperture_px = rng.uniform(11.0, 15.0);
  app.illum_direction_rad = rng.uniform(0.0, 2.0 * M_PI);
  app.illum_strength = rng.uniform(0.0, 25.0);
  app.noise_sigma = noise_sigma;
  app.person_seed = person_seed;
  return app;
}

// Paint the normalized-space patch into the camera frame through the inverse
// of the normalization warp, sampling the patch bilinearly.
void paint_patch(GrayImage& frame, const GrayImage& patch, const Mat3& warp) {
  const Mat3 inv = warp.inverse();
  double min_x = 1e18, max_x = -1e18, min_y = 1e18, max_y = -1e18;
  const double corners[4][2] = {{0.0, 0.0},
                                {static_cast<double>(patch.width - 1), 0.0},
                                {0.0, static_cast<double>(patch.height - 1)},
                                {static_cast<double>(patch.width - 1),
                                 static_cast<double>(patch.height - 1)}};
  for (const auto& c : corners) {
    const Vec3 p = inv * Vec3(c[0], c[1], 1.0);
    min_x = std::min(min_x, p.x() / p.z());
    max_x = std::max(max_x, p.x() / p.z());
    min_y = std::min(min_y, p.y() / p.z());
    max_y = std::max(max_y, p.y() / p.z());
  }
  const int x0 = std::max(0, static_cast<int>(std::floor(min_x)));
  const int x1 = std::min(frame.width - 1, static_cast<int>(std::ceil(max_x)));
  const int y0 = std::max(0, static_cast<int>(std::floor(min_y)));
  const int y1 = std::min(frame.height - 1, static_cast<int>(std::ceil(max_y)));

  for (int v = y0; v <= y1; ++v) {
    for (int u = x0; u <= x1; ++u) {
      const Vec3 p = warp * Vec3(static_cast<double>(u), static_cast<double>(v), 1.0);
      const double px = p.x() / p.z();
      const double py = p.y() / p.z();
      if (px < 0.0 || px > patch.width - 1 || py < 0.0 || py > patch.height - 1) continue;
      int ix = static_cast<int>(std::floor(px));
      int iy = static_cast<int>(std::floor(py));
      double fx = px - ix, fy = py - iy;
      if (ix == patch.width - 1) { ix -= 1; fx = 1.0; }
      if (iy == patch.height - 1) { iy -= 1; fy = 1.0; }
      const double val = (1.0 - fy) * ((1.0 - fx) * patch.at(ix, iy) + fx * patch.at(ix + 1, iy)) +
                         fy * ((1.0 - fx) * patch.at(ix, iy + 1) + fx * patch.at(ix + 1, iy + 1));
      frame.at(u, v) = static_cast<std::uint8_t>(std::lround(std::clamp(val, 0.0, 255.0)));
    }
  }
}

}  // namespace

Vec2 rendered_iris_center(const GazeAngles& gaze, const HeadAngles&, int width, int height) {
  const double cx = 0.5 * (width - 1);
  const double cy = 0.5 * (height - 1);
  return {cx + kIrisShiftPerTan * std::tan(gaze.yaw), cy - kIrisShiftPerTan * std::tan(gaze.pitch)};
}

GrayImage render_eye(const GazeAngles& gaze, const HeadAngles& head, const EyeAppearance& app,
                     int width, int height) {
  const double limit = 30.0 * kDeg;
  if (std::abs(gaze.yaw) > limit || std::abs(gaze.pitch) > limit)
    fail(ErrorKind::OutOfRangeGaze, "gaze angles beyond the renderable range");
  if (app.iris_radius_px >= 0.5 * std::min(width, height))
    fail(ErrorKind::InvalidArgument, "iris radius does not fit the patch");

  const double cx = 0.5 * (width - 1);
  const double cy = 0.5 * (height - 1);
  const double iris_dx = kIrisShiftPerTan * std::tan(gaze.yaw);
  const double iris_dy = -kIrisShiftPerTan * std::tan(gaze.pitch);
  const double socket_dx = kSocketShiftPerTan * std::tan(head.yaw);
  const double socket_dy = -kSocketShiftPerTan * std::tan(head.pitch);

  const double a = 0.4 * width;                 // horizontal semi-axis of the opening
  const double b = app.eyelid_aperture_px;      // vertical semi-axis (eyelids)
  const double edge = std::min(a, b);
  const double pupil_r = 0.45 * app.iris_radius_px;
  const double shade_dir_x = std::cos(app.illum_direction_rad);
  const double shade_dir_y = std::sin(app.illum_direction_rad);
  const double shade_scale = app.illum_strength / (0.5 * width);

  Rng noise(noise_stream(app, gaze, head));
  GrayImage out(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // Offsets are computed as (coord - center) - shift so mirrored inputs
      // produce exactly negated values.
      const double ex = (x - cx) - socket_dx;
      const double ey = (y - cy) - socket_dy;
      const double e = std::sqrt((ex / a) * (ex / a) + (ey / b) * (ey / b));
      const double open_alpha = std::clamp(0.5 + (1.0 - e) * edge, 0.0, 1.0);

      const double ix = (x - cx) - iris_dx;
      const double iy = (y - cy) - iris_dy;
      const double iris_dist = std::sqrt(ix * ix + iy * iy);

      double val = mix(app.skin_level, app.sclera_level, open_alpha);
      val = mix(val, app.iris_level, disc_alpha(iris_dist, app.iris_radius_px) * open_alpha);
      val = mix(val, app.pupil_level, disc_alpha(iris_dist, pupil_r) * open_alpha);
      val += shade_scale * ((x - cx) * shade_dir_x + (y - cy) * shade_dir_y);
      if (app.noise_sigma > 0.0) val += app.noise_sigma * noise.normal();
      out.at(x, y) = static_cast<std::uint8_t>(std::lround(std::clamp(val, 0.0, 255.0)));
    }
  }
  return out;
}

SynthDataset generate_persons(const SynthConfig& config, const std::string& out_dir) {
  if (config.persons < 1) fail(ErrorKind::InvalidArgument, "need at least one person");
  if (config.samples_per_person < 1) fail(ErrorKind::InvalidArgument, "need at least one sample");
  fs::create_directories(fs::path(out_dir) / "frames");

  const FaceModel face = FaceModel::generic();
  const int total = config.persons * config.samples_per_person;
  std::vector<AnnotationRecord> records(total);
  std::vector<SynthRecordTruth> truth(total);

  std::vector<EyeAppearance> appearances(config.persons);
  Rng seeder(derive_seed(config.seed, 0x5E55));
  for (int p = 0; p < config.persons; ++p) {
    Rng person_rng(derive_seed(config.seed, 0xA0000 + p));
    appearances[p] = sample_appearance(person_rng, config.noise_sigma,
                                       derive_seed(config.seed, 0xB0000 + p));
  }

  parallel_for(total, [&](std::ptrdiff_t idx) {
    const int person = static_cast<int>(idx) / config.samples_per_person;
    const int sample = static_cast<int>(idx) % config.samples_per_person;
    Rng rng(derive_seed(config.seed, 0xC0000000ULL + idx));

    HeadPose pose;
    std::array<Vec2, 6> landmarks;
    for (int attempt = 0;; ++attempt) {
      const double yaw = rng.uniform(config.head_range.yaw_lo_deg, config.head_range.yaw_hi_deg) * kDeg;
      const double pitch =
          rng.uniform(config.head_range.pitch_lo_deg, config.head_range.pitch_hi_deg) * kDeg;
      const double roll = rng.uniform(-8.0, 8.0) * kDeg;
      pose.rotation = head_rotation_from_angles(yaw, pitch, roll);
      pose.translation =
          Vec3(rng.uniform(-30.0, 30.0), rng.uniform(-15.0, 15.0), rng.uniform(480.0, 720.0));
      bool inside = true;
      for (int i = 0; i < 6; ++i) {
        const Vec3 p = pose.rotation * face.landmarks[i] + pose.translation;
        landmarks[i] = config.camera.project(p);
        inside = inside && landmarks[i].x() >= 2.0 && landmarks[i].x() <= config.frame_width - 3 &&
                 landmarks[i].y() >= 2.0 && landmarks[i].y() <= config.frame_height - 3;
      }
      if (inside) break;
      if (attempt > 200) fail(ErrorKind::InvalidArgument, "camera cannot frame the sampled poses");
    }

    // Gaze target sampled in the normalized space of the eyes' midpoint.
    const Vec3 eye_left = eye_center_camera(pose, face, EyeSide::Left);
    const Vec3 eye_right = eye_center_camera(pose, face, EyeSide::Right);
    const Vec3 mid = 0.5 * (eye_left + eye_right);
    const NormalizationTransform mid_xform =
        compute_normalization(mid, pose.rotation, config.norm, config.camera);
    const GazeAngles sampled{
        rng.uniform(config.gaze_range.yaw_lo_deg, config.gaze_range.yaw_hi_deg) * kDeg,
        rng.uniform(config.gaze_range.pitch_lo_deg, config.gaze_range.pitch_hi_deg) * kDeg};
    const Vec3 gaze_dir = mid_xform.rotation.transpose() * angles_to_vector(sampled);
    const Vec3 target = mid + rng.uniform(250.0, 550.0) * gaze_dir;

    GrayImage frame(config.frame_width, config.frame_height,
                    static_cast<std::uint8_t>(std::lround(appearances[person].skin_level)));

    AnnotationRecord rec;
    rec.person = "p" + std::string(person < 10 ? "0" : "") + std::to_string(person);
    char img_name[64];
    std::snprintf(img_name, sizeof(img_name), "frames/%s_%05d.pgm", rec.person.c_str(), sample);
    rec.image = img_name;
    rec.landmarks = landmarks;
    rec.target = target;
    char ts[40];
    std::snprintf(ts, sizeof(ts), "2024-01-01T%02d:%02d:%02dZ", (sample / 3600) % 24,
                  (sample / 60) % 60, sample % 60);
    rec.timestamp = ts;

    SynthRecordTruth& t = truth[idx];
    t.pose = pose;
    std::array<double, 4> pupils{};
    for (const EyeSide side : {EyeSide::Right, EyeSide::Left}) {
      const Vec3 eye = side == EyeSide::Left ? eye_left : eye_right;
      const NormalizationTransform xform =
          compute_normalization(eye, pose.rotation, config.norm, config.camera);
      const GazeAngles g = normalize_gaze(gaze_target_to_vector(target, eye), xform);
      const HeadAngles h = normalize_head(pose.rotation, xform);
      const GrayImage patch = render_eye(g, h, appearances[person], config.norm.out_width,
                                         config.norm.out_height);
      paint_patch(frame, patch, xform.image_warp);

      const Vec2 iris =
          rendered_iris_center(g, h, config.norm.out_width, config.norm.out_height);
      const Vec3 iris_frame = xform.image_warp.inverse() * Vec3(iris.x(), iris.y(), 1.0);
      const int base = side == EyeSide::Right ? 0 : 2;
      pupils[base] = iris_frame.x() / iris_frame.z();
      pupils[base + 1] = iris_frame.y() / iris_frame.z();
      if (side == EyeSide::Left) {
        t.gaze_left = g;
        t.head_left = h;
      } else {
        t.gaze_right = g;
        t.head_right = h;
      }
    }
    if (config.with_pupils) rec.pupils = pupils;
    write_pgm((fs::path(out_dir) / rec.image).string(), frame);
    records[idx] = std::move(rec);
  });

  SynthDataset out;
  out.annotations_path = (fs::path(out_dir) / "annotations.txt").string();
  out.calibration_path = (fs::path(out_dir) / "calibration.txt").string();
  out.truth = std::move(truth);
  write_annotations(out.annotations_path, records);
  CalibrationFile calib;
  calib.camera = config.camera;
  write_calibration(out.calibration_path, calib);
  return out;
}

PnpScene generate_pnp_scene(const PnpSceneConfig& config, Rng& rng) {
  PnpScene scene;
  scene.face = FaceModel::generic();
  scene.camera = config.camera;
  const double frame_w = 2.0 * config.camera.cx;
  const double frame_h = 2.0 * config.camera.cy;
  for (int attempt = 0;; ++attempt) {
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    if (axis.norm() < 1e-9) axis = Vec3::UnitY();
    axis.normalize();
    const double angle = rng.uniform(0.0, config.max_rotation_deg * kDeg);
    scene.pose.rotation = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
    scene.pose.translation = Vec3(rng.uniform(-config.lateral_mm, config.lateral_mm),
                                  rng.uniform(-config.lateral_mm, config.lateral_mm),
                                  rng.uniform(config.depth_lo_mm, config.depth_hi_mm));
    bool inside = true;
    for (int i = 0; i < 6; ++i) {
      const Vec3 p = scene.pose.rotation * scene.face.landmarks[i] + scene.pose.translation;
      if (p.z() <= 1.0) {
        inside = false;
        break;
      }
      scene.landmarks[i] = config.camera.project(p);
      inside = inside && scene.landmarks[i].x() >= 0.0 && scene.landmarks[i].x() <= frame_w - 1 &&
               scene.landmarks[i].y() >= 0.0 && scene.landmarks[i].y() <= frame_h - 1;
    }
    if (inside) break;
    if (attempt > 500) fail(ErrorKind::InvalidArgument, "pose ranges never project inside the frame");
  }
  if (config.noise_sigma_px > 0.0) {
    for (Vec2& l : scene.landmarks) {
      l.x() += rng.normal(0.0, config.noise_sigma_px);
      l.y() += rng.normal(0.0, config.noise_sigma_px);
    }
  }
  return scene;
}

}  // namespace gazekit
