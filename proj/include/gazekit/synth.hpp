#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gazekit/geometry.hpp"
#include "gazekit/image.hpp"
#include "gazekit/rng.hpp"

namespace gazekit {

// Appearance parameters of one synthetic eye. Intensities are 8-bit levels;
// illumination is a linear shading ramp across the patch.
struct EyeAppearance {
  double iris_radius_px = 8.0;
  double sclera_level = 225.0;
  double iris_level = 60.0;
  double pupil_level = 25.0;
  double skin_level = 170.0;
  double eyelid_aperture_px = 13.0;  // vertical semi-axis of the eye opening
  double illum_direction_rad = 0.0;  // 0 points along +x (image right)
  double illum_strength = 0.0;       // intensity delta across half a patch width
  double noise_sigma = 0.0;
  std::uint64_t person_seed = 0;
};

// Pixels of iris displacement per unit tangent of the gaze angle. Chosen so
// the full +/-18 degree yaw range keeps the iris inside a 60x36 patch.
inline constexpr double kIrisShiftPerTan = 20.0;

/// Deterministic eye patch for normalized-space gaze and head angles.
/// The iris centre sits at kIrisShiftPerTan * (tan(yaw), -tan(pitch)) from
/// the patch centre; eyelids clip the disc; both angles must be within 30 deg.
GrayImage render_eye(const GazeAngles& gaze, const HeadAngles& head, const EyeAppearance& app,
                     int width = 60, int height = 36);

/// Iris centre used by render_eye, in patch pixel coordinates.
Vec2 rendered_iris_center(const GazeAngles& gaze, const HeadAngles& head, int width, int height);

struct AngleRange {
  double yaw_lo_deg, yaw_hi_deg;
  double pitch_lo_deg, pitch_hi_deg;
};

struct SynthConfig {
  int persons = 8;
  int samples_per_person = 400;
  AngleRange gaze_range{-18.0, 18.0, -1.5, 20.0};
  AngleRange head_range{-18.0, 18.0, -1.5, 20.0};
  std::uint64_t seed = 1;
  int frame_width = 256;
  int frame_height = 192;
  CameraIntrinsics camera{560.0, 560.0, 128.0, 96.0};
  NormalizationSpec norm;      // patch geometry the renderer targets
  double noise_sigma = 3.0;    // pixel noise in the rendered patches
  bool with_pupils = true;     // annotate iris centres as pupil positions
};

struct SynthRecordTruth {
  HeadPose pose;
  GazeAngles gaze_left, gaze_right;  // normalized-space ground truth per eye
  HeadAngles head_left, head_right;
};

struct SynthDataset {
  std::string annotations_path;
  std::string calibration_path;
  std::vector<SynthRecordTruth> truth;  // one entry per record, in file order
};

/// Generate per-person appearances and per-sample scenes; writes frames,
/// annotations and the calibration file under out_dir.
SynthDataset generate_persons(const SynthConfig& config, const std::string& out_dir);

struct PnpScene {
  FaceModel face;
  HeadPose pose;
  std::array<Vec2, 6> landmarks;
  CameraIntrinsics camera;
};

struct PnpSceneConfig {
  double max_rotation_deg = 40.0;
  double depth_lo_mm = 400.0;
  double depth_hi_mm = 800.0;
  double lateral_mm = 60.0;
  double noise_sigma_px = 0.0;
  CameraIntrinsics camera{960.0, 960.0, 640.0, 360.0};
};

/// Random face placement with its exact landmark projections, optionally
/// perturbed by Gaussian pixel noise.
PnpScene generate_pnp_scene(const PnpSceneConfig& config, Rng& rng);

}  // namespace gazekit
