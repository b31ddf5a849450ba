#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "gazekit/geometry.hpp"
#include "gazekit/image.hpp"
#include "gazekit/pnp.hpp"

namespace gazekit {

struct ScreenPose {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
};

// key=value text file: fx, fy, cx, cy and optionally screen_r (9 values,
// row-major) plus screen_t (3 values, mm).
struct CalibrationFile {
  CameraIntrinsics camera;
  std::optional<ScreenPose> screen;
};

CalibrationFile parse_calibration(const std::string& path);
void write_calibration(const std::string& path, const CalibrationFile& calib);

// One whitespace-separated record per line:
//   person image l0x l0y ... l5x l5y tx ty tz [pr_u pr_v pl_u pl_v] timestamp
// Landmark order matches FaceModel: right-eye outer/inner, left-eye
// inner/outer, right/left mouth corner. Pupils are right eye then left eye,
// in frame pixels. The target is in camera coordinates, mm.
struct AnnotationRecord {
  std::string person;
  std::string image;  // path relative to the annotation file's directory
  std::array<Vec2, 6> landmarks;
  Vec3 target = Vec3::Zero();
  std::optional<std::array<double, 4>> pupils;
  std::string timestamp;
};

std::vector<AnnotationRecord> parse_annotations(const std::string& path);
void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records);

struct NormalizedSample {
  std::string id;
  std::string person;
  char eye = 'L';  // 'L' or 'R'
  GrayImage patch;
  HeadAngles head;
  GazeAngles gaze;
  std::optional<Vec2> pupil;  // patch pixel coordinates
};

struct BuildOptions {
  NormalizationSpec norm;
  FaceModel face = FaceModel::generic();
  PnpOptions pnp;
  double min_coverage = 0.9;
  bool flip_augment = false;
};

struct BuildStats {
  int records = 0;
  int emitted = 0;
  int failed_records = 0;  // pose estimation or image problems
  int failed_eyes = 0;     // per-eye warp coverage rejections
  std::vector<std::string> failures;
};

struct BuildOutput {
  std::vector<NormalizedSample> samples;
  BuildStats stats;
};

/// Run the full normalization pipeline over every record (parallel across
/// records, output in input order). Per-record failures are collected, not
/// fatal; throws EmptyOutput if nothing survives.
BuildOutput build_normalized_dataset(const std::vector<AnnotationRecord>& records,
                                     const CalibrationFile& calib, const BuildOptions& options,
                                     const std::string& base_dir);

// Archive layout: <dir>/manifest.tsv plus <dir>/patches/<id>.pgm. Manifest
// columns: id person eye h_yaw h_pitch g_yaw g_pitch pupil_u pupil_v patch.
// Angles are radians; missing pupils are written as "-".
void write_archive(const std::string& dir, const std::vector<NormalizedSample>& samples);
std::vector<NormalizedSample> load_archive(const std::string& dir);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<long> counts;
};

struct Histogram2D {
  double x_lo, x_hi, y_lo, y_hi;
  int x_bins, y_bins;
  std::vector<long> counts;  // row-major, y-major
};

struct DatasetStatistics {
  int total = 0;
  Histogram mean_intensity;        // per-patch mean grey level
  Histogram left_right_diff;       // left-half minus right-half mean
  std::vector<std::pair<std::string, int>> per_person;
  Histogram2D gaze;                // yaw/pitch, degrees
  Histogram2D head;
};

DatasetStatistics dataset_statistics(const std::vector<NormalizedSample>& samples);
void write_statistics_csv(const std::string& path, const DatasetStatistics& stats);

/// Applies the horizontal mirror rule to a whole sample: flipped patch,
/// negated yaw components, mirrored pupil column, opposite eye label.
NormalizedSample flip_sample(const NormalizedSample& sample);

}  // namespace gazekit
