#pragma once

#include <string>
#include <vector>

#include "gazekit/dataset.hpp"
#include "gazekit/estimator.hpp"

namespace gazekit {

struct SampleResult {
  std::string person;
  char eye = 'L';
  GazeAngles truth;
  GazeAngles prediction;
  double error_deg = 0.0;
  double yaw_deg = 0.0;         // true gaze yaw, degrees (binning axis)
  double intensity_diff = 0.0;  // patch left-right intensity statistic
};

struct PersonStat {
  std::string person;
  int count = 0;
  double mean_deg = 0.0;
  double stddev_deg = 0.0;
};

struct BinStat {
  double center = 0.0;
  int count = 0;
  double mean_deg = 0.0;
};

struct QuadraticFit {
  double intercept = 0.0;
  double slope = 0.0;
  double curvature = 0.0;

  double operator()(double x) const { return intercept + slope * x + curvature * x * x; }
};

enum class BinAxis { GazeYaw, IntensityDiff };

struct BinnedErrors {
  std::vector<BinStat> bins;  // only non-empty bins
  QuadraticFit fit;
};

struct EvalReport {
  std::string protocol;
  std::string config_echo;
  int total = 0;
  double overall_mean_deg = 0.0;  // weighted mean of the per-person means
  std::vector<PersonStat> per_person;
  BinnedErrors by_yaw;
  BinnedErrors by_intensity;
  double mean_predictor_deg = -1.0;  // < 0 when not computed
};

std::vector<SampleResult> evaluate(const EstimatorModel& model,
                                   const std::vector<NormalizedSample>& samples);

EvalReport make_report(const std::vector<SampleResult>& results, const std::string& protocol,
                       const std::string& config_echo, int n_bins = 9);

/// Least-squares quadratic over (bin centre, bin mean error); needs at least
/// three non-empty bins.
BinnedErrors error_by_bin(const std::vector<SampleResult>& results, BinAxis axis, int n_bins);

/// One fold per person: train on everyone else, test on the held-out person.
EvalReport leave_one_person_out(const std::vector<NormalizedSample>& samples,
                                const EstimatorConfig& config, int n_bins = 9);

/// Train once on the training archive, evaluate on the test archive; also
/// reports the naive mean-predictor error for context.
EvalReport cross_dataset_eval(const std::vector<NormalizedSample>& train,
                              const std::vector<NormalizedSample>& test,
                              const EstimatorConfig& config, int n_bins = 9);

struct Resolution {
  int width = 0;
  int height = 0;
};

struct ResolutionGrid {
  std::vector<Resolution> resolutions;
  // cell(i, j): trained at resolutions[i], tested on images captured at
  // resolutions[j] and rescaled to the training resolution. Row-major by i.
  std::vector<double> mean_deg;

  double cell(int train_idx, int test_idx) const {
    return mean_deg[static_cast<std::size_t>(train_idx) * resolutions.size() + test_idx];
  }
};

/// Sample rescaled with bicubic interpolation; pupil coordinates follow.
NormalizedSample resize_sample(const NormalizedSample& sample, int width, int height);

ResolutionGrid resolution_study(const std::vector<NormalizedSample>& train,
                                const std::vector<NormalizedSample>& test,
                                const std::vector<Resolution>& resolutions,
                                const EstimatorConfig& config);

// Both-eye fusion, evaluated in camera space with the ground truth recomputed
// from the fused origin.
struct FusionFace {
  Vec3 eye_left, eye_right;    // camera space, mm
  Vec3 pred_left, pred_right;  // predicted unit gaze directions, camera space
  Vec3 target;                 // true fixation point, mm
};

struct FusionReport {
  int faces = 0;
  double per_eye_mean_deg = 0.0;  // average of the two single-eye errors
  double oracle_best_deg = 0.0;   // always picking the better eye
  double fused_deg = 0.0;         // mean ray from the midpoint of both eyes
};

FusionReport fuse_faces(const std::vector<FusionFace>& faces);

/// Run the normalization pipeline per record, predict each eye, and fuse.
/// Records where either eye fails normalization are skipped.
FusionReport fusion_eval(const std::vector<AnnotationRecord>& records,
                         const CalibrationFile& calib, const BuildOptions& options,
                         const std::string& base_dir, const EstimatorModel& model);

void write_report_csv(const std::string& path, const EvalReport& report);
EvalReport read_report_csv(const std::string& path);
void write_grid_csv(const std::string& path, const ResolutionGrid& grid);

}  // namespace gazekit
