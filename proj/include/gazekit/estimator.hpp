#pragma once

#include <string>
#include <variant>
#include <vector>

#include "gazekit/baselines.hpp"
#include "gazekit/cnn.hpp"
#include "gazekit/dataset.hpp"

namespace gazekit {

enum class EstimatorKind { Cnn, Knn, Linear, Mean };

const char* estimator_kind_name(EstimatorKind kind);
EstimatorKind estimator_kind_from_name(const std::string& name);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::Cnn;
  TrainConfig train;         // CNN hyperparameters (seed is shared by all kinds)
  int knn_k = 5;
  int knn_clusters = 8;      // 0 disables head-angle clustering
  double ridge_lambda = 1e-3;
  bool use_head_pose = true;
  bool use_pupil = false;

  int feature_dim() const { return (use_head_pose ? 2 : 0) + (use_pupil ? 2 : 0); }
  std::string describe() const;
};

struct EstimatorModel {
  EstimatorConfig config;
  std::variant<CnnModel<float>, KnnModel, LinearModel, MeanModel> value;
};

/// Geometry feature at the model boundary: head angles in radians, then the
/// pupil centre rescaled to [-1, 1] patch coordinates when requested.
std::vector<double> sample_features(const NormalizedSample& sample, const EstimatorConfig& config);

TrainSample to_train_sample(const NormalizedSample& sample, const EstimatorConfig& config);
std::vector<TrainSample> to_train_samples(const std::vector<NormalizedSample>& samples,
                                          const EstimatorConfig& config);

EstimatorModel train_estimator(const std::vector<NormalizedSample>& samples,
                               const EstimatorConfig& config);

GazeAngles predict(const EstimatorModel& model, const NormalizedSample& sample);
std::vector<GazeAngles> predict_all(const EstimatorModel& model,
                                    const std::vector<NormalizedSample>& samples);

// Checkpoint container: a short self-describing text header followed by a
// flat little-endian IEEE-754 float64 parameter block in the documented
// layout. Reloading reproduces predictions bit for bit.
void save_model(const std::string& path, const EstimatorModel& model);
EstimatorModel load_model(const std::string& path);

}  // namespace gazekit
