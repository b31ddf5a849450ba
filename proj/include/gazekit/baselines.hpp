#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gazekit/cnn.hpp"

namespace gazekit {

// k-nearest-neighbour regressor on raw pixel distance, optionally restricted
// to a k-means cluster in head-angle space (the first two feature entries).
struct KnnModel {
  int k = 5;
  int patch_width = 0;
  int patch_height = 0;
  int feature_dim = 0;
  std::vector<std::uint8_t> patches;   // n * patch pixels
  std::vector<double> features;        // n * feature_dim
  std::vector<double> targets;         // n * 2 (yaw, pitch)
  std::vector<double> centroids;       // n_clusters * 2, empty when unclustered
  std::vector<int> assignments;        // per-sample cluster index

  int size() const { return patch_width > 0 ? static_cast<int>(targets.size() / 2) : 0; }
  int clusters() const { return static_cast<int>(centroids.size() / 2); }
};

/// Fit the store; clusters > 0 runs seeded k-means (at most 100 iterations)
/// over head angles. Requires the head-angle feature when clustering.
KnnModel knn_fit(std::span<const TrainSample> samples, int k, int clusters, std::uint64_t seed);

GazeAngles knn_predict(const KnnModel& model, const GrayImage& patch,
                       std::span<const double> features);

// Closed-form ridge regression on flattened [0,1] pixels plus features, with
// an unpenalized intercept.
struct LinearModel {
  int patch_width = 0;
  int patch_height = 0;
  int feature_dim = 0;
  std::vector<double> coef_yaw;    // pixel+feature coefficients, then intercept
  std::vector<double> coef_pitch;
};

LinearModel linear_fit(std::span<const TrainSample> samples, double ridge_lambda);

GazeAngles linear_predict(const LinearModel& model, const GrayImage& patch,
                          std::span<const double> features);

struct MeanModel {
  GazeAngles mean;
};

/// Predicts the training set's average gaze angles for every query.
MeanModel mean_predictor(std::span<const TrainSample> samples);

inline GazeAngles mean_predict(const MeanModel& model) { return model.mean; }

}  // namespace gazekit
