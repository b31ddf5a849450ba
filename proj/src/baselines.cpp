#include "gazekit/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "gazekit/error.hpp"
#include "gazekit/parallel.hpp"
#include "gazekit/rng.hpp"

namespace gazekit {

namespace {

// Lloyd iterations over 2D head angles with deterministic seeding. Empty
// clusters are re-seeded with the point farthest from its centroid.
void kmeans_head_angles(const std::vector<double>& points, int n, int clusters,
                        std::uint64_t seed, std::vector<double>& centroids,
                        std::vector<int>& assignment) {
  Rng rng(derive_seed(seed, 0xC105));
  centroids.resize(static_cast<std::size_t>(clusters) * 2);
  std::vector<int> pick(n);
  for (int i = 0; i < n; ++i) pick[i] = i;
  rng.shuffle(pick);
  for (int c = 0; c < clusters; ++c) {
    centroids[2 * c] = points[2 * pick[c % n]];
    centroids[2 * c + 1] = points[2 * pick[c % n] + 1];
  }

  assignment.assign(n, 0);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::max();
      for (int c = 0; c < clusters; ++c) {
        const double dy = points[2 * i] - centroids[2 * c];
        const double dp = points[2 * i + 1] - centroids[2 * c + 1];
        const double d = dy * dy + dp * dp;
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assignment[i] != best) {
        assignment[i] = best;
        changed = true;
      }
    }

    std::vector<double> sums(static_cast<std::size_t>(clusters) * 2, 0.0);
    std::vector<int> counts(clusters, 0);
    for (int i = 0; i < n; ++i) {
      sums[2 * assignment[i]] += points[2 * i];
      sums[2 * assignment[i] + 1] += points[2 * i + 1];
      ++counts[assignment[i]];
    }
    for (int c = 0; c < clusters; ++c) {
      if (counts[c] > 0) {
        centroids[2 * c] = sums[2 * c] / counts[c];
        centroids[2 * c + 1] = sums[2 * c + 1] / counts[c];
      } else {
        // Re-seed from the globally farthest point.
        int far_i = 0;
        double far_d = -1.0;
        for (int i = 0; i < n; ++i) {
          const double dy = points[2 * i] - centroids[2 * assignment[i]];
          const double dp = points[2 * i + 1] - centroids[2 * assignment[i] + 1];
          const double d = dy * dy + dp * dp;
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        centroids[2 * c] = points[2 * far_i];
        centroids[2 * c + 1] = points[2 * far_i + 1];
        changed = true;
      }
    }
    if (!changed) break;
  }
}

}  // namespace

KnnModel knn_fit(std::span<const TrainSample> samples, int k, int clusters, std::uint64_t seed) {
  if (samples.empty()) fail(ErrorKind::EmptyTrainingSet, "knn requires at least one sample");
  if (k < 1) fail(ErrorKind::InvalidArgument, "k must be >= 1");
  const int n = static_cast<int>(samples.size());
  if (clusters > n) fail(ErrorKind::InvalidArgument, "more clusters than samples");

  KnnModel model;
  model.k = k;
  model.patch_width = samples[0].patch.width;
  model.patch_height = samples[0].patch.height;
  model.feature_dim = static_cast<int>(samples[0].features.size());
  const std::size_t px = static_cast<std::size_t>(model.patch_width) * model.patch_height;
  model.patches.resize(px * n);
  model.features.resize(static_cast<std::size_t>(model.feature_dim) * n);
  model.targets.resize(static_cast<std::size_t>(n) * 2);

  for (int i = 0; i < n; ++i) {
    const TrainSample& s = samples[i];
    if (s.patch.width != model.patch_width || s.patch.height != model.patch_height)
      fail(ErrorKind::ShapeMismatch, "inconsistent patch sizes in training set");
    if (static_cast<int>(s.features.size()) != model.feature_dim)
      fail(ErrorKind::ShapeMismatch, "inconsistent feature sizes in training set");
    std::copy(s.patch.pixels.begin(), s.patch.pixels.end(), model.patches.begin() + px * i);
    std::copy(s.features.begin(), s.features.end(),
              model.features.begin() + static_cast<std::size_t>(model.feature_dim) * i);
    model.targets[2 * i] = s.target.yaw;
    model.targets[2 * i + 1] = s.target.pitch;
  }

  if (clusters > 1) {
    if (model.feature_dim < 2)
      fail(ErrorKind::InvalidArgument, "head-angle clustering needs the head-pose feature");
    std::vector<double> head(static_cast<std::size_t>(n) * 2);
    for (int i = 0; i < n; ++i) {
      head[2 * i] = model.features[static_cast<std::size_t>(model.feature_dim) * i];
      head[2 * i + 1] = model.features[static_cast<std::size_t>(model.feature_dim) * i + 1];
    }
    kmeans_head_angles(head, n, clusters, seed, model.centroids, model.assignments);
  } else if (clusters == 1) {
    model.centroids = {0.0, 0.0};
    model.assignments.assign(n, 0);
  }
  return model;
}

GazeAngles knn_predict(const KnnModel& model, const GrayImage& patch,
                       std::span<const double> features) {
  const int n = model.size();
  if (n == 0) fail(ErrorKind::EmptyTrainingSet, "empty knn store");
  if (patch.width != model.patch_width || patch.height != model.patch_height)
    fail(ErrorKind::ShapeMismatch, "query patch size does not match the store");

  int cluster = -1;
  if (model.clusters() > 0) {
    if (static_cast<int>(features.size()) < 2)
      fail(ErrorKind::ShapeMismatch, "clustered store needs head angles in the query");
    double best_d = std::numeric_limits<double>::max();
    for (int c = 0; c < model.clusters(); ++c) {
      const double dy = features[0] - model.centroids[2 * c];
      const double dp = features[1] - model.centroids[2 * c + 1];
      const double d = dy * dy + dp * dp;
      if (d < best_d) {
        best_d = d;
        cluster = c;
      }
    }
  }

  const std::size_t px = static_cast<std::size_t>(model.patch_width) * model.patch_height;
  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  parallel_for(n, [&](std::ptrdiff_t i) {
    if (cluster >= 0 && model.assignments[i] != cluster) return;
    const std::uint8_t* a = model.patches.data() + px * i;
    double d = 0.0;
    for (std::size_t p = 0; p < px; ++p) {
      const double diff = static_cast<double>(a[p]) - static_cast<double>(patch.pixels[p]);
      d += diff * diff;
    }
    dist[i] = d;
  });

  // Order by (distance, target, head feature) so ties are broken by sample
  // content, keeping predictions invariant to training-set permutation.
  std::vector<int> idx;
  idx.reserve(n);
  for (int i = 0; i < n; ++i)
    if (std::isfinite(dist[i])) idx.push_back(i);
  if (idx.empty()) fail(ErrorKind::EmptyTrainingSet, "selected cluster is empty");
  const auto key_less = [&](int a, int b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    if (model.targets[2 * a] != model.targets[2 * b])
      return model.targets[2 * a] < model.targets[2 * b];
    return model.targets[2 * a + 1] < model.targets[2 * b + 1];
  };
  const int take = std::min<int>(model.k, static_cast<int>(idx.size()));
  std::partial_sort(idx.begin(), idx.begin() + take, idx.end(), key_less);

  double yaw = 0.0, pitch = 0.0;
  for (int i = 0; i < take; ++i) {
    yaw += model.targets[2 * idx[i]];
    pitch += model.targets[2 * idx[i] + 1];
  }
  return GazeAngles{yaw / take, pitch / take};
}

LinearModel linear_fit(std::span<const TrainSample> samples, double ridge_lambda) {
  if (samples.empty()) fail(ErrorKind::EmptyTrainingSet, "linear fit requires samples");
  const int n = static_cast<int>(samples.size());
  const int pw = samples[0].patch.width;
  const int ph = samples[0].patch.height;
  const int fdim = static_cast<int>(samples[0].features.size());
  const int d = pw * ph + fdim + 1;  // + intercept

  Eigen::MatrixXd x(n, d);
  Eigen::MatrixXd y(n, 2);
  for (int i = 0; i < n; ++i) {
    const TrainSample& s = samples[i];
    if (s.patch.width != pw || s.patch.height != ph ||
        static_cast<int>(s.features.size()) != fdim)
      fail(ErrorKind::ShapeMismatch, "inconsistent sample shapes");
    for (int p = 0; p < pw * ph; ++p) x(i, p) = s.patch.pixels[p] / 255.0;
    for (int f = 0; f < fdim; ++f) x(i, pw * ph + f) = s.features[f];
    x(i, d - 1) = 1.0;
    y(i, 0) = s.target.yaw;
    y(i, 1) = s.target.pitch;
  }

  Eigen::MatrixXd normal = x.transpose() * x;
  for (int j = 0; j + 1 < d; ++j) normal(j, j) += ridge_lambda;  // intercept unpenalized

  Eigen::MatrixXd solution;
  if (ridge_lambda == 0.0) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(normal);
    if (!lu.isInvertible())
      fail(ErrorKind::SingularSystem, "normal equations are rank-deficient at lambda = 0");
    solution = lu.solve(x.transpose() * y);
  } else {
    solution = normal.ldlt().solve(x.transpose() * y);
  }

  LinearModel model;
  model.patch_width = pw;
  model.patch_height = ph;
  model.feature_dim = fdim;
  model.coef_yaw.assign(solution.col(0).data(), solution.col(0).data() + d);
  model.coef_pitch.assign(solution.col(1).data(), solution.col(1).data() + d);
  return model;
}

GazeAngles linear_predict(const LinearModel& model, const GrayImage& patch,
                          std::span<const double> features) {
  const int np = model.patch_width * model.patch_height;
  if (patch.width != model.patch_width || patch.height != model.patch_height ||
      static_cast<int>(features.size()) != model.feature_dim)
    fail(ErrorKind::ShapeMismatch, "query shape does not match the model");
  double yaw = model.coef_yaw[np + model.feature_dim];
  double pitch = model.coef_pitch[np + model.feature_dim];
  for (int p = 0; p < np; ++p) {
    const double v = patch.pixels[p] / 255.0;
    yaw += model.coef_yaw[p] * v;
    pitch += model.coef_pitch[p] * v;
  }
  for (int f = 0; f < model.feature_dim; ++f) {
    yaw += model.coef_yaw[np + f] * features[f];
    pitch += model.coef_pitch[np + f] * features[f];
  }
  return GazeAngles{yaw, pitch};
}

MeanModel mean_predictor(std::span<const TrainSample> samples) {
  if (samples.empty()) fail(ErrorKind::EmptyTrainingSet, "mean predictor requires samples");
  double yaw = 0.0, pitch = 0.0;
  for (const TrainSample& s : samples) {
    yaw += s.target.yaw;
    pitch += s.target.pitch;
  }
  const double n = static_cast<double>(samples.size());
  return MeanModel{GazeAngles{yaw / n, pitch / n}};
}

}  // namespace gazekit
