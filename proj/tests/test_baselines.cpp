#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gazekit/baselines.hpp"
#include "gazekit/rng.hpp"
#include "reference.hpp"

using namespace gazekit;

namespace {
constexpr double kDeg = M_PI / 180.0;

GrayImage random_patch(Rng& rng, int w = 12, int h = 8) {
  GrayImage img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_index(256));
  return img;
}

TrainSample sample_with(Rng& rng, GazeAngles g, HeadAngles h = {0, 0}) {
  TrainSample s;
  s.patch = random_patch(rng);
  s.features = {h.yaw, h.pitch};
  s.target = g;
  return s;
}
}  // namespace

TEST_CASE("knn with k=1 returns the exact stored target for a stored patch") {
  Rng rng(20);
  std::vector<TrainSample> samples;
  for (int i = 0; i < 12; ++i)
    samples.push_back(sample_with(rng, {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)}));
  const KnnModel model = knn_fit(samples, 1, 0, 1);
  for (const TrainSample& s : samples) {
    const GazeAngles out = knn_predict(model, s.patch, s.features);
    CHECK(out.yaw == s.target.yaw);
    CHECK(out.pitch == s.target.pitch);
  }
}

TEST_CASE("knn averages the k nearest targets") {
  // Three equidistant patches from the query: constant patches at 10, 30 and
  // 50 against a query at 30 +- nothing... use distances engineered equal.
  std::vector<TrainSample> samples(3);
  samples[0].patch = GrayImage(4, 4, 10);
  samples[1].patch = GrayImage(4, 4, 30);
  samples[2].patch = GrayImage(4, 4, 50);
  samples[0].features = samples[1].features = samples[2].features = {0.0, 0.0};
  samples[0].target = {0.0, 0.0};
  samples[1].target = {2.0 * kDeg, 0.0};
  samples[2].target = {4.0 * kDeg, 0.0};
  const KnnModel model = knn_fit(samples, 3, 0, 1);
  const GazeAngles out = knn_predict(model, GrayImage(4, 4, 30), {{0.0, 0.0}});
  CHECK(out.yaw == doctest::Approx(2.0 * kDeg).epsilon(1e-12));
  CHECK(out.pitch == doctest::Approx(0.0));
}

TEST_CASE("single-cluster knn equals exhaustive search") {
  Rng rng(21);
  std::vector<TrainSample> samples;
  for (int i = 0; i < 500; ++i)
    samples.push_back(sample_with(rng, {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)},
                                  {rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)}));
  const KnnModel clustered = knn_fit(samples, 7, 1, 11);
  const KnnModel plain = knn_fit(samples, 7, 0, 11);
  for (int q = 0; q < 40; ++q) {
    const GrayImage query = random_patch(rng);
    const std::vector<double> feat{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
    const GazeAngles a = knn_predict(clustered, query, feat);
    const GazeAngles b = knn_predict(plain, query, feat);
    const GazeAngles c = reference::knn_exhaustive(plain, query);
    CHECK(a.yaw == b.yaw);
    CHECK(a.pitch == b.pitch);
    CHECK(b.yaw == doctest::Approx(c.yaw).epsilon(1e-12));
    CHECK(b.pitch == doctest::Approx(c.pitch).epsilon(1e-12));
  }
}

TEST_CASE("knn prediction is invariant to training-set permutation") {
  Rng rng(22);
  std::vector<TrainSample> samples;
  for (int i = 0; i < 60; ++i)
    samples.push_back(sample_with(rng, {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)}));
  const KnnModel forward_fit = knn_fit(samples, 5, 0, 1);
  std::vector<TrainSample> shuffled = samples;
  Rng perm(99);
  perm.shuffle(shuffled);
  const KnnModel shuffled_fit = knn_fit(shuffled, 5, 0, 1);
  for (int q = 0; q < 25; ++q) {
    const GrayImage query = random_patch(rng);
    const GazeAngles a = knn_predict(forward_fit, query, {});
    const GazeAngles b = knn_predict(shuffled_fit, query, {});
    CHECK(a.yaw == b.yaw);
    CHECK(a.pitch == b.pitch);
  }
}

TEST_CASE("clustered knn restricts the search to the query's cluster") {
  Rng rng(23);
  // Two well-separated head-angle groups with distinct gaze labels but
  // identical patches: the cluster assignment alone decides the answer.
  std::vector<TrainSample> samples;
  for (int i = 0; i < 20; ++i) {
    TrainSample s;
    s.patch = GrayImage(4, 4, 100);
    const bool left_group = i < 10;
    s.features = {left_group ? -0.4 + 0.001 * i : 0.4 - 0.001 * i, 0.0};
    s.target = {left_group ? -10.0 * kDeg : 10.0 * kDeg, 0.0};
    samples.push_back(s);
  }
  const KnnModel model = knn_fit(samples, 20, 2, 7);
  const GazeAngles left = knn_predict(model, GrayImage(4, 4, 100), {{-0.4, 0.0}});
  const GazeAngles right = knn_predict(model, GrayImage(4, 4, 100), {{0.4, 0.0}});
  CHECK(left.yaw == doctest::Approx(-10.0 * kDeg));
  CHECK(right.yaw == doctest::Approx(10.0 * kDeg));
}

TEST_CASE("knn rejects bad configurations") {
  Rng rng(24);
  std::vector<TrainSample> samples{sample_with(rng, {0, 0})};
  CHECK_THROWS_AS(knn_fit({}, 3, 0, 1), Error);
  CHECK_THROWS_AS(knn_fit(samples, 0, 0, 1), Error);
  CHECK_THROWS_AS(knn_fit(samples, 1, 5, 1), Error);  // more clusters than samples
  const KnnModel model = knn_fit(samples, 1, 0, 1);
  CHECK_THROWS_AS(knn_predict(model, GrayImage(3, 3, 0), {}), Error);
}

TEST_CASE("mean predictor averages the targets") {
  Rng rng(25);
  std::vector<TrainSample> samples{sample_with(rng, {1.0 * kDeg, 0.0}),
                                   sample_with(rng, {3.0 * kDeg, 0.0})};
  const MeanModel model = mean_predictor(samples);
  CHECK(model.mean.yaw == doctest::Approx(2.0 * kDeg).epsilon(1e-12));
  CHECK(model.mean.pitch == 0.0);
  CHECK_THROWS_AS(mean_predictor({}), Error);
}

TEST_CASE("linear fit recovers an exactly linear relationship") {
  Rng rng(26);
  // Targets are a fixed linear function of a few pixels and the features.
  std::vector<TrainSample> samples;
  for (int i = 0; i < 120; ++i) {
    TrainSample s;
    s.patch = random_patch(rng, 6, 4);
    s.features = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    const double p0 = s.patch.pixels[0] / 255.0;
    const double p5 = s.patch.pixels[5] / 255.0;
    s.target.yaw = 0.4 * p0 - 0.2 * p5 + 0.5 * s.features[0] + 0.05;
    s.target.pitch = -0.3 * p0 + 0.1 * s.features[1] - 0.02;
    samples.push_back(s);
  }
  const LinearModel model = linear_fit(samples, 0.0);
  for (int q = 0; q < 30; ++q) {
    const TrainSample& s = samples[q];
    const GazeAngles out = linear_predict(model, s.patch, s.features);
    CHECK(std::abs(out.yaw - s.target.yaw) < 1e-8);
    CHECK(std::abs(out.pitch - s.target.pitch) < 1e-8);
  }
}

TEST_CASE("heavy ridge shrinks to the intercept") {
  Rng rng(27);
  std::vector<TrainSample> samples;
  double mean_yaw = 0.0;
  for (int i = 0; i < 50; ++i) {
    samples.push_back(sample_with(rng, {rng.uniform(-0.3, 0.3), rng.uniform(-0.2, 0.2)}));
    mean_yaw += samples.back().target.yaw;
  }
  mean_yaw /= samples.size();
  const LinearModel model = linear_fit(samples, 1e12);
  const GazeAngles out = linear_predict(model, random_patch(rng), {{0.0, 0.0}});
  CHECK(std::abs(out.yaw - mean_yaw) < 1e-4);
  for (int j = 0; j + 1 < static_cast<int>(model.coef_yaw.size()); ++j)
    CHECK(std::abs(model.coef_yaw[j]) < 1e-6);
}

TEST_CASE("rank-deficient unregularized system is rejected") {
  // Two samples with identical patches and features cannot determine the
  // pixel weights at lambda = 0.
  std::vector<TrainSample> samples(2);
  samples[0].patch = GrayImage(4, 4, 50);
  samples[1].patch = GrayImage(4, 4, 50);
  samples[0].features = samples[1].features = {0.1, 0.1};
  samples[0].target = {0.1, 0.0};
  samples[1].target = {0.2, 0.0};
  CHECK_THROWS_AS(linear_fit(samples, 0.0), Error);
}
