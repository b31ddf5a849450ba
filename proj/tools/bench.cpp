// Timing comparison between the OpenMP kernels and the serial reference
// implementations used by the tests.

#include <chrono>
#include <cstdio>
#include <vector>

#include "gazekit/baselines.hpp"
#include "gazekit/cnn.hpp"
#include "gazekit/image.hpp"
#include "gazekit/parallel.hpp"
#include "gazekit/rng.hpp"
#include "../tests/reference.hpp"

using namespace gazekit;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

template <typename Fn>
double time_best_of(int reps, Fn&& fn) {
  double best = 1e18;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    best = std::min(best, ms_since(t0));
  }
  return best;
}

GrayImage random_image(Rng& rng, int w, int h) {
  GrayImage img(w, h);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_index(256));
  return img;
}

std::vector<TrainSample> random_samples(Rng& rng, int n, int w, int h) {
  std::vector<TrainSample> out(n);
  for (TrainSample& s : out) {
    s.patch = random_image(rng, w, h);
    s.features = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
    s.target = {rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)};
  }
  return out;
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-34s %10.2f ms %10.2f ms %8.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

}  // namespace

int main() {
  Rng rng(42);
  const int threads = max_threads();
  std::printf("threads available: %d\n", threads);
  std::printf("%-34s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

  // Forward pass: naive reference vs the library path (batch of 64).
  {
    const CnnArch arch = CnnArch::for_input(60, 36, 2);
    const CnnModel<double> model = make_cnn<double>(arch, 7);
    const std::vector<TrainSample> samples = random_samples(rng, 64, 60, 36);
    std::vector<int> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    const CnnBatch<double> batch = make_batch<double>(arch, samples, idx);
    const double serial = time_best_of(3, [&] { reference::cnn_batch_loss(model, batch); });
    const double parallel = time_best_of(3, [&] { cnn_loss(model, batch); });
    row("cnn forward (64 samples)", serial, parallel);
  }

  // Batch gradients: one worker vs all workers on the same lane layout.
  {
    const CnnArch arch = CnnArch::for_input(60, 36, 2);
    const CnnModel<float> model = make_cnn<float>(arch, 7);
    const std::vector<TrainSample> samples = random_samples(rng, 64, 60, 36);
    std::vector<int> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    const CnnBatch<float> batch = make_batch<float>(arch, samples, idx);
    CnnParams<float> grads;
    set_threads(1);
    const double serial = time_best_of(3, [&] { cnn_loss_and_gradients(model, batch, grads); });
    set_threads(threads);
    const double parallel = time_best_of(3, [&] { cnn_loss_and_gradients(model, batch, grads); });
    row("cnn gradients (batch 64)", serial, parallel);
  }

  // Perspective warp of a camera frame into many patches.
  {
    const GrayImage frame = random_image(rng, 640, 480);
    Mat3 w;
    w << 1.6, 0.02, -200.0, -0.01, 1.55, -150.0, 1e-5, -2e-5, 1.0;
    const double serial = time_best_of(3, [&] {
      double cov;
      for (int i = 0; i < 200; ++i) reference::warp(frame, w, 60, 36, &cov);
    });
    const double parallel = time_best_of(3, [&] {
      for (int i = 0; i < 200; ++i) perspective_warp(frame, w, 60, 36);
    });
    row("perspective warp (200 patches)", serial, parallel);
  }

  // Nearest-neighbour search over a dense store.
  {
    const std::vector<TrainSample> samples = random_samples(rng, 4000, 60, 36);
    const KnnModel store = knn_fit(samples, 7, 0, 11);
    const GrayImage query = random_image(rng, 60, 36);
    const std::vector<double> feat{0.0, 0.0};
    const double serial = time_best_of(3, [&] {
      for (int i = 0; i < 20; ++i) reference::knn_exhaustive(store, query);
    });
    const double parallel = time_best_of(3, [&] {
      for (int i = 0; i < 20; ++i) knn_predict(store, query, feat);
    });
    row("knn search (4000 x 20 queries)", serial, parallel);
  }
  return 0;
}
