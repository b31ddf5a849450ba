#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gazekit/geometry.hpp"
#include "gazekit/image.hpp"

namespace gazekit {

// Small multimodal regression network: two 5x5 same-padded convolutions
// (20 and 50 maps) each followed by ReLU and a 2x2 max pool, then a
// 500-unit fully connected layer that also receives the geometry feature,
// then a linear 2-output head. Pool strides adapt to the input resolution
// so the stack stays well-formed down to very small patches.
struct CnnArch {
  int in_width = 60;
  int in_height = 36;
  int feature_dim = 2;
  int conv1_maps = 20;
  int conv2_maps = 50;
  int kernel = 5;
  int pool1_stride = 2;
  int pool2_stride = 2;
  int fc1_units = 500;

  static CnnArch for_input(int width, int height, int feature_dim);

  int conv_w() const { return in_width; }
  int conv_h() const { return in_height; }
  int pool1_w() const { return (conv_w() - 2) / pool1_stride + 1; }
  int pool1_h() const { return (conv_h() - 2) / pool1_stride + 1; }
  int pool2_w() const { return (pool1_w() - 2) / pool2_stride + 1; }
  int pool2_h() const { return (pool1_h() - 2) / pool2_stride + 1; }
  int flat_size() const { return conv2_maps * pool2_w() * pool2_h(); }
  int fc1_inputs() const { return flat_size() + feature_dim; }
  std::int64_t parameter_count() const;

  bool operator==(const CnnArch&) const = default;
};

// Parameter block layout (also the checkpoint order):
//   conv1_w [maps][1][ky][kx], conv1_b [maps],
//   conv2_w [maps][in_maps][ky][kx], conv2_b [maps],
//   fc1_w [units][inputs] with inputs = flattened maps then features,
//   fc1_b [units], fc2_w [2][units], fc2_b [2].
template <typename T>
struct CnnParams {
  std::vector<T> conv1_w, conv1_b, conv2_w, conv2_b, fc1_w, fc1_b, fc2_w, fc2_b;

  void resize(const CnnArch& arch);
  void set_zero();

  template <typename Fn>
  void for_each(Fn&& fn) {
    fn(conv1_w); fn(conv1_b); fn(conv2_w); fn(conv2_b);
    fn(fc1_w); fn(fc1_b); fn(fc2_w); fn(fc2_b);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    fn(conv1_w); fn(conv1_b); fn(conv2_w); fn(conv2_b);
    fn(fc1_w); fn(fc1_b); fn(fc2_w); fn(fc2_b);
  }
};

template <typename T>
struct CnnModel {
  CnnArch arch;
  CnnParams<T> params;
};

struct TrainConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double epsilon = 1e-8;
  int batch_size = 256;
  int iterations = 15000;
  int decay_every = 5000;
  double decay_factor = 0.1;
  std::uint64_t seed = 1;
};

/// Learning rate in effect at a 1-based iteration index.
double effective_learning_rate(const TrainConfig& config, int iteration);

// One training sample at the model boundary: patch intensities are consumed
// rescaled to [0, 1], features (head angles, optional pupil) as-is.
struct TrainSample {
  GrayImage patch;
  std::vector<double> features;
  GazeAngles target;
};

template <typename T>
struct CnnBatch {
  int size = 0;
  std::vector<T> images;   // size * in_h * in_w, already scaled to [0, 1]
  std::vector<T> features; // size * feature_dim
  std::vector<T> targets;  // size * 2
};

template <typename T>
CnnBatch<T> make_batch(const CnnArch& arch, std::span<const TrainSample> samples,
                       std::span<const int> indices);

/// Seeded fan-in-scaled uniform initialization; biases start at zero.
template <typename T>
CnnModel<T> make_cnn(const CnnArch& arch, std::uint64_t seed);

template <typename T>
GazeAngles cnn_forward(const CnnModel<T>& model, const GrayImage& patch,
                       std::span<const double> features);

template <typename T>
std::vector<GazeAngles> cnn_predict_batch(const CnnModel<T>& model,
                                          std::span<const TrainSample> samples);

/// Total loss over the batch: sum of per-sample squared L2 distances.
template <typename T>
double cnn_loss(const CnnModel<T>& model, const CnnBatch<T>& batch);

/// Loss plus reverse-mode gradients for every parameter. Gradients of the
/// batch sum are accumulated in a fixed lane order, so results do not depend
/// on the number of threads.
template <typename T>
double cnn_loss_and_gradients(const CnnModel<T>& model, const CnnBatch<T>& batch,
                              CnnParams<T>& grads);

template <typename T>
struct AdamState {
  CnnParams<T> m;
  CnnParams<T> v;
};

template <typename T>
AdamState<T> make_adam_state(const CnnArch& arch);

/// Bias-corrected Adam update at a 1-based iteration, with the configured
/// step-decay schedule applied to the learning rate.
template <typename T>
void adam_step(CnnModel<T>& model, const CnnParams<T>& grads, AdamState<T>& state,
               const TrainConfig& config, int iteration);

template <typename T>
struct CnnTrainResult {
  CnnModel<T> model;
  std::vector<double> loss_trace;  // one entry per iteration
};

template <typename T>
CnnTrainResult<T> train_cnn(std::span<const TrainSample> samples, const CnnArch& arch,
                            const TrainConfig& config);

}  // namespace gazekit
