#include "gazekit/cnn.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "gazekit/error.hpp"
#include "gazekit/parallel.hpp"
#include "gazekit/rng.hpp"

namespace gazekit {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatCM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
Eigen::Map<MatRM<T>> map_rm(std::vector<T>& v, int rows, int cols) {
  return Eigen::Map<MatRM<T>>(v.data(), rows, cols);
}
template <typename T>
Eigen::Map<const MatRM<T>> map_rm(const std::vector<T>& v, int rows, int cols) {
  return Eigen::Map<const MatRM<T>>(v.data(), rows, cols);
}
template <typename T>
Eigen::Map<MatCM<T>> map_cm(std::vector<T>& v, int rows, int cols) {
  return Eigen::Map<MatCM<T>>(v.data(), rows, cols);
}
template <typename T>
Eigen::Map<const MatCM<T>> map_cm(const std::vector<T>& v, int rows, int cols) {
  return Eigen::Map<const MatCM<T>>(v.data(), rows, cols);
}

// Zero-padded patch extraction: column p of `col` holds the kernel-sized
// neighbourhood of pixel p across all input maps.
template <typename T>
void im2col(const T* in, int maps, int w, int h, int kernel, std::vector<T>& col) {
  const int pad = kernel / 2;
  const int k_per_map = kernel * kernel;
  const int rows = maps * k_per_map;
  T* out = col.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      T* column = out + static_cast<std::ptrdiff_t>(y * w + x) * rows;
      for (int m = 0; m < maps; ++m) {
        const T* plane = in + static_cast<std::ptrdiff_t>(m) * w * h;
        for (int ky = 0; ky < kernel; ++ky) {
          const int sy = y + ky - pad;
          for (int kx = 0; kx < kernel; ++kx) {
            const int sx = x + kx - pad;
            *column++ = (sx >= 0 && sx < w && sy >= 0 && sy < h)
                            ? plane[sy * w + sx]
                            : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the input planes.
template <typename T>
void col2im_add(const std::vector<T>& col, int maps, int w, int h, int kernel, T* out) {
  const int pad = kernel / 2;
  const int k_per_map = kernel * kernel;
  const int rows = maps * k_per_map;
  const T* src = col.data();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const T* column = src + static_cast<std::ptrdiff_t>(y * w + x) * rows;
      for (int m = 0; m < maps; ++m) {
        T* plane = out + static_cast<std::ptrdiff_t>(m) * w * h;
        for (int ky = 0; ky < kernel; ++ky) {
          const int sy = y + ky - pad;
          for (int kx = 0; kx < kernel; ++kx, ++column) {
            const int sx = x + kx - pad;
            if (sx >= 0 && sx < w && sy >= 0 && sy < h) plane[sy * w + sx] += *column;
          }
        }
      }
    }
  }
}

// 2x2 max pooling; the argmax records the flat in-plane source index, ties
// resolved toward the first element in scan order.
template <typename T>
void max_pool(const T* in, int maps, int w, int h, int stride, T* out, int* argmax, int out_w,
              int out_h) {
  for (int m = 0; m < maps; ++m) {
    const T* plane = in + static_cast<std::ptrdiff_t>(m) * w * h;
    T* oplane = out + static_cast<std::ptrdiff_t>(m) * out_w * out_h;
    int* aplane = argmax + static_cast<std::ptrdiff_t>(m) * out_w * out_h;
    for (int py = 0; py < out_h; ++py) {
      const int y0 = py * stride;
      for (int px = 0; px < out_w; ++px) {
        const int x0 = px * stride;
        int best = y0 * w + x0;
        T best_v = plane[best];
        const int candidates[3] = {y0 * w + x0 + 1, (y0 + 1) * w + x0, (y0 + 1) * w + x0 + 1};
        for (int c : candidates) {
          if (plane[c] > best_v) {
            best_v = plane[c];
            best = c;
          }
        }
        oplane[py * out_w + px] = best_v;
        aplane[py * out_w + px] = best;
      }
    }
  }
}

template <typename T>
void max_unpool_add(const T* dout, const int* argmax, int maps, int out_w, int out_h, int w, int h,
                    T* din) {
  for (int m = 0; m < maps; ++m) {
    const T* dplane = dout + static_cast<std::ptrdiff_t>(m) * out_w * out_h;
    const int* aplane = argmax + static_cast<std::ptrdiff_t>(m) * out_w * out_h;
    T* target = din + static_cast<std::ptrdiff_t>(m) * w * h;
    for (int q = 0; q < out_w * out_h; ++q) target[aplane[q]] += dplane[q];
  }
}

template <typename T>
struct SampleScratch {
  std::vector<T> col0, act1, pooled1, col1, act2;
  std::vector<int> idx1, idx2;
  std::vector<T> dact2, dcol1, dpooled1, dact1;

  void resize(const CnnArch& a) {
    const int p0 = a.conv_w() * a.conv_h();
    const int p1 = a.pool1_w() * a.pool1_h();
    const int p2 = a.pool2_w() * a.pool2_h();
    const int k = a.kernel * a.kernel;
    col0.resize(static_cast<std::size_t>(k) * p0);
    act1.resize(static_cast<std::size_t>(a.conv1_maps) * p0);
    pooled1.resize(static_cast<std::size_t>(a.conv1_maps) * p1);
    idx1.resize(pooled1.size());
    col1.resize(static_cast<std::size_t>(a.conv1_maps) * k * p1);
    act2.resize(static_cast<std::size_t>(a.conv2_maps) * p1);
    idx2.resize(static_cast<std::size_t>(a.conv2_maps) * p2);
    dact2.resize(act2.size());
    dcol1.resize(col1.size());
    dpooled1.resize(pooled1.size());
    dact1.resize(act1.size());
  }
};

// Gradients of the convolutional parameters only; one accumulator per lane.
template <typename T>
struct ConvGrads {
  std::vector<T> c1w, c1b, c2w, c2b;

  void resize(const CnnArch& a) {
    c1w.assign(static_cast<std::size_t>(a.conv1_maps) * a.kernel * a.kernel, T(0));
    c1b.assign(a.conv1_maps, T(0));
    c2w.assign(static_cast<std::size_t>(a.conv2_maps) * a.conv1_maps * a.kernel * a.kernel, T(0));
    c2b.assign(a.conv2_maps, T(0));
  }
};

template <typename T>
struct BatchScratch {
  std::vector<SampleScratch<T>> per_sample;
  std::vector<T> x, z1, y, dy, dz1, dx;
  std::vector<ConvGrads<T>> lane_grads;
  int batch = 0;

  void resize(const CnnArch& a, int b) {
    if (batch == b && !per_sample.empty()) return;
    batch = b;
    per_sample.resize(b);
    for (auto& s : per_sample) s.resize(a);
    const int d = a.fc1_inputs();
    x.resize(static_cast<std::size_t>(d) * b);
    z1.resize(static_cast<std::size_t>(a.fc1_units) * b);
    y.resize(static_cast<std::size_t>(2) * b);
    dy.resize(y.size());
    dz1.resize(z1.size());
    dx.resize(x.size());
    lane_grads.resize(kLanes);
    for (auto& g : lane_grads) g.resize(a);
  }
};

// Forward one sample through the convolutional stack; writes the flattened
// pooled maps plus the geometry feature into its column of X.
template <typename T>
void conv_forward_sample(const CnnModel<T>& model, const T* image, const T* feat,
                         SampleScratch<T>& s, T* x_column) {
  const CnnArch& a = model.arch;
  const int k = a.kernel * a.kernel;
  const int p0 = a.conv_w() * a.conv_h();
  const int p1 = a.pool1_w() * a.pool1_h();
  const int p2 = a.pool2_w() * a.pool2_h();

  im2col(image, 1, a.in_width, a.in_height, a.kernel, s.col0);
  auto act1 = map_rm(s.act1, a.conv1_maps, p0);
  act1.noalias() = map_rm(model.params.conv1_w, a.conv1_maps, k) * map_cm(s.col0, k, p0);
  for (int m = 0; m < a.conv1_maps; ++m) {
    const T b = model.params.conv1_b[static_cast<std::size_t>(m)];
    T* row = s.act1.data() + static_cast<std::ptrdiff_t>(m) * p0;
    for (int p = 0; p < p0; ++p) row[p] = std::max(T(0), row[p] + b);
  }

  max_pool(s.act1.data(), a.conv1_maps, a.conv_w(), a.conv_h(), a.pool1_stride, s.pooled1.data(),
           s.idx1.data(), a.pool1_w(), a.pool1_h());

  im2col(s.pooled1.data(), a.conv1_maps, a.pool1_w(), a.pool1_h(), a.kernel, s.col1);
  const int k1 = a.conv1_maps * k;
  auto act2 = map_rm(s.act2, a.conv2_maps, p1);
  act2.noalias() = map_rm(model.params.conv2_w, a.conv2_maps, k1) * map_cm(s.col1, k1, p1);
  for (int m = 0; m < a.conv2_maps; ++m) {
    const T b = model.params.conv2_b[static_cast<std::size_t>(m)];
    T* row = s.act2.data() + static_cast<std::ptrdiff_t>(m) * p1;
    for (int p = 0; p < p1; ++p) row[p] = std::max(T(0), row[p] + b);
  }

  std::vector<int>* idx2 = &s.idx2;
  max_pool(s.act2.data(), a.conv2_maps, a.pool1_w(), a.pool1_h(), a.pool2_stride, x_column,
           idx2->data(), a.pool2_w(), a.pool2_h());
  T* tail = x_column + static_cast<std::ptrdiff_t>(a.conv2_maps) * p2;
  for (int f = 0; f < a.feature_dim; ++f) tail[f] = feat[f];
}

template <typename T>
void conv_backward_sample(const CnnModel<T>& model, SampleScratch<T>& s, const T* dx_column,
                          ConvGrads<T>& lane) {
  const CnnArch& a = model.arch;
  const int k = a.kernel * a.kernel;
  const int k1 = a.conv1_maps * k;
  const int p0 = a.conv_w() * a.conv_h();
  const int p1 = a.pool1_w() * a.pool1_h();

  std::fill(s.dact2.begin(), s.dact2.end(), T(0));
  max_unpool_add(dx_column, s.idx2.data(), a.conv2_maps, a.pool2_w(), a.pool2_h(), a.pool1_w(),
                 a.pool1_h(), s.dact2.data());
  for (std::size_t i = 0; i < s.dact2.size(); ++i)
    if (s.act2[i] <= T(0)) s.dact2[i] = T(0);

  auto dz2 = map_rm(s.dact2, a.conv2_maps, p1);
  map_rm(lane.c2w, a.conv2_maps, k1).noalias() += dz2 * map_cm(s.col1, k1, p1).transpose();
  Eigen::Map<VecX<T>>(lane.c2b.data(), a.conv2_maps).noalias() += dz2.rowwise().sum();

  auto dcol1 = map_cm(s.dcol1, k1, p1);
  dcol1.noalias() = map_rm(model.params.conv2_w, a.conv2_maps, k1).transpose() * dz2;
  std::fill(s.dpooled1.begin(), s.dpooled1.end(), T(0));
  col2im_add(s.dcol1, a.conv1_maps, a.pool1_w(), a.pool1_h(), a.kernel, s.dpooled1.data());

  std::fill(s.dact1.begin(), s.dact1.end(), T(0));
  max_unpool_add(s.dpooled1.data(), s.idx1.data(), a.conv1_maps, a.pool1_w(), a.pool1_h(),
                 a.conv_w(), a.conv_h(), s.dact1.data());
  for (std::size_t i = 0; i < s.dact1.size(); ++i)
    if (s.act1[i] <= T(0)) s.dact1[i] = T(0);

  auto dz1 = map_rm(s.dact1, a.conv1_maps, p0);
  map_rm(lane.c1w, a.conv1_maps, k).noalias() += dz1 * map_cm(s.col0, k, p0).transpose();
  Eigen::Map<VecX<T>>(lane.c1b.data(), a.conv1_maps).noalias() += dz1.rowwise().sum();
}

// Forward the whole batch; fills scratch.x, scratch.z1 (post-ReLU) and
// scratch.y. Returns the summed squared-L2 loss when targets are present.
template <typename T>
double batch_forward(const CnnModel<T>& model, const CnnBatch<T>& batch, BatchScratch<T>& s,
                     bool want_loss) {
  const CnnArch& a = model.arch;
  const int b = batch.size;
  const int d = a.fc1_inputs();
  const int hw = a.in_width * a.in_height;

  parallel_lanes(b, [&](int, std::ptrdiff_t begin, std::ptrdiff_t end) {
    for (std::ptrdiff_t i = begin; i < end; ++i) {
      conv_forward_sample(model, batch.images.data() + i * hw,
                          batch.features.data() + i * a.feature_dim, s.per_sample[i],
                          s.x.data() + i * d);
    }
  });

  auto x = map_cm(s.x, d, b);
  auto z1 = map_cm(s.z1, a.fc1_units, b);
  auto w1 = map_rm(model.params.fc1_w, a.fc1_units, d);
  const auto b1 = Eigen::Map<const VecX<T>>(model.params.fc1_b.data(), a.fc1_units);
  parallel_lanes(a.fc1_units, [&](int, std::ptrdiff_t r0, std::ptrdiff_t r1) {
    z1.middleRows(r0, r1 - r0).noalias() = w1.middleRows(r0, r1 - r0) * x;
    z1.middleRows(r0, r1 - r0).colwise() += b1.segment(r0, r1 - r0);
    z1.middleRows(r0, r1 - r0) = z1.middleRows(r0, r1 - r0).cwiseMax(T(0));
  });

  auto y = map_cm(s.y, 2, b);
  y.noalias() = map_rm(model.params.fc2_w, 2, a.fc1_units) * z1;
  y.colwise() += Eigen::Map<const VecX<T>>(model.params.fc2_b.data(), 2);

  if (!want_loss) return 0.0;
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    const double ey = static_cast<double>(y(0, i)) - static_cast<double>(batch.targets[2 * i]);
    const double ep = static_cast<double>(y(1, i)) - static_cast<double>(batch.targets[2 * i + 1]);
    loss += ey * ey + ep * ep;
  }
  return loss;
}

template <typename T>
double loss_and_gradients_impl(const CnnModel<T>& model, const CnnBatch<T>& batch,
                               CnnParams<T>& grads, BatchScratch<T>& s) {
  const CnnArch& a = model.arch;
  const int b = batch.size;
  const int d = a.fc1_inputs();
  if (b <= 0) fail(ErrorKind::EmptyInput, "empty batch");

  s.resize(a, b);
  const double loss = batch_forward(model, batch, s, true);

  auto y = map_cm(s.y, 2, b);
  auto dy = map_cm(s.dy, 2, b);
  for (int i = 0; i < b; ++i) {
    dy(0, i) = T(2) * (y(0, i) - batch.targets[2 * i]);
    dy(1, i) = T(2) * (y(1, i) - batch.targets[2 * i + 1]);
  }

  grads.resize(a);
  auto z1 = map_cm(s.z1, a.fc1_units, b);

  map_rm(grads.fc2_w, 2, a.fc1_units).noalias() = dy * z1.transpose();
  Eigen::Map<VecX<T>>(grads.fc2_b.data(), 2).noalias() = dy.rowwise().sum();

  auto dz1 = map_cm(s.dz1, a.fc1_units, b);
  dz1.noalias() = map_rm(model.params.fc2_w, 2, a.fc1_units).transpose() * dy;
  dz1 = (z1.array() > T(0)).select(dz1, MatCM<T>::Zero(a.fc1_units, b));

  auto x = map_cm(s.x, d, b);
  auto w1 = map_rm(model.params.fc1_w, a.fc1_units, d);
  auto dw1 = map_rm(grads.fc1_w, a.fc1_units, d);
  auto db1 = Eigen::Map<VecX<T>>(grads.fc1_b.data(), a.fc1_units);
  parallel_lanes(a.fc1_units, [&](int, std::ptrdiff_t r0, std::ptrdiff_t r1) {
    dw1.middleRows(r0, r1 - r0).noalias() = dz1.middleRows(r0, r1 - r0) * x.transpose();
    db1.segment(r0, r1 - r0).noalias() = dz1.middleRows(r0, r1 - r0).rowwise().sum();
  });

  auto dx = map_cm(s.dx, d, b);
  parallel_lanes(d, [&](int, std::ptrdiff_t r0, std::ptrdiff_t r1) {
    dx.middleRows(r0, r1 - r0).noalias() = w1.middleCols(r0, r1 - r0).transpose() * dz1;
  });

  for (auto& lane : s.lane_grads) lane.resize(a);
  parallel_lanes(b, [&](int lane, std::ptrdiff_t begin, std::ptrdiff_t end) {
    for (std::ptrdiff_t i = begin; i < end; ++i)
      conv_backward_sample(model, s.per_sample[i], s.dx.data() + i * d, s.lane_grads[lane]);
  });
  // Fold lanes in fixed order so the batch reduction is thread-count invariant.
  for (const auto& lane : s.lane_grads) {
    for (std::size_t i = 0; i < grads.conv1_w.size(); ++i) grads.conv1_w[i] += lane.c1w[i];
    for (std::size_t i = 0; i < grads.conv1_b.size(); ++i) grads.conv1_b[i] += lane.c1b[i];
    for (std::size_t i = 0; i < grads.conv2_w.size(); ++i) grads.conv2_w[i] += lane.c2w[i];
    for (std::size_t i = 0; i < grads.conv2_b.size(); ++i) grads.conv2_b[i] += lane.c2b[i];
  }
  return loss;
}

template <typename T>
void adam_update_group(std::vector<T>& w, const std::vector<T>& g, std::vector<T>& m,
                       std::vector<T>& v, T lr, T beta1, T beta2, T eps, T bc1, T bc2) {
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(w.size());
  parallel_for(n, [&](std::ptrdiff_t i) {
    m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
    v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
    const T mhat = m[i] / bc1;
    const T vhat = v[i] / bc2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  });
}

}  // namespace

CnnArch CnnArch::for_input(int width, int height, int feature_dim) {
  if (width < 5 || height < 5) fail(ErrorKind::InvalidArgument, "input must be at least 5x5");
  CnnArch a;
  a.in_width = width;
  a.in_height = height;
  a.feature_dim = feature_dim;
  a.pool1_stride = std::min(width, height) >= 24 ? 2 : 1;
  const int p1_min = std::min((width - 2) / a.pool1_stride + 1, (height - 2) / a.pool1_stride + 1);
  a.pool2_stride = p1_min >= 12 ? 2 : 1;
  return a;
}

std::int64_t CnnArch::parameter_count() const {
  const int k = kernel * kernel;
  return static_cast<std::int64_t>(conv1_maps) * k + conv1_maps +
         static_cast<std::int64_t>(conv2_maps) * conv1_maps * k + conv2_maps +
         static_cast<std::int64_t>(fc1_units) * fc1_inputs() + fc1_units +
         2LL * fc1_units + 2;
}

double effective_learning_rate(const TrainConfig& config, int iteration) {
  if (iteration < 1) fail(ErrorKind::InvalidArgument, "iterations are 1-based");
  if (config.decay_every <= 0) return config.learning_rate;
  const int steps = (iteration - 1) / config.decay_every;
  return config.learning_rate * std::pow(config.decay_factor, steps);
}

template <typename T>
void CnnParams<T>::resize(const CnnArch& a) {
  const int k = a.kernel * a.kernel;
  conv1_w.assign(static_cast<std::size_t>(a.conv1_maps) * k, T(0));
  conv1_b.assign(a.conv1_maps, T(0));
  conv2_w.assign(static_cast<std::size_t>(a.conv2_maps) * a.conv1_maps * k, T(0));
  conv2_b.assign(a.conv2_maps, T(0));
  fc1_w.assign(static_cast<std::size_t>(a.fc1_units) * a.fc1_inputs(), T(0));
  fc1_b.assign(a.fc1_units, T(0));
  fc2_w.assign(static_cast<std::size_t>(2) * a.fc1_units, T(0));
  fc2_b.assign(2, T(0));
}

template <typename T>
void CnnParams<T>::set_zero() {
  for_each([](auto& v) { std::fill(v.begin(), v.end(), typename std::decay_t<decltype(v)>::value_type(0)); });
}

template <typename T>
CnnModel<T> make_cnn(const CnnArch& arch, std::uint64_t seed) {
  CnnModel<T> model;
  model.arch = arch;
  model.params.resize(arch);
  Rng rng(derive_seed(seed, 0xC0FFEE));
  const auto fill = [&rng](std::vector<T>& w, int fan_in) {
    const double bound = std::sqrt(6.0 / fan_in);
    for (auto& x : w) x = static_cast<T>(rng.uniform(-bound, bound));
  };
  fill(model.params.conv1_w, arch.kernel * arch.kernel);
  fill(model.params.conv2_w, arch.conv1_maps * arch.kernel * arch.kernel);
  fill(model.params.fc1_w, arch.fc1_inputs());
  fill(model.params.fc2_w, arch.fc1_units);
  return model;
}

template <typename T>
CnnBatch<T> make_batch(const CnnArch& arch, std::span<const TrainSample> samples,
                       std::span<const int> indices) {
  CnnBatch<T> batch;
  batch.size = static_cast<int>(indices.size());
  const int hw = arch.in_width * arch.in_height;
  batch.images.resize(static_cast<std::size_t>(batch.size) * hw);
  batch.features.resize(static_cast<std::size_t>(batch.size) * arch.feature_dim);
  batch.targets.resize(static_cast<std::size_t>(batch.size) * 2);
  for (int i = 0; i < batch.size; ++i) {
    const TrainSample& s = samples[indices[i]];
    if (s.patch.width != arch.in_width || s.patch.height != arch.in_height)
      fail(ErrorKind::ShapeMismatch, "patch size does not match the network input");
    if (static_cast<int>(s.features.size()) != arch.feature_dim)
      fail(ErrorKind::ShapeMismatch, "feature size does not match the network input");
    for (int p = 0; p < hw; ++p)
      batch.images[static_cast<std::size_t>(i) * hw + p] = static_cast<T>(s.patch.pixels[p] / 255.0);
    for (int f = 0; f < arch.feature_dim; ++f)
      batch.features[static_cast<std::size_t>(i) * arch.feature_dim + f] =
          static_cast<T>(s.features[f]);
    batch.targets[2 * i] = static_cast<T>(s.target.yaw);
    batch.targets[2 * i + 1] = static_cast<T>(s.target.pitch);
  }
  return batch;
}

template <typename T>
GazeAngles cnn_forward(const CnnModel<T>& model, const GrayImage& patch,
                       std::span<const double> features) {
  TrainSample s;
  s.patch = patch;
  s.features.assign(features.begin(), features.end());
  const int idx = 0;
  const CnnBatch<T> batch = make_batch<T>(model.arch, std::span<const TrainSample>(&s, 1),
                                          std::span<const int>(&idx, 1));
  BatchScratch<T> scratch;
  scratch.resize(model.arch, 1);
  batch_forward(model, batch, scratch, false);
  return GazeAngles{static_cast<double>(scratch.y[0]), static_cast<double>(scratch.y[1])};
}

template <typename T>
std::vector<GazeAngles> cnn_predict_batch(const CnnModel<T>& model,
                                          std::span<const TrainSample> samples) {
  const int n = static_cast<int>(samples.size());
  std::vector<GazeAngles> out(n);
  parallel_lanes(n, [&](int, std::ptrdiff_t begin, std::ptrdiff_t end) {
    BatchScratch<T> scratch;
    scratch.resize(model.arch, 1);
    for (std::ptrdiff_t i = begin; i < end; ++i) {
      const int idx = static_cast<int>(i);
      const CnnBatch<T> batch =
          make_batch<T>(model.arch, samples, std::span<const int>(&idx, 1));
      batch_forward(model, batch, scratch, false);
      out[i] = GazeAngles{static_cast<double>(scratch.y[0]), static_cast<double>(scratch.y[1])};
    }
  });
  return out;
}

template <typename T>
double cnn_loss(const CnnModel<T>& model, const CnnBatch<T>& batch) {
  BatchScratch<T> scratch;
  scratch.resize(model.arch, batch.size);
  return batch_forward(model, batch, scratch, true);
}

template <typename T>
double cnn_loss_and_gradients(const CnnModel<T>& model, const CnnBatch<T>& batch,
                              CnnParams<T>& grads) {
  BatchScratch<T> scratch;
  return loss_and_gradients_impl(model, batch, grads, scratch);
}

template <typename T>
AdamState<T> make_adam_state(const CnnArch& arch) {
  AdamState<T> state;
  state.m.resize(arch);
  state.v.resize(arch);
  return state;
}

template <typename T>
void adam_step(CnnModel<T>& model, const CnnParams<T>& grads, AdamState<T>& state,
               const TrainConfig& config, int iteration) {
  const T lr = static_cast<T>(effective_learning_rate(config, iteration));
  const T beta1 = static_cast<T>(config.beta1);
  const T beta2 = static_cast<T>(config.beta2);
  const T eps = static_cast<T>(config.epsilon);
  const T bc1 = T(1) - static_cast<T>(std::pow(config.beta1, iteration));
  const T bc2 = T(1) - static_cast<T>(std::pow(config.beta2, iteration));

  adam_update_group(model.params.conv1_w, grads.conv1_w, state.m.conv1_w, state.v.conv1_w, lr,
                    beta1, beta2, eps, bc1, bc2);
  adam_update_group(model.params.conv1_b, grads.conv1_b, state.m.conv1_b, state.v.conv1_b, lr,
                    beta1, beta2, eps, bc1, bc2);
  adam_update_group(model.params.conv2_w, grads.conv2_w, state.m.conv2_w, state.v.conv2_w, lr,
                    beta1, beta2, eps, bc1, bc2);
  adam_update_group(model.params.conv2_b, grads.conv2_b, state.m.conv2_b, state.v.conv2_b, lr,
                    beta1, beta2, eps, bc1, bc2);
  adam_update_group(model.params.fc1_w, grads.fc1_w, state.m.fc1_w, state.v.fc1_w, lr, beta1,
                    beta2, eps, bc1, bc2);
  adam_update_group(model.params.fc1_b, grads.fc1_b, state.m.fc1_b, state.v.fc1_b, lr, beta1,
                    beta2, eps, bc1, bc2);
  adam_update_group(model.params.fc2_w, grads.fc2_w, state.m.fc2_w, state.v.fc2_w, lr, beta1,
                    beta2, eps, bc1, bc2);
  adam_update_group(model.params.fc2_b, grads.fc2_b, state.m.fc2_b, state.v.fc2_b, lr, beta1,
                    beta2, eps, bc1, bc2);
}

template <typename T>
CnnTrainResult<T> train_cnn(std::span<const TrainSample> samples, const CnnArch& arch,
                            const TrainConfig& config) {
  if (samples.empty()) fail(ErrorKind::EmptyInput, "no training samples");
  const int n = static_cast<int>(samples.size());

  CnnTrainResult<T> result;
  result.model = make_cnn<T>(arch, config.seed);
  AdamState<T> state = make_adam_state<T>(arch);
  CnnParams<T> grads;
  grads.resize(arch);
  BatchScratch<T> scratch;

  Rng shuffle_rng(derive_seed(config.seed, 0x5AFF1E));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  shuffle_rng.shuffle(order);
  int cursor = 0;
  std::vector<int> batch_idx(config.batch_size);

  result.loss_trace.reserve(config.iterations);
  for (int iter = 1; iter <= config.iterations; ++iter) {
    for (int i = 0; i < config.batch_size; ++i) {
      if (cursor == n) {
        shuffle_rng.shuffle(order);
        cursor = 0;
      }
      batch_idx[i] = order[cursor++];
    }
    const CnnBatch<T> batch = make_batch<T>(arch, samples, batch_idx);
    const double loss = loss_and_gradients_impl(result.model, batch, grads, scratch);
    if (!std::isfinite(loss))
      fail(ErrorKind::NonFiniteLoss, "training diverged at iteration " + std::to_string(iter));
    adam_step(result.model, grads, state, config, iter);
    result.loss_trace.push_back(loss);
  }
  return result;
}

// The pipeline trains in single precision; double instantiations back the
// finite-difference checks in the test suite.
#define GAZEKIT_INSTANTIATE(T)                                                                   \
  template struct CnnParams<T>;                                                                  \
  template CnnModel<T> make_cnn<T>(const CnnArch&, std::uint64_t);                               \
  template CnnBatch<T> make_batch<T>(const CnnArch&, std::span<const TrainSample>,               \
                                     std::span<const int>);                                      \
  template GazeAngles cnn_forward<T>(const CnnModel<T>&, const GrayImage&,                       \
                                     std::span<const double>);                                   \
  template std::vector<GazeAngles> cnn_predict_batch<T>(const CnnModel<T>&,                      \
                                                        std::span<const TrainSample>);           \
  template double cnn_loss<T>(const CnnModel<T>&, const CnnBatch<T>&);                           \
  template double cnn_loss_and_gradients<T>(const CnnModel<T>&, const CnnBatch<T>&,              \
                                            CnnParams<T>&);                                      \
  template AdamState<T> make_adam_state<T>(const CnnArch&);                                      \
  template void adam_step<T>(CnnModel<T>&, const CnnParams<T>&, AdamState<T>&,                   \
                             const TrainConfig&, int);                                           \
  template CnnTrainResult<T> train_cnn<T>(std::span<const TrainSample>, const CnnArch&,          \
                                          const TrainConfig&);

GAZEKIT_INSTANTIATE(float)
GAZEKIT_INSTANTIATE(double)

#undef GAZEKIT_INSTANTIATE

}  // namespace gazekit
