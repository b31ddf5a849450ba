#pragma once

// Plain serial reference implementations, written independently of the
// library kernels. Tests use them as oracles; the benchmark compares them
// against the parallel paths.

#include <array>
#include <vector>

#include "gazekit/cnn.hpp"
#include "gazekit/baselines.hpp"
#include "gazekit/geometry.hpp"
#include "gazekit/image.hpp"

namespace gazekit::reference {

/// Dense zero-padded ('same') convolution, quadruple loop.
std::vector<double> conv2d_same(const std::vector<double>& input, int in_maps, int width,
                                int height, const std::vector<double>& weights,
                                const std::vector<double>& bias, int out_maps, int kernel);

std::vector<double> max_pool2(const std::vector<double>& input, int maps, int width, int height,
                              int stride);

/// Whole-network forward pass for one sample, straightforward loops only.
std::array<double, 2> cnn_forward(const CnnModel<double>& model,
                                  const std::vector<double>& image01,
                                  const std::vector<double>& features);

/// Loss of a batch evaluated via the naive forward pass.
double cnn_batch_loss(const CnnModel<double>& model, const CnnBatch<double>& batch);

/// Serial inverse-mapping warp with bilinear sampling.
GrayImage warp(const GrayImage& src, const Mat3& w, int out_width, int out_height,
               double* coverage);

/// Exhaustive nearest-neighbour prediction, serial.
GazeAngles knn_exhaustive(const KnnModel& model, const GrayImage& patch);

/// Direction angles via an independent spherical-coordinate derivation.
GazeAngles vector_to_angles(const Vec3& v);

}  // namespace gazekit::reference
