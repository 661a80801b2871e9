// Copyright 2026 The ctrx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Core>

#include <complex>
#include <vector>

#include "ctrx/tensor.hpp"

namespace ctrx {

/// Numerical guard added to the operator norm wherever it is divided by.
inline constexpr double kNormGuard = 1e-12;

/// Per-frequency channel-mixing matrices of a multichannel circular
/// convolution on an H x W grid. Frequency (u, v) lives at `u * width + v`.
struct FreqResponse {
  Index height = 0;
  Index width = 0;
  std::vector<Eigen::MatrixXcd> grid;

  const Eigen::MatrixXcd& at(Index u, Index v) const {
    return grid[static_cast<std::size_t>(u * width + v)];
  }
};

// Circular 2D convolution (true convolution, not correlation):
//
//   out[o](r, c) = sum_{i,a,b} K[o,i,a,b] * x[i](r - (a - a0), c - (b - b0))
//
// with indices taken mod H and W and (a0, b0) = (k_h/2, k_w/2) the kernel
// center. The center tap therefore acts at zero offset and the frequency
// response is the DFT of the kernel circularly shifted so the center lands
// on index 0.
ImageTensor conv2d_circular(const ImageTensor& x, const ConvKernel& k);

/// Transpose of conv2d_circular: maps c_out channels back to c_in.
ImageTensor conv2d_circular_adjoint(const ImageTensor& y, const ConvKernel& k);

/// Gradient of <grad_out, conv2d_circular(input, K)> with respect to K.
ConvKernel conv2d_kernel_gradient(const ImageTensor& input,
                                  const ImageTensor& grad_out, Index k_h,
                                  Index k_w);

FreqResponse freq_response(const ConvKernel& k, Index height, Index width);

/// Exact Euclidean operator norm of the circular convolution on an H x W
/// grid: the largest singular value of the frequency response over all
/// frequencies.
double conv_operator_norm(const ConvKernel& k, Index height, Index width);

/// Explicit (c_out*H*W) x (c_in*H*W) matrix of the convolution, built from
/// the spatial definition. Row/column index is (channel, row, col)
/// row-major, matching ImageTensor storage.
Eigen::MatrixXd dense_conv_matrix(const ConvKernel& k, Index height,
                                  Index width);

struct DenseNorm {
  double norm = 0.0;
  Eigen::VectorXd top_right_vector;  // unit input achieving the norm
  int iterations = 0;
};

/// Largest dense oracle the test helpers will materialize, in matrix rows.
inline constexpr Index kDenseOracleMaxRows = 4096;

/// Largest singular value of dense_conv_matrix by power iteration on V^T V
/// (accelerated by repeated squaring), to relative tolerance 1e-10.
/// Throws SizeError when H*W*max(c_in, c_out) exceeds kDenseOracleMaxRows.
DenseNorm dense_norm_oracle_full(const ConvKernel& k, Index height,
                                 Index width);
double dense_norm_oracle(const ConvKernel& k, Index height, Index width);

/// Rescales k so its operator norm on the H x W grid does not exceed
/// `budget`. Kernels already inside the budget are returned unchanged.
ConvKernel clip_norm(const ConvKernel& k, Index height, Index width,
                     double budget);

/// conv2d_circular(x, k) / (s(k) + eps), with s computed on x's grid.
ImageTensor scaled_conv(const ImageTensor& x, const ConvKernel& k, double eps);

/// Same, with a precomputed operator norm `norm` (s(k) on x's grid).
ImageTensor scaled_conv(const ImageTensor& x, const ConvKernel& k, double eps,
                        double norm);

/// Throws ValidationError if any entry is NaN or infinite.
void require_finite(const ImageTensor& x, const char* what);
void require_finite(const ConvKernel& k, const char* what);

}  // namespace ctrx
