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

#include <cstdint>
#include <span>
#include <vector>

#include "ctrx/rng.hpp"
#include "ctrx/tensor.hpp"
#include "ctrx/tensorops.hpp"
#include "ctrx/wavelets.hpp"

namespace ctrx {

/// Step sizes are kept in [kAlphaMin, 1 - kAlphaMin].
inline constexpr double kAlphaMin = 1e-3;
inline constexpr double kDefaultLayerEps = 1e-3;

double softplus(double x);
double softplus_inverse(double y);
double sigmoid(double x);

/// One contractive layer: step size, raw (pre-softplus) thresholds, kernel
/// and the wavelet family it is assigned.
struct LayerParams {
  double alpha = 0.5;
  ThresholdLayout layout;
  Eigen::VectorXd raw_thresholds;
  ConvKernel kernel;
  WaveletKind family = WaveletKind::kHaar;

  Thresholds thresholds() const;
};

/// Component switches used for ablations. The defaults are the full layer.
struct Ablation {
  bool prox = true;         // false: U reduces to the gradient step
  bool conv = true;         // false: the scaled convolution is the identity
  bool learn_alpha = true;  // false: the trainer leaves every alpha as is

  bool operator==(const Ablation&) const = default;
};

struct NetworkParams {
  std::vector<LayerParams> layers;
  double eps = kDefaultLayerEps;
  Index patch = 64;
  Index channels = 1;
  Ablation ablation;

  Index depth() const { return static_cast<Index>(layers.size()); }
  Index parameter_count() const;
};

/// Validates the structural invariants (depth, family cycle, shapes).
void validate_network(const NetworkParams& net);

/// Intermediate values of one layer, recorded for backpropagation.
struct LayerTape {
  ImageTensor x_in;
  ImageTensor z;              // (1 - alpha) x + alpha y
  WaveletCoeffs coeffs;       // W z, before thresholding
  ImageTensor u;              // prox output
  ImageTensor conv_out;       // V_K u, before any scaling
};

/// U(x; alpha, Lambda) = W^T S_Lambda(W((1 - alpha) x + alpha y)).
ImageTensor prox_wavelet_layer(const ImageTensor& x, const ImageTensor& y,
                               const LayerParams& p, bool prox = true);

/// T(x) = Z(U(x); K) / ((1 - alpha) + eps), Z the norm-scaled convolution.
/// `conv_norm` is s(K) on x's grid; the overload without it computes it.
ImageTensor contractive_layer(const ImageTensor& x, const ImageTensor& y,
                              const LayerParams& p, double eps,
                              const Ablation& ablation = {});
ImageTensor contractive_layer(const ImageTensor& x, const ImageTensor& y,
                              const LayerParams& p, double eps,
                              double conv_norm, const Ablation& ablation,
                              LayerTape* tape = nullptr);

/// s(K_l) for every layer on the P x P grid.
std::vector<double> conv_norms(const NetworkParams& net);

/// x_0 = y, x_l = T_l(x_{l-1}; y); returns x_M.
ImageTensor network_forward(const ImageTensor& y, const NetworkParams& net);
ImageTensor network_forward(const ImageTensor& y, const NetworkParams& net,
                            std::span<const double> norms);

/// Same recursion started from an arbitrary state x0, with y fixed as the
/// gradient-step anchor of every layer. The certificate bounds this map's
/// Lipschitz constant in x0.
ImageTensor network_forward_from(const ImageTensor& x0, const ImageTensor& y,
                                 const NetworkParams& net,
                                 std::span<const double> norms,
                                 std::vector<LayerTape>* tapes = nullptr);

struct LayerBound {
  double alpha = 0.0;
  double conv_norm = 0.0;    // s_l on the certificate grid
  double conv_budget = 0.0;  // 1 / ((1 - alpha_l) + eps)
  double bound = 0.0;        // L_l
};

struct ContractionCertificate {
  Index grid_h = 0;
  Index grid_w = 0;
  std::vector<LayerBound> per_layer;
  double total_bound = 0.0;  // product of L_l
  // Lipschitz bound of y -> F(y) when the observation feeds both x_0 and
  // every gradient step; may exceed one.
  double observation_sensitivity = 0.0;
};

/// Throws CertificateError if any layer bound (or the product) is >= 1.
ContractionCertificate contraction_certificate(const NetworkParams& net,
                                               Index height, Index width);

/// Clips alphas and projects kernels onto their budgets at the P x P grid.
NetworkParams constrain_params(const NetworkParams& net);

struct InitOptions {
  Index depth = 30;
  Index patch = 64;
  Index channels = 1;
  Index kernel_size = 3;
  double eps = kDefaultLayerEps;
  double alpha = 0.1;
  // When set, each alpha is drawn uniformly from [alpha_lo, alpha_hi].
  bool random_alpha = false;
  double alpha_lo = 0.1;
  double alpha_hi = 0.9;
  double threshold = 0.05;  // initial softplus(raw) value
  double threshold_jitter = 0.0;
  // Stddev of Gaussian noise added to the kernel taps.
  double kernel_noise = 0.0;
  // Start from a sharpening stencil whose DC gain is (1 - alpha + eps)
  // times its peak gain, so T passes constants through unchanged.
  bool calibrate_kernel = true;
  bool shared_thresholds = false;
  bool threshold_lowpass = false;
  Ablation ablation;
};

NetworkParams init_network(const InitOptions& opts, Rng& rng);

}  // namespace ctrx
