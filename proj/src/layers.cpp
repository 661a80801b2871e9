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

#include "ctrx/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ctrx {

double softplus(double x) {
  const double v = std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
  // exp underflows for x below about -745; keep the result a positive double.
  return std::max(v, std::numeric_limits<double>::min());
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw ValidationError("softplus_inverse needs y > 0");
  // log(exp(y) - 1), rearranged to avoid overflow for large y
  return y + std::log(-std::expm1(-y));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Thresholds LayerParams::thresholds() const {
  Thresholds t{layout, Eigen::VectorXd(raw_thresholds.size())};
  for (Index i = 0; i < raw_thresholds.size(); ++i) {
    t.values[i] = softplus(raw_thresholds[i]);
  }
  return t;
}

Index NetworkParams::parameter_count() const {
  Index n = 0;
  for (const auto& l : layers) n += 1 + l.raw_thresholds.size() + l.kernel.size();
  return n;
}

void validate_network(const NetworkParams& net) {
  if (net.layers.empty()) throw ValidationError("network needs at least one layer");
  if (!(net.eps > 0.0)) throw ValidationError("network eps must be positive");
  if (net.patch <= 0 || net.patch % 2 != 0) {
    throw ValidationError("patch size must be positive and even");
  }
  if (net.channels <= 0) throw ValidationError("channel count must be positive");
  for (Index l = 0; l < net.depth(); ++l) {
    const LayerParams& p = net.layers[static_cast<std::size_t>(l)];
    const std::string where = "layer " + std::to_string(l) + ": ";
    if (p.family != cycled_wavelet(l)) {
      throw ValidationError(where + "wavelet family breaks the haar/db4/sym4 cycle");
    }
    if (p.layout.channels != net.channels || p.layout.rows != net.patch / 2 ||
        p.layout.cols != net.patch / 2) {
      throw DimensionError(where + "threshold layout does not match the patch");
    }
    if (p.raw_thresholds.size() != p.layout.count()) {
      throw DimensionError(where + "threshold count does not match its layout");
    }
    if (p.kernel.c_in() != net.channels || p.kernel.c_out() != net.channels) {
      throw DimensionError(where + "kernel channels do not match the network");
    }
    if (!std::isfinite(p.alpha) || !p.raw_thresholds.allFinite() ||
        !p.kernel.weights().allFinite()) {
      throw ValidationError(where + "non-finite parameter");
    }
  }
}

ImageTensor prox_wavelet_layer(const ImageTensor& x, const ImageTensor& y,
                               const LayerParams& p, bool prox) {
  x.require_same_shape(y);
  ImageTensor z = (1.0 - p.alpha) * x + p.alpha * y;
  if (!prox) return z;
  const WaveletFamily& fam = wavelet_family(p.family);
  return idwt2(soft_threshold_hf(dwt2(z, fam), p.thresholds()), fam);
}

ImageTensor contractive_layer(const ImageTensor& x, const ImageTensor& y,
                              const LayerParams& p, double eps,
                              double conv_norm, const Ablation& ablation,
                              LayerTape* tape) {
  if (!(eps > 0.0)) throw ValidationError("layer eps must be positive");
  x.require_same_shape(y);
  const double gain = 1.0 / ((1.0 - p.alpha) + eps);

  ImageTensor z = (1.0 - p.alpha) * x + p.alpha * y;
  ImageTensor u;
  WaveletCoeffs coeffs;
  if (ablation.prox) {
    const WaveletFamily& fam = wavelet_family(p.family);
    coeffs = dwt2(z, fam);
    u = idwt2(soft_threshold_hf(coeffs, p.thresholds()), fam);
  } else {
    u = z;
  }

  ImageTensor out;
  ImageTensor conv_out;
  if (ablation.conv) {
    conv_out = conv2d_circular(u, p.kernel);
    out = conv_out;
    out.data() /= conv_norm + kNormGuard;
    out *= gain;
  } else {
    out = gain * u;
  }

  if (tape != nullptr) {
    tape->x_in = x;
    tape->z = std::move(z);
    tape->coeffs = std::move(coeffs);
    tape->u = std::move(u);
    tape->conv_out = std::move(conv_out);
  }
  return out;
}

ImageTensor contractive_layer(const ImageTensor& x, const ImageTensor& y,
                              const LayerParams& p, double eps,
                              const Ablation& ablation) {
  const double s =
      ablation.conv ? conv_operator_norm(p.kernel, x.height(), x.width()) : 1.0;
  return contractive_layer(x, y, p, eps, s, ablation);
}

std::vector<double> conv_norms(const NetworkParams& net) {
  std::vector<double> norms;
  norms.reserve(net.layers.size());
  for (const auto& l : net.layers) {
    norms.push_back(net.ablation.conv
                        ? conv_operator_norm(l.kernel, net.patch, net.patch)
                        : 1.0);
  }
  return norms;
}

ImageTensor network_forward_from(const ImageTensor& x0, const ImageTensor& y,
                                 const NetworkParams& net,
                                 std::span<const double> norms,
                                 std::vector<LayerTape>* tapes) {
  if (y.channels() != net.channels || y.height() != net.patch ||
      y.width() != net.patch) {
    throw DimensionError("network input " + y.shape_string() +
                         " does not match the network patch " +
                         std::to_string(net.channels) + "x" +
                         std::to_string(net.patch) + "x" +
                         std::to_string(net.patch));
  }
  x0.require_same_shape(y);
  if (norms.size() != net.layers.size()) {
    throw DimensionError("one operator norm per layer is required");
  }
  if (tapes != nullptr) tapes->assign(net.layers.size(), LayerTape{});
  ImageTensor x = x0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    x = contractive_layer(x, y, net.layers[l], net.eps, norms[l], net.ablation,
                          tapes != nullptr ? &(*tapes)[l] : nullptr);
  }
  return x;
}

ImageTensor network_forward(const ImageTensor& y, const NetworkParams& net,
                            std::span<const double> norms) {
  return network_forward_from(y, y, net, norms);
}

ImageTensor network_forward(const ImageTensor& y, const NetworkParams& net) {
  const auto norms = conv_norms(net);
  return network_forward(y, net, norms);
}

ContractionCertificate contraction_certificate(const NetworkParams& net,
                                               Index height, Index width) {
  if (!(net.eps > 0.0)) throw ValidationError("network eps must be positive");
  ContractionCertificate cert;
  cert.grid_h = height;
  cert.grid_w = width;
  cert.total_bound = 1.0;
  cert.observation_sensitivity = 1.0;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const LayerParams& p = net.layers[l];
    LayerBound b;
    b.alpha = p.alpha;
    b.conv_budget = 1.0 / ((1.0 - p.alpha) + net.eps);
    // Factors in the order contractive_layer applies them.
    double conv_factor = 1.0;
    if (net.ablation.conv) {
      b.conv_norm = conv_operator_norm(p.kernel, height, width);
      conv_factor = b.conv_norm / (b.conv_norm + kNormGuard);
    } else {
      b.conv_norm = 1.0;
    }
    b.bound = (1.0 - p.alpha) * b.conv_budget * conv_factor;
    if (!(b.bound < 1.0) || !(b.bound >= 0.0)) {
      throw CertificateError("layer " + std::to_string(l) + " bound " +
                             std::to_string(b.bound) + " is not below 1");
    }
    cert.total_bound *= b.bound;
    cert.observation_sensitivity =
        b.conv_budget * conv_factor *
        ((1.0 - p.alpha) * cert.observation_sensitivity + p.alpha);
    cert.per_layer.push_back(b);
  }
  if (!(cert.total_bound < 1.0)) {
    throw CertificateError("network bound is not below 1");
  }
  return cert;
}

NetworkParams constrain_params(const NetworkParams& net) {
  NetworkParams out = net;
  for (auto& l : out.layers) {
    l.alpha = std::clamp(l.alpha, kAlphaMin, 1.0 - kAlphaMin);
    const double budget = 1.0 / ((1.0 - l.alpha) + out.eps);
    l.kernel = clip_norm(l.kernel, out.patch, out.patch, budget);
  }
  return out;
}

NetworkParams init_network(const InitOptions& opts, Rng& rng) {
  if (opts.depth < 1) throw ValidationError("depth must be at least 1");
  if (opts.kernel_size < 1 || opts.kernel_size % 2 == 0) {
    throw ValidationError("kernel size must be odd");
  }
  NetworkParams net;
  net.eps = opts.eps;
  net.patch = opts.patch;
  net.channels = opts.channels;
  net.ablation = opts.ablation;
  const ThresholdLayout layout = ThresholdLayout::ForPatch(
      opts.channels, opts.patch, opts.shared_thresholds, opts.threshold_lowpass);
  const Index k = opts.kernel_size;
  const Index c0 = k / 2;

  for (Index l = 0; l < opts.depth; ++l) {
    LayerParams p;
    p.family = cycled_wavelet(l);
    p.alpha = opts.random_alpha ? rng.uniform(opts.alpha_lo, opts.alpha_hi)
                                : opts.alpha;
    p.alpha = std::clamp(p.alpha, kAlphaMin, 1.0 - kAlphaMin);
    p.layout = layout;
    p.raw_thresholds.resize(layout.count());
    for (Index i = 0; i < layout.count(); ++i) {
      double t = opts.threshold;
      if (opts.threshold_jitter > 0.0) {
        t *= std::exp(opts.threshold_jitter * rng.normal());
      }
      p.raw_thresholds[i] = softplus_inverse(t);
    }

    p.kernel = ConvKernel(opts.channels, opts.channels, k, k);
    // 5-point sharpening stencil: DC gain 1, peak gain 1 + 8 beta at (pi, pi).
    const double beta = (opts.calibrate_kernel && k >= 3)
                            ? (1.0 / ((1.0 - p.alpha) + opts.eps) - 1.0) / 8.0
                            : 0.0;
    for (Index c = 0; c < opts.channels; ++c) {
      p.kernel(c, c, c0, c0) = 1.0 + 4.0 * beta;
      if (k >= 3) {
        p.kernel(c, c, c0 - 1, c0) = -beta;
        p.kernel(c, c, c0 + 1, c0) = -beta;
        p.kernel(c, c, c0, c0 - 1) = -beta;
        p.kernel(c, c, c0, c0 + 1) = -beta;
      }
    }
    if (opts.kernel_noise > 0.0) {
      for (Index i = 0; i < p.kernel.size(); ++i) {
        p.kernel.weights()[i] += opts.kernel_noise * rng.normal();
      }
    }
    net.layers.push_back(std::move(p));
  }
  return constrain_params(net);
}

}  // namespace ctrx
