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

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ctrx/layers.hpp"
#include "ctrx/rng.hpp"
#include "ctrx/tensor.hpp"

namespace ctrx {

struct LayerGradient {
  double alpha = 0.0;
  Eigen::VectorXd raw_thresholds;
  ConvKernel kernel;
};

/// Gradients shaped like the network's LayerParams.
struct GradientSet {
  std::vector<LayerGradient> layers;

  static GradientSet ZerosLike(const NetworkParams& net);
  GradientSet& operator+=(const GradientSet& o);
  GradientSet& operator*=(double s);
  double squaredNorm() const;
  bool allFinite() const;
};

/// Mean squared error over all entries.
double loss_mse(const ImageTensor& pred, const ImageTensor& target);

struct BackwardResult {
  double loss = 0.0;
  GradientSet grads;
};

/// Loss of network_forward(y) against `target` and its gradient. The
/// operator-norm normalizers are held fixed (`norms`, one per layer on the
/// patch grid); the soft threshold uses its almost-everywhere derivative.
BackwardResult backward(const NetworkParams& net, const ImageTensor& y,
                        const ImageTensor& target,
                        std::span<const double> norms);
BackwardResult backward(const NetworkParams& net, const ImageTensor& y,
                        const ImageTensor& target);

// Flat parameter view: per layer alpha, raw thresholds, kernel taps.
double& parameter_at(NetworkParams& net, Index i);
double gradient_at(const GradientSet& g, Index i);

struct GradCheckReport {
  double max_rel_error = 0.0;
  Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  Index checked = 0;
  Index excluded = 0;  // coordinates whose perturbation crosses a kink
  bool passed = false;
};

/// Central differences against backward() on up to `max_params` coordinates
/// (all of them if the network is small enough, otherwise a seeded sample).
/// A coordinate is skipped when either perturbed evaluation changes which
/// wavelet coefficients survive thresholding. Relative error is
/// |a - n| / max(|a|, |n|, 1e-8, r / tol), where r = 8 eps |f| / (2 step)
/// is the rounding resolution of the difference quotient.
GradCheckReport grad_check(const NetworkParams& net, const ImageTensor& y,
                           const ImageTensor& target, double step = 1e-6,
                           double tol = 1e-4, Index max_params = 500,
                           std::uint64_t seed = 0);

struct TrainConfig {
  double lr = 1e-4;
  int epochs = 30;
  Index batch_size = 8;
  double sigma = 25.0 / 255.0;  // intensity units
  std::vector<int> decay_epochs = {10, 20};
  double decay_factor = 0.1;
  double momentum = 0.9;  // 0 gives plain SGD
  bool flips = true;
  bool rotations = true;
  std::uint64_t seed = 0;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_psnr = 0.0;  // NaN without a validation set
  double certificate_bound = 0.0;
};

struct TrainResult {
  NetworkParams net;
  std::vector<EpochStats> curve;
};

using EpochCallback = std::function<void(const EpochStats&, const NetworkParams&)>;

/// Projected SGD on noisy/clean pairs built from `clean` patches. Every
/// step is followed by constrain_params and every epoch by a contraction
/// certificate on the patch grid. Throws TrainingError when the epoch loss
/// stays above 10x the first epoch's for 3 epochs in a row.
TrainResult train(const NetworkParams& init, const std::vector<ImageTensor>& clean,
                  const TrainConfig& cfg,
                  const std::vector<ImageTensor>& validation = {},
                  const EpochCallback& on_epoch = {});

/// Mean PSNR of the network on seeded noisy copies of `clean`.
double mean_denoised_psnr(const NetworkParams& net,
                          const std::vector<ImageTensor>& clean, double sigma,
                          std::uint64_t seed);
double mean_noisy_psnr(const std::vector<ImageTensor>& clean, double sigma,
                       std::uint64_t seed);

/// Seeded piecewise-smooth C x P x P textures in [0, 1]: rectangles,
/// discs, ramps and low-frequency stripes.
std::vector<ImageTensor> synthetic_patches(Index count, Index patch,
                                           Index channels, Rng& rng);

/// P x P crops of every image on a grid with the given stride. When more
/// than `max_count` crops exist a seeded subset is kept.
std::vector<ImageTensor> extract_patches(const std::vector<ImageTensor>& images,
                                         Index patch, Index stride,
                                         Index max_count, Rng& rng);

/// Random flip and quarter-turn rotation of a square patch.
ImageTensor augment(const ImageTensor& x, bool flips, bool rotations, Rng& rng);

/// CSV with header "epoch,train_loss,val_psnr,certificate_bound".
std::string loss_curve_csv(const std::vector<EpochStats>& curve);
void write_loss_curve_csv(const std::string& path,
                          const std::vector<EpochStats>& curve);

}  // namespace ctrx
