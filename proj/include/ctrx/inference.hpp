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

#include <functional>
#include <vector>

#include "ctrx/layers.hpp"
#include "ctrx/tensor.hpp"

namespace ctrx {

inline constexpr double kDefaultTaper = 0.5;

/// Periodic (DFT-even) 1D Tukey window of length n: cosine tapers over the
/// first and last taper/2 of the support, flat in between. taper = 0 is
/// rectangular, taper = 1 is the periodic Hann window (w[0] = 0,
/// w[n/2] = 1).
Eigen::VectorXd tukey_window_1d(Index n, double taper);

/// Outer product of two tukey_window_1d(P, taper).
Eigen::MatrixXd tukey_window(Index P, double taper);

/// Patch side, stride and blending weights for overlap-add inference.
///
/// The blending window samples the same Tukey profile at cell centers,
/// (n + 1/2) / P, so every weight is strictly positive and the normalized
/// accumulation is defined for any stride.
struct PatchPlan {
  Index patch = 64;
  Index stride = 32;
  double taper = kDefaultTaper;
  Eigen::MatrixXd window;
};

/// Throws ConfigError unless patch % stride == 0 and taper is in [0, 1].
PatchPlan make_patch_plan(Index patch, Index stride,
                          double taper = kDefaultTaper);

/// Tiling of a (circularly padded) image by a PatchPlan.
struct PatchGrid {
  Index height = 0;  // original image
  Index width = 0;
  Index pad_top = 0;
  Index pad_left = 0;
  Index padded_h = 0;
  Index padded_w = 0;
  std::vector<Index> row_starts;  // in padded coordinates
  std::vector<Index> col_starts;
};

PatchGrid plan_grid(const PatchPlan& plan, Index height, Index width);

/// Patch of `x` whose top-left corner sits at padded position (row, col);
/// padding wraps around circularly.
ImageTensor extract_patch(const ImageTensor& x, const PatchGrid& grid,
                          Index patch, Index row, Index col);

using PatchFunction = std::function<ImageTensor(
    const ImageTensor& patch, Index padded_row, Index padded_col)>;

/// Runs `f` on every patch and blends the outputs: numerator += w * f(p),
/// denominator += w, result = numerator / denominator cropped to x's size.
/// Patches are visited in row-major order of their starts.
ImageTensor overlap_add(const ImageTensor& x, const PatchPlan& plan,
                        const PatchFunction& f);

/// Patchwise network inference; plan.patch must equal net.patch.
ImageTensor patch_denoise(const ImageTensor& x, const NetworkParams& net,
                          const PatchPlan& plan);

/// Patchwise inference with the gradient-step anchor taken from `anchor`
/// instead of the input itself. For fixed `anchor` this map inherits the
/// network certificate (times patch_lipschitz_factor).
ImageTensor patch_denoise_anchored(const ImageTensor& x,
                                   const ImageTensor& anchor,
                                   const NetworkParams& net,
                                   const PatchPlan& plan);

/// Factor f >= 1 such that an L-Lipschitz patch map yields an (f * L)-
/// Lipschitz overlap_add on an H x W image: f^2 is the largest, over
/// pixels, weighted number of patch copies containing that pixel, each patch
/// weighted by its largest normalized blending weight. f = 1 for
/// non-overlapping tilings without wrap-around.
double patch_lipschitz_factor(const PatchPlan& plan, Index height,
                              Index width);

}  // namespace ctrx
