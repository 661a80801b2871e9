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

#include <vector>

#include "ctrx/tensor.hpp"

namespace ctrx {

enum class PsnrMode {
  kJoint,        // one MSE over all channels
  kChannelMean,  // mean of per-channel PSNRs
};

/// 10 log10(peak^2 / MSE). Identical inputs give +infinity.
double psnr(const ImageTensor& a, const ImageTensor& b, double peak = 1.0,
            PsnrMode mode = PsnrMode::kJoint);

// SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03 and
// dynamic range 1. Local statistics are taken over fully-contained windows
// only; the result is the mean over positions, then over channels.
inline constexpr Index kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

double ssim(const ImageTensor& a, const ImageTensor& b);
std::vector<double> ssim_per_channel(const ImageTensor& a,
                                     const ImageTensor& b);

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::vector<double> channel_psnr_db;
  std::vector<double> channel_ssim;
};

MetricReport compare(const ImageTensor& a, const ImageTensor& b,
                     double peak = 1.0, PsnrMode mode = PsnrMode::kJoint);

}  // namespace ctrx
