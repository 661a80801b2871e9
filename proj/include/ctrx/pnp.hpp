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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ctrx/inference.hpp"
#include "ctrx/layers.hpp"
#include "ctrx/tensor.hpp"

namespace ctrx {

/// y = S B x + noise: B a single-channel circular blur applied to every
/// channel, S keeps every stride-th row and column starting at index 0.
struct ForwardModel {
  ConvKernel blur = ConvKernel::Identity(1);
  Index stride = 1;
  double noise_sigma = 0.0;
};

// Blur kernels, all 1 x 1 x k x k with unit sum.
ConvKernel delta_blur();
ConvKernel gaussian_blur(Index size, double sigma);
ConvKernel box_blur(Index size);
/// Defocus disk of the given radius on a (2r+1)^2 support.
ConvKernel disk_blur(Index radius);
/// Rotated Gaussian; theta in degrees, counter-clockwise from the x axis.
ConvKernel anisotropic_gaussian_blur(Index size, double sigma_x,
                                     double sigma_y, double theta_deg);
/// Linear motion blur across the whole support; direction is "horiz",
/// "vert", "diag" or "anti".
ConvKernel motion_blur(Index size, std::string_view direction);
/// Random support: each tap is kept with probability `density` (the centre
/// always is) and given a uniform weight.
ConvKernel sparse_random_blur(Index size, double density, std::uint64_t seed);

/// "gauss:9:2.0", "box:9", "disk:5", "aniso:21:3.0:1.5:45",
/// "motion:15:diag", "sparse:15:0.9:7", "delta". Throws ValidationError.
ConvKernel parse_blur_spec(std::string_view spec);

ImageTensor apply_forward(const ImageTensor& x, const ForwardModel& m);
ImageTensor apply_adjoint(const ImageTensor& u, const ForwardModel& m,
                          Index full_h, Index full_w);
/// A^T (A x - y).
ImageTensor grad_datafit(const ImageTensor& x, const ImageTensor& y,
                         const ForwardModel& m);
/// 1/2 ||y - A x||^2.
double datafit(const ImageTensor& x, const ImageTensor& y,
               const ForwardModel& m);

using Denoiser = std::function<ImageTensor(const ImageTensor&)>;

struct PnPOptions {
  int max_iters = 500;
  double tol = 1e-6;
  std::optional<ImageTensor> x0;         // default A^T y
  std::optional<ImageTensor> reference;  // enables the psnr column
};

/// Per-iteration record. Entry k describes iteration k + 1.
struct PnPTrace {
  std::vector<double> residual;  // ||x_{k+1} - x_k|| (z for DRS)
  std::vector<double> datafit;   // 1/2 ||y - A x_{k+1}||^2
  std::vector<double> psnr;      // vs reference, NaN without one
  ImageTensor final;
  bool converged = false;
  int iterations() const { return static_cast<int>(residual.size()); }
};

/// A non-finite iterate or an overflowing norm; carries the trace up to the failure.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, PnPTrace trace)
      : Error(what), trace_(std::move(trace)) {}
  const PnPTrace& trace() const { return trace_; }

 private:
  PnPTrace trace_;
};

/// x_{k+1} = D(x_k - alpha_step * grad f(x_k)); stops once
/// ||x_{k+1} - x_k|| <= tol * ||x_k|| or after max_iters.
PnPTrace pnp_fbs(const ImageTensor& y, const ForwardModel& m,
                 const Denoiser& denoiser, double alpha_step,
                 const PnPOptions& opts = {});

/// Douglas-Rachford: x = prox(z), z += D(2x - z) - x, with prox solving
/// (I + A^T A / step) x = z + A^T y / step. The returned image is prox(z).
PnPTrace pnp_drs(const ImageTensor& y, const ForwardModel& m,
                 const Denoiser& denoiser, double step,
                 const PnPOptions& opts = {});

/// Exact solve of the DRS data step on an H x W grid (FFT for stride 1,
/// conjugate gradient to 1e-10 otherwise; SolverError if CG stalls).
ImageTensor prox_datafit(const ImageTensor& z, const ImageTensor& y,
                         const ForwardModel& m, double step);

/// Eigenvalues of A^T A on the H x W grid for stride 1 (|B(w)|^2 per
/// frequency), sorted ascending.
std::vector<double> normal_spectrum(const ForwardModel& m, Index height,
                                    Index width);
/// Largest eigenvalue of A^T A by power iteration (relative tol 1e-10).
double normal_operator_norm(const ForwardModel& m, Index height, Index width);

/// L_D * ||I - alpha_step A^T A|| on the H x W grid.
double composite_contraction_bound(const ForwardModel& m, double alpha_step,
                                   double lipschitz_denoiser, Index height,
                                   Index width);
/// Step minimizing the bound: 2 / (lambda_min + lambda_max) for stride 1,
/// 1 / lambda_max otherwise.
double suggest_alpha_step(const ForwardModel& m, Index height, Index width);

/// Patchwise network denoiser. With an anchor, every layer's gradient step
/// pulls toward the anchor instead of the current input.
Denoiser network_denoiser(const NetworkParams& net, const PatchPlan& plan,
                          std::optional<ImageTensor> anchor = std::nullopt);

/// CSV with header "iter,residual,datafit,psnr"; shortest round-trip
/// decimals, "nan" for missing PSNR, LF endings.
std::string trace_csv(const PnPTrace& trace);
void write_trace_csv(const std::string& path, const PnPTrace& trace);

}  // namespace ctrx
