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

#include "ctrx/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ctrx {
namespace {

Index wrap(Index i, Index n) {
  const Index m = i % n;
  return m < 0 ? m + n : m;
}

// Tukey profile at normalized position t in [0, 1).
double tukey_at(double t, double taper) {
  if (taper <= 0.0) return 1.0;
  const double edge = taper / 2.0;
  if (t < edge) {
    return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * t / taper));
  }
  if (t > 1.0 - edge) {
    return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (1.0 - t) / taper));
  }
  return 1.0;
}

void check_taper(double taper) {
  if (!(taper >= 0.0 && taper <= 1.0)) {
    throw ConfigError("taper must lie in [0, 1]");
  }
}

std::vector<Index> starts(Index padded, Index patch, Index stride) {
  std::vector<Index> s;
  for (Index p = 0; p + patch <= padded; p += stride) s.push_back(p);
  return s;
}

Index padded_extent(Index n, Index patch, Index stride) {
  if (n <= patch) return patch;
  return patch + stride * ((n - patch + stride - 1) / stride);
}

}  // namespace

Eigen::VectorXd tukey_window_1d(Index n, double taper) {
  check_taper(taper);
  if (n <= 0) throw ConfigError("window length must be positive");
  Eigen::VectorXd w(n);
  for (Index i = 0; i < n; ++i) {
    w[i] = tukey_at(static_cast<double>(i) / static_cast<double>(n), taper);
  }
  return w;
}

Eigen::MatrixXd tukey_window(Index P, double taper) {
  const Eigen::VectorXd w = tukey_window_1d(P, taper);
  return w * w.transpose();
}

PatchPlan make_patch_plan(Index patch, Index stride, double taper) {
  if (patch <= 0 || stride <= 0) {
    throw ConfigError("patch and stride must be positive");
  }
  if (patch % stride != 0) {
    throw ConfigError("patch size " + std::to_string(patch) +
                      " is not a multiple of stride " + std::to_string(stride));
  }
  check_taper(taper);
  PatchPlan plan;
  plan.patch = patch;
  plan.stride = stride;
  plan.taper = taper;
  Eigen::VectorXd w(patch);
  for (Index i = 0; i < patch; ++i) {
    w[i] = tukey_at((static_cast<double>(i) + 0.5) / static_cast<double>(patch),
                    taper);
  }
  plan.window = w * w.transpose();
  return plan;
}

PatchGrid plan_grid(const PatchPlan& plan, Index height, Index width) {
  PatchGrid g;
  g.height = height;
  g.width = width;
  g.padded_h = padded_extent(height, plan.patch, plan.stride);
  g.padded_w = padded_extent(width, plan.patch, plan.stride);
  g.pad_top = (g.padded_h - height) / 2;
  g.pad_left = (g.padded_w - width) / 2;
  g.row_starts = starts(g.padded_h, plan.patch, plan.stride);
  g.col_starts = starts(g.padded_w, plan.patch, plan.stride);
  return g;
}

ImageTensor extract_patch(const ImageTensor& x, const PatchGrid& grid,
                          Index patch, Index row, Index col) {
  ImageTensor p(x.channels(), patch, patch);
  for (Index c = 0; c < x.channels(); ++c) {
    for (Index r = 0; r < patch; ++r) {
      const Index sr = wrap(row + r - grid.pad_top, x.height());
      for (Index q = 0; q < patch; ++q) {
        p(c, r, q) = x(c, sr, wrap(col + q - grid.pad_left, x.width()));
      }
    }
  }
  return p;
}

ImageTensor overlap_add(const ImageTensor& x, const PatchPlan& plan,
                        const PatchFunction& f) {
  if (plan.window.rows() != plan.patch || plan.window.cols() != plan.patch) {
    throw ConfigError("patch plan has no window; use make_patch_plan");
  }
  const PatchGrid grid = plan_grid(plan, x.height(), x.width());
  const Index P = plan.patch;
  ImageTensor num(x.channels(), grid.padded_h, grid.padded_w);
  Eigen::MatrixXd den = Eigen::MatrixXd::Zero(grid.padded_h, grid.padded_w);

  for (const Index r0 : grid.row_starts) {
    for (const Index c0 : grid.col_starts) {
      const ImageTensor out = f(extract_patch(x, grid, P, r0, c0), r0, c0);
      if (out.channels() != x.channels() || out.height() != P ||
          out.width() != P) {
        throw DimensionError("patch function changed the patch shape");
      }
      for (Index c = 0; c < x.channels(); ++c) {
        num.plane(c).block(r0, c0, P, P) +=
            (plan.window.array() * out.plane(c).array()).matrix();
      }
      den.block(r0, c0, P, P) += plan.window;
    }
  }

  ImageTensor result(x.channels(), x.height(), x.width());
  for (Index c = 0; c < x.channels(); ++c) {
    for (Index r = 0; r < x.height(); ++r) {
      for (Index q = 0; q < x.width(); ++q) {
        const Index pr = r + grid.pad_top;
        const Index pc = q + grid.pad_left;
        result(c, r, q) = num(c, pr, pc) / den(pr, pc);
      }
    }
  }
  return result;
}

ImageTensor patch_denoise(const ImageTensor& x, const NetworkParams& net,
                          const PatchPlan& plan) {
  if (plan.patch != net.patch) {
    throw ConfigError("patch plan size " + std::to_string(plan.patch) +
                      " differs from the network patch " +
                      std::to_string(net.patch));
  }
  const auto norms = conv_norms(net);
  return overlap_add(x, plan, [&](const ImageTensor& p, Index, Index) {
    return network_forward(p, net, norms);
  });
}

ImageTensor patch_denoise_anchored(const ImageTensor& x,
                                   const ImageTensor& anchor,
                                   const NetworkParams& net,
                                   const PatchPlan& plan) {
  if (plan.patch != net.patch) {
    throw ConfigError("patch plan size differs from the network patch");
  }
  x.require_same_shape(anchor);
  const auto norms = conv_norms(net);
  const PatchGrid grid = plan_grid(plan, x.height(), x.width());
  return overlap_add(x, plan, [&](const ImageTensor& p, Index r0, Index c0) {
    const ImageTensor a = extract_patch(anchor, grid, plan.patch, r0, c0);
    return network_forward_from(p, a, net, norms);
  });
}

double patch_lipschitz_factor(const PatchPlan& plan, Index height,
                              Index width) {
  const PatchGrid grid = plan_grid(plan, height, width);
  const Index P = plan.patch;
  Eigen::MatrixXd den = Eigen::MatrixXd::Zero(grid.padded_h, grid.padded_w);
  for (const Index r0 : grid.row_starts) {
    for (const Index c0 : grid.col_starts) {
      den.block(r0, c0, P, P) += plan.window;
    }
  }
  // kappa(j) = sum over patches p of m_p * (copies of pixel j inside p),
  // m_p = max normalized weight of p over pixels that survive the crop.
  Eigen::MatrixXd kappa = Eigen::MatrixXd::Zero(height, width);
  for (const Index r0 : grid.row_starts) {
    for (const Index c0 : grid.col_starts) {
      double m = 0.0;
      for (Index r = 0; r < P; ++r) {
        const Index pr = r0 + r;
        if (pr < grid.pad_top || pr >= grid.pad_top + height) continue;
        for (Index q = 0; q < P; ++q) {
          const Index pc = c0 + q;
          if (pc < grid.pad_left || pc >= grid.pad_left + width) continue;
          m = std::max(m, plan.window(r, q) / den(pr, pc));
        }
      }
      if (m == 0.0) continue;
      for (Index r = 0; r < P; ++r) {
        const Index sr = wrap(r0 + r - grid.pad_top, height);
        for (Index q = 0; q < P; ++q) {
          kappa(sr, wrap(c0 + q - grid.pad_left, width)) += m;
        }
      }
    }
  }
  return std::sqrt(std::max(1.0, kappa.maxCoeff()));
}

}  // namespace ctrx
