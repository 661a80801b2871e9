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

#include "ctrx/tensorops.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace ctrx {
namespace {

using cd = std::complex<double>;
using RowMajorPlane =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Index wrap(Index i, Index n) {
  const Index m = i % n;
  return m < 0 ? m + n : m;
}

// dst(r, c) += w * src(r - dr, c - dc), indices mod the plane size.
template <typename Dst, typename Src>
void accumulate_shifted(Dst&& dst, const Src& src, double w, Index dr,
                        Index dc) {
  const Index h = src.rows();
  const Index width = src.cols();
  const Index shift = wrap(dc, width);
  const Index rest = width - shift;
  for (Index r = 0; r < h; ++r) {
    const Index sr = wrap(r - dr, h);
    dst.row(r).segment(shift, rest) += w * src.row(sr).segment(0, rest);
    if (shift > 0) {
      dst.row(r).segment(0, shift) += w * src.row(sr).segment(rest, shift);
    }
  }
}

// sum_{r,c} g(r, c) * x(r - dr, c - dc)
template <typename G, typename X>
double shifted_dot(const G& g, const X& x, Index dr, Index dc) {
  const Index h = x.rows();
  const Index width = x.cols();
  const Index shift = wrap(dc, width);
  const Index rest = width - shift;
  double acc = 0.0;
  for (Index r = 0; r < h; ++r) {
    const Index sr = wrap(r - dr, h);
    acc += g.row(r).segment(shift, rest).dot(x.row(sr).segment(0, rest));
    if (shift > 0) {
      acc += g.row(r).segment(0, shift).dot(x.row(sr).segment(rest, shift));
    }
  }
  return acc;
}

void check_grid(const ConvKernel& k, Index height, Index width) {
  if (height < k.k_h() || width < k.k_w()) {
    throw DimensionError("grid " + std::to_string(height) + "x" +
                         std::to_string(width) +
                         " is smaller than the kernel extent");
  }
}

// exp(-2 pi i m / n) for m = 0..n-1
std::vector<cd> twiddles(Index n) {
  std::vector<cd> t(static_cast<std::size_t>(n));
  for (Index m = 0; m < n; ++m) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(m) /
                         static_cast<double>(n);
    t[static_cast<std::size_t>(m)] = cd(std::cos(angle), std::sin(angle));
  }
  return t;
}

double max_singular_value(const Eigen::MatrixXcd& m) {
  if (m.size() == 1) return std::abs(m(0, 0));
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

void require_finite(const ImageTensor& x, const char* what) {
  if (!x.allFinite()) {
    throw ValidationError(std::string(what) + " contains non-finite values");
  }
}

void require_finite(const ConvKernel& k, const char* what) {
  if (!k.weights().allFinite()) {
    throw ValidationError(std::string(what) + " contains non-finite values");
  }
}

ImageTensor conv2d_circular(const ImageTensor& x, const ConvKernel& k) {
  if (x.channels() != k.c_in()) {
    throw DimensionError("conv2d: input has " + std::to_string(x.channels()) +
                         " channels, kernel expects " +
                         std::to_string(k.c_in()));
  }
  check_grid(k, x.height(), x.width());
  require_finite(x, "conv2d input");
  ImageTensor out(k.c_out(), x.height(), x.width());
  for (Index o = 0; o < k.c_out(); ++o) {
    auto dst = out.plane(o);
    for (Index i = 0; i < k.c_in(); ++i) {
      const auto src = x.plane(i);
      for (Index a = 0; a < k.k_h(); ++a) {
        for (Index b = 0; b < k.k_w(); ++b) {
          const double w = k(o, i, a, b);
          if (w == 0.0) continue;
          accumulate_shifted(dst, src, w, a - k.center_h(), b - k.center_w());
        }
      }
    }
  }
  return out;
}

ImageTensor conv2d_circular_adjoint(const ImageTensor& y, const ConvKernel& k) {
  if (y.channels() != k.c_out()) {
    throw DimensionError("conv2d adjoint: channel mismatch");
  }
  check_grid(k, y.height(), y.width());
  ImageTensor out(k.c_in(), y.height(), y.width());
  for (Index i = 0; i < k.c_in(); ++i) {
    auto dst = out.plane(i);
    for (Index o = 0; o < k.c_out(); ++o) {
      const auto src = y.plane(o);
      for (Index a = 0; a < k.k_h(); ++a) {
        for (Index b = 0; b < k.k_w(); ++b) {
          const double w = k(o, i, a, b);
          if (w == 0.0) continue;
          accumulate_shifted(dst, src, w, k.center_h() - a, k.center_w() - b);
        }
      }
    }
  }
  return out;
}

ConvKernel conv2d_kernel_gradient(const ImageTensor& input,
                                  const ImageTensor& grad_out, Index k_h,
                                  Index k_w) {
  if (input.height() != grad_out.height() ||
      input.width() != grad_out.width()) {
    throw DimensionError("kernel gradient: spatial shape mismatch");
  }
  ConvKernel g(grad_out.channels(), input.channels(), k_h, k_w);
  check_grid(g, input.height(), input.width());
  for (Index o = 0; o < g.c_out(); ++o) {
    const auto go = grad_out.plane(o);
    for (Index i = 0; i < g.c_in(); ++i) {
      const auto xi = input.plane(i);
      for (Index a = 0; a < k_h; ++a) {
        for (Index b = 0; b < k_w; ++b) {
          g(o, i, a, b) =
              shifted_dot(go, xi, a - g.center_h(), b - g.center_w());
        }
      }
    }
  }
  return g;
}

FreqResponse freq_response(const ConvKernel& k, Index height, Index width) {
  check_grid(k, height, width);
  const auto tw_h = twiddles(height);
  const auto tw_w = twiddles(width);
  FreqResponse fr;
  fr.height = height;
  fr.width = width;
  fr.grid.assign(static_cast<std::size_t>(height * width),
                 Eigen::MatrixXcd::Zero(k.c_out(), k.c_in()));

  // Separable evaluation: first along the kernel columns, then its rows.
  Eigen::MatrixXcd rows(k.k_h(), width);
  for (Index o = 0; o < k.c_out(); ++o) {
    for (Index i = 0; i < k.c_in(); ++i) {
      for (Index a = 0; a < k.k_h(); ++a) {
        for (Index v = 0; v < width; ++v) {
          cd acc = 0.0;
          for (Index b = 0; b < k.k_w(); ++b) {
            const Index m = wrap(v * (b - k.center_w()), width);
            acc += k(o, i, a, b) * tw_w[static_cast<std::size_t>(m)];
          }
          rows(a, v) = acc;
        }
      }
      for (Index u = 0; u < height; ++u) {
        for (Index v = 0; v < width; ++v) {
          cd acc = 0.0;
          for (Index a = 0; a < k.k_h(); ++a) {
            const Index m = wrap(u * (a - k.center_h()), height);
            acc += rows(a, v) * tw_h[static_cast<std::size_t>(m)];
          }
          fr.grid[static_cast<std::size_t>(u * width + v)](o, i) = acc;
        }
      }
    }
  }
  return fr;
}

double conv_operator_norm(const ConvKernel& k, Index height, Index width) {
  require_finite(k, "kernel");
  const FreqResponse fr = freq_response(k, height, width);
  double s = 0.0;
  for (const auto& m : fr.grid) s = std::max(s, max_singular_value(m));
  return s;
}

Eigen::MatrixXd dense_conv_matrix(const ConvKernel& k, Index height,
                                  Index width) {
  check_grid(k, height, width);
  const Index hw = height * width;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(k.c_out() * hw, k.c_in() * hw);
  for (Index o = 0; o < k.c_out(); ++o) {
    for (Index i = 0; i < k.c_in(); ++i) {
      for (Index r = 0; r < height; ++r) {
        for (Index c = 0; c < width; ++c) {
          for (Index a = 0; a < k.k_h(); ++a) {
            for (Index b = 0; b < k.k_w(); ++b) {
              const Index sr = wrap(r - (a - k.center_h()), height);
              const Index sc = wrap(c - (b - k.center_w()), width);
              m(o * hw + r * width + c, i * hw + sr * width + sc) +=
                  k(o, i, a, b);
            }
          }
        }
      }
    }
  }
  return m;
}

DenseNorm dense_norm_oracle_full(const ConvKernel& k, Index height,
                                 Index width) {
  const Index rows = height * width * std::max(k.c_in(), k.c_out());
  if (rows > kDenseOracleMaxRows) {
    throw SizeError("dense oracle would need " + std::to_string(rows) +
                    " rows (limit " + std::to_string(kDenseOracleMaxRows) +
                    ")");
  }
  const Eigen::MatrixXd v = dense_conv_matrix(k, height, width);
  const Eigen::MatrixXd gram = v.transpose() * v;
  const Index n = gram.rows();

  DenseNorm out;
  out.top_right_vector = Eigen::VectorXd::Zero(n);
  const double trace = gram.trace();
  if (trace == 0.0) {
    out.top_right_vector(0) = 1.0;
    return out;
  }

  // Power iteration on (V^T V)^(2^p): same fixed points, gap ratio raised to
  // the 2^p-th power. Rescaling by the trace keeps entries bounded.
  Eigen::MatrixXd op = gram / trace;
  const int squarings = n <= 1024 ? 6 : 0;
  for (int j = 0; j < squarings; ++j) {
    op = op * op;
    op /= op.trace();
  }

  std::mt19937_64 gen(0x5eed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd x(n);
  for (Index i = 0; i < n; ++i) x(i) = normal(gen);
  x.normalize();

  constexpr double kTol = 1e-10;
  constexpr int kMaxIters = 200000;
  double lambda = 0.0;
  for (int it = 1; it <= kMaxIters; ++it) {
    x = op * x;
    const double nx = x.norm();
    if (nx == 0.0) break;
    x /= nx;
    const Eigen::VectorXd gx = gram * x;
    lambda = x.dot(gx);
    out.iterations = it;
    if ((gx - lambda * x).norm() <= kTol * lambda) break;
  }
  out.norm = std::sqrt(std::max(lambda, 0.0));
  out.top_right_vector = x;
  return out;
}

double dense_norm_oracle(const ConvKernel& k, Index height, Index width) {
  return dense_norm_oracle_full(k, height, width).norm;
}

ConvKernel clip_norm(const ConvKernel& k, Index height, Index width,
                     double budget) {
  if (!(budget > 0.0) || !std::isfinite(budget)) {
    throw ValidationError("clip_norm: budget must be positive and finite");
  }
  const double s = conv_operator_norm(k, height, width);
  if (s <= budget) return k;
  ConvKernel out = k;
  out.weights() *= budget / (s + kNormGuard);
  return out;
}

ImageTensor scaled_conv(const ImageTensor& x, const ConvKernel& k, double eps,
                        double norm) {
  if (!(eps > 0.0)) {
    throw ValidationError("scaled_conv: eps must be positive");
  }
  ImageTensor out = conv2d_circular(x, k);
  out.data() /= norm + eps;
  return out;
}

ImageTensor scaled_conv(const ImageTensor& x, const ConvKernel& k,
                        double eps) {
  if (!(eps > 0.0)) {
    throw ValidationError("scaled_conv: eps must be positive");
  }
  return scaled_conv(x, k, eps, conv_operator_norm(k, x.height(), x.width()));
}

}  // namespace ctrx
