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

#include "ctrx/metrics.hpp"

#include <cmath>
#include <limits>

namespace ctrx {
namespace {

using Plane =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

double psnr_from_mse(double mse, double peak) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

Eigen::VectorXd gaussian_taps() {
  Eigen::VectorXd g(kSsimWindow);
  const Index half = kSsimWindow / 2;
  for (Index i = 0; i < kSsimWindow; ++i) {
    const double d = static_cast<double>(i - half);
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
  }
  return g / g.sum();
}

// Separable 'valid' filtering with the SSIM window.
Plane filter_valid(const Plane& x, const Eigen::VectorXd& g) {
  const Index n = g.size();
  const Index oh = x.rows() - n + 1;
  const Index ow = x.cols() - n + 1;
  Plane tmp = Plane::Zero(x.rows(), ow);
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < ow; ++c) {
      tmp(r, c) = x.row(r).segment(c, n).dot(g.transpose());
    }
  }
  Plane out = Plane::Zero(oh, ow);
  for (Index r = 0; r < oh; ++r) {
    for (Index k = 0; k < n; ++k) out.row(r) += g[k] * tmp.row(r + k);
  }
  return out;
}

double ssim_plane(const Plane& a, const Plane& b) {
  const Eigen::VectorXd g = gaussian_taps();
  const double c1 = (kSsimK1 * 1.0) * (kSsimK1 * 1.0);
  const double c2 = (kSsimK2 * 1.0) * (kSsimK2 * 1.0);
  const Plane mu_a = filter_valid(a, g);
  const Plane mu_b = filter_valid(b, g);
  const Plane aa = filter_valid(a.cwiseProduct(a), g);
  const Plane bb = filter_valid(b.cwiseProduct(b), g);
  const Plane ab = filter_valid(a.cwiseProduct(b), g);
  double sum = 0.0;
  for (Index r = 0; r < mu_a.rows(); ++r) {
    for (Index c = 0; c < mu_a.cols(); ++c) {
      const double ma = mu_a(r, c);
      const double mb = mu_b(r, c);
      const double va = aa(r, c) - ma * ma;
      const double vb = bb(r, c) - mb * mb;
      const double cov = ab(r, c) - ma * mb;
      sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  }
  return sum / static_cast<double>(mu_a.size());
}

}  // namespace

double psnr(const ImageTensor& a, const ImageTensor& b, double peak,
            PsnrMode mode) {
  a.require_same_shape(b);
  if (!(peak > 0.0)) throw ValidationError("psnr peak must be positive");
  if (mode == PsnrMode::kJoint) {
    const double mse =
        (a.data() - b.data()).squaredNorm() / static_cast<double>(a.size());
    return psnr_from_mse(mse, peak);
  }
  double total = 0.0;
  for (Index c = 0; c < a.channels(); ++c) {
    const double mse = (a.plane(c) - b.plane(c)).squaredNorm() /
                       static_cast<double>(a.height() * a.width());
    total += psnr_from_mse(mse, peak);
  }
  return total / static_cast<double>(a.channels());
}

std::vector<double> ssim_per_channel(const ImageTensor& a,
                                     const ImageTensor& b) {
  a.require_same_shape(b);
  if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
    throw DimensionError("ssim needs images of at least 11x11, got " +
                         a.shape_string());
  }
  std::vector<double> out;
  for (Index c = 0; c < a.channels(); ++c) {
    out.push_back(ssim_plane(a.plane(c), b.plane(c)));
  }
  return out;
}

double ssim(const ImageTensor& a, const ImageTensor& b) {
  const auto per = ssim_per_channel(a, b);
  double s = 0.0;
  for (double v : per) s += v;
  return s / static_cast<double>(per.size());
}

MetricReport compare(const ImageTensor& a, const ImageTensor& b, double peak,
                     PsnrMode mode) {
  MetricReport r;
  r.psnr_db = psnr(a, b, peak, mode);
  r.channel_ssim = ssim_per_channel(a, b);
  double s = 0.0;
  for (double v : r.channel_ssim) s += v;
  r.ssim = s / static_cast<double>(r.channel_ssim.size());
  for (Index c = 0; c < a.channels(); ++c) {
    const double mse = (a.plane(c) - b.plane(c)).squaredNorm() /
                       static_cast<double>(a.height() * a.width());
    r.channel_psnr_db.push_back(psnr_from_mse(mse, peak));
  }
  return r;
}

}  // namespace ctrx
