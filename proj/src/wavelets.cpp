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

#include "ctrx/wavelets.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

namespace ctrx {
namespace {

using Plane =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

WaveletFamily make_family(WaveletKind kind, std::string name,
                          std::vector<double> lowpass) {
  const std::size_t n = lowpass.size();
  std::vector<double> highpass(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    highpass[k] = sign * lowpass[n - 1 - k];
  }
  return WaveletFamily{kind, std::move(name), std::move(lowpass),
                       std::move(highpass)};
}

// Decomposition lowpass taps (8-tap Daubechies and least-asymmetric
// families, 4 vanishing moments), refined to 20 significant digits.
const std::array<WaveletFamily, 3>& families() {
  static const std::array<WaveletFamily, 3> table = {
      make_family(WaveletKind::kHaar, "haar",
                  {std::numbers::sqrt2 / 2.0, std::numbers::sqrt2 / 2.0}),
      make_family(WaveletKind::kDb4, "db4",
                  {-0.01059740178506903206, 0.03288301166688519959,
                   0.030841381835560763735, -0.18703481171909308394,
                   -0.02798376941685985443, 0.63088076792985890773,
                   0.71484657055291564722, 0.23037781330889650095}),
      make_family(WaveletKind::kSym4, "sym4",
                  {-0.075765714789503145472, -0.029635527646001834145,
                   0.49761866763277567405, 0.80373875180513184383,
                   0.29785779560530537062, -0.09921954357663354968,
                   -0.012603967262030927263, 0.032223100604051616862}),
  };
  return table;
}

// (2n + k) mod len for n < len/2, k < taps.
std::vector<Index> periodic_index(Index len, Index taps) {
  std::vector<Index> idx(static_cast<std::size_t>((len / 2) * taps));
  for (Index n = 0; n < len / 2; ++n) {
    for (Index k = 0; k < taps; ++k) {
      idx[static_cast<std::size_t>(n * taps + k)] = (2 * n + k) % len;
    }
  }
  return idx;
}

// Filters every row of x (rows x len) into lo and hi (rows x len/2).
void analyze_rows(const Plane& x, const WaveletFamily& f, Plane& lo,
                  Plane& hi) {
  const Index len = x.cols();
  const Index half = len / 2;
  const Index taps = static_cast<Index>(f.lowpass.size());
  const auto idx = periodic_index(len, taps);
  lo.resize(x.rows(), half);
  hi.resize(x.rows(), half);
  for (Index r = 0; r < x.rows(); ++r) {
    const double* in = x.data() + r * len;
    for (Index n = 0; n < half; ++n) {
      const Index* id = idx.data() + n * taps;
      double a = 0.0;
      double d = 0.0;
      for (Index k = 0; k < taps; ++k) {
        const double v = in[id[k]];
        a += f.lowpass[static_cast<std::size_t>(k)] * v;
        d += f.highpass[static_cast<std::size_t>(k)] * v;
      }
      lo(r, n) = a;
      hi(r, n) = d;
    }
  }
}

// Adjoint of analyze_rows.
void synthesize_rows(const Plane& lo, const Plane& hi, const WaveletFamily& f,
                     Plane& x) {
  const Index half = lo.cols();
  const Index len = 2 * half;
  const Index taps = static_cast<Index>(f.lowpass.size());
  const auto idx = periodic_index(len, taps);
  x.setZero(lo.rows(), len);
  for (Index r = 0; r < lo.rows(); ++r) {
    double* out = x.data() + r * len;
    for (Index n = 0; n < half; ++n) {
      const Index* id = idx.data() + n * taps;
      const double a = lo(r, n);
      const double d = hi(r, n);
      for (Index k = 0; k < taps; ++k) {
        out[id[k]] += f.lowpass[static_cast<std::size_t>(k)] * a +
                      f.highpass[static_cast<std::size_t>(k)] * d;
      }
    }
  }
}

void check_layout(const WaveletCoeffs& c, const ThresholdLayout& layout) {
  const ImageTensor& ref = c.ll;
  if (ref.channels() != layout.channels || ref.height() != layout.rows ||
      ref.width() != layout.cols) {
    throw DimensionError("threshold layout does not match subband shape " +
                         ref.shape_string());
  }
}

}  // namespace

const WaveletFamily& wavelet_family(WaveletKind kind) {
  return families()[static_cast<std::size_t>(kind)];
}

WaveletKind wavelet_kind_from_name(std::string_view name) {
  for (const auto& f : families()) {
    if (f.name == name) return f.kind;
  }
  throw ValidationError("unknown wavelet family '" + std::string(name) + "'");
}

std::string_view wavelet_name(WaveletKind kind) {
  return wavelet_family(kind).name;
}

ImageTensor& WaveletCoeffs::band(int b) {
  switch (b) {
    case 0:
      return lh;
    case 1:
      return hl;
    case 2:
      return hh;
    default:
      return ll;
  }
}

const ImageTensor& WaveletCoeffs::band(int b) const {
  return const_cast<WaveletCoeffs*>(this)->band(b);
}

double dot(const WaveletCoeffs& a, const WaveletCoeffs& b) {
  return dot(a.ll, b.ll) + dot(a.lh, b.lh) + dot(a.hl, b.hl) +
         dot(a.hh, b.hh);
}

WaveletCoeffs dwt2(const ImageTensor& x, const WaveletFamily& family) {
  if (x.height() % 2 != 0 || x.width() % 2 != 0) {
    throw DimensionError("dwt2 needs even height and width, got " +
                         x.shape_string());
  }
  const Index c = x.channels();
  const Index h2 = x.height() / 2;
  const Index w2 = x.width() / 2;
  WaveletCoeffs out{ImageTensor(c, h2, w2), ImageTensor(c, h2, w2),
                    ImageTensor(c, h2, w2), ImageTensor(c, h2, w2)};
  Plane lo, hi, lolo, lohi, hilo, hihi;
  for (Index ch = 0; ch < c; ++ch) {
    const Plane p = x.plane(ch);
    analyze_rows(p, family, lo, hi);
    analyze_rows(Plane(lo.transpose()), family, lolo, lohi);
    analyze_rows(Plane(hi.transpose()), family, hilo, hihi);
    out.ll.plane(ch) = lolo.transpose();
    out.lh.plane(ch) = lohi.transpose();
    out.hl.plane(ch) = hilo.transpose();
    out.hh.plane(ch) = hihi.transpose();
  }
  return out;
}

ImageTensor idwt2(const WaveletCoeffs& coeffs, const WaveletFamily& family) {
  const ImageTensor& ll = coeffs.ll;
  if (!ll.same_shape(coeffs.lh) || !ll.same_shape(coeffs.hl) ||
      !ll.same_shape(coeffs.hh)) {
    throw DimensionError("idwt2: subband shapes differ");
  }
  const Index c = ll.channels();
  ImageTensor out(c, 2 * ll.height(), 2 * ll.width());
  Plane lo_t, hi_t, x;
  for (Index ch = 0; ch < c; ++ch) {
    synthesize_rows(Plane(coeffs.ll.plane(ch).transpose()),
                    Plane(coeffs.lh.plane(ch).transpose()), family, lo_t);
    synthesize_rows(Plane(coeffs.hl.plane(ch).transpose()),
                    Plane(coeffs.hh.plane(ch).transpose()), family, hi_t);
    synthesize_rows(Plane(lo_t.transpose()), Plane(hi_t.transpose()), family,
                    x);
    out.plane(ch) = x;
  }
  return out;
}

WaveletCoeffs soft_threshold_hf(const WaveletCoeffs& c, const Thresholds& t) {
  check_layout(c, t.layout);
  if (t.values.size() != t.layout.count()) {
    throw DimensionError("threshold count " + std::to_string(t.values.size()) +
                         " does not match layout (" +
                         std::to_string(t.layout.count()) + ")");
  }
  if (!(t.values.array() > 0.0).all()) {
    throw ValidationError("thresholds must be strictly positive");
  }
  WaveletCoeffs out = c;
  const ThresholdLayout& L = t.layout;
  for (Index b = 0; b < L.bands(); ++b) {
    ImageTensor& band = out.band(static_cast<int>(b));
    for (Index ch = 0; ch < L.channels; ++ch) {
      for (Index r = 0; r < L.rows; ++r) {
        for (Index col = 0; col < L.cols; ++col) {
          double& z = band(ch, r, col);
          z = soft_threshold(z, t.values[L.offset(b, ch, r, col)]);
        }
      }
    }
  }
  return out;
}

}  // namespace ctrx
