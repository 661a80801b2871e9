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

#include <doctest.h>

#include <cmath>

#include "ctrx/wavelets.hpp"
#include "test_support.hpp"

using namespace ctrx;
using ctrx::testing::random_tensor;

namespace {

const WaveletKind kAll[] = {WaveletKind::kHaar, WaveletKind::kDb4, WaveletKind::kSym4};

WaveletCoeffs random_coeffs(Rng& rng, Index c, Index h, Index w) {
  return WaveletCoeffs{random_tensor(rng, c, h, w), random_tensor(rng, c, h, w),
                       random_tensor(rng, c, h, w), random_tensor(rng, c, h, w)};
}

Thresholds constant_thresholds(Index c, Index h, Index w, double v) {
  ThresholdLayout l{c, h, w, false, false};
  return Thresholds{l, Eigen::VectorXd::Constant(l.count(), v)};
}

}  // namespace

TEST_CASE("filter banks are orthonormal") {
  for (WaveletKind kind : kAll) {
    const WaveletFamily& f = wavelet_family(kind);
    const auto& h = f.lowpass;
    const auto& g = f.highpass;
    const int L = static_cast<int>(h.size());
    double sum = 0.0;
    for (double v : h) sum += v;
    CHECK(std::abs(sum - std::sqrt(2.0)) < 1e-12);
    for (int shift = 0; shift < L; shift += 2) {
      double hh = 0.0, gg = 0.0, hg = 0.0;
      for (int k = 0; k + shift < L; ++k) {
        hh += h[k] * h[k + shift];
        gg += g[k] * g[k + shift];
        hg += h[k] * g[k + shift];
      }
      CHECK(std::abs(hh - (shift == 0 ? 1.0 : 0.0)) < 1e-12);
      CHECK(std::abs(gg - (shift == 0 ? 1.0 : 0.0)) < 1e-12);
      CHECK(std::abs(hg) < 1e-12);
    }
    for (int k = 0; k < L; ++k) {
      CHECK(g[k] == (k % 2 == 0 ? 1.0 : -1.0) * h[L - 1 - k]);
    }
  }
  CHECK(std::abs(wavelet_family(WaveletKind::kHaar).lowpass[0] - 1.0 / std::sqrt(2.0)) <= 1.2e-16);
}

TEST_CASE("family names and the layer cycle") {
  CHECK(wavelet_kind_from_name("db4") == WaveletKind::kDb4);
  CHECK(wavelet_name(WaveletKind::kSym4) == "sym4");
  CHECK_THROWS_AS(wavelet_kind_from_name("coif2"), ValidationError);
  CHECK(cycled_wavelet(0) == WaveletKind::kHaar);
  CHECK(cycled_wavelet(4) == WaveletKind::kDb4);
  CHECK(cycled_wavelet(8) == WaveletKind::kSym4);
}

TEST_CASE("Haar on a constant image") {
  const ImageTensor x = ImageTensor::Constant(2, 6, 8, 0.3);
  const WaveletCoeffs c = dwt2(x, wavelet_family(WaveletKind::kHaar));
  CHECK((c.ll.data().array() - 0.6).abs().maxCoeff() < 1e-15);
  CHECK(c.lh.norm() < 1e-15);
  CHECK(c.hl.norm() < 1e-15);
  CHECK(c.hh.norm() < 1e-15);
  CHECK(distance(idwt2(c, wavelet_family(WaveletKind::kHaar)), x) < 1e-14);
}

TEST_CASE("zeros map to zeros") {
  for (WaveletKind kind : kAll) {
    const WaveletFamily& f = wavelet_family(kind);
    CHECK(dwt2(ImageTensor(1, 8, 8), f).squaredNorm() == 0.0);
    const ImageTensor z(1, 4, 4);
    CHECK(idwt2(WaveletCoeffs{z, z, z, z}, f).norm() == 0.0);
  }
}

TEST_CASE("perfect reconstruction, Parseval and adjointness") {
  Rng rng(20);
  for (WaveletKind kind : kAll) {
    const WaveletFamily& f = wavelet_family(kind);
    for (Index n : {4, 8, 16, 64}) {
      const ImageTensor x = random_tensor(rng, 2, n, n);
      const WaveletCoeffs c = dwt2(x, f);
      CHECK((idwt2(c, f).data() - x.data()).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(std::abs(std::sqrt(c.squaredNorm()) - x.norm()) <= 1e-10);
      const WaveletCoeffs d = random_coeffs(rng, 2, n / 2, n / 2);
      CHECK(std::abs(dot(c, d) - dot(x, idwt2(d, f))) <= 1e-10);
    }
    // Non-square grids too.
    const ImageTensor x = random_tensor(rng, 1, 10, 6);
    CHECK(distance(idwt2(dwt2(x, f), f), x) <= 1e-10);
  }
}

TEST_CASE("shape errors") {
  const WaveletFamily& f = wavelet_family(WaveletKind::kDb4);
  CHECK_THROWS_AS(dwt2(ImageTensor(1, 7, 8), f), DimensionError);
  const ImageTensor a(1, 4, 4);
  const ImageTensor b(1, 4, 2);
  CHECK_THROWS_AS(idwt2(WaveletCoeffs{a, a, b, a}, f), DimensionError);
}

TEST_CASE("soft threshold values") {
  CHECK(soft_threshold(2.0, 1.0) == 1.0);
  CHECK(soft_threshold(-0.5, 1.0) == 0.0);
  CHECK(soft_threshold(0.0, 0.3) == 0.0);
  CHECK(soft_threshold(-3.0, 1.0) == -2.0);
}

TEST_CASE("soft_threshold_hf keeps ll and shrinks details") {
  Rng rng(21);
  WaveletCoeffs c = random_coeffs(rng, 2, 3, 3);
  c.lh(0, 0, 0) = 2.0;
  c.hl(1, 2, 1) = -0.5;
  const WaveletCoeffs s = soft_threshold_hf(c, constant_thresholds(2, 3, 3, 1.0));
  CHECK(s.ll.data() == c.ll.data());
  CHECK(s.lh(0, 0, 0) == 1.0);
  CHECK(s.hl(1, 2, 1) == 0.0);
  for (Index i = 0; i < c.hh.size(); ++i) {
    CHECK(s.hh.data()[i] == soft_threshold(c.hh.data()[i], 1.0));
  }
  Thresholds bad = constant_thresholds(2, 3, 3, 1.0);
  bad.values[5] = 0.0;
  CHECK_THROWS_AS(soft_threshold_hf(c, bad), ValidationError);
}

TEST_CASE("per-coefficient layout, shared channels and the lowpass option") {
  Rng rng(22);
  WaveletCoeffs c = random_coeffs(rng, 2, 2, 2);
  ThresholdLayout shared{2, 2, 2, true, false};
  CHECK(shared.count() == 3 * 4);
  Thresholds t{shared, Eigen::VectorXd::Constant(shared.count(), 0.1)};
  t.values[shared.offset(2, 0, 1, 0)] = 5.0;
  const WaveletCoeffs s = soft_threshold_hf(c, t);
  CHECK(s.hh(0, 1, 0) == 0.0);
  CHECK(s.hh(1, 1, 0) == 0.0);

  ThresholdLayout low{2, 2, 2, false, true};
  CHECK(low.count() == 4 * 2 * 4);
  const Thresholds tl{low, Eigen::VectorXd::Constant(low.count(), 0.2)};
  const WaveletCoeffs sl = soft_threshold_hf(c, tl);
  CHECK(sl.ll(1, 0, 1) == soft_threshold(c.ll(1, 0, 1), 0.2));

  CHECK_THROWS_AS(soft_threshold_hf(c, constant_thresholds(2, 3, 3, 1.0)), DimensionError);
}

TEST_CASE("soft thresholding is nonexpansive") {
  Rng rng(23);
  for (int t = 0; t < 200; ++t) {
    const double a = rng.uniform(-3, 3);
    const double b = rng.uniform(-3, 3);
    const double l = rng.uniform(0.01, 2);
    CHECK(std::abs(soft_threshold(a, l) - soft_threshold(b, l)) <= std::abs(a - b));
  }
  const Thresholds th = constant_thresholds(1, 4, 4, 0.4);
  for (int t = 0; t < 50; ++t) {
    const WaveletCoeffs a = random_coeffs(rng, 1, 4, 4);
    const WaveletCoeffs b = random_coeffs(rng, 1, 4, 4);
    WaveletCoeffs da = soft_threshold_hf(a, th);
    const WaveletCoeffs db = soft_threshold_hf(b, th);
    double out2 = 0.0, in2 = 0.0;
    for (int k = 0; k < 4; ++k) {
      out2 += (da.band(k).data() - db.band(k).data()).squaredNorm();
      in2 += (a.band(k).data() - b.band(k).data()).squaredNorm();
    }
    CHECK(out2 <= in2 + 1e-15);
  }
}
