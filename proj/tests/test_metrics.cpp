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

#include "ctrx/metrics.hpp"
#include "test_support.hpp"

using namespace ctrx;
using ctrx::testing::naive_ssim;
using ctrx::testing::psnr_extended;
using ctrx::testing::random_tensor;

TEST_CASE("psnr values") {
  Rng rng(50);
  const ImageTensor a = random_tensor(rng, 3, 16, 16, 0, 1);
  CHECK(std::isinf(psnr(a, a)));
  ImageTensor b = a;
  b.data().array() += 0.1;
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
  const ImageTensor c = random_tensor(rng, 3, 16, 16, 0, 1);
  CHECK(std::abs(psnr(a, c) - psnr_extended(a, c)) < 1e-10);
  CHECK(psnr(a, c) == psnr(c, a));
  ImageTensor a2 = a, c2 = c;
  a2.data().array() += 0.37;
  c2.data().array() += 0.37;
  CHECK(std::abs(psnr(a2, c2) - psnr(a, c)) < 1e-9);
  CHECK(psnr(a, c) >= 0.0);
  CHECK_THROWS_AS(psnr(a, random_tensor(rng, 1, 16, 16)), DimensionError);
  CHECK(psnr(a, b, 1.0, PsnrMode::kChannelMean) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("ssim values") {
  Rng rng(51);
  const ImageTensor a = random_tensor(rng, 2, 24, 20, 0, 1);
  CHECK(std::abs(ssim(a, a) - 1.0) < 1e-12);
  ImageTensor inv = a;
  inv.data() = 1.0 - a.data().array();
  CHECK(ssim(a, inv) < 1.0);
  const ImageTensor b = random_tensor(rng, 2, 24, 20, 0, 1);
  CHECK(std::abs(ssim(a, b) - naive_ssim(a, b)) < 1e-10);
  CHECK(std::abs(ssim(a, b) - ssim(b, a)) < 1e-14);
  CHECK(ssim(a, inv) >= -1.0);
  CHECK_THROWS_AS(ssim(ImageTensor(1, 10, 20), ImageTensor(1, 10, 20)), DimensionError);
}

TEST_CASE("metric report") {
  Rng rng(52);
  const ImageTensor a = random_tensor(rng, 3, 16, 16, 0, 1);
  const ImageTensor b = random_tensor(rng, 3, 16, 16, 0, 1);
  const MetricReport r = compare(a, b);
  CHECK(r.channel_psnr_db.size() == 3);
  CHECK(r.channel_ssim.size() == 3);
  CHECK(r.psnr_db == psnr(a, b));
  CHECK(r.ssim == doctest::Approx(ssim(a, b)));
}
