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

#include "ctrx/inference.hpp"
#include "ctrx/layers.hpp"
#include "test_support.hpp"

using namespace ctrx;
using ctrx::testing::random_tensor;
using ctrx::testing::slow_overlap_add;

namespace {

ImageTensor identity_patch(const ImageTensor& p, Index, Index) { return p; }

NetworkParams small_net(Index P, std::uint64_t seed) {
  Rng rng(seed);
  InitOptions o;
  o.depth = 3;
  o.patch = P;
  o.random_alpha = true;
  o.kernel_noise = 0.05;
  o.threshold = 0.05;
  return init_network(o, rng);
}

}  // namespace

TEST_CASE("tukey window against scipy's periodic tukey") {
  // scipy.signal.windows.tukey(n, a, sym=False)
  const double t8_half[] = {0.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5};
  const double t8_hann[] = {0.0, 0.14644660940672627, 0.5, 0.8535533905932737,
                            1.0, 0.8535533905932737, 0.5, 0.14644660940672627};
  const double t7_half[] = {0.0, 0.6112604669781572, 1.0, 1.0, 1.0, 1.0,
                            0.6112604669781576};
  const Eigen::VectorXd a = tukey_window_1d(8, 0.5);
  const Eigen::VectorXd b = tukey_window_1d(8, 1.0);
  const Eigen::VectorXd c = tukey_window_1d(7, 0.5);
  for (int i = 0; i < 8; ++i) {
    CHECK(std::abs(a[i] - t8_half[i]) < 1e-15);
    CHECK(std::abs(b[i] - t8_hann[i]) < 1e-15);
  }
  for (int i = 0; i < 7; ++i) CHECK(std::abs(c[i] - t7_half[i]) < 1e-15);
}

TEST_CASE("tukey limits and errors") {
  CHECK((tukey_window(6, 0.0).array() == 1.0).all());
  const Eigen::MatrixXd h = tukey_window(16, 1.0);
  CHECK(h(0, 0) == 0.0);
  CHECK(h(8, 8) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(tukey_window(8, 1.5), ConfigError);
  CHECK_THROWS_AS(tukey_window(8, -0.1), ConfigError);
}

TEST_CASE("patch plans") {
  CHECK_THROWS_AS(make_patch_plan(64, 24), ConfigError);
  const PatchPlan p = make_patch_plan(64, 16, 1.0);
  CHECK((p.window.array() > 0.0).all());
  const PatchGrid g = plan_grid(p, 100, 65);
  CHECK(g.padded_h >= 100);
  CHECK(g.padded_w >= 65);
  CHECK((g.padded_h - 64) % 16 == 0);
  CHECK(g.row_starts.back() + 64 == g.padded_h);
}

TEST_CASE("identity patch function reproduces the input") {
  Rng rng(40);
  for (auto [h, w] : {std::pair<Index, Index>{65, 63}, {100, 100}, {20, 9}}) {
    const ImageTensor x = random_tensor(rng, 2, h, w);
    for (Index s : {32, 16, 8, 4}) {
      const PatchPlan plan = make_patch_plan(32, s);
      CHECK(distance(overlap_add(x, plan, identity_patch), x) <= 1e-12 * x.norm());
    }
  }
}

TEST_CASE("single P x P patch with stride P is the network itself") {
  Rng rng(41);
  const NetworkParams net = small_net(16, 3);
  const ImageTensor x = random_tensor(rng, 1, 16, 16, 0, 1);
  const ImageTensor direct = network_forward(x, net);
  CHECK(distance(patch_denoise(x, net, make_patch_plan(16, 16)), direct) < 1e-12);
  CHECK_THROWS_AS(patch_denoise(x, net, make_patch_plan(32, 16)), ConfigError);
}

TEST_CASE("linear patch maps stay linear; blending matches a slow reference") {
  Rng rng(42);
  const ImageTensor x = random_tensor(rng, 1, 48, 40);
  auto lin = [](const ImageTensor& p, Index, Index) {
    ImageTensor o = p;
    o.plane(0) = 0.7 * p.plane(0).transpose();
    return o;
  };
  const PatchPlan plan = make_patch_plan(16, 8);
  CHECK(distance(overlap_add(3.0 * x, plan, lin), 3.0 * overlap_add(x, plan, lin)) < 1e-12);

  const NetworkParams net = small_net(32, 4);
  const auto norms = conv_norms(net);
  const ImageTensor img = random_tensor(rng, 1, 96, 96, 0, 1);
  for (Index s : {32, 16}) {
    const PatchPlan pl = make_patch_plan(32, s);
    auto f = [&](const ImageTensor& p, Index, Index) { return network_forward(p, net, norms); };
    const ImageTensor fast = patch_denoise(img, net, pl);
    CHECK(distance(fast, slow_overlap_add(img, pl, f)) < 1e-12);
    CHECK(fast.allFinite());
  }
}

TEST_CASE("anchored inference inherits the certificate") {
  Rng rng(43);
  const NetworkParams net = small_net(16, 5);
  const double L = contraction_certificate(net, 16, 16).total_bound;
  const ImageTensor anchor = random_tensor(rng, 1, 32, 48, 0, 1);
  const PatchPlan plan = make_patch_plan(16, 16);
  CHECK(patch_lipschitz_factor(plan, 32, 48) == doctest::Approx(1.0));
  for (int t = 0; t < 20; ++t) {
    const ImageTensor a = random_tensor(rng, 1, 32, 48, 0, 1);
    const ImageTensor b = random_tensor(rng, 1, 32, 48, 0, 1);
    const double r = distance(patch_denoise_anchored(a, anchor, net, plan),
                              patch_denoise_anchored(b, anchor, net, plan)) / distance(a, b);
    CHECK(r <= L);
  }
  const PatchPlan half = make_patch_plan(16, 8);
  const double f = patch_lipschitz_factor(half, 32, 48);
  CHECK(f >= 1.0);
  for (int t = 0; t < 20; ++t) {
    const ImageTensor a = random_tensor(rng, 1, 32, 48, 0, 1);
    const ImageTensor b = random_tensor(rng, 1, 32, 48, 0, 1);
    const double r = distance(patch_denoise_anchored(a, anchor, net, half),
                              patch_denoise_anchored(b, anchor, net, half)) / distance(a, b);
    CHECK(r <= f * L);
  }
}
