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

#include "ctrx/trainer.hpp"
#include "test_support.hpp"

using namespace ctrx;
using ctrx::testing::random_tensor;

namespace {

NetworkParams toy_net(Index M, Index P, std::uint64_t seed, double threshold = 0.05) {
  Rng rng(seed);
  InitOptions o;
  o.depth = M;
  o.patch = P;
  o.random_alpha = true;
  o.threshold = threshold;
  o.threshold_jitter = 0.02;
  o.kernel_noise = 0.05;
  return init_network(o, rng);
}

}  // namespace

TEST_CASE("mse loss") {
  ImageTensor a(1, 2, 2);
  ImageTensor b(1, 2, 2);
  b(0, 0, 0) = 2.0;
  CHECK(loss_mse(a, b) == 1.0);
  CHECK(loss_mse(a, a) == 0.0);
  CHECK_THROWS_AS(loss_mse(a, ImageTensor(1, 2, 3)), DimensionError);
}

TEST_CASE("zero residual gives zero gradient") {
  Rng rng(80);
  const NetworkParams net = toy_net(3, 8, 1);
  const ImageTensor y = random_tensor(rng, 1, 8, 8, 0, 1);
  const ImageTensor target = network_forward(y, net);
  const BackwardResult r = backward(net, y, target);
  CHECK(r.loss == 0.0);
  CHECK(r.grads.squaredNorm() == 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(81);
  const NetworkParams net = toy_net(3, 8, 2);
  const ImageTensor y = random_tensor(rng, 1, 8, 8, 0, 1);
  const ImageTensor target = random_tensor(rng, 1, 8, 8, 0, 1);
  const GradCheckReport rep = grad_check(net, y, target, 1e-6, 1e-4, 500, 3);
  CHECK(rep.passed);
  CHECK(rep.checked > 100);
  CHECK(rep.max_rel_error <= 1e-4);
  INFO("worst index " << rep.worst_index);

  // The flat view covers every parameter once.
  NetworkParams copy = net;
  const GradientSet g = backward(net, y, target).grads;
  double s = 0.0;
  for (Index i = 0; i < net.parameter_count(); ++i) {
    s += gradient_at(g, i) * gradient_at(g, i);
    CHECK(&parameter_at(copy, i) != nullptr);
  }
  CHECK(s == doctest::Approx(g.squaredNorm()).epsilon(1e-12));
  CHECK_THROWS(parameter_at(copy, net.parameter_count()));
}

TEST_CASE("huge thresholds kill threshold gradients") {
  Rng rng(82);
  NetworkParams net = toy_net(1, 8, 4, 1e4);
  const ImageTensor y = random_tensor(rng, 1, 8, 8, 0, 1);
  const ImageTensor target = random_tensor(rng, 1, 8, 8, 0, 1);
  const BackwardResult r = backward(net, y, target);
  CHECK(r.grads.layers[0].raw_thresholds.cwiseAbs().maxCoeff() == 0.0);
  CHECK(r.grads.allFinite());
  CHECK(r.grads.layers[0].kernel.weights().norm() > 0.0);
  CHECK(grad_check(net, y, target).passed);

  // Zero input and zero target: every gradient and difference is exactly 0.
  const ImageTensor z(1, 8, 8);
  const GradCheckReport zr = grad_check(net, z, z);
  CHECK(zr.max_rel_error == 0.0);
}

TEST_CASE("frozen alpha has zero gradient") {
  Rng rng(83);
  NetworkParams net = toy_net(2, 8, 5);
  net.ablation.learn_alpha = false;
  const BackwardResult r = backward(net, random_tensor(rng, 1, 8, 8, 0, 1),
                                    random_tensor(rng, 1, 8, 8, 0, 1));
  for (const auto& l : r.grads.layers) CHECK(l.alpha == 0.0);
}

TEST_CASE("training: zero epochs, determinism, constraints, curve") {
  Rng rng(84);
  const NetworkParams init = toy_net(2, 16, 6);
  const std::vector<ImageTensor> clean = synthetic_patches(16, 16, 1, rng);
  TrainConfig cfg;
  cfg.epochs = 0;
  const TrainResult none = train(init, clean, cfg);
  CHECK(none.curve.empty());
  for (Index i = 0; i < init.parameter_count(); ++i) {
    NetworkParams a = init;
    NetworkParams b = none.net;
    CHECK(parameter_at(a, i) == parameter_at(b, i));
  }

  cfg.epochs = 3;
  cfg.lr = 1e-3;
  cfg.batch_size = 4;
  cfg.decay_epochs = {2};
  const std::vector<ImageTensor> val = synthetic_patches(4, 16, 1, rng);
  int calls = 0;
  const TrainResult r1 = train(init, clean, cfg, val,
                               [&](const EpochStats& s, const NetworkParams&) {
                                 ++calls;
                                 CHECK(s.epoch == calls);
                               });
  const TrainResult r2 = train(init, clean, cfg, val);
  CHECK(calls == 3);
  REQUIRE(r1.curve.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(r1.curve[e].train_loss == r2.curve[e].train_loss);
    CHECK(std::isfinite(r1.curve[e].val_psnr));
    CHECK(r1.curve[e].certificate_bound < 1.0);
  }
  for (std::size_t l = 0; l < r1.net.layers.size(); ++l) {
    const LayerParams& p = r1.net.layers[l];
    CHECK(p.alpha >= kAlphaMin);
    CHECK(p.alpha <= 1.0 - kAlphaMin);
    CHECK(p.kernel.weights() == r2.net.layers[l].kernel.weights());
  }
  const std::string csv = loss_curve_csv(r1.curve);
  CHECK(csv.rfind("epoch,train_loss,val_psnr,certificate_bound\n1,", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);

  cfg.seed = 99;
  const TrainResult r3 = train(init, clean, cfg);
  CHECK(r3.curve[0].train_loss != r1.curve[0].train_loss);
  CHECK(std::isnan(r3.curve[0].val_psnr));
}

TEST_CASE("training rejects bad input") {
  Rng rng(85);
  const NetworkParams init = toy_net(1, 16, 7);
  TrainConfig cfg;
  CHECK_THROWS(train(init, {}, cfg));
  CHECK_THROWS(train(init, synthetic_patches(2, 8, 1, rng), cfg));
  cfg.lr = -1.0;
  CHECK_THROWS(train(init, synthetic_patches(2, 16, 1, rng), cfg));
}

TEST_CASE("patches and augmentation") {
  Rng rng(86);
  const auto syn = synthetic_patches(5, 16, 3, rng);
  REQUIRE(syn.size() == 5);
  for (const auto& p : syn) {
    CHECK(p.channels() == 3);
    CHECK(p.data().minCoeff() >= 0.0);
    CHECK(p.data().maxCoeff() <= 1.0);
  }
  const ImageTensor img = random_tensor(rng, 1, 40, 24, 0, 1);
  const auto crops = extract_patches({img}, 16, 8, 1000, rng);
  CHECK(crops.size() == 4 * 2);
  CHECK(crops[0](0, 3, 5) == img(0, 3, 5));
  CHECK(extract_patches({img}, 16, 8, 3, rng).size() == 3);

  const ImageTensor x = random_tensor(rng, 2, 8, 8);
  for (int t = 0; t < 20; ++t) {
    const ImageTensor a = augment(x, true, true, rng);
    CHECK(a.norm() == doctest::Approx(x.norm()).epsilon(1e-14));
    std::vector<double> u(x.data().begin(), x.data().end());
    std::vector<double> v(a.data().begin(), a.data().end());
    std::sort(u.begin(), u.end());
    std::sort(v.begin(), v.end());
    CHECK(u == v);
  }
  CHECK(augment(x, false, false, rng).data() == x.data());
}
