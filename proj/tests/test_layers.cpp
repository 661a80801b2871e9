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

#include "ctrx/layers.hpp"
#include "test_support.hpp"

using namespace ctrx;
using ctrx::testing::random_kernel;
using ctrx::testing::random_tensor;

namespace {

LayerParams random_layer(Rng& rng, Index C, Index P, Index l, double alpha) {
  LayerParams p;
  p.family = cycled_wavelet(l);
  p.alpha = alpha;
  p.layout = ThresholdLayout::ForPatch(C, P);
  p.raw_thresholds.resize(p.layout.count());
  for (Index i = 0; i < p.raw_thresholds.size(); ++i) {
    p.raw_thresholds[i] = softplus_inverse(rng.uniform(0.01, 0.3));
  }
  p.kernel = random_kernel(rng, C, C, 3, 3);
  return p;
}

NetworkParams random_net(Rng& rng, Index M, Index C, Index P) {
  NetworkParams net;
  net.patch = P;
  net.channels = C;
  for (Index l = 0; l < M; ++l) {
    net.layers.push_back(random_layer(rng, C, P, l, rng.uniform(0.1, 0.9)));
  }
  return constrain_params(net);
}

}  // namespace

TEST_CASE("softplus helpers") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus(-1000.0) > 0.0);
  CHECK(softplus(800.0) == 800.0);
  for (double y : {1e-6, 0.02, 1.0, 30.0}) {
    CHECK(softplus(softplus_inverse(y)) == doctest::Approx(y).epsilon(1e-12));
  }
  CHECK(sigmoid(0.0) == 0.5);
  CHECK_THROWS_AS(softplus_inverse(0.0), ValidationError);
}

TEST_CASE("prox layer limits") {
  Rng rng(30);
  const Index P = 8;
  LayerParams p = random_layer(rng, 1, P, 0, 1.0 - kAlphaMin);
  const ImageTensor y = random_tensor(rng, 1, P, P);
  const ImageTensor x1 = random_tensor(rng, 1, P, P);
  const ImageTensor x2 = random_tensor(rng, 1, P, P);
  // alpha near one: x only enters through alpha_min.
  CHECK(distance(prox_wavelet_layer(x1, y, p), prox_wavelet_layer(x2, y, p)) <=
        kAlphaMin * distance(x1, x2) + 1e-15);
  // Vanishing thresholds give the identity at x = y.
  p.raw_thresholds.setConstant(-60.0);
  CHECK(distance(prox_wavelet_layer(y, y, p), y) < 1e-12);
}

TEST_CASE("prox layer at alpha = 1 solves the wavelet l1 problem coordinatewise") {
  Rng rng(31);
  LayerParams p = random_layer(rng, 1, 8, 1, 1.0);
  const ImageTensor y = random_tensor(rng, 1, 8, 8);
  const ImageTensor out = prox_wavelet_layer(random_tensor(rng, 1, 8, 8), y, p);
  // Minimize 1/2 (v - w)^2 + lambda |v| by a fine grid search per coefficient.
  const WaveletFamily& f = wavelet_family(p.family);
  const WaveletCoeffs w = dwt2(y, f);
  const WaveletCoeffs v = dwt2(out, f);
  const Thresholds th = p.thresholds();
  for (int b = 0; b < 3; ++b) {
    for (Index i = 0; i < 16; i += 5) {
      const double wi = w.band(b).data()[i];
      const double lam = th.values[b * 16 + i];
      double best = 0.0, best_obj = 1e300;
      for (int s = -40000; s <= 40000; ++s) {
        const double cand = s * 1e-4;
        const double obj = 0.5 * (cand - wi) * (cand - wi) + lam * std::abs(cand);
        if (obj < best_obj) {
          best_obj = obj;
          best = cand;
        }
      }
      CHECK(std::abs(v.band(b).data()[i] - best) <= 1e-4);
    }
  }
  CHECK(distance(v.ll, w.ll) < 1e-12);
}

TEST_CASE("prox layer is (1 - alpha)-Lipschitz in x") {
  Rng rng(32);
  const LayerParams p = random_layer(rng, 2, 8, 2, 0.3);
  const ImageTensor y = random_tensor(rng, 2, 8, 8);
  for (int t = 0; t < 1000; ++t) {
    const ImageTensor a = random_tensor(rng, 2, 8, 8);
    const ImageTensor b = random_tensor(rng, 2, 8, 8);
    CHECK(distance(prox_wavelet_layer(a, y, p), prox_wavelet_layer(b, y, p)) <=
          0.7 * distance(a, b) + 1e-12);
  }
}

TEST_CASE("contractive layer bound, zero kernel and determinism") {
  Rng rng(33);
  const double eps = 1e-3;
  LayerParams p = random_layer(rng, 2, 8, 0, 0.4);
  p.kernel = clip_norm(p.kernel, 8, 8, 1.0 / (0.6 + eps));
  const ImageTensor y = random_tensor(rng, 2, 8, 8);
  const double s = conv_operator_norm(p.kernel, 8, 8);
  const double bound = 0.6 / (0.6 + eps) * s / (s + kNormGuard);
  for (int t = 0; t < 1000; ++t) {
    const ImageTensor a = random_tensor(rng, 2, 8, 8);
    const ImageTensor b = random_tensor(rng, 2, 8, 8);
    CHECK(distance(contractive_layer(a, y, p, eps), contractive_layer(b, y, p, eps)) <=
          (bound + 1e-10) * distance(a, b));
  }
  const ImageTensor a = random_tensor(rng, 2, 8, 8);
  const ImageTensor o1 = contractive_layer(a, y, p, eps);
  const ImageTensor o2 = contractive_layer(a, y, p, eps);
  CHECK(o1.data() == o2.data());
  CHECK_THROWS_AS(contractive_layer(a, y, p, 0.0), ValidationError);
  p.kernel.weights().setZero();
  CHECK(contractive_layer(a, y, p, eps).norm() == 0.0);
}

TEST_CASE("network forward shape checks and zero kernel") {
  Rng rng(34);
  NetworkParams net = random_net(rng, 1, 1, 8);
  net.layers[0].kernel.weights().setZero();
  CHECK(network_forward(random_tensor(rng, 1, 8, 8), net).norm() == 0.0);
  CHECK_THROWS_AS(network_forward(random_tensor(rng, 1, 6, 6), net), DimensionError);
  CHECK_THROWS_AS(network_forward(random_tensor(rng, 2, 8, 8), net), DimensionError);
}

TEST_CASE("certificate: single layer value, product law, soundness, eps monotone") {
  Rng rng(35);
  NetworkParams one = random_net(rng, 1, 1, 8);
  one.layers[0].alpha = 0.5;
  one.eps = 1e-3;
  const ContractionCertificate c1 = contraction_certificate(one, 8, 8);
  const double s = c1.per_layer[0].conv_norm;
  CHECK(c1.total_bound == doctest::Approx(0.5 * (1.0 / 0.501) * (s / (s + 1e-12))).epsilon(1e-15));
  CHECK(c1.per_layer[0].conv_budget == doctest::Approx(1.0 / 0.501));
  CHECK(c1.total_bound < 0.998004);
  CHECK(c1.total_bound > 0.998003);

  NetworkParams same = random_net(rng, 4, 1, 8);
  for (auto& l : same.layers) {
    l.alpha = 0.3;
    l.kernel = one.layers[0].kernel;
  }
  const ContractionCertificate c4 = contraction_certificate(same, 8, 8);
  const double b = c4.per_layer[0].bound;
  CHECK(c4.total_bound == doctest::Approx(std::pow(b, 4)).epsilon(1e-14));

  const NetworkParams net = random_net(rng, 6, 2, 8);
  const auto norms = conv_norms(net);
  const ContractionCertificate cert = contraction_certificate(net, 8, 8);
  const ImageTensor y = random_tensor(rng, 2, 8, 8);
  for (int t = 0; t < 200; ++t) {
    const ImageTensor d = random_tensor(rng, 2, 8, 8, -0.1, 0.1);
    const double r = distance(network_forward_from(y + d, y, net, norms),
                              network_forward_from(y, y, net, norms)) / d.norm();
    CHECK(r <= cert.total_bound);
  }

  NetworkParams wider = net;
  wider.eps = 1e-2;
  const ContractionCertificate cw = contraction_certificate(wider, 8, 8);
  for (std::size_t l = 0; l < cert.per_layer.size(); ++l) {
    CHECK(cw.per_layer[l].bound < cert.per_layer[l].bound);
  }
}

TEST_CASE("constrain_params") {
  Rng rng(36);
  NetworkParams net = random_net(rng, 2, 1, 8);
  net.layers[0].alpha = 1.7;
  net.layers[1].alpha = -0.2;
  net.layers[0].kernel = ConvKernel::Identity(1, 3);
  net.layers[0].kernel.weights() *= 3.0;
  const NetworkParams c = constrain_params(net);
  CHECK(c.layers[0].alpha == 1.0 - kAlphaMin);
  CHECK(c.layers[1].alpha == kAlphaMin);
  CHECK(c.layers[0].raw_thresholds == net.layers[0].raw_thresholds);
  NetworkParams half = net;
  half.layers[0].alpha = 0.5;
  half.eps = 1e-3;
  const double sn = conv_operator_norm(constrain_params(half).layers[0].kernel, 8, 8);
  CHECK(sn <= 1.0 / 0.501);
  CHECK(sn >= 1.0 / 0.501 - 1e-9);
}

TEST_CASE("validate_network") {
  Rng rng(37);
  NetworkParams net = random_net(rng, 3, 1, 8);
  CHECK_NOTHROW(validate_network(net));
  NetworkParams wrong = net;
  wrong.layers[1].family = WaveletKind::kHaar;
  CHECK_THROWS_AS(validate_network(wrong), ValidationError);
  wrong = net;
  wrong.layers[2].raw_thresholds.resize(3);
  CHECK_THROWS_AS(validate_network(wrong), DimensionError);
}

TEST_CASE("init_network: calibrated stencil passes constants through") {
  Rng rng(38);
  InitOptions o;
  o.depth = 4;
  o.patch = 16;
  o.channels = 1;
  o.alpha = 0.3;
  o.threshold = 1e-9;
  const NetworkParams net = init_network(o, rng);
  CHECK(net.depth() == 4);
  CHECK_NOTHROW(validate_network(net));
  CHECK(contraction_certificate(net, 16, 16).total_bound < 1.0);
  // DC gain of each layer is ~1, so a constant image survives nearly intact.
  const ImageTensor c = ImageTensor::Constant(1, 16, 16, 0.5);
  CHECK(distance(network_forward(c, net), c) / c.norm() < 1e-3);
}
