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

#include "ctrx/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "ctrx/io.hpp"
#include "ctrx/metrics.hpp"

namespace ctrx {
namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void check_finite(const ImageTensor& t, std::size_t layer, const char* what) {
  if (!t.allFinite()) {
    throw NumericError(std::string("non-finite ") + what + " in layer " +
                       std::to_string(layer));
  }
}

// Which coefficients pass the threshold, layer by layer.
std::vector<bool> active_set(const NetworkParams& net,
                             const std::vector<LayerTape>& tapes) {
  std::vector<bool> out;
  if (!net.ablation.prox) return out;
  for (std::size_t l = 0; l < tapes.size(); ++l) {
    const Thresholds t = net.layers[l].thresholds();
    const ThresholdLayout& L = t.layout;
    for (Index b = 0; b < L.bands(); ++b) {
      const ImageTensor& band = tapes[l].coeffs.band(static_cast<int>(b));
      for (Index ch = 0; ch < L.channels; ++ch) {
        for (Index r = 0; r < L.rows; ++r) {
          for (Index c = 0; c < L.cols; ++c) {
            out.push_back(std::abs(band(ch, r, c)) > t.values[L.offset(b, ch, r, c)]);
          }
        }
      }
    }
  }
  return out;
}

double loss_with_norms(const NetworkParams& net, const ImageTensor& y,
                       const ImageTensor& target, std::span<const double> norms,
                       std::vector<bool>* active) {
  std::vector<LayerTape> tapes;
  const ImageTensor out = network_forward_from(y, y, net, norms, &tapes);
  if (active != nullptr) *active = active_set(net, tapes);
  return loss_mse(out, target);
}

ImageTensor flip_rows(const ImageTensor& x) {
  ImageTensor o = x;
  for (Index c = 0; c < x.channels(); ++c) o.plane(c) = x.plane(c).colwise().reverse();
  return o;
}

ImageTensor flip_cols(const ImageTensor& x) {
  ImageTensor o = x;
  for (Index c = 0; c < x.channels(); ++c) o.plane(c) = x.plane(c).rowwise().reverse();
  return o;
}

// Quarter turn counter-clockwise.
ImageTensor rotate90(const ImageTensor& x) {
  ImageTensor o(x.channels(), x.width(), x.height());
  for (Index c = 0; c < x.channels(); ++c) {
    o.plane(c) = x.plane(c).transpose().colwise().reverse();
  }
  return o;
}

}  // namespace

GradientSet GradientSet::ZerosLike(const NetworkParams& net) {
  GradientSet g;
  for (const auto& l : net.layers) {
    LayerGradient lg;
    lg.raw_thresholds = Eigen::VectorXd::Zero(l.raw_thresholds.size());
    lg.kernel = ConvKernel(l.kernel.c_out(), l.kernel.c_in(), l.kernel.k_h(), l.kernel.k_w());
    g.layers.push_back(std::move(lg));
  }
  return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& o) {
  if (o.layers.size() != layers.size()) throw DimensionError("gradient depth mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].alpha += o.layers[l].alpha;
    layers[l].raw_thresholds += o.layers[l].raw_thresholds;
    layers[l].kernel.weights() += o.layers[l].kernel.weights();
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double s) {
  for (auto& l : layers) {
    l.alpha *= s;
    l.raw_thresholds *= s;
    l.kernel.weights() *= s;
  }
  return *this;
}

double GradientSet::squaredNorm() const {
  double s = 0.0;
  for (const auto& l : layers) {
    s += l.alpha * l.alpha + l.raw_thresholds.squaredNorm() + l.kernel.weights().squaredNorm();
  }
  return s;
}

bool GradientSet::allFinite() const {
  for (const auto& l : layers) {
    if (!std::isfinite(l.alpha) || !l.raw_thresholds.allFinite() ||
        !l.kernel.weights().allFinite()) {
      return false;
    }
  }
  return true;
}

double loss_mse(const ImageTensor& pred, const ImageTensor& target) {
  pred.require_same_shape(target);
  return (pred.data() - target.data()).squaredNorm() / static_cast<double>(pred.size());
}

BackwardResult backward(const NetworkParams& net, const ImageTensor& y,
                        const ImageTensor& target, std::span<const double> norms) {
  std::vector<LayerTape> tapes;
  const ImageTensor out = network_forward_from(y, y, net, norms, &tapes);
  out.require_same_shape(target);

  BackwardResult res;
  res.loss = loss_mse(out, target);
  res.grads = GradientSet::ZerosLike(net);

  ImageTensor g = out;
  g -= target;
  g *= 2.0 / static_cast<double>(out.size());

  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const LayerParams& p = net.layers[l];
    const LayerTape& t = tapes[l];
    LayerGradient& lg = res.grads.layers[l];
    const double gain = 1.0 / ((1.0 - p.alpha) + net.eps);
    double d_alpha = 0.0;

    // Output scaling and convolution.
    ImageTensor du;
    if (net.ablation.conv) {
      const double inv = 1.0 / (norms[l] + kNormGuard);
      d_alpha += dot(g, t.conv_out) * inv * gain * gain;
      ImageTensor dconv = (gain * inv) * g;
      lg.kernel = conv2d_kernel_gradient(t.u, dconv, p.kernel.k_h(), p.kernel.k_w());
      du = conv2d_circular_adjoint(dconv, p.kernel);
    } else {
      d_alpha += dot(g, t.u) * gain * gain;
      du = gain * g;
    }
    check_finite(du, l, "gradient");

    // Wavelet shrinkage.
    ImageTensor dz;
    if (net.ablation.prox) {
      const WaveletFamily& fam = wavelet_family(p.family);
      WaveletCoeffs dv = dwt2(du, fam);
      const Thresholds th = p.thresholds();
      const ThresholdLayout& L = th.layout;
      for (Index b = 0; b < L.bands(); ++b) {
        ImageTensor& band = dv.band(static_cast<int>(b));
        const ImageTensor& w = t.coeffs.band(static_cast<int>(b));
        for (Index ch = 0; ch < L.channels; ++ch) {
          for (Index r = 0; r < L.rows; ++r) {
            for (Index c = 0; c < L.cols; ++c) {
              const Index k = L.offset(b, ch, r, c);
              const double wv = w(ch, r, c);
              if (std::abs(wv) > th.values[k]) {
                const double sgn = wv > 0.0 ? 1.0 : -1.0;
                lg.raw_thresholds[k] -= sgn * band(ch, r, c) * sigmoid(p.raw_thresholds[k]);
              } else {
                band(ch, r, c) = 0.0;
              }
            }
          }
        }
      }
      dz = idwt2(dv, fam);
    } else {
      dz = std::move(du);
    }

    // Gradient step z = (1 - alpha) x + alpha y.
    ImageTensor y_minus_x = y;
    y_minus_x -= t.x_in;
    d_alpha += dot(dz, y_minus_x);
    lg.alpha = net.ablation.learn_alpha ? d_alpha : 0.0;
    g = (1.0 - p.alpha) * dz;
    check_finite(g, l, "gradient");
  }
  if (!res.grads.allFinite()) throw NumericError("non-finite parameter gradient");
  return res;
}

BackwardResult backward(const NetworkParams& net, const ImageTensor& y,
                        const ImageTensor& target) {
  const auto norms = conv_norms(net);
  return backward(net, y, target, norms);
}

double& parameter_at(NetworkParams& net, Index i) {
  for (auto& l : net.layers) {
    if (i == 0) return l.alpha;
    --i;
    if (i < l.raw_thresholds.size()) return l.raw_thresholds[i];
    i -= l.raw_thresholds.size();
    if (i < l.kernel.size()) return l.kernel.weights()[i];
    i -= l.kernel.size();
  }
  throw DimensionError("parameter index out of range");
}

double gradient_at(const GradientSet& g, Index i) {
  for (const auto& l : g.layers) {
    if (i == 0) return l.alpha;
    --i;
    if (i < l.raw_thresholds.size()) return l.raw_thresholds[i];
    i -= l.raw_thresholds.size();
    if (i < l.kernel.size()) return l.kernel.weights()[i];
    i -= l.kernel.size();
  }
  throw DimensionError("gradient index out of range");
}

GradCheckReport grad_check(const NetworkParams& net, const ImageTensor& y,
                           const ImageTensor& target, double step, double tol,
                           Index max_params, std::uint64_t seed) {
  const auto norms = conv_norms(net);
  const BackwardResult br = backward(net, y, target, norms);
  std::vector<bool> base_active;
  loss_with_norms(net, y, target, norms, &base_active);

  const Index n = net.parameter_count();
  std::vector<Index> coords(static_cast<std::size_t>(n));
  std::iota(coords.begin(), coords.end(), Index{0});
  if (n > max_params) {
    Rng rng(seed);
    for (Index i = n - 1; i > 0; --i) {
      std::swap(coords[static_cast<std::size_t>(i)],
                coords[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
    }
    coords.resize(static_cast<std::size_t>(max_params));
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport rep;
  NetworkParams work = net;
  for (const Index i : coords) {
    double& theta = parameter_at(work, i);
    const double orig = theta;
    std::vector<bool> act_p;
    std::vector<bool> act_m;
    theta = orig + step;
    const double fp = loss_with_norms(work, y, target, norms, &act_p);
    theta = orig - step;
    const double fm = loss_with_norms(work, y, target, norms, &act_m);
    theta = orig;
    if (act_p != base_active || act_m != base_active) {
      ++rep.excluded;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * step);
    const double analytic = gradient_at(br.grads, i);
    // Rounding in fp - fm limits what the difference quotient can resolve.
    const double resolution = 8.0 * std::numeric_limits<double>::epsilon() *
                              std::max(std::abs(fp), std::abs(fm)) / (2.0 * step);
    const double err = std::abs(analytic - numeric) /
                       std::max({std::abs(analytic), std::abs(numeric), 1e-8, resolution / tol});
    ++rep.checked;
    if (err > rep.max_rel_error || rep.worst_index < 0) {
      rep.max_rel_error = err;
      rep.worst_index = i;
      rep.worst_analytic = analytic;
      rep.worst_numeric = numeric;
    }
  }
  rep.passed = rep.checked > 0 && rep.max_rel_error <= tol;
  return rep;
}

ImageTensor augment(const ImageTensor& x, bool flips, bool rotations, Rng& rng) {
  ImageTensor o = x;
  if (flips) {
    if (rng.uniform() < 0.5) o = flip_rows(o);
    if (rng.uniform() < 0.5) o = flip_cols(o);
  }
  if (rotations && x.height() == x.width()) {
    const auto turns = rng.below(4);
    for (std::uint64_t k = 0; k < turns; ++k) o = rotate90(o);
  }
  return o;
}

double mean_denoised_psnr(const NetworkParams& net, const std::vector<ImageTensor>& clean,
                          double sigma, std::uint64_t seed) {
  if (clean.empty()) return std::numeric_limits<double>::quiet_NaN();
  Rng rng(seed);
  const auto norms = conv_norms(net);
  double s = 0.0;
  for (const auto& c : clean) {
    const ImageTensor noisy = add_awgn(c, sigma, rng);
    s += psnr(network_forward(noisy, net, norms), c);
  }
  return s / static_cast<double>(clean.size());
}

double mean_noisy_psnr(const std::vector<ImageTensor>& clean, double sigma,
                       std::uint64_t seed) {
  if (clean.empty()) return std::numeric_limits<double>::quiet_NaN();
  Rng rng(seed);
  double s = 0.0;
  for (const auto& c : clean) s += psnr(add_awgn(c, sigma, rng), c);
  return s / static_cast<double>(clean.size());
}

TrainResult train(const NetworkParams& init, const std::vector<ImageTensor>& clean,
                  const TrainConfig& cfg, const std::vector<ImageTensor>& validation,
                  const EpochCallback& on_epoch) {
  if (!(cfg.lr > 0.0)) throw ValidationError("learning rate must be positive");
  if (cfg.epochs < 0) throw ValidationError("epoch count must be non-negative");
  if (cfg.batch_size < 1) throw ValidationError("batch size must be positive");
  if (!(cfg.sigma >= 0.0)) throw ValidationError("noise sigma must be non-negative");
  if (!std::is_sorted(cfg.decay_epochs.begin(), cfg.decay_epochs.end())) {
    throw ValidationError("decay epochs must be ascending");
  }
  validate_network(init);
  for (const auto& c : clean) {
    if (c.channels() != init.channels || c.height() != init.patch || c.width() != init.patch) {
      throw DimensionError("training patch " + c.shape_string() +
                           " does not match the network");
    }
  }

  TrainResult result;
  result.net = init;
  if (cfg.epochs == 0) return result;
  if (clean.empty()) throw ValidationError("training set is empty");

  Rng rng(cfg.seed);
  const std::uint64_t val_seed = cfg.seed ^ 0x9e3779b97f4a7c15ULL;
  NetworkParams& net = result.net;
  GradientSet velocity = GradientSet::ZerosLike(net);
  std::vector<std::size_t> order(clean.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double first_loss = 0.0;
  int bad_epochs = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double lr = cfg.lr;
    for (int d : cfg.decay_epochs) {
      if (epoch >= d) lr *= cfg.decay_factor;
    }
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.below(i)]);
    }

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const auto norms = conv_norms(net);
      GradientSet grad = GradientSet::ZerosLike(net);
      for (std::size_t j = start; j < stop; ++j) {
        const ImageTensor target = augment(clean[order[j]], cfg.flips, cfg.rotations, rng);
        const ImageTensor noisy = add_awgn(target, cfg.sigma, rng);
        const BackwardResult br = backward(net, noisy, target, norms);
        grad += br.grads;
        epoch_loss += br.loss;
      }
      grad *= 1.0 / static_cast<double>(stop - start);

      velocity *= cfg.momentum;
      velocity += grad;
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        LayerParams& p = net.layers[l];
        const LayerGradient& v = velocity.layers[l];
        p.alpha -= lr * v.alpha;
        p.raw_thresholds -= lr * v.raw_thresholds;
        p.kernel.weights() -= lr * v.kernel.weights();
      }
      net = constrain_params(net);
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) throw TrainingError("training loss is not finite");

    EpochStats st;
    st.epoch = epoch + 1;
    st.train_loss = epoch_loss;
    st.certificate_bound = contraction_certificate(net, net.patch, net.patch).total_bound;
    st.val_psnr = mean_denoised_psnr(net, validation, cfg.sigma, val_seed);
    result.curve.push_back(st);
    if (on_epoch) on_epoch(st, net);

    if (epoch == 0) {
      first_loss = epoch_loss;
    } else if (epoch_loss > 10.0 * first_loss) {
      if (++bad_epochs >= 3) {
        throw TrainingError("training loss exceeded 10x its first-epoch value for 3 epochs");
      }
    } else {
      bad_epochs = 0;
    }
  }
  return result;
}

std::vector<ImageTensor> synthetic_patches(Index count, Index patch, Index channels,
                                           Rng& rng) {
  if (count < 0 || patch < 1 || channels < 1) {
    throw ValidationError("synthetic patch shape must be positive");
  }
  std::vector<ImageTensor> out;
  const double P = static_cast<double>(patch);
  for (Index n = 0; n < count; ++n) {
    ImageTensor x(channels, patch, patch);
    // Background ramp.
    const double gx = rng.uniform(-0.3, 0.3) / P;
    const double gy = rng.uniform(-0.3, 0.3) / P;
    std::vector<double> base(static_cast<std::size_t>(channels));
    for (auto& b : base) b = rng.uniform(0.2, 0.8);
    for (Index c = 0; c < channels; ++c) {
      for (Index r = 0; r < patch; ++r) {
        for (Index q = 0; q < patch; ++q) {
          x(c, r, q) = base[static_cast<std::size_t>(c)] + gx * q + gy * r;
        }
      }
    }
    // Flat shapes.
    const auto shapes = 2 + rng.below(4);
    for (std::uint64_t s = 0; s < shapes; ++s) {
      const bool disc = rng.uniform() < 0.5;
      const double cy = rng.uniform(0.0, P);
      const double cx = rng.uniform(0.0, P);
      const double ry = rng.uniform(0.1, 0.4) * P;
      const double rx = disc ? ry : rng.uniform(0.1, 0.4) * P;
      std::vector<double> val(static_cast<std::size_t>(channels));
      for (auto& v : val) v = rng.uniform();
      for (Index r = 0; r < patch; ++r) {
        for (Index q = 0; q < patch; ++q) {
          const double dy = (r - cy) / ry;
          const double dx = (q - cx) / rx;
          const bool inside = disc ? dx * dx + dy * dy <= 1.0
                                   : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
          if (inside) {
            for (Index c = 0; c < channels; ++c) x(c, r, q) = val[static_cast<std::size_t>(c)];
          }
        }
      }
    }
    // Faint low-frequency stripes.
    const double amp = rng.uniform(0.0, 0.08);
    const double fr = rng.uniform(0.5, 3.0) * 2.0 * 3.141592653589793 / P;
    const double th = rng.uniform(0.0, 3.141592653589793);
    for (Index c = 0; c < channels; ++c) {
      for (Index r = 0; r < patch; ++r) {
        for (Index q = 0; q < patch; ++q) {
          x(c, r, q) += amp * std::sin(fr * (std::cos(th) * q + std::sin(th) * r));
        }
      }
    }
    x.data() = x.data().cwiseMax(0.0).cwiseMin(1.0);
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<ImageTensor> extract_patches(const std::vector<ImageTensor>& images,
                                         Index patch, Index stride, Index max_count,
                                         Rng& rng) {
  if (patch < 1 || stride < 1) throw ValidationError("patch and stride must be positive");
  std::vector<ImageTensor> out;
  for (const auto& img : images) {
    for (Index r = 0; r + patch <= img.height(); r += stride) {
      for (Index q = 0; q + patch <= img.width(); q += stride) {
        ImageTensor p(img.channels(), patch, patch);
        for (Index c = 0; c < img.channels(); ++c) {
          p.plane(c) = img.plane(c).block(r, q, patch, patch);
        }
        out.push_back(std::move(p));
      }
    }
  }
  if (max_count >= 0 && static_cast<Index>(out.size()) > max_count) {
    for (std::size_t i = out.size(); i > 1; --i) std::swap(out[i - 1], out[rng.below(i)]);
    out.resize(static_cast<std::size_t>(max_count));
  }
  return out;
}

std::string loss_curve_csv(const std::vector<EpochStats>& curve) {
  std::string s = "epoch,train_loss,val_psnr,certificate_bound\n";
  for (const auto& e : curve) {
    s += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
         format_double(e.val_psnr) + "," + format_double(e.certificate_bound) + "\n";
  }
  return s;
}

void write_loss_curve_csv(const std::string& path, const std::vector<EpochStats>& curve) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << loss_curve_csv(curve);
  if (!out) throw IoError("write error on '" + path + "'");
}

}  // namespace ctrx
