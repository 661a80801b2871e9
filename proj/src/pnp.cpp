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

#include "ctrx/pnp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "ctrx/fourier.hpp"
#include "ctrx/metrics.hpp"
#include "ctrx/rng.hpp"
#include "ctrx/tensorops.hpp"

namespace ctrx {
namespace {

constexpr double kCgTol = 1e-10;
constexpr int kCgMaxIters = 5000;
constexpr double kPowerTol = 1e-10;
constexpr int kPowerMaxIters = 20000;

ConvKernel normalized(ConvKernel k) {
  const double s = k.weights().sum();
  if (!(s > 0.0)) throw ValidationError("blur kernel must have positive sum");
  k.weights() /= s;
  return k;
}

void check_size(Index size) {
  if (size < 1 || size % 2 == 0) {
    throw ValidationError("blur size must be odd and positive, got " + std::to_string(size));
  }
}

void check_blur(const ConvKernel& k) {
  if (k.c_in() != 1 || k.c_out() != 1) {
    throw ValidationError("blur kernels are single-channel");
  }
  require_finite(k, "blur kernel");
}

// Applies the single-channel blur (or its adjoint) to every channel.
ImageTensor blur_channels(const ImageTensor& x, const ConvKernel& k,
                          bool adjoint) {
  ImageTensor out(x.channels(), x.height(), x.width());
  ImageTensor one(1, x.height(), x.width());
  for (Index c = 0; c < x.channels(); ++c) {
    one.plane(0) = x.plane(c);
    const ImageTensor r =
        adjoint ? conv2d_circular_adjoint(one, k) : conv2d_circular(one, k);
    out.plane(c) = r.plane(0);
  }
  return out;
}

ImageTensor apply_normal(const ImageTensor& x, const ForwardModel& m) {
  return apply_adjoint(apply_forward(x, m), m, x.height(), x.width());
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (;;) {
    const std::size_t p = s.find(sep, start);
    parts.push_back(s.substr(start, p == std::string_view::npos ? p : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return parts;
}

template <typename T>
T parse_number(std::string_view s, std::string_view spec) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError("bad number '" + std::string(s) + "' in blur spec '" +
                          std::string(spec) + "'");
  }
  return v;
}

// |B(w)|^2 on the H x W grid, row-major.
Eigen::MatrixXd blur_power(const ConvKernel& blur, Index h, Index w) {
  const FreqResponse fr = freq_response(blur, h, w);
  Eigen::MatrixXd p(h, w);
  for (Index u = 0; u < h; ++u) {
    for (Index v = 0; v < w; ++v) p(u, v) = std::norm(fr.at(u, v)(0, 0));
  }
  return p;
}

void check_grid(const ForwardModel& m, Index h, Index w) {
  if (m.stride < 1) throw DimensionError("stride must be positive");
  if (h % m.stride != 0 || w % m.stride != 0) {
    throw DimensionError("image size " + std::to_string(h) + "x" + std::to_string(w) +
                         " is not divisible by stride " + std::to_string(m.stride));
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

ConvKernel delta_blur() { return ConvKernel::Identity(1); }

ConvKernel gaussian_blur(Index size, double sigma) {
  return anisotropic_gaussian_blur(size, sigma, sigma, 0.0);
}

ConvKernel box_blur(Index size) {
  check_size(size);
  ConvKernel k(1, 1, size, size);
  k.weights().setConstant(1.0);
  return normalized(k);
}

ConvKernel disk_blur(Index radius) {
  if (radius < 0) throw ValidationError("disk radius must be non-negative");
  const Index size = 2 * radius + 1;
  ConvKernel k(1, 1, size, size);
  const double r2 = static_cast<double>(radius * radius);
  for (Index a = 0; a < size; ++a) {
    for (Index b = 0; b < size; ++b) {
      const double dy = static_cast<double>(a - radius);
      const double dx = static_cast<double>(b - radius);
      if (dx * dx + dy * dy <= r2) k(0, 0, a, b) = 1.0;
    }
  }
  return normalized(k);
}

ConvKernel anisotropic_gaussian_blur(Index size, double sigma_x, double sigma_y,
                                     double theta_deg) {
  check_size(size);
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0)) {
    throw ValidationError("Gaussian widths must be positive");
  }
  const double th = theta_deg * std::numbers::pi / 180.0;
  const double c = std::cos(th);
  const double s = std::sin(th);
  const Index half = size / 2;
  ConvKernel k(1, 1, size, size);
  for (Index a = 0; a < size; ++a) {
    for (Index b = 0; b < size; ++b) {
      const double x = static_cast<double>(b - half);
      const double y = -static_cast<double>(a - half);  // image rows grow down
      const double xr = c * x + s * y;
      const double yr = -s * x + c * y;
      k(0, 0, a, b) = std::exp(-0.5 * (xr * xr / (sigma_x * sigma_x) +
                                       yr * yr / (sigma_y * sigma_y)));
    }
  }
  return normalized(k);
}

ConvKernel motion_blur(Index size, std::string_view direction) {
  check_size(size);
  ConvKernel k(1, 1, size, size);
  const Index mid = size / 2;
  for (Index i = 0; i < size; ++i) {
    if (direction == "horiz") {
      k(0, 0, mid, i) = 1.0;
    } else if (direction == "vert") {
      k(0, 0, i, mid) = 1.0;
    } else if (direction == "diag") {
      k(0, 0, i, i) = 1.0;
    } else if (direction == "anti") {
      k(0, 0, i, size - 1 - i) = 1.0;
    } else {
      throw ValidationError("unknown motion direction '" + std::string(direction) + "'");
    }
  }
  return normalized(k);
}

ConvKernel sparse_random_blur(Index size, double density, std::uint64_t seed) {
  check_size(size);
  if (!(density > 0.0 && density <= 1.0)) {
    throw ValidationError("sparse blur density must lie in (0, 1]");
  }
  Rng rng(seed);
  ConvKernel k(1, 1, size, size);
  for (Index i = 0; i < k.size(); ++i) {
    const bool keep = rng.uniform() < density;
    const double v = rng.uniform();
    if (keep) k.weights()[i] = v;
  }
  // The centre tap is always present so the support is never empty.
  const Index c = size / 2;
  if (k(0, 0, c, c) == 0.0) k(0, 0, c, c) = 1.0;
  return normalized(k);
}

ConvKernel parse_blur_spec(std::string_view spec) {
  const auto f = split(spec, ':');
  const std::string_view kind = f[0];
  auto arity = [&](std::size_t n) {
    if (f.size() != n) {
      throw ValidationError("blur spec '" + std::string(spec) + "' needs " +
                            std::to_string(n - 1) + " fields");
    }
  };
  if (kind == "delta") {
    arity(1);
    return delta_blur();
  }
  if (kind == "gauss") {
    arity(3);
    return gaussian_blur(parse_number<Index>(f[1], spec), parse_number<double>(f[2], spec));
  }
  if (kind == "box") {
    arity(2);
    return box_blur(parse_number<Index>(f[1], spec));
  }
  if (kind == "disk") {
    arity(2);
    return disk_blur(parse_number<Index>(f[1], spec));
  }
  if (kind == "aniso") {
    arity(5);
    return anisotropic_gaussian_blur(
        parse_number<Index>(f[1], spec), parse_number<double>(f[2], spec),
        parse_number<double>(f[3], spec), parse_number<double>(f[4], spec));
  }
  if (kind == "motion") {
    arity(3);
    return motion_blur(parse_number<Index>(f[1], spec), f[2]);
  }
  if (kind == "sparse") {
    arity(4);
    return sparse_random_blur(parse_number<Index>(f[1], spec),
                              parse_number<double>(f[2], spec),
                              parse_number<std::uint64_t>(f[3], spec));
  }
  throw ValidationError("unknown blur kind in '" + std::string(spec) + "'");
}

ImageTensor apply_forward(const ImageTensor& x, const ForwardModel& m) {
  check_blur(m.blur);
  check_grid(m, x.height(), x.width());
  const ImageTensor bx = blur_channels(x, m.blur, false);
  if (m.stride == 1) return bx;
  const Index s = m.stride;
  ImageTensor out(x.channels(), x.height() / s, x.width() / s);
  for (Index c = 0; c < x.channels(); ++c) {
    for (Index r = 0; r < out.height(); ++r) {
      for (Index q = 0; q < out.width(); ++q) out(c, r, q) = bx(c, r * s, q * s);
    }
  }
  return out;
}

ImageTensor apply_adjoint(const ImageTensor& u, const ForwardModel& m,
                          Index full_h, Index full_w) {
  check_blur(m.blur);
  check_grid(m, full_h, full_w);
  const Index s = m.stride;
  if (u.height() * s != full_h || u.width() * s != full_w) {
    throw DimensionError("adjoint input " + u.shape_string() +
                         " does not match the full grid divided by the stride");
  }
  ImageTensor up(u.channels(), full_h, full_w);
  for (Index c = 0; c < u.channels(); ++c) {
    for (Index r = 0; r < u.height(); ++r) {
      for (Index q = 0; q < u.width(); ++q) up(c, r * s, q * s) = u(c, r, q);
    }
  }
  return blur_channels(up, m.blur, true);
}

ImageTensor grad_datafit(const ImageTensor& x, const ImageTensor& y,
                         const ForwardModel& m) {
  ImageTensor r = apply_forward(x, m);
  r.require_same_shape(y);
  r -= y;
  return apply_adjoint(r, m, x.height(), x.width());
}

double datafit(const ImageTensor& x, const ImageTensor& y, const ForwardModel& m) {
  ImageTensor r = apply_forward(x, m);
  r.require_same_shape(y);
  return 0.5 * distance(r, y) * distance(r, y);
}

PnPTrace pnp_fbs(const ImageTensor& y, const ForwardModel& m,
                 const Denoiser& denoiser, double alpha_step,
                 const PnPOptions& opts) {
  if (!(alpha_step > 0.0)) throw ValidationError("alpha_step must be positive");
  if (opts.max_iters < 1) throw ValidationError("max_iters must be positive");
  const Index H = y.height() * m.stride;
  const Index W = y.width() * m.stride;
  ImageTensor x = opts.x0 ? *opts.x0 : apply_adjoint(y, m, H, W);
  if (x.channels() != y.channels() || x.height() != H || x.width() != W) {
    throw DimensionError("initial iterate does not match the observation");
  }
  PnPTrace trace;
  for (int k = 0; k < opts.max_iters; ++k) {
    ImageTensor step = x;
    step -= alpha_step * grad_datafit(x, y, m);
    ImageTensor next = denoiser(step);
    if (!next.allFinite()) {
      trace.final = x;
      throw DivergenceError("non-finite iterate at iteration " + std::to_string(k + 1),
                            std::move(trace));
    }
    const double res = distance(next, x);
    const double scale = x.norm();
    trace.residual.push_back(res);
    trace.datafit.push_back(datafit(next, y, m));
    trace.psnr.push_back(opts.reference ? psnr(next, *opts.reference)
                                        : std::numeric_limits<double>::quiet_NaN());
    if (!std::isfinite(res) || !std::isfinite(scale)) {
      trace.final = x;
      throw DivergenceError("iterate norm overflowed at iteration " + std::to_string(k + 1),
                            std::move(trace));
    }
    x = std::move(next);
    if (res <= opts.tol * scale) {
      trace.converged = true;
      break;
    }
  }
  trace.final = std::move(x);
  return trace;
}

ImageTensor prox_datafit(const ImageTensor& z, const ImageTensor& y,
                         const ForwardModel& m, double step) {
  if (!(step > 0.0)) throw ValidationError("DRS step must be positive");
  const double c = 1.0 / step;
  ImageTensor rhs = z;
  rhs += c * apply_adjoint(y, m, z.height(), z.width());

  if (m.stride == 1) {
    const Eigen::MatrixXd p = blur_power(m.blur, z.height(), z.width());
    ImageTensor x(z.channels(), z.height(), z.width());
    for (Index ch = 0; ch < z.channels(); ++ch) {
      const RealPlane plane = rhs.plane(ch);
      ComplexPlane f = fft2(Eigen::Ref<const RealPlane>(plane));
      for (Index u = 0; u < f.rows(); ++u) {
        for (Index v = 0; v < f.cols(); ++v) f(u, v) /= 1.0 + c * p(u, v);
      }
      x.plane(ch) = ifft2_real(f);
    }
    return x;
  }

  // Conjugate gradient on (I + c A^T A) x = rhs, warm-started at z.
  ImageTensor x = z;
  ImageTensor r = rhs;
  r -= x;
  r -= c * apply_normal(x, m);
  const double bnorm = rhs.norm();
  if (bnorm == 0.0) return ImageTensor::ZerosLike(z);
  ImageTensor p = r;
  double rr = r.squaredNorm();
  for (int it = 0; it < kCgMaxIters; ++it) {
    if (std::sqrt(rr) <= kCgTol * bnorm) return x;
    ImageTensor ap = p;
    ap += c * apply_normal(p, m);
    const double a = rr / dot(p, ap);
    x += a * p;
    r -= a * ap;
    const double rr_new = r.squaredNorm();
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  if (std::sqrt(rr) <= kCgTol * bnorm) return x;
  throw SolverError("conjugate gradient did not reach relative residual 1e-10");
}

PnPTrace pnp_drs(const ImageTensor& y, const ForwardModel& m,
                 const Denoiser& denoiser, double step, const PnPOptions& opts) {
  if (!(step > 0.0)) throw ValidationError("DRS step must be positive");
  if (opts.max_iters < 1) throw ValidationError("max_iters must be positive");
  const Index H = y.height() * m.stride;
  const Index W = y.width() * m.stride;
  ImageTensor z = opts.x0 ? *opts.x0 : apply_adjoint(y, m, H, W);
  if (z.channels() != y.channels() || z.height() != H || z.width() != W) {
    throw DimensionError("initial iterate does not match the observation");
  }
  PnPTrace trace;
  ImageTensor x = prox_datafit(z, y, m, step);
  for (int k = 0; k < opts.max_iters; ++k) {
    ImageTensor reflected = 2.0 * x;
    reflected -= z;
    ImageTensor next = z;
    next += denoiser(reflected);
    next -= x;
    if (!next.allFinite()) {
      trace.final = x;
      throw DivergenceError("non-finite iterate at iteration " + std::to_string(k + 1),
                            std::move(trace));
    }
    const double res = distance(next, z);
    const double scale = z.norm();
    z = std::move(next);
    x = prox_datafit(z, y, m, step);
    trace.residual.push_back(res);
    trace.datafit.push_back(datafit(x, y, m));
    trace.psnr.push_back(opts.reference ? psnr(x, *opts.reference)
                                        : std::numeric_limits<double>::quiet_NaN());
    if (!std::isfinite(res) || !std::isfinite(scale)) {
      throw DivergenceError("iterate norm overflowed at iteration " + std::to_string(k + 1),
                            std::move(trace));
    }
    if (res <= opts.tol * scale) {
      trace.converged = true;
      break;
    }
  }
  trace.final = std::move(x);
  return trace;
}

std::vector<double> normal_spectrum(const ForwardModel& m, Index height, Index width) {
  check_blur(m.blur);
  check_grid(m, height, width);
  if (m.stride != 1) {
    throw ValidationError("the diagonal spectrum exists only for stride 1");
  }
  const Eigen::MatrixXd p = blur_power(m.blur, height, width);
  std::vector<double> s(p.data(), p.data() + p.size());
  std::sort(s.begin(), s.end());
  return s;
}

double normal_operator_norm(const ForwardModel& m, Index height, Index width) {
  check_blur(m.blur);
  check_grid(m, height, width);
  ImageTensor v(1, height, width);
  Rng rng(0x5eed);
  for (Index i = 0; i < v.size(); ++i) v.data()[i] = 1.0 + 0.1 * rng.normal();
  v *= 1.0 / v.norm();
  double lambda = 0.0;
  for (int it = 0; it < kPowerMaxIters; ++it) {
    ImageTensor w = apply_normal(v, m);
    const double next = dot(v, w);  // Rayleigh quotient
    const double wn = w.norm();
    if (wn == 0.0) return 0.0;
    v = (1.0 / wn) * w;
    if (std::abs(next - lambda) <= kPowerTol * std::abs(next)) return next;
    lambda = next;
  }
  return lambda;
}

double composite_contraction_bound(const ForwardModel& m, double alpha_step,
                                   double lipschitz_denoiser, Index height,
                                   Index width) {
  if (!(alpha_step >= 0.0)) throw ValidationError("alpha_step must be non-negative");
  if (m.stride == 1) {
    const auto s = normal_spectrum(m, height, width);
    double worst = 0.0;
    for (double l : s) worst = std::max(worst, std::abs(1.0 - alpha_step * l));
    return lipschitz_denoiser * worst;
  }
  // A^T A is singular when the stride exceeds one, so its smallest
  // eigenvalue is 0 and I - a A^T A has norm max(1, |1 - a lambda_max|).
  const double lmax = normal_operator_norm(m, height, width);
  return lipschitz_denoiser * std::max(1.0, std::abs(1.0 - alpha_step * lmax));
}

double suggest_alpha_step(const ForwardModel& m, Index height, Index width) {
  if (m.stride == 1) {
    const auto s = normal_spectrum(m, height, width);
    const double denom = s.front() + s.back();
    if (!(denom > 0.0)) throw ValidationError("forward model has a zero spectrum");
    return 2.0 / denom;
  }
  const double lmax = normal_operator_norm(m, height, width);
  if (!(lmax > 0.0)) throw ValidationError("forward model has a zero spectrum");
  return 1.0 / lmax;
}

Denoiser network_denoiser(const NetworkParams& net, const PatchPlan& plan,
                          std::optional<ImageTensor> anchor) {
  return [net, plan, anchor = std::move(anchor)](const ImageTensor& x) {
    auto run = [&](const ImageTensor& in, const ImageTensor* a) {
      return a != nullptr ? patch_denoise_anchored(in, *a, net, plan)
                          : patch_denoise(in, net, plan);
    };
    if (net.channels == x.channels()) return run(x, anchor ? &*anchor : nullptr);
    if (net.channels != 1) {
      throw DimensionError("network expects " + std::to_string(net.channels) +
                           " channels, image has " + std::to_string(x.channels()));
    }
    // Grayscale network on a multichannel image: one channel at a time.
    ImageTensor out(x.channels(), x.height(), x.width());
    ImageTensor in(1, x.height(), x.width());
    ImageTensor a(1, x.height(), x.width());
    for (Index c = 0; c < x.channels(); ++c) {
      in.plane(0) = x.plane(c);
      if (anchor) a.plane(0) = anchor->plane(c);
      out.plane(c) = run(in, anchor ? &a : nullptr).plane(0);
    }
    return out;
  };
}

std::string trace_csv(const PnPTrace& trace) {
  std::string s = "iter,residual,datafit,psnr\n";
  for (std::size_t k = 0; k < trace.residual.size(); ++k) {
    s += std::to_string(k + 1) + "," + format_double(trace.residual[k]) + "," +
         format_double(trace.datafit[k]) + "," + format_double(trace.psnr[k]) + "\n";
  }
  return s;
}

void write_trace_csv(const std::string& path, const PnPTrace& trace) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << trace_csv(trace);
  if (!out) throw IoError("write error on '" + path + "'");
}

}  // namespace ctrx
