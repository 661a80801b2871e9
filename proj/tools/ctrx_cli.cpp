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

// Command-line front end. Exit codes:
//   0 success, 1 unexpected failure, 2 usage or configuration error,
//   3 corrupt weights, 4 I/O error, 5 divergence, 6 bound not below one.
// Machine-readable results go to stderr as key=value lines.

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ctrx/inference.hpp"
#include "ctrx/io.hpp"
#include "ctrx/layers.hpp"
#include "ctrx/metrics.hpp"
#include "ctrx/pnp.hpp"
#include "ctrx/trainer.hpp"

namespace {

using namespace ctrx;

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kCorrupt = 3,
  kIo = 4,
  kDiverged = 5,
  kNotContractive = 6,
};

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

void emit(const std::string& key, const std::string& value) {
  std::cerr << key << '=' << value << '\n';
}
void emit(const std::string& key, double value) { emit(key, num(value)); }

// Options shared by every command that runs the denoiser.
struct DenoiserFlags {
  std::string weights;
  bool identity = false;
  Index patch = 0;   // 0: take it from the weights
  Index stride = 0;  // 0: default_stride_ratio * P
  double default_stride_ratio = 0.5;
  double taper = kDefaultTaper;
  std::string anchor = "self";
};

void add_denoiser_flags(CLI::App* cmd, DenoiserFlags& f,
                        const std::vector<std::string>& anchors = {}) {
  cmd->add_option("--weights", f.weights, "weights file");
  cmd->add_flag("--identity", f.identity, "use the identity map instead of a network");
  cmd->add_option("--patch", f.patch, "patch side P (must match the weights)");
  cmd->add_option("--stride", f.stride, "patch stride s, with P % s == 0");
  cmd->add_option("--taper", f.taper, "Tukey taper in [0, 1]")->check(CLI::Range(0.0, 1.0));
  if (!anchors.empty()) {
    f.anchor = anchors.front();
    cmd->add_option("--anchor", f.anchor, "image fed to every gradient step")
        ->check(CLI::IsMember(anchors));
  }
}

struct LoadedDenoiser {
  std::optional<NetworkParams> net;
  std::optional<PatchPlan> plan;
  ContractionCertificate cert;
};

LoadedDenoiser load_denoiser(const DenoiserFlags& f) {
  LoadedDenoiser d;
  if (f.identity) return d;
  if (f.weights.empty()) throw ConfigError("either --weights or --identity is required");
  d.net = load_weights(f.weights);
  const Index P = f.patch == 0 ? d.net->patch : f.patch;
  if (P != d.net->patch) {
    throw ConfigError("--patch " + std::to_string(P) + " does not match the weights' patch " +
                      std::to_string(d.net->patch));
  }
  const Index s = f.stride != 0 ? f.stride
                                : std::max<Index>(1, static_cast<Index>(
                                                         static_cast<double>(P) * f.default_stride_ratio));
  d.plan = make_patch_plan(P, s, f.taper);
  d.cert = contraction_certificate(*d.net, P, P);
  emit("certificate", d.cert.total_bound);
  return d;
}

ImageTensor run_denoiser(const LoadedDenoiser& d, const ImageTensor& x) {
  if (!d.net) return x;
  return network_denoiser(*d.net, *d.plan)(x);
}

// denoise --------------------------------------------------------------------

struct DenoiseArgs {
  std::string in, out, ref;
  DenoiserFlags den;
};

int cmd_denoise(const DenoiseArgs& a) {
  const ImageTensor x = read_image(a.in);
  const LoadedDenoiser d = load_denoiser(a.den);
  if (d.plan) emit("patch_factor", patch_lipschitz_factor(*d.plan, x.height(), x.width()));
  const ImageTensor out = run_denoiser(d, x);
  write_image(a.out, out);
  if (!a.ref.empty()) {
    const ImageTensor ref = read_image(a.ref);
    emit("psnr_in", psnr(x, ref));
    emit("psnr_out", psnr(out, ref));
  }
  return kOk;
}

// restore / trace --------------------------------------------------------------

struct RestoreArgs {
  std::string in, out, ref, trace;
  std::string task = "deblur";
  std::string blur = "delta";
  Index sr = 0;
  std::string alpha_step;
  int iters = 500;
  double tol = 1e-6;
  std::string algo = "fbs";
  bool allow_expansive = false;
  bool simulate = false;
  double sigma = 0.0;  // 0-255 scale, used with --simulate
  double pilot_mu = 0.01;
  std::optional<std::uint64_t> seed;
  DenoiserFlags den;
};

void add_restore_flags(CLI::App* cmd, RestoreArgs& a) {
  cmd->add_option("--in", a.in, "observed image (clean image with --simulate)")->required();
  cmd->add_option("--ref", a.ref, "ground truth for the psnr column");
  cmd->add_option("--task", a.task, "deblur or sr")->check(CLI::IsMember({"deblur", "sr"}));
  cmd->add_option("--blur", a.blur, "blur spec, e.g. gauss:9:2.0");
  cmd->add_option("--stride-sr", a.sr, "downsampling factor (sr only, default 2)");
  cmd->add_option("--alpha-step", a.alpha_step, "gradient step, or 'auto'")->required();
  cmd->add_option("--iters", a.iters, "iteration cap")->check(CLI::PositiveNumber);
  cmd->add_option("--tol", a.tol, "relative stopping tolerance")->check(CLI::PositiveNumber);
  cmd->add_option("--algo", a.algo, "fbs or drs")->check(CLI::IsMember({"fbs", "drs"}));
  cmd->add_flag("--allow-expansive", a.allow_expansive, "run even when the bound is >= 1");
  cmd->add_flag("--simulate", a.simulate, "degrade --in first and use it as the reference");
  cmd->add_option("--sigma", a.sigma, "noise level added by --simulate (0-255 scale)");
  cmd->add_option("--seed", a.seed, "noise seed (default CTRX_SEED or 0)");
  cmd->add_option("--pilot-mu", a.pilot_mu, "Tikhonov weight of the pilot anchor")
      ->check(CLI::PositiveNumber);
  add_denoiser_flags(cmd, a.den, {"pilot", "adjoint", "self"});
  // Non-overlapping tiles by default: the blend then adds no Lipschitz slack.
  a.den.default_stride_ratio = 1.0;
}

int run_restore(const RestoreArgs& a, const std::string& image_out, const std::string& trace_out) {
  ForwardModel m;
  m.blur = parse_blur_spec(a.blur);
  if (a.task == "sr") {
    m.stride = a.sr == 0 ? 2 : a.sr;
  } else if (a.sr > 1) {
    throw ConfigError("--stride-sr applies to --task sr only");
  }
  if (m.stride < 1) throw ConfigError("--stride-sr must be positive");

  ImageTensor y = read_image(a.in);
  std::optional<ImageTensor> ref;
  if (a.simulate) {
    ref = y;
    Rng rng(resolve_seed(a.seed));
    y = add_awgn(apply_forward(y, m), a.sigma / 255.0, rng);
  }
  if (!a.ref.empty()) ref = read_image(a.ref);
  const Index H = y.height() * m.stride;
  const Index W = y.width() * m.stride;
  if (ref && (ref->height() != H || ref->width() != W)) {
    throw DimensionError("reference size does not match the restored size");
  }

  const LoadedDenoiser d = load_denoiser(a.den);
  double lip = 1.0;
  Denoiser D = [](const ImageTensor& x) { return x; };
  if (d.net) {
    const double f = patch_lipschitz_factor(*d.plan, H, W);
    if (a.den.anchor != "self") {
      // A fixed anchor keeps the state certificate; the pilot is the
      // Tikhonov solution (A^T A + mu I)^{-1} A^T y.
      ImageTensor anchor = a.den.anchor == "pilot"
                               ? prox_datafit(ImageTensor(y.channels(), H, W), y, m, a.pilot_mu)
                               : apply_adjoint(y, m, H, W);
      if (a.den.anchor == "adjoint") anchor *= static_cast<double>(m.stride * m.stride);
      D = network_denoiser(*d.net, *d.plan, anchor);
      lip = d.cert.total_bound * f;
    } else {
      D = network_denoiser(*d.net, *d.plan);
      lip = d.cert.observation_sensitivity * f;
    }
  }
  emit("denoiser_lipschitz", lip);

  const double step =
      a.alpha_step == "auto" ? suggest_alpha_step(m, H, W) : std::stod(a.alpha_step);
  if (!(step > 0.0)) throw ConfigError("--alpha-step must be positive");
  emit("alpha_step", step);
  if (a.algo == "fbs") {
    const double bound = composite_contraction_bound(m, step, lip, H, W);
    emit("bound", bound);
    if (bound >= 1.0) {
      std::cerr << "warning: composite bound is not below one; convergence is not guaranteed\n";
      if (!a.allow_expansive) return kNotContractive;
    }
  }

  PnPOptions opts;
  opts.max_iters = a.iters;
  opts.tol = a.tol;
  opts.reference = ref;
  PnPTrace t;
  try {
    // DRS takes the reciprocal so both solvers share a fixed point.
    t = a.algo == "fbs" ? pnp_fbs(y, m, D, step, opts) : pnp_drs(y, m, D, 1.0 / step, opts);
  } catch (const DivergenceError& e) {
    const std::string path = trace_out.empty() ? image_out + ".trace.csv" : trace_out;
    write_trace_csv(path, e.trace());
    emit("trace", path);
    throw;
  }
  if (!image_out.empty()) write_image(image_out, t.final);
  if (!trace_out.empty()) {
    write_trace_csv(trace_out, t);
    emit("trace", trace_out);
  }
  emit("iterations", static_cast<double>(t.iterations()));
  emit("converged", t.converged ? "1" : "0");
  emit("residual", t.residual.empty() ? 0.0 : t.residual.back());
  if (ref) {
    if (m.stride == 1) emit("psnr_in", psnr(y, *ref));
    emit("psnr_out", psnr(t.final, *ref));
  }
  return kOk;
}

// certify ------------------------------------------------------------------------

struct CertifyArgs {
  std::string weights;
  std::string grid;
};

int cmd_certify(const CertifyArgs& a) {
  const NetworkParams net = load_weights(a.weights);
  Index h = net.patch, w = net.patch;
  if (!a.grid.empty()) {
    const auto x = a.grid.find('x');
    if (x == std::string::npos) throw ConfigError("--grid expects HxW");
    h = std::stol(a.grid.substr(0, x));
    w = std::stol(a.grid.substr(x + 1));
    if (h < 1 || w < 1) throw ConfigError("--grid sides must be positive");
  }
  try {
    const ContractionCertificate c = contraction_certificate(net, h, w);
    for (std::size_t l = 0; l < c.per_layer.size(); ++l) {
      const LayerBound& b = c.per_layer[l];
      std::cout << "layer " << l << " alpha=" << num(b.alpha) << " s=" << num(b.conv_norm)
                << " budget=" << num(b.conv_budget) << " L=" << num(b.bound) << '\n';
    }
    emit("grid", std::to_string(h) + "x" + std::to_string(w));
    emit("certificate", c.total_bound);
    emit("observation_sensitivity", c.observation_sensitivity);
    return c.total_bound < 1.0 ? kOk : kNotContractive;
  } catch (const CertificateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNotContractive;
  }
}

// train ------------------------------------------------------------------------------

struct TrainArgs {
  std::string out, data, curve;
  Index depth = 5, patch = 32, channels = 1;
  Index count = 200, val = 20, batch = 8;
  Index data_stride = 4;
  int epochs = 30;
  double lr = 1e-4, sigma = 25.0, momentum = 0.9, alpha = 0.1, threshold = 0.05;
  std::vector<int> decay = {10, 20};
  bool no_flips = false, no_rotations = false, freeze_alpha = false;
  std::optional<std::uint64_t> seed;
};

int cmd_train(const TrainArgs& a) {
  const std::uint64_t seed = resolve_seed(a.seed);
  Rng rng(seed);
  std::vector<ImageTensor> clean;
  if (a.data.empty()) {
    clean = synthetic_patches(a.count, a.patch, a.channels, rng);
  } else {
    clean = extract_patches(load_pnm_directory(a.data), a.patch, a.data_stride, a.count, rng);
    if (clean.empty()) throw ConfigError("no training patches found in " + a.data);
  }
  Rng vrng(seed + 1);
  const std::vector<ImageTensor> val = synthetic_patches(a.val, a.patch, a.channels, vrng);

  InitOptions o;
  o.depth = a.depth;
  o.patch = a.patch;
  o.channels = a.channels;
  o.alpha = a.alpha;
  o.threshold = a.threshold;
  o.ablation.learn_alpha = !a.freeze_alpha;
  Rng irng(seed + 2);
  const NetworkParams init = init_network(o, irng);

  TrainConfig cfg;
  cfg.lr = a.lr;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.sigma = a.sigma / 255.0;
  cfg.decay_epochs = a.decay;
  cfg.momentum = a.momentum;
  cfg.flips = !a.no_flips;
  cfg.rotations = !a.no_rotations;
  cfg.seed = seed;
  const TrainResult r = train(init, clean, cfg, val, [](const EpochStats& s, const NetworkParams&) {
    std::cerr << "epoch=" << s.epoch << " train_loss=" << num(s.train_loss)
              << " val_psnr=" << num(s.val_psnr) << " certificate=" << num(s.certificate_bound)
              << '\n';
  });
  save_weights(a.out, r.net);
  if (!a.curve.empty()) write_loss_curve_csv(a.curve, r.curve);
  if (!val.empty()) {
    emit("val_noisy_psnr", mean_noisy_psnr(val, cfg.sigma, seed ^ 0x9e3779b97f4a7c15ULL));
    emit("val_denoised_psnr",
         mean_denoised_psnr(r.net, val, cfg.sigma, seed ^ 0x9e3779b97f4a7c15ULL));
  }
  emit("certificate", contraction_certificate(r.net, a.patch, a.patch).total_bound);
  return kOk;
}

// perturb ----------------------------------------------------------------------------

struct PerturbArgs {
  std::string in, ref;
  std::string perturb = "none";
  std::optional<std::uint64_t> seed;
  DenoiserFlags den;
};

ImageTensor make_delta(const ImageTensor& x, const std::string& spec, Rng& rng) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const double v = colon == std::string::npos ? 0.0 : std::stod(spec.substr(colon + 1));
  if (kind == "none") return ImageTensor::ZerosLike(x);
  if (kind == "chroma" && colon == std::string::npos) return chroma_subsample(x) - x;
  if (colon == std::string::npos) throw ConfigError("perturbation needs a value: " + spec);
  if (kind == "awgn") return add_awgn(x, v / 255.0, rng) - x;
  if (kind == "scale") return v * x;
  throw ConfigError("unknown perturbation: " + spec);
}

int cmd_perturb(const PerturbArgs& a) {
  const ImageTensor x = read_image(a.in);
  Rng rng(resolve_seed(a.seed));
  const ImageTensor delta = make_delta(x, a.perturb, rng);
  const LoadedDenoiser d = load_denoiser(a.den);
  Denoiser D = [](const ImageTensor& v) { return v; };
  if (d.net) {
    D = a.den.anchor == "fixed" ? network_denoiser(*d.net, *d.plan, x)
                                : network_denoiser(*d.net, *d.plan);
  }
  const ImageTensor out = D(x);
  const ImageTensor out_p = D(x + delta);
  const double dn = delta.norm();
  const double on = distance(out_p, out);
  emit("delta_norm", dn);
  emit("output_change", on);
  emit("ratio", dn == 0.0 ? std::nan("") : on / dn);
  if (!a.ref.empty()) {
    const ImageTensor ref = read_image(a.ref);
    emit("psnr_clean", psnr(out, ref));
    emit("psnr_perturbed", psnr(out_p, ref));
  }
  return kOk;
}

// metrics ------------------------------------------------------------------------------

struct MetricsArgs {
  std::string a, b;
  double peak = 1.0;
  std::string mode = "joint";
};

int cmd_metrics(const MetricsArgs& m) {
  const MetricReport r = compare(read_image(m.a), read_image(m.b), m.peak,
                                 m.mode == "joint" ? PsnrMode::kJoint : PsnrMode::kChannelMean);
  emit("psnr", r.psnr_db);
  emit("ssim", r.ssim);
  for (std::size_t c = 0; c < r.channel_psnr_db.size(); ++c) {
    emit("psnr_c" + std::to_string(c), r.channel_psnr_db[c]);
    emit("ssim_c" + std::to_string(c), r.channel_ssim[c]);
  }
  return kOk;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Contractive wavelet-prox denoisers and plug-and-play restoration"};
  app.require_subcommand(1);
  app.allow_extras(false);

  DenoiseArgs da;
  auto* den = app.add_subcommand("denoise", "patchwise denoising");
  den->add_option("--in", da.in, "input image")->required();
  den->add_option("--out", da.out, "output image")->required();
  den->add_option("--ref", da.ref, "clean image for PSNR reporting");
  add_denoiser_flags(den, da.den);

  RestoreArgs ra;
  std::string restore_out, restore_trace;
  auto* res = app.add_subcommand("restore", "plug-and-play deblurring or super-resolution");
  add_restore_flags(res, ra);
  res->add_option("--out", restore_out, "restored image")->required();
  res->add_option("--trace", restore_trace, "convergence trace CSV");

  RestoreArgs ta;
  std::string trace_out;
  auto* tr = app.add_subcommand("trace", "run a restoration and export only its trace");
  add_restore_flags(tr, ta);
  tr->add_option("--out", trace_out, "trace CSV")->required();

  CertifyArgs ca;
  auto* cer = app.add_subcommand("certify", "print the contraction certificate");
  cer->add_option("--weights", ca.weights, "weights file")->required();
  cer->add_option("--grid", ca.grid, "certificate grid HxW (default PxP)");

  TrainArgs tra;
  auto* trn = app.add_subcommand("train", "train a denoiser");
  trn->add_option("--out", tra.out, "weights file to write")->required();
  trn->add_option("--data", tra.data, "directory of PGM/PPM images (default: synthetic)");
  trn->add_option("--curve", tra.curve, "loss curve CSV");
  trn->add_option("--depth", tra.depth, "layers M")->check(CLI::PositiveNumber);
  trn->add_option("--patch", tra.patch, "patch side P")->check(CLI::PositiveNumber);
  trn->add_option("--channels", tra.channels, "1 or 3")->check(CLI::IsMember({1, 3}));
  trn->add_option("--count", tra.count, "training patches")->check(CLI::PositiveNumber);
  trn->add_option("--val", tra.val, "validation patches")->check(CLI::NonNegativeNumber);
  trn->add_option("--data-stride", tra.data_stride, "crop stride for --data")
      ->check(CLI::PositiveNumber);
  trn->add_option("--epochs", tra.epochs, "epochs")->check(CLI::NonNegativeNumber);
  trn->add_option("--batch", tra.batch, "batch size")->check(CLI::PositiveNumber);
  trn->add_option("--lr", tra.lr, "learning rate")->check(CLI::PositiveNumber);
  trn->add_option("--momentum", tra.momentum, "momentum, 0 for plain SGD")
      ->check(CLI::Range(0.0, 0.999));
  trn->add_option("--sigma", tra.sigma, "training noise level (0-255 scale)");
  trn->add_option("--decay", tra.decay, "epochs at which lr drops tenfold");
  trn->add_option("--alpha", tra.alpha, "initial step size")->check(CLI::Range(0.001, 0.999));
  trn->add_option("--threshold", tra.threshold, "initial threshold")->check(CLI::PositiveNumber);
  trn->add_flag("--no-flips", tra.no_flips, "disable flip augmentation");
  trn->add_flag("--no-rotations", tra.no_rotations, "disable rotation augmentation");
  trn->add_flag("--freeze-alpha", tra.freeze_alpha, "keep step sizes at their initial value");
  trn->add_option("--seed", tra.seed, "seed (default CTRX_SEED or 0)");

  PerturbArgs pa;
  auto* per = app.add_subcommand("perturb", "measure the denoiser's response to a perturbation");
  per->add_option("--in", pa.in, "input image")->required();
  per->add_option("--perturb", pa.perturb, "none, chroma, awgn:<sigma> or scale:<eps>");
  per->add_option("--ref", pa.ref, "clean image for PSNR reporting");
  per->add_option("--seed", pa.seed, "seed (default CTRX_SEED or 0)");
  add_denoiser_flags(per, pa.den, {"self", "fixed"});

  MetricsArgs ma;
  auto* met = app.add_subcommand("metrics", "PSNR and SSIM between two images");
  met->add_option("--a", ma.a, "first image")->required();
  met->add_option("--b", ma.b, "second image")->required();
  met->add_option("--peak", ma.peak, "peak signal value")->check(CLI::PositiveNumber);
  met->add_option("--mode", ma.mode, "joint or mean")->check(CLI::IsMember({"joint", "mean"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  if (*den) return cmd_denoise(da);
  if (*res) return run_restore(ra, restore_out, restore_trace);
  if (*tr) return run_restore(ta, "", trace_out);
  if (*cer) return cmd_certify(ca);
  if (*trn) return cmd_train(tra);
  if (*per) return cmd_perturb(pa);
  return cmd_metrics(ma);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ctrx::CorruptionError& e) {
    std::cerr << "error: corrupt weights: " << e.what() << '\n';
    return kCorrupt;
  } catch (const ctrx::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const ctrx::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kDiverged;
  } catch (const ctrx::CertificateError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNotContractive;
  } catch (const ctrx::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ctrx::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ctrx::DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: bad numeric value: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
}
