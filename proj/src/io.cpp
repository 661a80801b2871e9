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

#include "ctrx/io.hpp"

#include <zlib.h>

#include <Eigen/LU>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <json.hpp>

namespace ctrx {
namespace {

using Bytes = std::vector<std::uint8_t>;
using nlohmann::json;

constexpr char kRawMagic[4] = {'C', 'T', 'R', 'F'};
constexpr char kWeightsMagic[4] = {'C', 'T', 'R', 'X'};

// Little-endian writer.
class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64_block(const double* p, Index n) {
    u64(static_cast<std::uint64_t>(n));
    for (Index i = 0; i < n; ++i) f64(p[i]);
  }
  Bytes out;
};

template <typename E>
class Reader {
 public:
  Reader(const Bytes& b, std::size_t end) : b_(b), end_(end) {}
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw E("truncated data");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{b_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{b_[pos_ + i]} << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  Eigen::VectorXd f64_block(Index expected, const char* what) {
    const std::uint64_t n = u64();
    if (n != static_cast<std::uint64_t>(expected)) {
      throw E(std::string("block '") + what + "' has " + std::to_string(n) +
              " values, expected " + std::to_string(expected));
    }
    need(8 * n);
    Eigen::VectorXd v(expected);
    for (Index i = 0; i < expected; ++i) v[i] = f64();
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  const Bytes& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::string lower_extension(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext;
}

bool is_pnm_extension(const std::string& ext) {
  return ext == ".pgm" || ext == ".ppm" || ext == ".pnm";
}

// Next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(const Bytes& b, std::size_t& pos) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  std::string tok;
  while (pos < b.size() && !std::isspace(b[pos]) && b[pos] != '#') {
    tok.push_back(static_cast<char>(b[pos++]));
  }
  if (tok.empty()) throw IoError("malformed PNM header");
  return tok;
}

long pnm_number(const Bytes& b, std::size_t& pos, const char* what) {
  const std::string tok = pnm_token(b, pos);
  if (!std::all_of(tok.begin(), tok.end(),
                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) ||
      tok.size() > 9) {
    throw IoError(std::string("malformed PNM ") + what + ": '" + tok + "'");
  }
  return std::stol(tok);
}

json network_metadata(const NetworkParams& net) {
  json families = json::array();
  for (const auto& l : net.layers) families.push_back(std::string(wavelet_name(l.family)));
  const LayerParams& first = net.layers.front();
  return json{
      {"depth", net.depth()},
      {"patch", net.patch},
      {"channels", net.channels},
      {"eps", net.eps},
      {"kernel_h", first.kernel.k_h()},
      {"kernel_w", first.kernel.k_w()},
      {"families", families},
      {"shared_thresholds", first.layout.shared_across_channels},
      {"threshold_lowpass", first.layout.include_lowpass},
      {"ablation",
       {{"prox", net.ablation.prox},
        {"conv", net.ablation.conv},
        {"learn_alpha", net.ablation.learn_alpha}}},
  };
}

}  // namespace

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  Bytes b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read error on '" + path + "'");
  return b;
}

void write_file(const std::string& path, const Bytes& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write error on '" + path + "'");
}

ImageFormat format_for_path(const std::string& path, Index channels) {
  if (!is_pnm_extension(lower_extension(path))) return ImageFormat::kRaw;
  if (channels == 1) return ImageFormat::kPgm;
  if (channels == 3) return ImageFormat::kPpm;
  throw IoError("PNM output needs 1 or 3 channels, got " + std::to_string(channels));
}

Bytes encode_raw(const ImageTensor& x) {
  Writer w;
  w.bytes(kRawMagic, 4);
  w.u32(static_cast<std::uint32_t>(x.channels()));
  w.u32(static_cast<std::uint32_t>(x.height()));
  w.u32(static_cast<std::uint32_t>(x.width()));
  for (Index i = 0; i < x.size(); ++i) w.f64(x.data()[i]);
  return w.out;
}

ImageTensor decode_raw(const Bytes& bytes) {
  Reader<IoError> r(bytes, bytes.size());
  if (r.str(4) != std::string(kRawMagic, 4)) throw IoError("not a raw image");
  const Index c = r.u32();
  const Index h = r.u32();
  const Index w = r.u32();
  if (c == 0 || h == 0 || w == 0) throw IoError("raw image has a zero dimension");
  const std::uint64_t n = static_cast<std::uint64_t>(c) * h * w;
  if (bytes.size() - r.pos() != 8 * n) {
    throw IoError("raw image payload has " + std::to_string(bytes.size() - r.pos()) +
                  " bytes, expected " + std::to_string(8 * n));
  }
  ImageTensor x(c, h, w);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = r.f64();
  return x;
}

Bytes encode_pnm(const ImageTensor& x, int maxval) {
  if (maxval != 255 && maxval != 65535) throw IoError("PNM maxval must be 255 or 65535");
  if (x.channels() != 1 && x.channels() != 3) {
    throw IoError("PNM needs 1 or 3 channels, got " + std::to_string(x.channels()));
  }
  const std::string header = std::string(x.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(x.width()) + " " +
                             std::to_string(x.height()) + "\n" +
                             std::to_string(maxval) + "\n";
  Bytes out(header.begin(), header.end());
  for (Index r = 0; r < x.height(); ++r) {
    for (Index q = 0; q < x.width(); ++q) {
      for (Index c = 0; c < x.channels(); ++c) {
        const double v = std::clamp(x(c, r, q), 0.0, 1.0);
        const auto s = static_cast<unsigned>(std::lround(v * maxval));
        if (maxval > 255) out.push_back(static_cast<std::uint8_t>(s >> 8));
        out.push_back(static_cast<std::uint8_t>(s & 0xFF));
      }
    }
  }
  return out;
}

ImageTensor decode_pnm(const Bytes& bytes) {
  std::size_t pos = 0;
  const std::string magic = pnm_token(bytes, pos);
  Index channels = 0;
  if (magic == "P5") {
    channels = 1;
  } else if (magic == "P6") {
    channels = 3;
  } else {
    throw IoError("unsupported PNM magic '" + magic + "'");
  }
  const long w = pnm_number(bytes, pos, "width");
  const long h = pnm_number(bytes, pos, "height");
  const long maxval = pnm_number(bytes, pos, "maxval");
  if (w <= 0 || h <= 0) throw IoError("PNM dimensions must be positive");
  if (maxval != 255 && maxval != 65535) {
    throw IoError("PNM maxval " + std::to_string(maxval) + " is not 255 or 65535");
  }
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw IoError("malformed PNM header");
  }
  ++pos;  // single whitespace before the raster
  const std::size_t sample = maxval > 255 ? 2 : 1;
  const std::size_t need = static_cast<std::size_t>(w) * h * channels * sample;
  if (bytes.size() - pos < need) throw IoError("truncated PNM raster");
  ImageTensor x(channels, h, w);
  for (Index r = 0; r < h; ++r) {
    for (Index q = 0; q < w; ++q) {
      for (Index c = 0; c < channels; ++c) {
        unsigned v = bytes[pos++];
        if (sample == 2) v = (v << 8) | bytes[pos++];
        x(c, r, q) = static_cast<double>(v) / static_cast<double>(maxval);
      }
    }
  }
  return x;
}

ImageTensor read_image(const std::string& path) {
  const Bytes b = read_file(path);
  if (b.size() >= 4 && std::memcmp(b.data(), kRawMagic, 4) == 0) return decode_raw(b);
  if (b.size() >= 2 && b[0] == 'P') return decode_pnm(b);
  throw IoError("'" + path + "' is neither PNM nor a raw image");
}

void write_image(const std::string& path, const ImageTensor& x, int maxval) {
  if (format_for_path(path, x.channels()) == ImageFormat::kRaw) {
    write_file(path, encode_raw(x));
  } else {
    write_file(path, encode_pnm(x, maxval));
  }
}

std::vector<ImageTensor> load_pnm_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("'" + dir + "' is not a directory");
  std::vector<std::string> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_pnm_extension(lower_extension(e.path().string()))) {
      paths.push_back(e.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<ImageTensor> out;
  for (const auto& p : paths) out.push_back(read_image(p));
  return out;
}

ImageTensor add_awgn(const ImageTensor& x, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw ValidationError("noise sigma must be non-negative");
  ImageTensor y = x;
  if (sigma == 0.0) return y;
  for (Index i = 0; i < y.size(); ++i) y.data()[i] += sigma * rng.normal();
  return y;
}

namespace {

// Full-range BT.601 (JPEG) RGB -> YCbCr, chroma centred on 0.
Eigen::Matrix3d bt601_forward() {
  Eigen::Matrix3d m;
  m << 0.299, 0.587, 0.114,
       -0.299 / 1.772, -0.587 / 1.772, 0.886 / 1.772,
       0.701 / 1.402, -0.587 / 1.402, -0.114 / 1.402;
  return m;
}

ImageTensor mix_channels(const ImageTensor& x, const Eigen::Matrix3d& m) {
  if (x.channels() != 3) {
    throw DimensionError("colour conversion needs 3 channels, got " + x.shape_string());
  }
  ImageTensor out(3, x.height(), x.width());
  for (Index o = 0; o < 3; ++o) {
    for (Index i = 0; i < 3; ++i) out.plane(o) += m(o, i) * x.plane(i);
  }
  return out;
}

}  // namespace

ImageTensor rgb_to_ycbcr(const ImageTensor& rgb) {
  return mix_channels(rgb, bt601_forward());
}

ImageTensor ycbcr_to_rgb(const ImageTensor& ycc) {
  static const Eigen::Matrix3d inv = bt601_forward().inverse();
  return mix_channels(ycc, inv);
}

ImageTensor chroma_subsample(const ImageTensor& rgb) {
  if (rgb.channels() != 3) {
    throw DimensionError("chroma subsampling needs 3 channels, got " + rgb.shape_string());
  }
  if (rgb.height() % 2 != 0 || rgb.width() % 2 != 0) {
    throw DimensionError("chroma subsampling needs even sizes, got " + rgb.shape_string());
  }
  ImageTensor ycc = rgb_to_ycbcr(rgb);
  for (Index c = 1; c < 3; ++c) {
    auto p = ycc.plane(c);
    for (Index r = 0; r < rgb.height(); r += 2) {
      for (Index q = 0; q < rgb.width(); q += 2) {
        const double m = 0.25 * p.block(r, q, 2, 2).sum();
        p.block(r, q, 2, 2).setConstant(m);
      }
    }
  }
  return ycbcr_to_rgb(ycc);
}

Bytes encode_weights(const NetworkParams& net) {
  validate_network(net);
  const LayerParams& first = net.layers.front();
  for (const auto& l : net.layers) {
    if (!l.kernel.same_shape(first.kernel) ||
        l.layout.shared_across_channels != first.layout.shared_across_channels ||
        l.layout.include_lowpass != first.layout.include_lowpass) {
      throw ValidationError("weights format needs one kernel shape and threshold layout");
    }
  }
  const std::string meta = network_metadata(net).dump();
  Writer w;
  w.bytes(kWeightsMagic, 4);
  w.u32(kWeightsVersion);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.bytes(meta.data(), meta.size());
  for (const auto& l : net.layers) {
    w.f64_block(&l.alpha, 1);
    w.f64_block(l.raw_thresholds.data(), l.raw_thresholds.size());
    w.f64_block(l.kernel.weights().data(), l.kernel.size());
  }
  w.u32(crc32_of(w.out.data(), w.out.size()));
  return w.out;
}

NetworkParams decode_weights(const Bytes& bytes) {
  if (bytes.size() < 16) throw CorruptionError("weights file is truncated");
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= std::uint32_t{bytes[body + i]} << (8 * i);
  if (crc32_of(bytes.data(), body) != stored) {
    throw CorruptionError("weights file failed its CRC32 check");
  }
  Reader<CorruptionError> r(bytes, body);
  if (r.str(4) != std::string(kWeightsMagic, 4)) {
    throw CorruptionError("not a weights file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kWeightsVersion) {
    throw CorruptionError("unsupported weights version " + std::to_string(version));
  }
  const std::uint32_t meta_len = r.u32();
  json meta;
  NetworkParams net;
  Index depth = 0;
  Index kh = 0;
  Index kw = 0;
  bool shared = false;
  bool lowpass = false;
  std::vector<std::string> families;
  try {
    meta = json::parse(r.str(meta_len));
    depth = meta.at("depth").get<Index>();
    net.patch = meta.at("patch").get<Index>();
    net.channels = meta.at("channels").get<Index>();
    net.eps = meta.at("eps").get<double>();
    kh = meta.at("kernel_h").get<Index>();
    kw = meta.at("kernel_w").get<Index>();
    families = meta.at("families").get<std::vector<std::string>>();
    shared = meta.at("shared_thresholds").get<bool>();
    lowpass = meta.at("threshold_lowpass").get<bool>();
    const json& ab = meta.at("ablation");
    net.ablation.prox = ab.at("prox").get<bool>();
    net.ablation.conv = ab.at("conv").get<bool>();
    net.ablation.learn_alpha = ab.at("learn_alpha").get<bool>();
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("bad weights metadata: ") + e.what());
  }
  if (depth <= 0 || net.patch <= 0 || net.patch % 2 != 0 || net.channels <= 0 ||
      kh <= 0 || kw <= 0 || kh % 2 == 0 || kw % 2 == 0 ||
      static_cast<Index>(families.size()) != depth) {
    throw CorruptionError("weights metadata describes an impossible shape");
  }
  const ThresholdLayout layout =
      ThresholdLayout::ForPatch(net.channels, net.patch, shared, lowpass);
  try {
    for (Index l = 0; l < depth; ++l) {
      LayerParams p;
      p.family = wavelet_kind_from_name(families[static_cast<std::size_t>(l)]);
      p.layout = layout;
      p.alpha = r.f64_block(1, "alpha")[0];
      p.raw_thresholds = r.f64_block(layout.count(), "thresholds");
      p.kernel = ConvKernel(net.channels, net.channels, kh, kw,
                            r.f64_block(net.channels * net.channels * kh * kw, "kernel"));
      net.layers.push_back(std::move(p));
    }
    if (r.pos() != body) throw CorruptionError("trailing bytes after the last layer");
    validate_network(net);
  } catch (const CorruptionError&) {
    throw;
  } catch (const Error& e) {
    throw CorruptionError(std::string("inconsistent weights: ") + e.what());
  }
  return net;
}

void save_weights(const std::string& path, const NetworkParams& net) {
  write_file(path, encode_weights(net));
}

NetworkParams load_weights(const std::string& path) {
  return decode_weights(read_file(path));
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CTRX_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') throw ValidationError("CTRX_SEED must be an unsigned integer");
    return v;
  }
  return 0;
}

}  // namespace ctrx
