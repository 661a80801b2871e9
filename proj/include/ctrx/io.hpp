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

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ctrx/layers.hpp"
#include "ctrx/rng.hpp"
#include "ctrx/tensor.hpp"

namespace ctrx {

// Images ---------------------------------------------------------------------
//
// Binary PGM (P5) and PPM (P6) with maxval 255 or 65535 (16-bit samples are
// big-endian), mapped to [0, 1]. The raw format is the magic "CTRF" followed
// by little-endian u32 C, H, W and C*H*W little-endian f64 values in
// ImageTensor order.

enum class ImageFormat { kPgm, kPpm, kRaw };

/// Format chosen from the extension: .pgm/.ppm/.pnm write PNM (P5 for one
/// channel, P6 for three), anything else the raw format.
ImageFormat format_for_path(const std::string& path, Index channels);

ImageTensor read_image(const std::string& path);
/// `maxval` applies to PNM output only; values are clamped to [0, 1] and
/// rounded.
void write_image(const std::string& path, const ImageTensor& x,
                 int maxval = 255);

std::vector<std::uint8_t> encode_raw(const ImageTensor& x);
ImageTensor decode_raw(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pnm(const ImageTensor& x, int maxval = 255);
ImageTensor decode_pnm(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);

/// Every .pgm/.ppm/.pnm file directly inside `dir`, sorted by name.
std::vector<ImageTensor> load_pnm_directory(const std::string& dir);

// Degradations ---------------------------------------------------------------

/// x + sigma * N(0, 1) per entry; sigma is in intensity units (25/255 for
/// the customary "sigma = 25").
ImageTensor add_awgn(const ImageTensor& x, double sigma, Rng& rng);

/// Full-range BT.601 conversions on 3-channel tensors.
ImageTensor rgb_to_ycbcr(const ImageTensor& rgb);
ImageTensor ycbcr_to_rgb(const ImageTensor& ycc);

/// RGB -> YCbCr, 2x2 box-average of Cb and Cr, nearest-neighbour upsample,
/// back to RGB. Luma is untouched. Needs 3 channels and even sizes.
ImageTensor chroma_subsample(const ImageTensor& rgb);

// Weights --------------------------------------------------------------------
//
// "CTRX", u32 version, u32 metadata length, UTF-8 JSON metadata, then per
// layer three blocks (alpha, raw thresholds, kernel), each a u64 element
// count followed by that many f64. Little-endian throughout; a trailing
// CRC32 covers every preceding byte.

inline constexpr std::uint32_t kWeightsVersion = 1;

std::vector<std::uint8_t> encode_weights(const NetworkParams& net);
NetworkParams decode_weights(const std::vector<std::uint8_t>& bytes);
void save_weights(const std::string& path, const NetworkParams& net);
NetworkParams load_weights(const std::string& path);

/// zlib-compatible CRC32.
std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n);

// Seeds ----------------------------------------------------------------------

/// `flag` when given, else the CTRX_SEED environment variable, else 0.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag);

}  // namespace ctrx
