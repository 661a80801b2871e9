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

#include <Eigen/Core>

#include <string>
#include <string_view>
#include <vector>

#include "ctrx/tensor.hpp"

namespace ctrx {

enum class WaveletKind { kHaar = 0, kDb4 = 1, kSym4 = 2 };

/// Orthonormal two-channel filter bank. highpass[k] = (-1)^k lowpass[L-1-k].
struct WaveletFamily {
  WaveletKind kind;
  std::string name;
  std::vector<double> lowpass;
  std::vector<double> highpass;
};

const WaveletFamily& wavelet_family(WaveletKind kind);
WaveletKind wavelet_kind_from_name(std::string_view name);
std::string_view wavelet_name(WaveletKind kind);

/// Layer-to-family assignment: haar, db4, sym4, haar, ... (0-based layer).
inline WaveletKind cycled_wavelet(Index layer) {
  return static_cast<WaveletKind>(layer % 3);
}

/// Single-level 2D subbands. The first letter names the filter applied along
/// rows (horizontal), the second along columns (vertical): `lh` is lowpass
/// horizontally and highpass vertically.
struct WaveletCoeffs {
  ImageTensor ll, lh, hl, hh;

  static constexpr int kBands = 4;

  /// Band order used for threshold layouts: lh, hl, hh, ll.
  ImageTensor& band(int b);
  const ImageTensor& band(int b) const;

  double squaredNorm() const {
    return ll.squaredNorm() + lh.squaredNorm() + hl.squaredNorm() +
           hh.squaredNorm();
  }
};

double dot(const WaveletCoeffs& a, const WaveletCoeffs& b);

/// Periodized orthonormal analysis, channel by channel. H and W must be even.
WaveletCoeffs dwt2(const ImageTensor& x, const WaveletFamily& family);

/// Synthesis; the exact inverse and adjoint of dwt2.
ImageTensor idwt2(const WaveletCoeffs& c, const WaveletFamily& family);

/// Shape of a threshold vector. Values are laid out as
/// [band][channel][row][col] with bands in WaveletCoeffs::band order; the
/// lowpass band is present only when `include_lowpass` is set, and the
/// channel axis collapses to one when `shared_across_channels` is set.
struct ThresholdLayout {
  Index channels = 1;
  Index rows = 1;
  Index cols = 1;
  bool shared_across_channels = false;
  bool include_lowpass = false;

  Index bands() const { return include_lowpass ? 4 : 3; }
  Index stored_channels() const {
    return shared_across_channels ? 1 : channels;
  }
  Index count() const { return bands() * stored_channels() * rows * cols; }
  Index offset(Index band, Index channel, Index r, Index c) const {
    const Index ch = shared_across_channels ? 0 : channel;
    return ((band * stored_channels() + ch) * rows + r) * cols + c;
  }

  /// Layout for a C x P x P patch.
  static ThresholdLayout ForPatch(Index channels, Index patch,
                                  bool shared = false,
                                  bool include_lowpass = false) {
    return ThresholdLayout{channels, patch / 2, patch / 2, shared,
                           include_lowpass};
  }
};

struct Thresholds {
  ThresholdLayout layout;
  Eigen::VectorXd values;
};

inline double soft_threshold(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

/// Soft-thresholds the detail subbands (and ll only when the layout asks
/// for it) with per-coefficient thresholds. Throws ValidationError if any
/// threshold is not strictly positive.
WaveletCoeffs soft_threshold_hf(const WaveletCoeffs& c, const Thresholds& t);

}  // namespace ctrx
