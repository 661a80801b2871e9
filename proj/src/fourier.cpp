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

#include "ctrx/fourier.hpp"

#include <unsupported/Eigen/FFT>

#include <vector>

namespace ctrx {
namespace {

using cd = std::complex<double>;
using Index = Eigen::Index;

void transform_rows(ComplexPlane& x, bool inverse) {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<cd> in(x.cols()), out;
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) in[c] = x(r, c);
    if (inverse) {
      fft.inv(out, in);
    } else {
      fft.fwd(out, in);
    }
    for (Index c = 0; c < x.cols(); ++c) x(r, c) = out[c];
  }
}

ComplexPlane transform(ComplexPlane x, bool inverse) {
  transform_rows(x, inverse);
  ComplexPlane t = x.transpose();
  transform_rows(t, inverse);
  return t.transpose();
}

}  // namespace

ComplexPlane fft2(const Eigen::Ref<const RealPlane>& x) {
  return transform(x.cast<cd>(), false);
}

ComplexPlane fft2(const ComplexPlane& x) { return transform(x, false); }

RealPlane ifft2_real(const ComplexPlane& x) {
  ComplexPlane y = transform(x, true);
  return y.real() / static_cast<double>(x.rows() * x.cols());
}

}  // namespace ctrx
