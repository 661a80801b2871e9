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

#include <complex>

namespace ctrx {

using ComplexPlane =
    Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic,
                  Eigen::RowMajor>;
using RealPlane =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Unnormalized forward 2D DFT, X[u,v] = sum x[r,c] exp(-2 pi i (ur/H + vc/W)).
ComplexPlane fft2(const Eigen::Ref<const RealPlane>& x);
ComplexPlane fft2(const ComplexPlane& x);

// Inverse of fft2 (includes the 1/(HW) factor); imaginary part is dropped.
RealPlane ifft2_real(const ComplexPlane& x);

}  // namespace ctrx
