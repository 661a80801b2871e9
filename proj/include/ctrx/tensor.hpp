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
#include <utility>

#include "ctrx/errors.hpp"

namespace ctrx {

using Index = Eigen::Index;

/// Dense C x H x W field stored row-major in (channel, row, col) order.
///
/// The flat storage is an Eigen vector, so whole-tensor arithmetic goes
/// through `data()` and per-channel work through `plane()`.
template <typename Scalar>
class Tensor3 {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using PlaneMatrix =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Plane = Eigen::Map<PlaneMatrix>;
  using ConstPlane = Eigen::Map<const PlaneMatrix>;

  Tensor3() = default;

  Tensor3(Index channels, Index height, Index width)
      : channels_(channels), height_(height), width_(width) {
    if (channels <= 0 || height <= 0 || width <= 0) {
      throw DimensionError("tensor dimensions must be positive");
    }
    data_ = Vector::Zero(channels * height * width);
  }

  Tensor3(Index channels, Index height, Index width, Vector data)
      : Tensor3(channels, height, width) {
    if (data.size() != data_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape");
    }
    data_ = std::move(data);
  }

  static Tensor3 Constant(Index channels, Index height, Index width,
                          Scalar value) {
    Tensor3 t(channels, height, width);
    t.data_.setConstant(value);
    return t;
  }

  static Tensor3 ZerosLike(const Tensor3& other) {
    return Tensor3(other.channels_, other.height_, other.width_);
  }

  Index channels() const { return channels_; }
  Index height() const { return height_; }
  Index width() const { return width_; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  bool same_shape(const Tensor3& o) const {
    return channels_ == o.channels_ && height_ == o.height_ &&
           width_ == o.width_;
  }

  Scalar& operator()(Index c, Index r, Index col) {
    return data_[(c * height_ + r) * width_ + col];
  }
  const Scalar& operator()(Index c, Index r, Index col) const {
    return data_[(c * height_ + r) * width_ + col];
  }

  Plane plane(Index c) {
    return Plane(data_.data() + c * height_ * width_, height_, width_);
  }
  ConstPlane plane(Index c) const {
    return ConstPlane(data_.data() + c * height_ * width_, height_, width_);
  }

  Vector& data() { return data_; }
  const Vector& data() const { return data_; }

  Scalar norm() const { return data_.norm(); }
  Scalar squaredNorm() const { return data_.squaredNorm(); }
  bool allFinite() const { return data_.allFinite(); }

  Tensor3& operator+=(const Tensor3& o) {
    require_same_shape(o);
    data_ += o.data_;
    return *this;
  }
  Tensor3& operator-=(const Tensor3& o) {
    require_same_shape(o);
    data_ -= o.data_;
    return *this;
  }
  Tensor3& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }

  void require_same_shape(const Tensor3& o) const {
    if (!same_shape(o)) {
      throw DimensionError("tensor shape mismatch: " + shape_string() +
                           " vs " + o.shape_string());
    }
  }

  std::string shape_string() const {
    return std::to_string(channels_) + "x" + std::to_string(height_) + "x" +
           std::to_string(width_);
  }

 private:
  Index channels_ = 0;
  Index height_ = 0;
  Index width_ = 0;
  Vector data_;
};

template <typename Scalar>
Tensor3<Scalar> operator+(Tensor3<Scalar> a, const Tensor3<Scalar>& b) {
  a += b;
  return a;
}

template <typename Scalar>
Tensor3<Scalar> operator-(Tensor3<Scalar> a, const Tensor3<Scalar>& b) {
  a -= b;
  return a;
}

template <typename Scalar>
Tensor3<Scalar> operator*(Scalar s, Tensor3<Scalar> a) {
  a *= s;
  return a;
}

template <typename Scalar>
Scalar dot(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b) {
  a.require_same_shape(b);
  return a.data().dot(b.data());
}

template <typename Scalar>
Scalar distance(const Tensor3<Scalar>& a, const Tensor3<Scalar>& b) {
  a.require_same_shape(b);
  return (a.data() - b.data()).norm();
}

/// c_out x c_in x k_h x k_w convolution weights; spatial extents odd.
template <typename Scalar>
class Kernel4 {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Kernel4() = default;

  Kernel4(Index c_out, Index c_in, Index k_h, Index k_w)
      : c_out_(c_out), c_in_(c_in), k_h_(k_h), k_w_(k_w) {
    if (c_out <= 0 || c_in <= 0 || k_h <= 0 || k_w <= 0) {
      throw DimensionError("kernel dimensions must be positive");
    }
    if (k_h % 2 == 0 || k_w % 2 == 0) {
      throw DimensionError("kernel spatial extents must be odd");
    }
    weights_ = Vector::Zero(c_out * c_in * k_h * k_w);
  }

  Kernel4(Index c_out, Index c_in, Index k_h, Index k_w, Vector weights)
      : Kernel4(c_out, c_in, k_h, k_w) {
    if (weights.size() != weights_.size()) {
      throw DimensionError("kernel weight count does not match shape");
    }
    weights_ = std::move(weights);
  }

  /// c x c kernel that maps every channel to itself.
  static Kernel4 Identity(Index channels, Index k = 1) {
    Kernel4 kern(channels, channels, k, k);
    for (Index c = 0; c < channels; ++c) kern(c, c, k / 2, k / 2) = Scalar(1);
    return kern;
  }

  Index c_out() const { return c_out_; }
  Index c_in() const { return c_in_; }
  Index k_h() const { return k_h_; }
  Index k_w() const { return k_w_; }
  Index center_h() const { return k_h_ / 2; }
  Index center_w() const { return k_w_ / 2; }
  Index size() const { return weights_.size(); }

  Scalar& operator()(Index o, Index i, Index a, Index b) {
    return weights_[((o * c_in_ + i) * k_h_ + a) * k_w_ + b];
  }
  const Scalar& operator()(Index o, Index i, Index a, Index b) const {
    return weights_[((o * c_in_ + i) * k_h_ + a) * k_w_ + b];
  }

  Vector& weights() { return weights_; }
  const Vector& weights() const { return weights_; }

  bool same_shape(const Kernel4& o) const {
    return c_out_ == o.c_out_ && c_in_ == o.c_in_ && k_h_ == o.k_h_ &&
           k_w_ == o.k_w_;
  }

 private:
  Index c_out_ = 0;
  Index c_in_ = 0;
  Index k_h_ = 0;
  Index k_w_ = 0;
  Vector weights_;
};

using ImageTensor = Tensor3<double>;
using ConvKernel = Kernel4<double>;

}  // namespace ctrx
