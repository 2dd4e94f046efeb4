// Copyright (c) 2026 The w4ax Authors. All Rights Reserved.
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

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace w4ax {

// Error hierarchy. Every failure the engine reports derives from Error so
// callers (the CLI in particular) can map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or channel counts disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside the representable range of its storage type.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Input data is unusable (non-finite values, empty samples).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A packed buffer has the wrong nibble order or interleave for the request.
class LayoutError : public Error {
 public:
  using Error::Error;
};

/// Internal bookkeeping broke (missing partial sums, lost tasks).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// On-disk data could not be parsed or does not match the expected schema.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A bounded container (e.g. the KV cache) is full.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Dense row-major matrix. Used for real-valued activations and weights
/// (T = double) and for integer operands in tests and oracles.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw DimensionError("matrix data size " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(rows_) + "x" +
                           std::to_string(cols_));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using MatrixD = Matrix<double>;

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

}  // namespace w4ax
