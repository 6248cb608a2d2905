// Copyright 2026 The chunkformer-cpp Authors.
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

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "chunkformer/errors.hpp"

namespace chunkformer {

// ─── Matrix ─────────────────────────────────────────────────────────────────

/// Dense row-major matrix. Rows are time frames everywhere in this library.
template <typename T>
class Matrix {
  public:
    using value_type = T;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    template <typename U>
    static Matrix cast(const Matrix<U> &other) {
        Matrix m(other.rows(), other.cols());
        std::transform(other.data().begin(), other.data().end(), m.data_.begin(),
                       [](U v) { return static_cast<T>(v); });
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T &operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    /// Appends the rows of `other`; column counts must agree.
    void append_rows(const Matrix &other) {
        if (empty() && rows_ == 0) cols_ = other.cols_;
        CF_CHECK(other.cols_ == cols_, ErrorKind::shape, "append_rows: column mismatch");
        data_.insert(data_.end(), other.data_.begin(), other.data_.end());
        rows_ += other.rows_;
    }

    /// Copy of rows [begin, end).
    Matrix slice_rows(std::size_t begin, std::size_t end) const {
        CF_CHECK(begin <= end && end <= rows_, ErrorKind::shape, "slice_rows out of range");
        Matrix m(end - begin, cols_);
        std::copy(data_.begin() + begin * cols_, data_.begin() + end * cols_, m.data_.begin());
        return m;
    }

    bool operator==(const Matrix &) const = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

// ─── Layers ─────────────────────────────────────────────────────────────────

/// Affine map y = x W + b with W stored input-major (in × out) so the inner
/// loop is a contiguous axpy over outputs.
template <typename T>
struct Linear {
    Matrix<T> weight; // in × out
    std::vector<T> bias; // empty means no bias

    std::size_t in_features() const { return weight.rows(); }
    std::size_t out_features() const { return weight.cols(); }

    void apply(std::span<const T> x, std::span<T> y) const {
        const std::size_t in = weight.rows(), out = weight.cols();
        assert(x.size() == in && y.size() == out);
        if (bias.empty())
            std::fill(y.begin(), y.end(), T(0));
        else
            std::copy(bias.begin(), bias.end(), y.begin());
        for (std::size_t k = 0; k < in; ++k) {
            const T xk = x[k];
            const T *w = &weight(k, 0);
            for (std::size_t o = 0; o < out; ++o) y[o] += xk * w[o];
        }
    }

    Matrix<T> forward(const Matrix<T> &x) const {
        CF_CHECK(x.cols() == in_features(), ErrorKind::shape, "linear: input width mismatch");
        Matrix<T> y(x.rows(), out_features());
        for (std::size_t i = 0; i < x.rows(); ++i) apply(x.row(i), y.row(i));
        return y;
    }
};

template <typename T>
struct LayerNorm {
    std::vector<T> gamma;
    std::vector<T> beta;
    T eps = T(1e-5);

    void apply(std::span<const T> x, std::span<T> y) const {
        const std::size_t n = x.size();
        T mean = 0;
        for (T v : x) mean += v;
        mean /= T(n);
        T var = 0;
        for (T v : x) var += (v - mean) * (v - mean);
        var /= T(n);
        const T inv = T(1) / std::sqrt(var + eps);
        for (std::size_t i = 0; i < n; ++i) y[i] = (x[i] - mean) * inv * gamma[i] + beta[i];
    }

    Matrix<T> forward(const Matrix<T> &x) const {
        Matrix<T> y(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i) apply(x.row(i), y.row(i));
        return y;
    }
};

template <typename T>
inline T swish(T x) {
    return x / (T(1) + std::exp(-x));
}

template <typename T>
inline T sigmoid(T x) {
    return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void swish_inplace(Matrix<T> &m) {
    for (T &v : m.data()) v = swish(v);
}

/// Gated linear unit over the feature axis: first half * sigmoid(second half).
template <typename T>
Matrix<T> glu(const Matrix<T> &x) {
    const std::size_t half = x.cols() / 2;
    Matrix<T> y(x.rows(), half);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < half; ++j) y(i, j) = x(i, j) * sigmoid(x(i, j + half));
    return y;
}

template <typename T>
void add_inplace(Matrix<T> &a, const Matrix<T> &b, T scale = T(1)) {
    CF_CHECK(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::shape, "add: shape mismatch");
    auto ad = a.data();
    auto bd = b.data();
    for (std::size_t i = 0; i < ad.size(); ++i) ad[i] += scale * bd[i];
}

} // namespace chunkformer
