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

#include <span>
#include <vector>

#include "chunkformer/chunking.hpp"
#include "chunkformer/config.hpp"
#include "chunkformer/errors.hpp"
#include "chunkformer/tensor.hpp"

namespace chunkformer {

template <typename T>
struct ConvParams {
    LayerNorm<T> pre_norm;
    Linear<T> pointwise_in;  // d -> 2d, followed by GLU
    Matrix<T> depthwise;     // kernel_size × d, tap-major
    std::vector<T> depthwise_bias;
    LayerNorm<T> norm;       // replaces batch norm
    Linear<T> pointwise_out; // d -> d

    int kernel_size() const { return int(depthwise.rows()); }
};

/// pre-norm -> pointwise -> GLU, position by position. Output is the
/// depthwise convolution's input, which is also what the conv cache stores.
template <typename T>
Matrix<T> conv_pointwise_in(const Matrix<T> &x, const ConvParams<T> &p) {
    return glu(p.pointwise_in.forward(p.pre_norm.forward(x)));
}

/// norm -> swish -> pointwise, position by position.
template <typename T>
Matrix<T> conv_pointwise_out(const Matrix<T> &x, const ConvParams<T> &p) {
    Matrix<T> y = p.norm.forward(x);
    swish_inplace(y);
    return p.pointwise_out.forward(y);
}

/// Depthwise convolution of each row's chunk positions. Row layout is
/// [l_conv left | c chunk | r right]; masked positions and taps that fall
/// past the row end read as zero. Output is (B * c) × d.
template <typename T>
Matrix<T> chunk_depthwise_conv(const ChunkBatch<T> &rows, const Matrix<T> &kernel, std::span<const T> bias) {
    const int l_conv = derive_l_conv(int(kernel.rows()));
    CF_CHECK(rows.left == l_conv, ErrorKind::config,
             "conv rows carry " + std::to_string(rows.left) + " left frames, kernel needs " + std::to_string(l_conv));
    CF_CHECK(kernel.cols() == rows.dim() && bias.size() == rows.dim(), ErrorKind::shape, "depthwise: channel mismatch");
    const std::size_t d = rows.dim();
    const int width = rows.width(), taps = int(kernel.rows());
    Matrix<T> out(rows.batch_size() * std::size_t(rows.chunk), d);
    for (std::size_t b = 0; b < rows.batch_size(); ++b) {
        for (int j = 0; j < rows.chunk; ++j) {
            auto y = out.row(b * std::size_t(rows.chunk) + std::size_t(j));
            std::copy(bias.begin(), bias.end(), y.begin());
            const int center = rows.left + j;
            for (int k = 0; k < taps; ++k) {
                const int p = center + k - l_conv;
                if (p < 0 || p >= width || !rows.valid(b, p)) continue;
                const auto x = rows.at(b, p);
                const T *w = &kernel(std::size_t(k), 0);
                for (std::size_t ch = 0; ch < d; ++ch) y[ch] += w[ch] * x[ch];
            }
        }
    }
    return out;
}

/// Whole module on rows of conv-module input laid out [l_conv | c | r].
/// Returns (B * c) × d, without the residual.
template <typename T>
Matrix<T> conv_module_forward(const ChunkBatch<T> &rows, const ConvParams<T> &p) {
    ChunkBatch<T> glu_rows = rows;
    glu_rows.rows = conv_pointwise_in(rows.rows, p);
    return conv_pointwise_out(chunk_depthwise_conv(glu_rows, p.depthwise, std::span<const T>(p.depthwise_bias)), p);
}

/// Conv cache for the next step: last l_conv real frames of the depthwise input.
template <typename T>
Matrix<T> update_conv_cache(const Matrix<T> &old_cache, const Matrix<T> &emitted, int l_conv) {
    return roll_cache(old_cache, emitted, l_conv);
}

} // namespace chunkformer
