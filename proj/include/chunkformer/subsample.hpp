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

#include "chunkformer/errors.hpp"
#include "chunkformer/model.hpp"
#include "chunkformer/tensor.hpp"

namespace chunkformer {

// Three stride-2 depthwise-separable blocks over (time, mel). Time is
// convolved "valid" over an explicit window whose positions carry absolute
// indices; anything outside [0, len_k) at stage k reads as zero, which is
// exactly what zero padding does on the whole sequence. Frequency is padded
// by one on each side: 80 -> 40 -> 20 -> 10.

inline constexpr int kSubsampleMargin = 7; // raw frames left of 8 * s that hidden frame s reads

/// Valid length after k stride-2 stages: ceil applied k times.
inline int subsampled_length(int raw_frames, int stages = 3) {
    for (int k = 0; k < stages; ++k) raw_frames = (raw_frames + 1) / 2;
    return raw_frames;
}

namespace detail {

/// time × freq × channels, channels innermost.
template <typename T>
struct Plane {
    int time = 0, freq = 0, channels = 0;
    std::vector<T> data;

    Plane(int t, int f, int c) : time(t), freq(f), channels(c), data(std::size_t(t) * std::size_t(f) * std::size_t(c)) {}
    T *at(int t, int f) { return data.data() + (std::size_t(t) * std::size_t(freq) + std::size_t(f)) * std::size_t(channels); }
    const T *at(int t, int f) const {
        return data.data() + (std::size_t(t) * std::size_t(freq) + std::size_t(f)) * std::size_t(channels);
    }
};

/// One block. `in` covers absolute positions [in_start, in_start + in.time)
/// with real data in [0, in_len); output covers [out_start, out_start + count).
template <typename T>
Plane<T> subsample_block(const Plane<T> &in, int in_start, int in_len, const SubsampleBlock<T> &blk, int out_start,
                         int count) {
    const int f_out = (in.freq - 1) / 2 + 1;
    const int c_in = in.channels, c_out = int(blk.pointwise.out_features());
    const int out_len = (in_len + 1) / 2;
    Plane<T> out(count, f_out, c_out);
    std::vector<T> dw(std::size_t(c_in), T(0));
    for (int o = 0; o < count; ++o) {
        const int a = out_start + o;
        if (a < 0 || a >= out_len) continue; // zero padding
        for (int f = 0; f < f_out; ++f) {
            for (int ch = 0; ch < c_in; ++ch) dw[std::size_t(ch)] = blk.depthwise_bias[std::size_t(ch)];
            for (int kt = 0; kt < 3; ++kt) {
                const int src = 2 * a - 1 + kt;
                if (src < 0 || src >= in_len) continue;
                const int local = src - in_start;
                CF_CHECK(local >= 0 && local < in.time, ErrorKind::scheduler, "subsample window misses a needed frame");
                for (int kf = 0; kf < 3; ++kf) {
                    const int fi = 2 * f - 1 + kf;
                    if (fi < 0 || fi >= in.freq) continue;
                    const T *x = in.at(local, fi);
                    for (int ch = 0; ch < c_in; ++ch)
                        dw[std::size_t(ch)] += blk.depthwise(std::size_t(ch), std::size_t(kt * 3 + kf)) * x[ch];
                }
            }
            std::span<T> y(out.at(o, f), std::size_t(c_out));
            blk.pointwise.apply(std::span<const T>(dw), y);
            for (T &v : y) v = swish(v);
        }
    }
    return out;
}

} // namespace detail

/// Hidden frames [first, first + count) of an audio with `raw_frames` feature
/// frames. `raw_at(a)` returns feature row a for a in [8 * first - 7,
/// 8 * (first + count)) ∩ [0, raw_frames). Frames past ceil(T / 8) are zero.
template <typename T, typename RawFn>
Matrix<T> subsample_frames(const SubsampleParams<T> &p, RawFn &&raw_at, int raw_frames, int first, int count) {
    CF_CHECK(count >= 0, ErrorKind::shape, "subsample: negative frame count");
    const int width = 8 * count + kSubsampleMargin;
    const int start = 8 * first - kSubsampleMargin;
    detail::Plane<T> x(width, ModelConfig::kMelBins, 1);
    for (int t = 0; t < width; ++t) {
        const int a = start + t;
        if (a < 0 || a >= raw_frames) continue;
        const auto row = raw_at(a);
        CF_CHECK(row.size() == std::size_t(ModelConfig::kMelBins), ErrorKind::shape, "subsample: feature width != 80");
        for (int f = 0; f < ModelConfig::kMelBins; ++f) *x.at(t, f) = T(row[std::size_t(f)]);
    }
    int len = raw_frames, in_start = start;
    for (int k = 0; k < 3; ++k) {
        const int shrink = 1 << (2 - k); // 4, 2, 1 frames per output frame at the next stage
        const int out_start = first * shrink - (shrink - 1);
        const int out_count = count * shrink + (shrink - 1);
        x = detail::subsample_block(x, in_start, len, p.blocks[std::size_t(k)], out_start, out_count);
        in_start = out_start;
        len = (len + 1) / 2;
    }
    const std::size_t d = p.out.out_features();
    Matrix<T> out(std::size_t(count), d);
    std::vector<T> flat(std::size_t(x.freq) * std::size_t(x.channels));
    for (int o = 0; o < count; ++o) {
        if (first + o >= len) continue;
        std::copy(x.at(o, 0), x.at(o, 0) + flat.size(), flat.begin());
        p.out.apply(std::span<const T>(flat), out.row(std::size_t(o)));
    }
    return out;
}

/// Convenience overload over a whole feature matrix.
template <typename T>
Matrix<T> subsample_frames(const SubsampleParams<T> &p, const Matrix<float> &features, int first, int count) {
    return subsample_frames<T>(
        p, [&](int a) { return features.row(std::size_t(a)); }, int(features.rows()), first, count);
}

} // namespace chunkformer
