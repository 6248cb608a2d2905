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
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "chunkformer/attention.hpp"
#include "chunkformer/chunking.hpp"
#include "chunkformer/config.hpp"
#include "chunkformer/conv.hpp"
#include "chunkformer/errors.hpp"
#include "chunkformer/model.hpp"
#include "chunkformer/subsample.hpp"
#include "chunkformer/tensor.hpp"

namespace chunkformer {

struct EncodeOptions {
    int budget = 16; // chunk rows emitted per step
    bool poison = false;             // overwrite masked positions with noise (testing)
    std::uint64_t poison_seed = 0;
    bool inject_cache_off_by_one = false; // deliberately broken attention cache (testing)
    OpCounter *counter = nullptr;
};

/// Where a step's input frames come from: `frames(i, state, start, count)`
/// returns hidden frames [start, start + count) of audio i, count rows
/// exactly. `advance(i, state)` runs after the step moved frames_consumed.
template <typename T>
struct FrameSource {
    std::function<Matrix<T>(std::size_t, const StreamState<T> &, int, int)> frames;
    std::function<void(std::size_t, StreamState<T> &)> advance;
};

/// Receives the emitted (final-normed) hidden frames of audio i after each step.
template <typename T>
using EmitFn = std::function<void(std::size_t, const Matrix<T> &, StreamState<T> &)>;

template <typename T>
StreamState<T> make_stream(int audio_id, int total_frames, const ModelConfig &cfg) {
    CF_CHECK(total_frames >= 1, ErrorKind::empty_input, "audio " + std::to_string(audio_id) + " has no frames");
    StreamState<T> st;
    st.audio_id = audio_id;
    st.total_frames = total_frames;
    st.att_cache.assign(std::size_t(cfg.num_layers), Matrix<T>(0, std::size_t(cfg.d_model)));
    st.conv_cache.assign(std::size_t(cfg.num_layers), Matrix<T>(0, std::size_t(cfg.d_model)));
    return st;
}

namespace detail {

template <typename T>
void poison_rows(Matrix<T> &x, std::span<const std::uint8_t> valid, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> dist(-50.0, 50.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
        if (!valid[i])
            for (T &v : x.row(i)) v = T(dist(rng));
}

template <typename T>
void zero_rows(Matrix<T> &x, std::span<const std::uint8_t> valid) {
    for (std::size_t i = 0; i < x.rows(); ++i)
        if (!valid[i]) std::fill(x.row(i).begin(), x.row(i).end(), T(0));
}

/// Per-step bookkeeping shared by all layers.
struct StepFrames {
    std::vector<std::uint8_t> valid; // one bit per row frame
    std::vector<int> offset;         // first row frame of each scheduled audio
};

} // namespace detail

/// One layer over the step's row frames `x` ((rows * c) × d). Reads and then
/// replaces this layer's caches in `states`.
template <typename T>
Matrix<T> encoder_layer_forward(const Matrix<T> &x, const LayerParams<T> &L, std::size_t layer, const ModelParams<T> &params,
                                const ContextConfig &ctx, std::span<StreamState<T>> states, const StepSchedule &step,
                                const detail::StepFrames &frames, const EncodeOptions &opt, std::mt19937_64 &rng) {
    const int c = ctx.chunk_size, l = ctx.attention_left, r = ctx.right_context;
    const int l_conv = derive_l_conv(params.config.kernel_size);

    std::vector<SegmentSpec> plain, att_specs, conv_specs;
    std::vector<const Matrix<T> *> att_caches, conv_caches;
    for (const auto &a : step.audios) {
        const auto &st = states[std::size_t(a.state_index)];
        const int rows = a.emit_rows + a.lookahead_rows;
        plain.push_back({st.audio_id, 0, rows, a.valid_frames});
        att_specs.push_back({st.audio_id, int(st.att_cache[layer].rows()), rows, a.valid_frames});
        conv_specs.push_back({st.audio_id, int(st.conv_cache[layer].rows()), rows, a.valid_frames});
        att_caches.push_back(&st.att_cache[layer]);
        conv_caches.push_back(&st.conv_cache[layer]);
    }
    const FlatLayout layout0 = make_layout(plain, 0, c);
    const FlatLayout att_layout = make_layout(att_specs, l, c);
    const FlatLayout conv_layout = make_layout(conv_specs, l_conv, c);

    // Half-step feed-forward.
    Matrix<T> h = x;
    add_inplace(h, L.ff1.forward(x), T(0.5));

    // Attention over [l | c | r] rows of the flattened, cached attention input.
    const Matrix<T> a = L.mhsa_norm.forward(h);
    ChunkBatch<T> att_rows =
        oct_segment(flatten<T>(att_layout, att_caches, a), std::span<const int>(att_layout.row_starts), l, c, r);
    apply_mask(att_rows, std::span<const std::uint8_t>(
                             build_masks(att_layout.row_starts, att_layout.segments, l, c, r)));
    if (opt.poison) poison_masked(att_rows, rng);
    const Matrix<T> z = chunk_attention(att_rows, L.mhsa, params.table, T(1), opt.counter);

    // Residual on the c chunk and r row-local lookahead positions.
    ChunkBatch<T> x2 = oct_segment(h, std::span<const int>(layout0.row_starts), 0, c, r);
    apply_mask(x2, std::span<const std::uint8_t>(build_masks(layout0.row_starts, layout0.segments, 0, c, r)));
    add_inplace(x2.rows, z);

    // Convolution: left context from the cache and earlier chunks, right
    // context from this row's own lookahead positions.
    ChunkBatch<T> g = x2;
    g.rows = conv_pointwise_in(x2.rows, L.conv);
    const Matrix<T> g_chunk = chunk_columns(g);
    ChunkBatch<T> left = oct_segment(flatten<T>(conv_layout, conv_caches, g_chunk),
                                     std::span<const int>(conv_layout.row_starts), l_conv, c, 0);
    apply_mask(left, std::span<const std::uint8_t>(
                         build_masks(conv_layout.row_starts, conv_layout.segments, l_conv, c, 0)));
    ChunkBatch<T> conv_rows;
    conv_rows.left = l_conv;
    conv_rows.chunk = c;
    conv_rows.right = r;
    const std::size_t R = g.batch_size();
    conv_rows.rows = Matrix<T>(R * std::size_t(conv_rows.width()), x.cols());
    conv_rows.mask.assign(R * std::size_t(conv_rows.width()), 0);
    for (std::size_t b = 0; b < R; ++b) {
        for (int p = 0; p < conv_rows.width(); ++p) {
            const bool from_left = p < l_conv + c;
            const auto src = from_left ? left.at(b, p) : g.at(b, p - l_conv);
            std::copy(src.begin(), src.end(), conv_rows.at(b, p).begin());
            conv_rows.mask[b * std::size_t(conv_rows.width()) + std::size_t(p)] =
                from_left ? left.valid(b, p) : g.valid(b, p - l_conv);
        }
    }
    if (opt.poison) poison_masked(conv_rows, rng);
    const Matrix<T> conv = conv_pointwise_out(
        chunk_depthwise_conv(conv_rows, L.conv.depthwise, std::span<const T>(L.conv.depthwise_bias)), L.conv);

    Matrix<T> x3 = chunk_columns(x2);
    add_inplace(x3, conv);
    Matrix<T> x4 = x3;
    add_inplace(x4, L.ff2.forward(x3), T(0.5));
    Matrix<T> y = L.final_norm.forward(x4);

    // Caches for the next step come from the emitted frames only.
    for (std::size_t k = 0; k < step.audios.size(); ++k) {
        const auto &au = step.audios[k];
        auto &st = states[std::size_t(au.state_index)];
        const std::size_t off = std::size_t(frames.offset[k]);
        int keep_end = au.emit_frames;
        if (opt.inject_cache_off_by_one && keep_end > 0) --keep_end;
        st.att_cache[layer] = update_att_cache(st.att_cache[layer], a.slice_rows(off, off + std::size_t(keep_end)), l);
        st.conv_cache[layer] =
            update_conv_cache(st.conv_cache[layer], g_chunk.slice_rows(off, off + std::size_t(au.emit_frames)), l_conv);
    }
    return y;
}

/// Runs one scheduled step: gathers input frames, runs the layer stack,
/// emits the scheduled chunks' outputs and advances every touched stream.
template <typename T>
void encode_step(const ModelParams<T> &params, const ContextConfig &ctx, std::span<StreamState<T>> states,
                 const StepSchedule &step, const FrameSource<T> &source, const EmitFn<T> &emit,
                 const EncodeOptions &opt, std::mt19937_64 &rng) {
    const int c = ctx.chunk_size;
    const std::size_t d = std::size_t(params.config.d_model);
    const std::size_t total = step.rows.size() * std::size_t(c);

    detail::StepFrames frames;
    frames.valid.assign(total, 0);
    Matrix<T> x(total, d);
    int offset = 0;
    for (const auto &a : step.audios) {
        const auto &st = states[std::size_t(a.state_index)];
        const Matrix<T> in = source.frames(std::size_t(a.state_index), st, a.start_frame, a.valid_frames);
        CF_CHECK(int(in.rows()) == a.valid_frames && in.cols() == d, ErrorKind::shape,
                 "frame source returned the wrong shape");
        for (int i = 0; i < a.valid_frames; ++i) {
            std::copy(in.row(std::size_t(i)).begin(), in.row(std::size_t(i)).end(),
                      x.row(std::size_t(offset + i)).begin());
            frames.valid[std::size_t(offset + i)] = 1;
        }
        frames.offset.push_back(offset);
        offset += (a.emit_rows + a.lookahead_rows) * c;
    }
    if (opt.poison) detail::poison_rows(x, std::span<const std::uint8_t>(frames.valid), rng);

    for (std::size_t li = 0; li < params.layers.size(); ++li) {
        x = encoder_layer_forward(x, params.layers[li], li, params, ctx, states, step, frames, opt, rng);
        if (opt.poison)
            detail::poison_rows(x, std::span<const std::uint8_t>(frames.valid), rng);
        else
            detail::zero_rows(x, std::span<const std::uint8_t>(frames.valid));
    }
    const Matrix<T> out = params.final_norm.forward(x);

    for (std::size_t k = 0; k < step.audios.size(); ++k) {
        const auto &a = step.audios[k];
        auto &st = states[std::size_t(a.state_index)];
        const std::size_t off = std::size_t(frames.offset[k]);
        const Matrix<T> emitted = out.slice_rows(off, off + std::size_t(a.emit_frames));
        st.frames_consumed += a.emit_frames;
        if (source.advance) source.advance(std::size_t(a.state_index), st);
        if (emit) emit(std::size_t(a.state_index), emitted, st);
    }
}

/// Endless decoding driver: steps until every stream is finished.
template <typename T>
void run_streams(const ModelParams<T> &params, const ContextConfig &ctx, std::span<StreamState<T>> states,
                 const FrameSource<T> &source, const EmitFn<T> &emit, const EncodeOptions &opt = {}) {
    validate_or_throw(params.config, ctx);
    const int lookahead = lookahead_frames(ctx, params.config.num_layers);
    std::mt19937_64 rng(opt.poison_seed);
    for (;;) {
        const StepSchedule step =
            schedule_step<T>(std::span<const StreamState<T>>(states.data(), states.size()), ctx.chunk_size, opt.budget,
                             lookahead);
        if (step.audios.empty()) break;
        encode_step(params, ctx, states, step, source, emit, opt, rng);
    }
}

/// Hidden sequences from post-subsample inputs (subsample stage skipped).
template <typename T>
std::vector<Matrix<T>> encode_hidden(const ModelParams<T> &params, const ContextConfig &ctx,
                                     std::span<const Matrix<T>> inputs, const EncodeOptions &opt = {}) {
    std::vector<StreamState<T>> states;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        states.push_back(make_stream<T>(int(i), int(inputs[i].rows()), params.config));
    FrameSource<T> source;
    source.frames = [&](std::size_t i, const StreamState<T> &, int start, int count) {
        return inputs[i].slice_rows(std::size_t(start), std::size_t(start + count));
    };
    std::vector<Matrix<T>> out(inputs.size(), Matrix<T>(0, std::size_t(params.config.d_model)));
    run_streams<T>(params, ctx, states, source,
                   [&](std::size_t i, const Matrix<T> &h, StreamState<T> &) { out[i].append_rows(h); }, opt);
    return out;
}

/// Frame source over whole feature matrices. Each chunk is subsampled on its
/// own window; raw frames before the stream position come from the raw cache.
template <typename T>
FrameSource<T> feature_source(const ModelParams<T> &params, const ContextConfig &ctx,
                              std::span<const Matrix<float>> features) {
    FrameSource<T> source;
    const int c = ctx.chunk_size;
    source.frames = [&params, features, c](std::size_t i, const StreamState<T> &st, int start, int count) {
        const Matrix<float> &f = features[i];
        const int boundary = 8 * st.frames_consumed;
        auto raw_at = [&](int a) -> std::span<const float> {
            if (a < boundary) {
                const int idx = a - (boundary - int(st.raw_cache.rows()));
                CF_CHECK(idx >= 0, ErrorKind::scheduler, "raw cache does not reach frame " + std::to_string(a));
                return st.raw_cache.row(std::size_t(idx));
            }
            return f.row(std::size_t(a));
        };
        Matrix<T> out(0, std::size_t(params.config.d_model));
        for (int done = 0; done < count; done += c) {
            const int n = std::min(c, count - done);
            out.append_rows(subsample_frames<T>(params.subsample, raw_at, int(f.rows()), start + done, n));
        }
        return out;
    };
    source.advance = [features](std::size_t i, StreamState<T> &st) {
        const Matrix<float> &f = features[i];
        const int end = std::min<int>(8 * st.frames_consumed, int(f.rows()));
        const int begin = std::max(0, 8 * st.frames_consumed - kSubsampleMargin);
        st.raw_cache = begin < end ? f.slice_rows(std::size_t(begin), std::size_t(end)) : Matrix<float>(0, f.cols());
    };
    return source;
}

template <typename T>
std::vector<StreamState<T>> feature_streams(std::span<const Matrix<float>> features, const ModelConfig &cfg) {
    std::vector<StreamState<T>> states;
    for (std::size_t i = 0; i < features.size(); ++i) {
        CF_CHECK(features[i].cols() == std::size_t(ModelConfig::kMelBins), ErrorKind::shape,
                 "features must have 80 columns");
        states.push_back(make_stream<T>(int(i), subsampled_length(int(features[i].rows())), cfg));
    }
    return states;
}

/// Hidden sequences for a batch of feature matrices, masked-batch decoded.
template <typename T>
std::vector<Matrix<T>> encode_full(const ModelParams<T> &params, const ContextConfig &ctx,
                                   std::span<const Matrix<float>> features, const EncodeOptions &opt = {}) {
    auto states = feature_streams<T>(features, params.config);
    std::vector<Matrix<T>> out(features.size(), Matrix<T>(0, std::size_t(params.config.d_model)));
    run_streams<T>(params, ctx, states, feature_source(params, ctx, features),
                   [&](std::size_t i, const Matrix<T> &h, StreamState<T> &) { out[i].append_rows(h); }, opt);
    return out;
}

} // namespace chunkformer
