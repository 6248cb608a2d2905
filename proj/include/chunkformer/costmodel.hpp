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

// Analytic FLOP and activation accounting. One multiply-accumulate counts as
// 2 FLOPs; only matmul-like terms of the encoder layers are counted (norms,
// activations, softmax and the subsample stack are ignored).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "chunkformer/config.hpp"
#include "chunkformer/errors.hpp"
#include "chunkformer/frontend.hpp"

namespace chunkformer {

using flops_t = std::uint64_t;

enum class Accounting {
    executed,  // what the chunked path computes: every row, c + r queries, full window, padding included
    effective, // only real chunk queries against real keys inside their window
    dense,     // unrestricted T' × T' attention
};

struct FlopBreakdown {
    flops_t attention = 0;  // scores and weighted values
    flops_t projection = 0; // q, k, v and output projections
    flops_t conv = 0;
    flops_t ff = 0;

    flops_t total() const { return attention + projection + conv + ff; }
    FlopBreakdown &operator+=(const FlopBreakdown &o) {
        attention += o.attention;
        projection += o.projection;
        conv += o.conv;
        ff += o.ff;
        return *this;
    }
    FlopBreakdown scaled(flops_t k) const { return {attention * k, projection * k, conv * k, ff * k}; }
    bool operator==(const FlopBreakdown &) const = default;
};

inline long raw_frames_for_duration(double seconds) {
    CF_CHECK(seconds > 0, ErrorKind::range, "duration must be positive");
    const long samples = std::lround(seconds * FbankOptions::kSampleRate);
    return samples < FbankOptions::kWindow ? 0 : fbank_frame_count(std::size_t(samples));
}

inline long hidden_frames_for_duration(double seconds) { return (raw_frames_for_duration(seconds) + 7) / 8; }

inline long chunk_count(long hidden_frames, const ContextConfig &ctx) {
    return (hidden_frames + ctx.chunk_size - 1) / ctx.chunk_size;
}

/// Key-query pairs inside the chunk windows of a T'-frame sequence.
inline flops_t window_pairs(long frames, const ContextConfig &ctx) {
    const long c = ctx.chunk_size;
    flops_t pairs = 0;
    for (long j = 0; j < frames; ++j) {
        const long i = j / c;
        const long lo = std::max(0L, i * c - ctx.attention_left);
        const long hi = std::min(frames, (i + 1) * c + ctx.right_context);
        pairs += flops_t(hi - lo);
    }
    return pairs;
}

/// Whole-stack FLOPs for one audio of `frames` post-subsample frames.
inline FlopBreakdown encoder_flops(long frames, const ContextConfig &ctx, const ModelConfig &m,
                                   Accounting mode = Accounting::executed) {
    CF_CHECK(frames >= 1, ErrorKind::range, "cost model needs at least one frame");
    const flops_t d = flops_t(m.d_model), ff = flops_t(m.d_ff), K = flops_t(m.kernel_size);
    const flops_t c = flops_t(ctx.chunk_size), r = flops_t(ctx.right_context), W = flops_t(ctx.window());
    FlopBreakdown f;
    flops_t queries = 0, keys = 0, out_frames = 0;
    switch (mode) {
    case Accounting::executed: {
        const flops_t n = flops_t(chunk_count(frames, ctx));
        f.attention = 2 * 3 * n * (c + r) * W * d;
        queries = n * (c + r);
        keys = n * W;
        out_frames = n * c;
        break;
    }
    case Accounting::effective:
        f.attention = 2 * 3 * window_pairs(frames, ctx) * d;
        queries = keys = out_frames = flops_t(frames);
        break;
    case Accounting::dense:
        f.attention = 2 * 3 * flops_t(frames) * flops_t(frames) * d;
        queries = keys = out_frames = flops_t(frames);
        break;
    }
    f.projection = 2 * (2 * queries + 2 * keys) * d * d;
    f.conv = 2 * (queries * d * 2 * d + out_frames * K * d + out_frames * d * d);
    f.ff = 2 * 2 * 2 * out_frames * d * ff;
    return f.scaled(flops_t(m.num_layers));
}

/// Score and value FLOPs only.
inline flops_t attention_flops(long frames, const ContextConfig &ctx, const ModelConfig &m,
                               Accounting mode = Accounting::executed) {
    return encoder_flops(frames, ctx, m, mode).attention;
}

// ─── Batches ────────────────────────────────────────────────────────────────

enum class BatchMode { naive, masked };

struct AudioCost {
    double duration = 0;
    long raw_frames = 0;
    long hidden_frames = 0;
    long chunks = 0;
    FlopBreakdown flops;
};

struct CostReport {
    ContextConfig context;
    ModelConfig model;
    std::vector<AudioCost> audios;
    FlopBreakdown naive;  // every audio padded to the longest
    FlopBreakdown masked; // sum of true per-audio costs
    double ratio = 1;          // naive / masked total FLOPs
    double duration_ratio = 1; // B * longest / sum of durations

    FlopBreakdown selected(BatchMode mode) const { return mode == BatchMode::naive ? naive : masked; }
};

inline CostReport batch_cost(const std::vector<double> &durations, const ContextConfig &ctx, const ModelConfig &m) {
    CF_CHECK(!durations.empty(), ErrorKind::range, "batch_cost needs at least one duration");
    CostReport rep;
    rep.context = ctx;
    rep.model = m;
    std::size_t longest = 0;
    double duration_sum = 0;
    for (std::size_t i = 0; i < durations.size(); ++i) {
        AudioCost a;
        a.duration = durations[i];
        a.raw_frames = raw_frames_for_duration(a.duration);
        CF_CHECK(a.raw_frames >= 1, ErrorKind::range, "duration shorter than one analysis window");
        a.hidden_frames = (a.raw_frames + 7) / 8;
        a.chunks = chunk_count(a.hidden_frames, ctx);
        a.flops = encoder_flops(a.hidden_frames, ctx, m);
        rep.masked += a.flops;
        rep.audios.push_back(a);
        if (rep.audios[i].hidden_frames > rep.audios[longest].hidden_frames) longest = i;
        duration_sum += a.duration;
    }
    rep.naive = rep.audios[longest].flops.scaled(flops_t(durations.size()));
    rep.ratio = double(rep.naive.total()) / double(rep.masked.total());
    rep.duration_ratio = double(durations.size()) * rep.audios[longest].duration / duration_sum;
    return rep;
}

inline std::string format_duration(double s) {
    char buf[32];
    if (s >= 3600 && std::fmod(s, 3600) == 0)
        std::snprintf(buf, sizeof buf, "%gh", s / 3600);
    else if (s >= 60 && std::fmod(s, 60) == 0)
        std::snprintf(buf, sizeof buf, "%gm", s / 60);
    else
        std::snprintf(buf, sizeof buf, "%gs", s);
    return buf;
}

/// Aligned text table.
inline std::string format_report(const CostReport &rep) {
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line,
                  "# FLOPs: 1 MAC = 2 FLOPs, encoder-layer matmuls only; context [%d,%d,%d], N=%d, d=%d, d_ff=%d\n",
                  rep.context.attention_left, rep.context.chunk_size, rep.context.right_context, rep.model.num_layers,
                  rep.model.d_model, rep.model.d_ff);
    out += line;
    std::snprintf(line, sizeof line, "%-8s %10s %9s %7s %12s %12s\n", "audio", "raw", "hidden", "chunks", "attn GFLOP",
                  "total GFLOP");
    out += line;
    for (const auto &a : rep.audios) {
        std::snprintf(line, sizeof line, "%-8s %10ld %9ld %7ld %12.2f %12.2f\n", format_duration(a.duration).c_str(),
                      a.raw_frames, a.hidden_frames, a.chunks, double(a.flops.attention) / 1e9,
                      double(a.flops.total()) / 1e9);
        out += line;
    }
    std::snprintf(line, sizeof line, "naive  total: %.3f TFLOP\nmasked total: %.3f TFLOP\n",
                  double(rep.naive.total()) / 1e12, double(rep.masked.total()) / 1e12);
    out += line;
    std::snprintf(line, sizeof line, "naive/masked FLOPs ratio: %.4f (duration ratio %.4f)\n", rep.ratio,
                  rep.duration_ratio);
    out += line;
    return out;
}

inline std::string format_csv(const CostReport &rep) {
    std::string out = "duration_s,raw_frames,hidden_frames,chunks,attention_flops,projection_flops,conv_flops,ff_flops,"
                      "total_flops\n";
    auto row = [&](const std::string &label, long raw, long hidden, long chunks, const FlopBreakdown &f) {
        out += label + "," + std::to_string(raw) + "," + std::to_string(hidden) + "," + std::to_string(chunks) + "," +
               std::to_string(f.attention) + "," + std::to_string(f.projection) + "," + std::to_string(f.conv) + "," +
               std::to_string(f.ff) + "," + std::to_string(f.total()) + "\n";
    };
    for (const auto &a : rep.audios) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", a.duration);
        row(buf, a.raw_frames, a.hidden_frames, a.chunks, a.flops);
    }
    row("naive", 0, 0, 0, rep.naive);
    row("masked", 0, 0, 0, rep.masked);
    return out;
}

// ─── Activation memory ──────────────────────────────────────────────────────

enum class MemoryMode { chunked, dense };

/// Peak live activation elements inside one layer. Chunked mode holds one
/// step of `budget` emitted rows plus lookahead rows, so it does not depend
/// on T'; dense mode holds the T' × T' attention matrix per head.
inline flops_t memory_estimate(long frames, const ContextConfig &ctx, const ModelConfig &m, MemoryMode mode,
                               int budget = 16) {
    const flops_t d = flops_t(m.d_model), ff = flops_t(m.d_ff), heads = flops_t(m.n_heads);
    const flops_t c = flops_t(ctx.chunk_size), r = flops_t(ctx.right_context), W = flops_t(ctx.window());
    const flops_t l_conv = flops_t(derive_l_conv(m.kernel_size));
    if (mode == MemoryMode::dense) {
        const flops_t L = flops_t(frames);
        return 3 * L * d + heads * L * L + L * ff + L * 2 * d;
    }
    const flops_t look = flops_t(lookahead_frames(ctx, m.num_layers));
    const flops_t rows = flops_t(budget) + (look + c - 1) / c;
    const flops_t caches = flops_t(m.num_layers) * (flops_t(ctx.attention_left) + l_conv) * d;
    return 3 * rows * W * d + heads * rows * (c + r) * W + rows * c * ff + rows * (l_conv + c + r) * 2 * d + caches;
}

/// Smallest T' from which the chunked estimate stays below the dense one.
inline long memory_crossover(const ContextConfig &ctx, const ModelConfig &m, int budget = 16) {
    const flops_t chunked = memory_estimate(1, ctx, m, MemoryMode::chunked, budget);
    long lo = 1, hi = 1;
    while (memory_estimate(hi, ctx, m, MemoryMode::dense) <= chunked) hi *= 2;
    while (lo < hi) { // dense estimate is increasing in T'
        const long mid = lo + (hi - lo) / 2;
        if (memory_estimate(mid, ctx, m, MemoryMode::dense) > chunked)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

} // namespace chunkformer
