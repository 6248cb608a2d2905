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

// Reference implementations for tests and `selftest`. They share the
// elementwise/matmul kernels (Linear, LayerNorm, FeedForward) with the fast
// path but none of its segmentation, masking, caching or window logic: every
// index range below is written out directly from absolute frame positions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "chunkformer/attention.hpp"
#include "chunkformer/config.hpp"
#include "chunkformer/model.hpp"
#include "chunkformer/tensor.hpp"

namespace chunkformer {

// ─── Comparison ─────────────────────────────────────────────────────────────

struct OracleReport {
    double max_rel_error = 0;
    double mean_rel_error = 0;
    long first_divergent = -1; // flat element index of the first breach, -1 if none
    std::size_t elements = 0;

    bool within(double tol) const { return max_rel_error <= tol; }
};

/// Errors relative to the reference's largest magnitude.
template <typename A, typename B>
OracleReport compare(const Matrix<A> &got, const Matrix<B> &ref, double tol = 0) {
    CF_CHECK(got.rows() == ref.rows() && got.cols() == ref.cols(), ErrorKind::shape,
             "compare: shapes differ (" + std::to_string(got.rows()) + "x" + std::to_string(got.cols()) + " vs " +
                 std::to_string(ref.rows()) + "x" + std::to_string(ref.cols()) + ")");
    OracleReport rep;
    double scale = 0;
    for (B v : ref.data()) scale = std::max(scale, std::abs(double(v)));
    scale = std::max(scale, 1e-30);
    double sum = 0;
    const auto g = got.data();
    const auto r = ref.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double e = std::abs(double(g[i]) - double(r[i])) / scale;
        if (!(e <= tol) && rep.first_divergent < 0) rep.first_divergent = long(i);
        rep.max_rel_error = std::max(rep.max_rel_error, std::isnan(e) ? std::numeric_limits<double>::infinity() : e);
        sum += e;
    }
    rep.elements = g.size();
    rep.mean_rel_error = g.empty() ? 0 : sum / double(g.size());
    return rep;
}

/// Worst case over several pairs.
inline OracleReport merge(const OracleReport &a, const OracleReport &b) {
    OracleReport out;
    out.max_rel_error = std::max(a.max_rel_error, b.max_rel_error);
    out.elements = a.elements + b.elements;
    out.mean_rel_error =
        out.elements ? (a.mean_rel_error * double(a.elements) + b.mean_rel_error * double(b.elements)) / double(out.elements)
                     : 0;
    out.first_divergent = a.first_divergent >= 0 ? a.first_divergent
                          : b.first_divergent >= 0 ? long(a.elements) + b.first_divergent
                                                    : -1;
    return out;
}

// ─── Dense attention ────────────────────────────────────────────────────────

namespace oracle_detail {

/// Literal relative attention for one query over keys selected by `keep`.
/// `keys` are the attention inputs; query position and key positions are
/// absolute so j - t indexes the positional table.
template <typename T>
bool attend(const Matrix<T> &q_proj, const Matrix<T> &k_proj, const Matrix<T> &v_proj, const Matrix<T> &pos_proj,
            int max_distance, const AttentionParams<T> &p, std::size_t j, const std::function<bool(std::size_t)> &keep,
            std::span<T> heads_out, OpCounter *counter) {
    const std::size_t L = k_proj.rows(), d = k_proj.cols();
    const int dk = p.d_k();
    std::vector<std::size_t> keys;
    for (std::size_t t = 0; t < L; ++t)
        if (keep(t)) keys.push_back(t);
    std::fill(heads_out.begin(), heads_out.end(), T(0));
    if (keys.empty()) return false;
    if (counter) {
        counter->score_macs += 2ull * keys.size() * d;
        counter->value_macs += keys.size() * d;
    }
    std::vector<T> e(keys.size());
    for (int h = 0; h < p.n_heads; ++h) {
        const std::size_t h0 = std::size_t(h * dk);
        T best = -std::numeric_limits<T>::infinity();
        for (std::size_t n = 0; n < keys.size(); ++n) {
            const std::size_t t = keys[n];
            const long dist = long(j) - long(t);
            CF_CHECK(std::abs(dist) <= max_distance, ErrorKind::range, "dense reference: distance beyond L_max");
            const T *P = &pos_proj(std::size_t(dist + max_distance), h0);
            T ac = 0, bd = 0;
            for (int i = 0; i < dk; ++i) {
                const T q = q_proj(j, h0 + std::size_t(i));
                ac += (q + p.pos_bias_u[h0 + std::size_t(i)]) * k_proj(t, h0 + std::size_t(i));
                bd += (q + p.pos_bias_v[h0 + std::size_t(i)]) * P[i];
            }
            e[n] = (ac + bd) / std::sqrt(T(dk));
            best = std::max(best, e[n]);
        }
        T z = 0;
        for (T &v : e) z += (v = std::exp(v - best));
        for (std::size_t n = 0; n < keys.size(); ++n)
            for (int i = 0; i < dk; ++i)
                heads_out[h0 + std::size_t(i)] += e[n] / z * v_proj(keys[n], h0 + std::size_t(i));
    }
    return true;
}

template <typename T>
Matrix<T> positional_projection(const AttentionParams<T> &p, int max_distance, int d) {
    Matrix<T> pos(std::size_t(2 * max_distance + 1), std::size_t(d));
    for (int k = -max_distance; k <= max_distance; ++k) {
        const auto enc = rel_pos_encoding<T>(k, d);
        p.pos.apply(std::span<const T>(enc), pos.row(std::size_t(k + max_distance)));
    }
    return pos;
}

} // namespace oracle_detail

/// O(L^2) attention of every position of `x` against the keys allowed by
/// `mask(j, t)`. Queries with no allowed key output zero.
template <typename T>
Matrix<T> dense_attention_reference(const Matrix<T> &x, const AttentionParams<T> &p, int max_distance,
                                    const std::function<bool(std::size_t, std::size_t)> &mask,
                                    OpCounter *counter = nullptr) {
    const std::size_t L = x.rows(), d = x.cols();
    const Matrix<T> q = p.query.forward(x), k = p.key.forward(x), v = p.value.forward(x);
    const Matrix<T> pos = oracle_detail::positional_projection(p, max_distance, int(d));
    Matrix<T> out(L, d);
    std::vector<T> heads(d);
    for (std::size_t j = 0; j < L; ++j) {
        const bool any = oracle_detail::attend<T>(q, k, v, pos, max_distance, p, j,
                                                  [&](std::size_t t) { return mask(j, t); }, std::span<T>(heads), counter);
        if (any) p.out.apply(std::span<const T>(heads), out.row(j));
    }
    return out;
}

/// Query j in chunk i = j / c may attend to keys [ic - l, (i+1)c + r).
inline bool in_chunk_window(std::size_t j, std::size_t t, const ContextConfig &ctx) {
    const long i = long(j) / ctx.chunk_size;
    const long lo = i * ctx.chunk_size - ctx.attention_left;
    const long hi = (i + 1) * ctx.chunk_size + ctx.right_context;
    return long(t) >= lo && long(t) < hi;
}

// ─── Full-sequence subsample ────────────────────────────────────────────────

/// Whole-sequence subsample with explicit zero padding on every stage.
template <typename T>
Matrix<T> reference_subsample(const SubsampleParams<T> &p, const Matrix<float> &features) {
    // vol[t][f][ch] as nested vectors, padded access through a lambda.
    using Vol = std::vector<std::vector<std::vector<T>>>;
    Vol x(features.rows(), std::vector<std::vector<T>>(features.cols(), std::vector<T>(1)));
    for (std::size_t t = 0; t < features.rows(); ++t)
        for (std::size_t f = 0; f < features.cols(); ++f) x[t][f][0] = T(features(t, f));
    for (const auto &blk : p.blocks) {
        const long T_in = long(x.size()), F_in = T_in ? long(x[0].size()) : 0;
        const long T_out = (T_in + 1) / 2, F_out = (F_in - 1) / 2 + 1;
        const std::size_t c_in = blk.depthwise.rows();
        Vol y(static_cast<std::size_t>(T_out), std::vector<std::vector<T>>(static_cast<std::size_t>(F_out)));
        for (long to = 0; to < T_out; ++to)
            for (long fo = 0; fo < F_out; ++fo) {
                std::vector<T> acc(blk.depthwise_bias.begin(), blk.depthwise_bias.end());
                for (long kt = 0; kt < 3; ++kt)
                    for (long kf = 0; kf < 3; ++kf) {
                        const long ti = 2 * to + kt - 1, fi = 2 * fo + kf - 1;
                        if (ti < 0 || ti >= T_in || fi < 0 || fi >= F_in) continue;
                        for (std::size_t ch = 0; ch < c_in; ++ch)
                            acc[ch] += blk.depthwise(ch, std::size_t(kt * 3 + kf)) * x[std::size_t(ti)][std::size_t(fi)][ch];
                    }
                std::vector<T> out(blk.pointwise.out_features());
                blk.pointwise.apply(std::span<const T>(acc), std::span<T>(out));
                for (T &v : out) v = swish(v);
                y[std::size_t(to)][std::size_t(fo)] = std::move(out);
            }
        x = std::move(y);
    }
    Matrix<T> out(x.size(), p.out.out_features());
    for (std::size_t t = 0; t < x.size(); ++t) {
        std::vector<T> flat;
        for (const auto &f : x[t]) flat.insert(flat.end(), f.begin(), f.end());
        p.out.apply(std::span<const T>(flat), out.row(t));
    }
    return out;
}

// ─── Full-context encoder ───────────────────────────────────────────────────

/// Standard Conformer over the whole sequence: unrestricted attention,
/// zero-padded depthwise convolution.
template <typename T>
Matrix<T> full_context_layers(const Matrix<T> &input, const ModelParams<T> &m) {
    Matrix<T> x = input;
    const std::size_t L = x.rows(), d = x.cols();
    for (const auto &layer : m.layers) {
        Matrix<T> h = x;
        add_inplace(h, layer.ff1.forward(x), T(0.5));
        const Matrix<T> a = layer.mhsa_norm.forward(h);
        add_inplace(h, dense_attention_reference<T>(a, layer.mhsa, m.config.max_rel_distance,
                                                    [](std::size_t, std::size_t) { return true; }));
        const Matrix<T> g = glu(layer.conv.pointwise_in.forward(layer.conv.pre_norm.forward(h)));
        const long K = long(layer.conv.depthwise.rows()), half = K / 2;
        Matrix<T> dw(L, d);
        for (long t = 0; t < long(L); ++t)
            for (std::size_t ch = 0; ch < d; ++ch) {
                T acc = layer.conv.depthwise_bias[ch];
                for (long k = 0; k < K; ++k) {
                    const long s = t + k - half;
                    if (s >= 0 && s < long(L)) acc += layer.conv.depthwise(std::size_t(k), ch) * g(std::size_t(s), ch);
                }
                dw(std::size_t(t), ch) = acc;
            }
        Matrix<T> n = layer.conv.norm.forward(dw);
        swish_inplace(n);
        add_inplace(h, layer.conv.pointwise_out.forward(n));
        Matrix<T> f = h;
        add_inplace(f, layer.ff2.forward(h), T(0.5));
        x = layer.final_norm.forward(f);
    }
    return m.final_norm.forward(x);
}

template <typename T>
Matrix<T> full_context_encode(const Matrix<float> &features, const ModelParams<T> &m) {
    return full_context_layers(reference_subsample(m.subsample, features), m);
}

// ─── Per-audio chunk loop ───────────────────────────────────────────────────

/// One audio at a time, one chunk at a time, layer by layer, with the chunk
/// semantics written out directly:
///   chunk i computes queries [ic, (i+1)c + r) against keys [ic - l, (i+1)c + r),
///   its depthwise conv reads earlier chunks' outputs on the left and its own
///   lookahead positions on the right (zero past (i+1)c + r).
template <typename T>
Matrix<T> loop_chunk_layers(const Matrix<T> &input, const ModelParams<T> &m, const ContextConfig &ctx) {
    const long Tn = long(input.rows()), c = ctx.chunk_size, l = ctx.attention_left, r = ctx.right_context;
    const std::size_t d = input.cols();
    const long n_chunks = (Tn + c - 1) / c;
    Matrix<T> x = input;
    for (const auto &layer : m.layers) {
        Matrix<T> h = x;
        add_inplace(h, layer.ff1.forward(x), T(0.5));
        const Matrix<T> a = layer.mhsa_norm.forward(h);
        const Matrix<T> q = layer.mhsa.query.forward(a), k = layer.mhsa.key.forward(a), v = layer.mhsa.value.forward(a);
        const Matrix<T> pos = oracle_detail::positional_projection(layer.mhsa, m.config.max_rel_distance, int(d));
        const long K = long(layer.conv.depthwise.rows()), half = K / 2;

        Matrix<T> g_chunk(std::size_t(Tn), d); // each frame's depthwise input as computed by its own chunk
        Matrix<T> y(std::size_t(Tn), d);
        for (long i = 0; i < n_chunks; ++i) {
            const long q_lo = i * c, q_hi = std::min(Tn, (i + 1) * c + r);
            const long k_lo = std::max(0L, i * c - l), k_hi = q_hi;
            // Attention + residual for this chunk's queries.
            Matrix<T> x2(std::size_t(q_hi - q_lo), d);
            std::vector<T> heads(d);
            for (long j = q_lo; j < q_hi; ++j) {
                oracle_detail::attend<T>(q, k, v, pos, m.config.max_rel_distance, layer.mhsa, std::size_t(j),
                                         [&](std::size_t t) { return long(t) >= k_lo && long(t) < k_hi; },
                                         std::span<T>(heads), nullptr);
                auto row = x2.row(std::size_t(j - q_lo));
                layer.mhsa.out.apply(std::span<const T>(heads), row);
                for (std::size_t ch = 0; ch < d; ++ch) row[ch] += h(std::size_t(j), ch);
            }
            const Matrix<T> g = glu(layer.conv.pointwise_in.forward(layer.conv.pre_norm.forward(x2)));
            const long chunk_hi = std::min(Tn, (i + 1) * c);
            for (long j = q_lo; j < chunk_hi; ++j)
                std::copy(g.row(std::size_t(j - q_lo)).begin(), g.row(std::size_t(j - q_lo)).end(),
                          g_chunk.row(std::size_t(j)).begin());
            // Depthwise conv for the chunk frames.
            Matrix<T> dw(std::size_t(chunk_hi - q_lo), d);
            for (long j = q_lo; j < chunk_hi; ++j)
                for (std::size_t ch = 0; ch < d; ++ch) {
                    T acc = layer.conv.depthwise_bias[ch];
                    for (long kk = 0; kk < K; ++kk) {
                        const long s = j + kk - half;
                        if (s < 0 || s >= q_hi) continue;
                        const T val = s < q_lo ? g_chunk(std::size_t(s), ch) : g(std::size_t(s - q_lo), ch);
                        acc += layer.conv.depthwise(std::size_t(kk), ch) * val;
                    }
                    dw(std::size_t(j - q_lo), ch) = acc;
                }
            Matrix<T> n = layer.conv.norm.forward(dw);
            swish_inplace(n);
            const Matrix<T> conv = layer.conv.pointwise_out.forward(n);
            Matrix<T> x3(std::size_t(chunk_hi - q_lo), d);
            for (long j = q_lo; j < chunk_hi; ++j)
                for (std::size_t ch = 0; ch < d; ++ch)
                    x3(std::size_t(j - q_lo), ch) = x2(std::size_t(j - q_lo), ch) + conv(std::size_t(j - q_lo), ch);
            Matrix<T> f = x3;
            add_inplace(f, layer.ff2.forward(x3), T(0.5));
            const Matrix<T> out = layer.final_norm.forward(f);
            for (long j = q_lo; j < chunk_hi; ++j)
                std::copy(out.row(std::size_t(j - q_lo)).begin(), out.row(std::size_t(j - q_lo)).end(),
                          y.row(std::size_t(j)).begin());
        }
        x = std::move(y);
    }
    return m.final_norm.forward(x);
}

/// Per-audio loop over feature matrices.
template <typename T>
std::vector<Matrix<T>> loop_oct_encode(std::span<const Matrix<float>> audios, const ModelParams<T> &m,
                                       const ContextConfig &ctx) {
    std::vector<Matrix<T>> out;
    for (const auto &f : audios) out.push_back(loop_chunk_layers(reference_subsample(m.subsample, f), m, ctx));
    return out;
}

} // namespace chunkformer
