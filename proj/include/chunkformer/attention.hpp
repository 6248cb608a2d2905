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

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "chunkformer/chunking.hpp"
#include "chunkformer/errors.hpp"
#include "chunkformer/tensor.hpp"

namespace chunkformer {

// ─── Relative positions ─────────────────────────────────────────────────────

/// Sinusoidal encoding of a signed relative distance: component 2i is
/// sin(k / 10000^(2i/d)), component 2i+1 the matching cos.
template <typename T = double>
std::vector<T> rel_pos_encoding(int distance, int d_model) {
    std::vector<T> enc(static_cast<std::size_t>(d_model));
    for (int i = 0; 2 * i < d_model; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / d_model);
        enc[std::size_t(2 * i)] = T(std::sin(distance * freq));
        if (2 * i + 1 < d_model) enc[std::size_t(2 * i + 1)] = T(std::cos(distance * freq));
    }
    return enc;
}

/// Rows for every distance in [-L_max, L_max].
template <typename T>
class RelPosTable {
  public:
    RelPosTable() = default;
    RelPosTable(int max_distance, int d_model)
        : max_distance_(max_distance), enc_(std::size_t(2 * max_distance + 1), std::size_t(d_model)) {
        for (int k = -max_distance; k <= max_distance; ++k) {
            const auto e = rel_pos_encoding<T>(k, d_model);
            std::copy(e.begin(), e.end(), enc_.row(std::size_t(k + max_distance)).begin());
        }
    }

    int max_distance() const { return max_distance_; }
    bool covers(int distance) const { return distance >= -max_distance_ && distance <= max_distance_; }

    std::span<const T> at(int distance) const {
        CF_CHECK(covers(distance), ErrorKind::range,
                 "relative distance " + std::to_string(distance) + " outside table of L_max " +
                     std::to_string(max_distance_));
        return enc_.row(std::size_t(distance + max_distance_));
    }

    const Matrix<T> &matrix() const { return enc_; }

  private:
    int max_distance_ = 0;
    Matrix<T> enc_;
};

// ─── Parameters ─────────────────────────────────────────────────────────────

template <typename T>
struct AttentionParams {
    int n_heads = 1;
    Linear<T> query;  // W_q, no bias
    Linear<T> key;    // W_k, no bias
    Linear<T> value;  // W_v, no bias
    Linear<T> pos;    // W_R, no bias
    std::vector<T> pos_bias_u; // d_model, split per head
    std::vector<T> pos_bias_v;
    Linear<T> out;

    int d_model() const { return int(query.in_features()); }
    int d_k() const { return d_model() / n_heads; }
};

/// Multiply-accumulate counts for the windowed score and value terms.
struct OpCounter {
    std::uint64_t score_macs = 0;    // content + positional logits
    std::uint64_t value_macs = 0;    // weighted value sums
    std::uint64_t total() const { return score_macs + value_macs; }
};

// ─── Scores ─────────────────────────────────────────────────────────────────

namespace detail {

template <typename T>
struct RowProjections {
    Matrix<T> q; // nq × d
    Matrix<T> k; // width × d
    Matrix<T> v; // width × d
};

/// Positional rows projected by W_R, indexed by distance + L_max.
template <typename T>
Matrix<T> project_table(const RelPosTable<T> &table, const AttentionParams<T> &params) {
    return params.pos.forward(table.matrix());
}

template <typename T>
void row_logits(const RowProjections<T> &pr, const Matrix<T> &pos_proj, int max_distance, int head, int d_k,
                int query_offset, const AttentionParams<T> &params, Matrix<T> &logits) {
    const std::size_t nq = pr.q.rows(), width = pr.k.rows();
    const T scale = T(1) / std::sqrt(T(d_k));
    const std::size_t h0 = std::size_t(head * d_k);
    for (std::size_t j = 0; j < nq; ++j) {
        const T *q = &pr.q(j, h0);
        const T *u = &params.pos_bias_u[h0];
        const T *v = &params.pos_bias_v[h0];
        for (std::size_t t = 0; t < width; ++t) {
            const int distance = query_offset + int(j) - int(t);
            CF_CHECK(distance >= -max_distance && distance <= max_distance, ErrorKind::range,
                     "relative distance " + std::to_string(distance) + " outside the positional table");
            const T *k = &pr.k(t, h0);
            const T *p = &pos_proj(std::size_t(distance + max_distance), h0);
            T content = 0, position = 0;
            for (int i = 0; i < d_k; ++i) {
                content += (q[i] + u[i]) * k[i];
                position += (q[i] + v[i]) * p[i];
            }
            logits(j, t) = (content + position) * scale;
        }
    }
}

} // namespace detail

/// Logits for one row of (l + c + r) inputs. Queries are the c chunk positions
/// plus the r lookahead positions; keys are the whole row. Returns one
/// (c + r) × (l + c + r) matrix per head.
template <typename T>
std::vector<Matrix<T>> attention_scores(const ChunkBatch<T> &batch, std::size_t row, const AttentionParams<T> &params,
                                        const RelPosTable<T> &table) {
    CF_CHECK(int(batch.dim()) == params.d_model(), ErrorKind::shape, "attention: row width != d_model");
    const int width = batch.width(), nq = batch.chunk + batch.right;
    detail::RowProjections<T> pr{Matrix<T>(std::size_t(nq), batch.dim()), Matrix<T>(std::size_t(width), batch.dim()),
                                 Matrix<T>()};
    for (int t = 0; t < width; ++t) params.key.apply(batch.at(row, t), pr.k.row(std::size_t(t)));
    for (int j = 0; j < nq; ++j) params.query.apply(batch.at(row, batch.left + j), pr.q.row(std::size_t(j)));
    const Matrix<T> pos_proj = detail::project_table(table, params);
    std::vector<Matrix<T>> out;
    for (int h = 0; h < params.n_heads; ++h) {
        Matrix<T> logits(static_cast<std::size_t>(nq), static_cast<std::size_t>(width));
        detail::row_logits(pr, pos_proj, table.max_distance(), h, params.d_k(), batch.left, params, logits);
        out.push_back(std::move(logits));
    }
    return out;
}

/// exp(beta * e) normalized over valid keys; masked keys get exactly 0. A row
/// with no valid key becomes all zeros.
template <typename T>
void masked_softmax(std::span<T> logits, std::span<const std::uint8_t> mask, T beta = T(1)) {
    T max_v = -std::numeric_limits<T>::infinity();
    for (std::size_t t = 0; t < logits.size(); ++t)
        if (mask[t]) max_v = std::max(max_v, beta * logits[t]);
    if (max_v == -std::numeric_limits<T>::infinity()) {
        std::fill(logits.begin(), logits.end(), T(0));
        return;
    }
    T sum = 0;
    for (std::size_t t = 0; t < logits.size(); ++t) {
        logits[t] = mask[t] ? std::exp(beta * logits[t] - max_v) : T(0);
        sum += logits[t];
    }
    for (T &w : logits) w /= sum;
}

/// Windowed relative attention over every row of `batch`. Output is
/// (B * (c + r)) × d: per row the c chunk queries then the r lookahead
/// queries. Masked keys never contribute and masked queries output zero.
template <typename T>
Matrix<T> chunk_attention(const ChunkBatch<T> &batch, const AttentionParams<T> &params, const RelPosTable<T> &table,
                          T beta = T(1), OpCounter *counter = nullptr) {
    CF_CHECK(int(batch.dim()) == params.d_model(), ErrorKind::shape, "attention: row width != d_model");
    CF_CHECK(params.d_model() % params.n_heads == 0, ErrorKind::shape, "attention: d_model % n_heads != 0");
    const int width = batch.width(), nq = batch.chunk + batch.right, d_k = params.d_k();
    const std::size_t d = batch.dim();
    const Matrix<T> pos_proj = detail::project_table(table, params);

    Matrix<T> out(batch.batch_size() * std::size_t(nq), d);
    detail::RowProjections<T> pr{Matrix<T>(std::size_t(nq), d), Matrix<T>(std::size_t(width), d),
                                 Matrix<T>(std::size_t(width), d)};
    Matrix<T> logits(static_cast<std::size_t>(nq), static_cast<std::size_t>(width));
    std::vector<T> z(d);
    for (std::size_t b = 0; b < batch.batch_size(); ++b) {
        const auto mask = batch.row_mask(b);
        for (int t = 0; t < width; ++t) {
            if (mask[std::size_t(t)]) {
                params.key.apply(batch.at(b, t), pr.k.row(std::size_t(t)));
                params.value.apply(batch.at(b, t), pr.v.row(std::size_t(t)));
            } else {
                std::fill(pr.k.row(std::size_t(t)).begin(), pr.k.row(std::size_t(t)).end(), T(0));
                std::fill(pr.v.row(std::size_t(t)).begin(), pr.v.row(std::size_t(t)).end(), T(0));
            }
        }
        for (int j = 0; j < nq; ++j) {
            if (mask[std::size_t(batch.left + j)])
                params.query.apply(batch.at(b, batch.left + j), pr.q.row(std::size_t(j)));
            else
                std::fill(pr.q.row(std::size_t(j)).begin(), pr.q.row(std::size_t(j)).end(), T(0));
        }

        Matrix<T> heads(std::size_t(nq), d);
        for (int h = 0; h < params.n_heads; ++h) {
            detail::row_logits(pr, pos_proj, table.max_distance(), h, d_k, batch.left, params, logits);
            const std::size_t h0 = std::size_t(h * d_k);
            for (int j = 0; j < nq; ++j) {
                auto w = logits.row(std::size_t(j));
                masked_softmax<T>(w, mask, beta);
                T *dst = &heads(std::size_t(j), h0);
                for (int i = 0; i < d_k; ++i) dst[i] = 0;
                for (int t = 0; t < width; ++t) {
                    const T a = w[std::size_t(t)];
                    const T *v = &pr.v(std::size_t(t), h0);
                    for (int i = 0; i < d_k; ++i) dst[i] += a * v[i];
                }
            }
        }
        if (counter) {
            counter->score_macs += 2ull * std::uint64_t(nq) * std::uint64_t(width) * d;
            counter->value_macs += std::uint64_t(nq) * std::uint64_t(width) * d;
        }
        for (int j = 0; j < nq; ++j) {
            auto dst = out.row(b * std::size_t(nq) + std::size_t(j));
            if (!mask[std::size_t(batch.left + j)]) continue; // stays zero
            params.out.apply(heads.row(std::size_t(j)), dst);
        }
    }
    return out;
}

/// Attention cache for the next step: last l_att real frames of this layer's
/// attention input, given the previous cache and this step's emitted frames.
template <typename T>
Matrix<T> update_att_cache(const Matrix<T> &old_cache, const Matrix<T> &emitted, int attention_left) {
    return roll_cache(old_cache, emitted, attention_left);
}

} // namespace chunkformer
