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
#include <random>
#include <string>
#include <vector>

#include "chunkformer/attention.hpp"
#include "chunkformer/chunking.hpp"
#include "chunkformer/ctc.hpp"
#include "chunkformer/encoder.hpp"
#include "chunkformer/model.hpp"
#include "chunkformer/oracle.hpp"
#include "chunkformer/weights.hpp"

namespace chunkformer {

// ─── Random inputs ──────────────────────────────────────────────────────────

/// Uniform in [-scale, scale) from raw generator bits, identical on every platform.
inline double uniform_pm(std::mt19937_64 &rng, double scale = 1.0) {
    return scale * (2.0 * (double(rng() >> 11) * 0x1.0p-53) - 1.0);
}

/// Uniform integer in [lo, hi].
inline int uniform_int(std::mt19937_64 &rng, int lo, int hi) {
    return lo + int(rng() % std::uint64_t(hi - lo + 1));
}

template <typename T>
Matrix<T> random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64 &rng, double scale = 1.0) {
    Matrix<T> m(rows, cols);
    for (T &v : m.data()) v = T(uniform_pm(rng, scale));
    return m;
}

template <typename T>
std::vector<T> random_vector(std::size_t n, std::mt19937_64 &rng, double scale = 1.0) {
    std::vector<T> v(n);
    for (T &x : v) x = T(uniform_pm(rng, scale));
    return v;
}

/// Attention parameters with every score term switched on.
template <typename T>
AttentionParams<T> random_attention(int d, int heads, std::mt19937_64 &rng) {
    const double a = 1.0 / std::sqrt(double(d));
    const std::size_t n = std::size_t(d);
    AttentionParams<T> p;
    p.n_heads = heads;
    p.query.weight = random_matrix<T>(n, n, rng, a);
    p.key.weight = random_matrix<T>(n, n, rng, a);
    p.value.weight = random_matrix<T>(n, n, rng, a);
    p.pos.weight = random_matrix<T>(n, n, rng, a);
    p.pos_bias_u = random_vector<T>(n, rng, a);
    p.pos_bias_v = random_vector<T>(n, rng, a);
    p.out.weight = random_matrix<T>(n, n, rng, a);
    p.out.bias = random_vector<T>(n, rng, a);
    return p;
}

/// Log-mel-like feature matrix.
inline Matrix<float> random_features(int frames, std::mt19937_64 &rng) {
    return random_matrix<float>(std::size_t(frames), std::size_t(ModelConfig::kMelBins), rng, 3.0);
}

/// Chunk attention over a single sequence, chunk outputs laid end to end and
/// cut back to the sequence length.
template <typename T>
Matrix<T> chunk_attention_sequence(const Matrix<T> &x, const AttentionParams<T> &p, const RelPosTable<T> &table,
                                   const ContextConfig &ctx, OpCounter *counter = nullptr) {
    const int c = ctx.chunk_size, L = int(x.rows());
    std::vector<int> starts;
    for (int s = 0; s < L; s += c) starts.push_back(s);
    const auto batch = oct_segment(x, std::span<const int>(starts), ctx.attention_left, c, ctx.right_context);
    const Matrix<T> z = chunk_attention(batch, p, table, T(1), counter);
    const int nq = c + ctx.right_context;
    Matrix<T> out(std::size_t(L), x.cols());
    for (int j = 0; j < L; ++j) {
        const auto src = z.row(std::size_t((j / c) * nq + j % c));
        std::copy(src.begin(), src.end(), out.row(std::size_t(j)).begin());
    }
    return out;
}

// ─── Suites ─────────────────────────────────────────────────────────────────

struct SelftestOptions {
    std::uint64_t seed = 1234;
    bool inject_cache_off_by_one = false;
};

struct SuiteResult {
    std::string name;
    OracleReport report;
    double tolerance = 0;
    bool passed = false;
    std::string detail;
};

namespace selftest_detail {

inline ModelConfig desk_model(std::uint64_t seed) {
    ModelConfig m;
    m.seed = seed;
    return m;
}

inline SuiteResult finish(std::string name, const OracleReport &rep, double tol, std::string detail = {}) {
    return {std::move(name), rep, tol, rep.within(tol), std::move(detail)};
}

} // namespace selftest_detail

inline SuiteResult selftest_attention(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    OracleReport worst;
    for (int trial = 0; trial < 10; ++trial) {
        const ContextConfig ctx{uniform_int(rng, 0, 8), uniform_int(rng, 1, 6), uniform_int(rng, 0, 6)};
        const int heads = uniform_int(rng, 1, 4), d = heads * uniform_int(rng, 1, 8), L = uniform_int(rng, 1, 40);
        const auto p = random_attention<double>(d, heads, rng);
        const RelPosTable<double> table(ctx.window(), d);
        const auto x = random_matrix<double>(std::size_t(L), std::size_t(d), rng);
        const auto got = chunk_attention_sequence(x, p, table, ctx);
        const auto ref = dense_attention_reference<double>(
            x, p, ctx.window(), [&](std::size_t j, std::size_t t) { return in_chunk_window(j, t, ctx); });
        worst = merge(worst, compare(got, ref, 1e-10));
    }
    return selftest_detail::finish("attention", worst, 1e-10, "chunk_attention vs dense reference, f64");
}

inline SuiteResult selftest_full_context(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ModelConfig m = selftest_detail::desk_model(seed);
    const auto w = init_weights(m, seed);
    const auto p64 = ModelParams<double>::from(w);
    const auto p32 = ModelParams<float>::from(w);
    OracleReport worst;
    for (int raw : {37, 96, 150}) {
        const std::vector<Matrix<float>> f{random_features(raw, rng)};
        const int frames = subsampled_length(raw);
        const ContextConfig ctx = ContextConfig::full(frames);
        const auto ref = full_context_encode(f[0], p64);
        worst = merge(worst, compare(encode_full<float>(p32, ctx, f)[0], ref, 1e-5));
    }
    return selftest_detail::finish("full_context", worst, 1e-5, "single chunk, unbounded context vs full-context oracle, f32");
}

inline SuiteResult selftest_streaming(const SelftestOptions &opt) {
    std::mt19937_64 rng(opt.seed + 1);
    const auto w = init_weights(selftest_detail::desk_model(opt.seed), opt.seed);
    const auto p = ModelParams<float>::from(w);
    const ContextConfig ctx;
    OracleReport worst;
    for (int trial = 0; trial < 3; ++trial) {
        const std::vector<Matrix<float>> f{random_features(uniform_int(rng, 200, 600), rng)};
        EncodeOptions one;
        one.budget = 1 << 20;
        EncodeOptions many;
        many.budget = uniform_int(rng, 1, 4);
        many.inject_cache_off_by_one = opt.inject_cache_off_by_one;
        worst = merge(worst, compare(encode_full<float>(p, ctx, f, many)[0], encode_full<float>(p, ctx, f, one)[0], 1e-4));
    }
    return selftest_detail::finish("streaming", worst, 1e-4, "multi-step vs single-step, f32");
}

inline SuiteResult selftest_masked_batch(const SelftestOptions &opt) {
    std::mt19937_64 rng(opt.seed + 2);
    const auto w = init_weights(selftest_detail::desk_model(opt.seed), opt.seed);
    const auto p32 = ModelParams<float>::from(w);
    const auto p64 = ModelParams<double>::from(w);
    const ContextConfig ctx;
    std::vector<Matrix<float>> f;
    for (int raw : {9, 180, 420}) f.push_back(random_features(raw, rng));
    EncodeOptions o;
    o.budget = 6;
    o.inject_cache_off_by_one = opt.inject_cache_off_by_one;
    const auto got = encode_full<float>(p32, ctx, f, o);
    const auto ref = loop_oct_encode<double>(f, p64, ctx);
    OracleReport worst;
    for (std::size_t i = 0; i < f.size(); ++i) worst = merge(worst, compare(got[i], ref[i], 1e-4));
    return selftest_detail::finish("masked_batch", worst, 1e-4, "3-audio masked batch vs per-audio loop oracle, f32");
}

inline SuiteResult selftest_poison(const SelftestOptions &opt) {
    std::mt19937_64 rng(opt.seed + 3);
    const auto w = init_weights(selftest_detail::desk_model(opt.seed), opt.seed);
    const auto p = ModelParams<float>::from(w);
    const ContextConfig ctx;
    std::vector<Matrix<float>> f;
    for (int raw : {30, 250, 61}) f.push_back(random_features(raw, rng));
    EncodeOptions clean;
    clean.budget = 5;
    clean.inject_cache_off_by_one = opt.inject_cache_off_by_one;
    EncodeOptions dirty = clean;
    dirty.poison = true;
    dirty.poison_seed = opt.seed;
    const auto a = encode_full<float>(p, ctx, f, clean), b = encode_full<float>(p, ctx, f, dirty);
    OracleReport worst;
    for (std::size_t i = 0; i < f.size(); ++i) worst = merge(worst, compare(b[i], a[i], 0.0));
    return selftest_detail::finish("poison", worst, 0.0, "masked positions randomized, outputs bitwise equal");
}

inline SuiteResult selftest_ctc(std::uint64_t seed) {
    std::mt19937_64 rng(seed + 4);
    long mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const int frames = uniform_int(rng, 1, 60), vocab = uniform_int(rng, 2, 6);
        Matrix<float> logits(static_cast<std::size_t>(frames), static_cast<std::size_t>(vocab));
        for (float &v : logits.data()) v = float(uniform_int(rng, 0, 3)); // frequent ties
        const auto whole = greedy_decode(logits).first;
        CtcCarry carry;
        CtcHypothesis hyp;
        for (int s = 0; s < frames;) {
            const int e = std::min(frames, s + uniform_int(rng, 1, 7));
            greedy_decode(logits.slice_rows(std::size_t(s), std::size_t(e)), carry, hyp);
            s = e;
        }
        if (hyp.tokens != whole) ++mismatches;
    }
    OracleReport rep;
    rep.max_rel_error = double(mismatches);
    rep.elements = 200;
    return selftest_detail::finish("ctc_split", rep, 0.0, "split greedy decode with carry vs whole-sequence decode");
}

inline std::vector<SuiteResult> run_selftest(const SelftestOptions &opt = {}) {
    return {selftest_attention(opt.seed),    selftest_full_context(opt.seed), selftest_streaming(opt),
            selftest_masked_batch(opt),      selftest_poison(opt),            selftest_ctc(opt.seed)};
}

} // namespace chunkformer
