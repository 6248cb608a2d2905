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

#include <gtest/gtest.h>

#include <random>

#include "chunkformer/conv.hpp"
#include "chunkformer/oracle.hpp"
#include "chunkformer/selftest.hpp"

namespace cf = chunkformer;

namespace {

cf::LayerNorm<double> unit_norm(int d) {
    return {std::vector<double>(std::size_t(d), 1.0), std::vector<double>(std::size_t(d), 0.0)};
}

cf::ConvParams<double> random_conv(int d, int kernel, std::mt19937_64 &rng) {
    cf::ConvParams<double> p;
    p.pre_norm = unit_norm(d);
    p.pointwise_in = {cf::random_matrix<double>(std::size_t(d), std::size_t(2 * d), rng, 0.5),
                      cf::random_vector<double>(std::size_t(2 * d), rng, 0.1)};
    p.depthwise = cf::random_matrix<double>(std::size_t(kernel), std::size_t(d), rng, 0.5);
    p.depthwise_bias = cf::random_vector<double>(std::size_t(d), rng, 0.1);
    p.norm = unit_norm(d);
    p.pointwise_out = {cf::random_matrix<double>(std::size_t(d), std::size_t(d), rng, 0.5),
                       cf::random_vector<double>(std::size_t(d), rng, 0.1)};
    return p;
}

/// Zero-padded depthwise convolution over a whole sequence.
cf::Matrix<double> full_depthwise(const cf::Matrix<double> &x, const cf::Matrix<double> &kernel,
                                  const std::vector<double> &bias) {
    const int L = int(x.rows()), K = int(kernel.rows()), half = (K - 1) / 2;
    cf::Matrix<double> y(x.rows(), x.cols());
    for (int t = 0; t < L; ++t)
        for (std::size_t ch = 0; ch < x.cols(); ++ch) {
            double acc = bias[ch];
            for (int k = 0; k < K; ++k) {
                const int s = t + k - half;
                if (s >= 0 && s < L) acc += kernel(std::size_t(k), ch) * x(std::size_t(s), ch);
            }
            y(std::size_t(t), ch) = acc;
        }
    return y;
}

cf::ChunkBatch<double> conv_rows(const cf::Matrix<double> &x, int l_conv, int c, int r) {
    std::vector<int> starts;
    for (int s = 0; s < int(x.rows()); s += c) starts.push_back(s);
    return cf::oct_segment(x, std::span<const int>(starts), l_conv, c, r);
}

} // namespace

TEST(Depthwise, IdentityKernelCopiesInput) {
    std::mt19937_64 rng(1);
    const auto x = cf::random_matrix<double>(12, 5, rng);
    cf::Matrix<double> kernel(3, 5);
    for (std::size_t ch = 0; ch < 5; ++ch) kernel(1, ch) = 1.0;
    const auto y = cf::chunk_depthwise_conv(conv_rows(x, 1, 4, 1), kernel, std::span<const double>(std::vector<double>(5, 0.0)));
    EXPECT_TRUE(y == x);
}

TEST(Depthwise, ChunkedEqualsFullSequence) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const int K = 2 * cf::uniform_int(rng, 0, 7) + 1, half = (K - 1) / 2;
        const int c = cf::uniform_int(rng, 1, 8), r = half + cf::uniform_int(rng, 0, 3);
        const int L = c * cf::uniform_int(rng, 1, 8);
        const auto x = cf::random_matrix<double>(std::size_t(L), 6, rng);
        const auto kernel = cf::random_matrix<double>(std::size_t(K), 6, rng);
        const auto bias = cf::random_vector<double>(6, rng);
        const auto got = cf::chunk_depthwise_conv(conv_rows(x, half, c, r), kernel, std::span<const double>(bias));
        EXPECT_LE(cf::compare(got, full_depthwise(x, kernel, bias)).max_rel_error, 1e-12);
    }
}

TEST(Depthwise, TapsPastRowEndReadZero) {
    // r = 0 with a 5-tap kernel: the last chunk frame sees no right neighbours.
    cf::Matrix<double> x(8, 1, 1.0);
    cf::Matrix<double> kernel(5, 1, 1.0);
    const auto y = cf::chunk_depthwise_conv(conv_rows(x, 2, 4, 0), kernel, std::span<const double>(std::vector<double>{0.0}));
    EXPECT_EQ(y(3, 0), 3.0);
    EXPECT_EQ(y(4, 0), 5.0); // left context of chunk 1 still holds frames 2 and 3
    EXPECT_EQ(y(6, 0), 4.0);
    EXPECT_EQ(y(7, 0), 3.0);
}

TEST(Depthwise, ReceptiveFieldIsHalfKernelEachSide) {
    std::mt19937_64 rng(3);
    const int K = 7, half = 3, L = 24;
    const auto x = cf::random_matrix<double>(L, 2, rng);
    const auto kernel = cf::random_matrix<double>(K, 2, rng);
    const std::vector<double> bias(2, 0.0);
    const auto base = cf::chunk_depthwise_conv(conv_rows(x, half, 4, half), kernel, std::span<const double>(bias));
    for (int f = 0; f < L; ++f) {
        auto y = x;
        y(std::size_t(f), 0) += 1.0;
        const auto out = cf::chunk_depthwise_conv(conv_rows(y, half, 4, half), kernel, std::span<const double>(bias));
        for (int p = 0; p < L; ++p)
            EXPECT_EQ(out(std::size_t(p), 0) != base(std::size_t(p), 0), std::abs(p - f) <= half) << p << " " << f;
    }
}

TEST(Depthwise, RejectsMismatchedLeftContext) {
    const cf::Matrix<double> x(8, 2), kernel(5, 2);
    const std::vector<double> bias(2, 0.0);
    EXPECT_THROW(cf::chunk_depthwise_conv(conv_rows(x, 1, 4, 2), kernel, std::span<const double>(bias)), cf::Error);
}

TEST(Depthwise, MaskedNeighbourDoesNotLeak) {
    std::mt19937_64 rng(4);
    const auto x = cf::random_matrix<double>(16, 3, rng);
    const auto kernel = cf::random_matrix<double>(5, 3, rng);
    const std::vector<double> bias(3, 0.0);
    auto rows = conv_rows(x, 2, 4, 2);
    // Treat frames 8.. as a different audio for rows 0 and 1.
    for (std::size_t b = 0; b < 2; ++b)
        for (int p = 0; p < rows.width(); ++p)
            if (int(b) * 4 - 2 + p >= 8) rows.mask[b * std::size_t(rows.width()) + std::size_t(p)] = 0;
    const auto clean = cf::chunk_depthwise_conv(rows, kernel, std::span<const double>(bias));
    cf::poison_masked(rows, rng);
    const auto dirty = cf::chunk_depthwise_conv(rows, kernel, std::span<const double>(bias));
    EXPECT_TRUE(clean == dirty);
    const auto alone = full_depthwise(x.slice_rows(0, 8), kernel, bias);
    EXPECT_LE(cf::compare(clean.slice_rows(0, 8), alone).max_rel_error, 1e-12);
}

TEST(ConvModule, ZeroInputGivesZeroOutput) {
    std::mt19937_64 rng(5);
    auto p = random_conv(8, 15, rng);
    std::fill(p.pointwise_in.bias.begin(), p.pointwise_in.bias.end(), 0.0);
    std::fill(p.depthwise_bias.begin(), p.depthwise_bias.end(), 0.0);
    std::fill(p.pointwise_out.bias.begin(), p.pointwise_out.bias.end(), 0.0);
    const cf::Matrix<double> x(16, 8);
    const auto y = cf::conv_module_forward(conv_rows(x, 7, 4, 7), p);
    for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(ConvModule, MatchesStraightLineReference) {
    std::mt19937_64 rng(6);
    const int d = 8, K = 15, L = 40;
    const auto p = random_conv(d, K, rng);
    const auto x = cf::random_matrix<double>(L, d, rng);
    const auto got = cf::conv_module_forward(conv_rows(x, 7, 5, 7), p);

    const auto g = cf::glu(p.pointwise_in.forward(p.pre_norm.forward(x)));
    auto h = p.norm.forward(full_depthwise(g, p.depthwise, p.depthwise_bias));
    cf::swish_inplace(h);
    const auto ref = p.pointwise_out.forward(h);
    EXPECT_LE(cf::compare(got, ref).max_rel_error, 1e-12);
}

TEST(ConvCache, KeepsHalfKernel) {
    cf::Matrix<double> g(12, 1);
    for (std::size_t i = 0; i < 12; ++i) g(i, 0) = double(i);
    const auto cache = cf::update_conv_cache(cf::Matrix<double>(0, 1), g, cf::derive_l_conv(15));
    ASSERT_EQ(cache.rows(), 7u);
    EXPECT_EQ(cache(0, 0), 5.0);
    EXPECT_EQ(cf::update_conv_cache(cache, g, cf::derive_l_conv(1)).rows(), 0u);
}

TEST(LayerNorm, NormalizesRows) {
    std::mt19937_64 rng(7);
    const auto x = cf::random_matrix<double>(5, 32, rng, 10.0);
    const auto y = unit_norm(32).forward(x);
    for (std::size_t i = 0; i < 5; ++i) {
        double mean = 0, var = 0;
        for (double v : y.row(i)) mean += v;
        mean /= 32;
        for (double v : y.row(i)) var += (v - mean) * (v - mean);
        EXPECT_NEAR(mean, 0.0, 1e-12);
        EXPECT_NEAR(var / 32, 1.0, 1e-5);
    }
}

TEST(Glu, GatesSecondHalf) {
    cf::Matrix<double> x(1, 4);
    x(0, 0) = 2.0, x(0, 1) = -3.0, x(0, 2) = 0.0, x(0, 3) = 100.0;
    const auto y = cf::glu(x);
    ASSERT_EQ(y.cols(), 2u);
    EXPECT_DOUBLE_EQ(y(0, 0), 1.0);
    EXPECT_NEAR(y(0, 1), -3.0, 1e-12);
}
