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

#include <algorithm>
#include <random>

#include "chunkformer/costmodel.hpp"
#include "chunkformer/oracle.hpp"
#include "chunkformer/selftest.hpp"

namespace cf = chunkformer;

namespace {

const cf::ContextConfig kLong{128, 64, 128};

std::vector<double> table_durations() { return {1, 30, 60, 900, 1800, 3600}; }

} // namespace

TEST(Frames, DurationToFrames) {
    EXPECT_EQ(cf::raw_frames_for_duration(1.0), 98);
    EXPECT_EQ(cf::hidden_frames_for_duration(1.0), 13);
    EXPECT_EQ(cf::raw_frames_for_duration(0.01), 0);
    EXPECT_THROW(cf::raw_frames_for_duration(0.0), cf::Error);
    EXPECT_THROW(cf::raw_frames_for_duration(-3.0), cf::Error);
}

TEST(Flops, ExecutedAttentionIsLinearInChunks) {
    const auto m = cf::ModelConfig::large();
    const cf::flops_t one = cf::attention_flops(64, kLong, m);
    for (long n = 1; n <= 32; ++n) EXPECT_EQ(cf::attention_flops(64 * n, kLong, m), cf::flops_t(n) * one);
    // A partial last chunk is executed at full size.
    EXPECT_EQ(cf::attention_flops(2000, kLong, m), cf::attention_flops(2048, kLong, m));
}

TEST(Flops, DenseAttentionIsQuadratic) {
    const auto m = cf::ModelConfig::large();
    EXPECT_EQ(cf::attention_flops(2000, kLong, m, cf::Accounting::dense) * 4,
              cf::attention_flops(4000, kLong, m, cf::Accounting::dense));
}

TEST(Flops, ExecutedPerRowUsesWholeWindow) {
    const auto m = cf::ModelConfig::large();
    EXPECT_EQ(kLong.window(), 320);
    EXPECT_EQ(cf::attention_flops(64, kLong, m),
              cf::flops_t(m.num_layers) * 2 * 3 * (64 + 128) * 320 * cf::flops_t(m.d_model));
}

TEST(Flops, FullContextEffectiveEqualsDense) {
    const auto m = cf::ModelConfig{};
    for (long t : {1L, 7L, 100L, 513L}) {
        const auto ctx = cf::ContextConfig::full(int(t));
        EXPECT_EQ(cf::encoder_flops(t, ctx, m, cf::Accounting::effective),
                  cf::encoder_flops(t, ctx, m, cf::Accounting::dense));
    }
}

TEST(Flops, EffectiveNeverExceedsExecutedOrDense) {
    std::mt19937_64 rng(1);
    const auto m = cf::ModelConfig{};
    for (int trial = 0; trial < 200; ++trial) {
        const cf::ContextConfig ctx{cf::uniform_int(rng, 0, 20), cf::uniform_int(rng, 1, 20), cf::uniform_int(rng, 0, 20)};
        const long t = cf::uniform_int(rng, 1, 400);
        const auto eff = cf::attention_flops(t, ctx, m, cf::Accounting::effective);
        EXPECT_LE(eff, cf::attention_flops(t, ctx, m, cf::Accounting::executed));
        EXPECT_LE(eff, cf::attention_flops(t, ctx, m, cf::Accounting::dense));
    }
}

TEST(Flops, WindowPairsMatchMaskCount) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const cf::ContextConfig ctx{cf::uniform_int(rng, 0, 6), cf::uniform_int(rng, 1, 6), cf::uniform_int(rng, 0, 6)};
        const long t = cf::uniform_int(rng, 1, 60);
        cf::flops_t pairs = 0;
        for (long j = 0; j < t; ++j)
            for (long k = 0; k < t; ++k) pairs += cf::in_chunk_window(std::size_t(j), std::size_t(k), ctx);
        EXPECT_EQ(cf::window_pairs(t, ctx), pairs);
    }
}

TEST(Flops, CountersAgreeWithAccounting) {
    std::mt19937_64 rng(3);
    cf::ModelConfig m;
    m.num_layers = 1;
    m.d_model = 8;
    m.n_heads = 2;
    for (int trial = 0; trial < 10; ++trial) {
        const cf::ContextConfig ctx{cf::uniform_int(rng, 0, 6), cf::uniform_int(rng, 1, 5), cf::uniform_int(rng, 0, 5)};
        const int L = cf::uniform_int(rng, 1, 50);
        const auto p = cf::random_attention<double>(8, 2, rng);
        const auto x = cf::random_matrix<double>(std::size_t(L), 8, rng);
        cf::OpCounter chunked, dense;
        cf::chunk_attention_sequence(x, p, cf::RelPosTable<double>(ctx.window(), 8), ctx, &chunked);
        cf::dense_attention_reference<double>(
            x, p, ctx.window(), [&](std::size_t j, std::size_t t) { return cf::in_chunk_window(j, t, ctx); }, &dense);
        EXPECT_EQ(2 * chunked.total(), cf::attention_flops(L, ctx, m, cf::Accounting::executed));
        EXPECT_EQ(2 * dense.total(), cf::attention_flops(L, ctx, m, cf::Accounting::effective));
    }
}

TEST(Batch, MixedDurationsRatio) {
    const auto rep = cf::batch_cost(table_durations(), kLong, cf::ModelConfig::large());
    EXPECT_NEAR(rep.ratio, 3.38, 0.05 * 3.38);
    EXPECT_NEAR(rep.duration_ratio, 21600.0 / 6391.0, 1e-12);
    EXPECT_NEAR(rep.ratio, rep.duration_ratio, 0.01 * rep.duration_ratio);
    EXPECT_EQ(rep.audios.size(), 6u);
    EXPECT_EQ(rep.audios[0].hidden_frames, 13);
}

TEST(Batch, SingleOrIdenticalAudiosHaveUnitRatio) {
    const auto m = cf::ModelConfig::large();
    EXPECT_EQ(cf::batch_cost({42.0}, kLong, m).ratio, 1.0);
    EXPECT_EQ(cf::batch_cost({30, 30, 30}, kLong, m).ratio, 1.0);
    EXPECT_EQ(cf::batch_cost({30, 30, 30}, kLong, m).duration_ratio, 1.0);
}

TEST(Batch, MaskedIsOrderFreeAndAdditive) {
    const auto m = cf::ModelConfig::large();
    auto d = table_durations();
    const auto base = cf::batch_cost(d, kLong, m);
    std::mt19937_64 rng(4);
    std::shuffle(d.begin(), d.end(), rng);
    const auto shuffled = cf::batch_cost(d, kLong, m);
    EXPECT_EQ(shuffled.masked, base.masked);
    EXPECT_EQ(shuffled.naive, base.naive);
    cf::FlopBreakdown sum;
    for (double s : d) sum += cf::encoder_flops(cf::hidden_frames_for_duration(s), kLong, m);
    EXPECT_EQ(sum, base.masked);
    EXPECT_GE(base.ratio, 1.0);
}

TEST(Batch, RejectsBadDurations) {
    const auto m = cf::ModelConfig::large();
    EXPECT_THROW(cf::batch_cost({}, kLong, m), cf::Error);
    EXPECT_THROW(cf::batch_cost({1.0, 0.0}, kLong, m), cf::Error);
    EXPECT_THROW(cf::batch_cost({0.01}, kLong, m), cf::Error);
}

TEST(Batch, ReportFormats) {
    const auto rep = cf::batch_cost(table_durations(), kLong, cf::ModelConfig::large());
    const auto text = cf::format_report(rep);
    EXPECT_NE(text.find("naive/masked FLOPs ratio"), std::string::npos);
    EXPECT_NE(text.find("1h"), std::string::npos);
    EXPECT_NE(text.find("15m"), std::string::npos);
    const auto csv = cf::format_csv(rep);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 9);
    EXPECT_EQ(cf::format_duration(1.5), "1.5s");
}

TEST(Memory, ChunkedIndependentOfLength) {
    const auto m = cf::ModelConfig::large();
    const auto a = cf::memory_estimate(100, kLong, m, cf::MemoryMode::chunked);
    for (long t : {1L, 1000L, 100000L}) EXPECT_EQ(cf::memory_estimate(t, kLong, m, cf::MemoryMode::chunked), a);
    EXPECT_LT(cf::memory_estimate(1, kLong, m, cf::MemoryMode::chunked, 4), a);
}

TEST(Memory, DenseIsQuadratic) {
    const auto m = cf::ModelConfig::large();
    auto at = [&](long t) { return double(cf::memory_estimate(t, kLong, m, cf::MemoryMode::dense)); };
    const double second = at(300) - 2 * at(200) + at(100);
    EXPECT_DOUBLE_EQ(at(1300) - 2 * at(1200) + at(1100), second);
    EXPECT_GT(second, 0.0);
}

TEST(Memory, ChunkedWinsFromCrossoverOn) {
    for (const auto &[ctx, m] : {std::pair{kLong, cf::ModelConfig::large()}, std::pair{cf::ContextConfig{}, cf::ModelConfig{}}}) {
        const long x = cf::memory_crossover(ctx, m);
        const auto chunked = cf::memory_estimate(1, ctx, m, cf::MemoryMode::chunked);
        if (x > 1) EXPECT_LE(cf::memory_estimate(x - 1, ctx, m, cf::MemoryMode::dense), chunked);
        for (long t = x; t < x + 2000; t += 37) EXPECT_LT(chunked, cf::memory_estimate(t, ctx, m, cf::MemoryMode::dense));
    }
}
