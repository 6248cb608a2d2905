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

#include "chunkformer/config.hpp"

namespace cf = chunkformer;

namespace {

bool has_issue(const std::vector<cf::ConfigIssue> &issues, const std::string &field) {
    for (const auto &i : issues)
        if (i.field == field) return true;
    return false;
}

} // namespace

TEST(RightContext, KnownValues) {
    EXPECT_EQ(cf::derive_r_rel({4, 3, 2}, 4), 11);
    EXPECT_EQ(cf::derive_r_rel({4, 3, 2}, 1), 2);
    EXPECT_EQ(cf::derive_r_rel({128, 64, 128}, 17), 2176);
}

TEST(RightContext, MatchesRecurrence) {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const cf::ContextConfig ctx{int(rng() % 10), 1 + int(rng() % 9), int(rng() % 10)};
        const int n = 1 + int(rng() % 20);
        int acc = ctx.right_context;
        for (int k = 2; k <= n; ++k) acc += std::max(ctx.chunk_size, ctx.right_context);
        EXPECT_EQ(cf::derive_r_rel(ctx, n), acc);
    }
}

TEST(RightContext, MonotoneAndStepsByMaxCR) {
    for (int c = 1; c <= 6; ++c)
        for (int r = 0; r <= 6; ++r)
            for (int n = 1; n <= 8; ++n) {
                const int v = cf::derive_r_rel({0, c, r}, n);
                EXPECT_EQ(cf::derive_r_rel({0, c, r}, n + 1) - v, std::max(c, r));
                EXPECT_GE(cf::derive_r_rel({0, c + 1, r}, n), v);
                EXPECT_GE(cf::derive_r_rel({0, c, r + 1}, n), v);
            }
}

TEST(RightContext, RejectsZeroLayers) {
    EXPECT_THROW(cf::derive_r_rel({1, 1, 1}, 0), cf::Error);
}

TEST(Lookahead, ExactReachAgreesWhenRightFitsChunks) {
    for (int c = 1; c <= 8; ++c)
        for (int r = 1; r <= 16; ++r)
            for (int n = 1; n <= 6; ++n) {
                const cf::ContextConfig ctx{0, c, r};
                if (r <= c || r % c == 0) EXPECT_EQ(cf::exact_lookahead(ctx, n), cf::derive_r_rel(ctx, n));
                EXPECT_EQ(cf::lookahead_frames(ctx, n),
                          std::max(cf::exact_lookahead(ctx, n), cf::derive_r_rel(ctx, n)));
            }
}

TEST(Lookahead, ExactExceedsClosedFormForRaggedRight) {
    // r = 5, c = 4: each extra layer reaches 8 frames, not 5.
    const cf::ContextConfig ctx{0, 4, 5};
    EXPECT_EQ(cf::derive_r_rel(ctx, 3), 15);
    EXPECT_EQ(cf::exact_lookahead(ctx, 3), 21);
    EXPECT_EQ(cf::lookahead_frames(ctx, 3), 21);
}

TEST(Lookahead, ZeroRightOrZeroLayers) {
    EXPECT_EQ(cf::lookahead_frames({4, 3, 0}, 4), 9);
    EXPECT_EQ(cf::exact_lookahead({4, 3, 0}, 4), 0);
    EXPECT_EQ(cf::lookahead_frames({4, 3, 2}, 0), 0);
}

TEST(ConvContext, HalfKernel) {
    EXPECT_EQ(cf::derive_l_conv(15), 7);
    EXPECT_EQ(cf::derive_l_conv(1), 0);
    EXPECT_EQ(cf::derive_l_conv(31), 15);
    EXPECT_THROW(cf::derive_l_conv(4), cf::Error);
    EXPECT_THROW(cf::derive_l_conv(0), cf::Error);
}

TEST(Validate, DefaultsAreValid) {
    EXPECT_TRUE(cf::validate(cf::ModelConfig{}, cf::ContextConfig{}).empty());
    EXPECT_TRUE(cf::validate(cf::ModelConfig::large(), {128, 64, 128}).empty());
}

TEST(Validate, HeadDivisibilityNamesField) {
    cf::ModelConfig m;
    m.d_model = 65;
    const auto issues = cf::validate(m, {});
    ASSERT_EQ(issues.size(), 1u);
    EXPECT_EQ(issues[0].field, "d_model");
    EXPECT_NE(issues[0].message.find("65"), std::string::npos);
}

TEST(Validate, TableTooShortForWindow) {
    cf::ModelConfig m;
    m.max_rel_distance = 8;
    EXPECT_TRUE(has_issue(cf::validate(m, {8, 4, 4}), "L_max"));
    m.max_rel_distance = 16;
    EXPECT_TRUE(cf::validate(m, {8, 4, 4}).empty());
}

TEST(Validate, ReportsEveryViolation) {
    cf::ModelConfig m;
    m.kernel_size = 4;
    m.n_heads = 0;
    m.subsample_factor = 4;
    const auto issues = cf::validate(m, {-1, 0, -2});
    for (const char *f : {"kernel_size", "n_heads", "subsample_factor", "l_att", "c", "r"})
        EXPECT_TRUE(has_issue(issues, f)) << f;
    try {
        cf::validate_or_throw(m, {-1, 0, -2});
        FAIL() << "expected a config error";
    } catch (const cf::Error &e) {
        EXPECT_EQ(e.kind(), cf::ErrorKind::config);
        EXPECT_NE(std::string(e.what()).find("kernel_size"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("subsample_factor"), std::string::npos);
    }
}

TEST(ConfigFile, ParsesOverridesAndKeepsDefaults) {
    const auto cfg = cf::parse_config(R"({"N": 2, "d_model": 32, "l_att": 16, "c": 8})");
    EXPECT_EQ(cfg.model.num_layers, 2);
    EXPECT_EQ(cfg.model.d_model, 32);
    EXPECT_EQ(cfg.model.n_heads, 4);
    EXPECT_EQ(cfg.context.attention_left, 16);
    EXPECT_EQ(cfg.context.chunk_size, 8);
    EXPECT_EQ(cfg.context.right_context, 4);
}

TEST(ConfigFile, RoundTripsThroughJson) {
    cf::Config cfg;
    cfg.model = cf::ModelConfig::large();
    cfg.model.seed = 99;
    cfg.context = {128, 64, 128};
    const auto back = cf::parse_config(cf::to_json(cfg));
    EXPECT_EQ(back.model, cfg.model);
    EXPECT_EQ(back.context, cfg.context);
}

TEST(ConfigFile, RejectsBadInput) {
    auto kind_of = [](const std::string &text) {
        try {
            cf::parse_config(text);
        } catch (const cf::Error &e) {
            return e.kind();
        }
        return cf::ErrorKind::usage;
    };
    EXPECT_EQ(kind_of("{"), cf::ErrorKind::config);
    EXPECT_EQ(kind_of("[1, 2]"), cf::ErrorKind::config);
    EXPECT_EQ(kind_of(R"({"N": 2.5})"), cf::ErrorKind::config);
    EXPECT_EQ(kind_of(R"({"layers": 2})"), cf::ErrorKind::config);
    EXPECT_THROW(cf::load_config("/nonexistent/config.json"), cf::Error);
}

TEST(ContextFlag, Parses) {
    EXPECT_EQ(cf::parse_context("128,64,128"), (cf::ContextConfig{128, 64, 128}));
    EXPECT_THROW(cf::parse_context("1,2"), cf::Error);
    EXPECT_THROW(cf::parse_context("1,x,2"), cf::Error);
    EXPECT_THROW(cf::parse_context("1,2,3,4"), cf::Error);
}

TEST(ContextFlag, FullContextCoversSequence) {
    const auto ctx = cf::ContextConfig::full(37);
    EXPECT_EQ(ctx.chunk_size, 37);
    EXPECT_EQ(ctx.window(), 3 * 37);
}
