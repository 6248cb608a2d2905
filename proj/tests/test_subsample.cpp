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

#include "chunkformer/costmodel.hpp"
#include "chunkformer/model.hpp"
#include "chunkformer/oracle.hpp"
#include "chunkformer/selftest.hpp"
#include "chunkformer/subsample.hpp"

namespace cf = chunkformer;

namespace {

const cf::ModelParams<double> &params() {
    static const auto p = cf::ModelParams<double>::from(cf::init_weights(cf::ModelConfig{}, 17));
    return p;
}

} // namespace

TEST(SubsampleLength, CeilThreeTimes) {
    EXPECT_EQ(cf::subsampled_length(32), 4);
    EXPECT_EQ(cf::subsampled_length(33), 5);
    EXPECT_EQ(cf::subsampled_length(1), 1);
    EXPECT_EQ(cf::subsampled_length(98), 13);
    for (int t = 1; t < 500; ++t) EXPECT_EQ(cf::subsampled_length(t), (t + 7) / 8);
}

TEST(SubsampleLength, ChunkOf128IsAbout10Seconds) {
    // 128 hidden frames cover 1024 raw frames of 10 ms.
    EXPECT_EQ(cf::hidden_frames_for_duration(10.24), 128);
    EXPECT_EQ(8 * 128 * 10, 10240);
}

TEST(Subsample, ShapeForWholeChunks) {
    std::mt19937_64 rng(1);
    const auto f = cf::random_features(32, rng);
    const auto h = cf::subsample_frames<double>(params().subsample, f, 0, 4);
    EXPECT_EQ(h.rows(), 4u);
    EXPECT_EQ(h.cols(), 64u);
}

TEST(Subsample, ChunkwiseEqualsFullSequence) {
    std::mt19937_64 rng(2);
    for (int raw : {1, 7, 8, 9, 31, 64, 100, 173}) {
        const auto f = cf::random_features(raw, rng);
        const auto ref = cf::reference_subsample(params().subsample, f);
        const int n = cf::subsampled_length(raw);
        ASSERT_EQ(int(ref.rows()), n);
        for (int c : {1, 3, 4, 16}) {
            cf::Matrix<double> got(0, ref.cols());
            for (int s = 0; s < n; s += c) got.append_rows(cf::subsample_frames<double>(params().subsample, f, s, std::min(c, n - s)));
            EXPECT_LE(cf::compare(got, ref).max_rel_error, 1e-12) << raw << " " << c;
        }
    }
}

TEST(Subsample, FloatMatchesDoubleReference) {
    std::mt19937_64 rng(3);
    const auto f = cf::random_features(150, rng);
    const auto p32 = cf::ModelParams<float>::from(cf::init_weights(cf::ModelConfig{}, 17));
    const auto got = cf::subsample_frames<float>(p32.subsample, f, 0, cf::subsampled_length(150));
    EXPECT_LE(cf::compare(got, cf::reference_subsample(params().subsample, f)).max_rel_error, 1e-5);
}

TEST(Subsample, FrameReadsOnlyItsRawWindow) {
    std::mt19937_64 rng(4);
    const int raw = 120, n = cf::subsampled_length(raw);
    const auto f = cf::random_features(raw, rng);
    const auto base = cf::reference_subsample(params().subsample, f);
    for (int a = 0; a < raw; a += 3) {
        auto g = f;
        for (float &v : g.row(std::size_t(a))) v += 1.0f;
        const auto out = cf::reference_subsample(params().subsample, g);
        for (int s = 0; s < n; ++s) {
            const bool inside = a >= 8 * s - cf::kSubsampleMargin && a < 8 * s + 8;
            const auto x = out.row(std::size_t(s)), y = base.row(std::size_t(s));
            const bool changed = !std::equal(x.begin(), x.end(), y.begin());
            if (!inside) EXPECT_FALSE(changed) << "raw " << a << " hidden " << s;
        }
    }
}

TEST(Subsample, ReadsOnlyRequestedRows) {
    std::mt19937_64 rng(5);
    const int raw = 90;
    const auto f = cf::random_features(raw, rng);
    int lo = raw, hi = -1;
    auto at = [&](int a) {
        lo = std::min(lo, a), hi = std::max(hi, a);
        return f.row(std::size_t(a));
    };
    cf::subsample_frames<double>(params().subsample, at, raw, 3, 4);
    EXPECT_EQ(lo, 8 * 3 - 7);
    EXPECT_EQ(hi, 8 * 7 - 1);
}

TEST(Subsample, RejectsWrongFeatureWidth) {
    const cf::Matrix<float> f(16, 40);
    EXPECT_THROW(cf::subsample_frames<double>(params().subsample, f, 0, 2), cf::Error);
}
