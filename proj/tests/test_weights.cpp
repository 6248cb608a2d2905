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

#include <cmath>
#include <cstdio>

#include "chunkformer/model.hpp"
#include "chunkformer/weights.hpp"

namespace cf = chunkformer;

namespace {

cf::ModelConfig small() {
    cf::ModelConfig m;
    m.d_model = 16;
    m.n_heads = 2;
    m.d_ff = 32;
    m.kernel_size = 5;
    return m;
}

cf::CheckpointError decode_error(const cf::EncoderWeights &w, const cf::ModelConfig &cfg) {
    try {
        cf::decode_checkpoint(cf::io::ByteReader(cf::encode_checkpoint(w)), cfg);
    } catch (const cf::CheckpointError &e) {
        return e;
    }
    ADD_FAILURE() << "checkpoint accepted";
    return cf::CheckpointError({}, {}, {});
}

} // namespace

TEST(Specs, NamesAreUniqueAndCoverEveryLayer) {
    const auto specs = cf::tensor_specs(small());
    std::set<std::string> names;
    for (const auto &s : specs) EXPECT_TRUE(names.insert(s.name).second) << s.name;
    for (int i = 0; i < 4; ++i) EXPECT_TRUE(names.count("layers." + std::to_string(i) + ".conv.dw.weight"));
    EXPECT_FALSE(names.count("layers.4.conv.dw.weight"));
    EXPECT_TRUE(names.count("ctc.weight"));
    EXPECT_TRUE(names.count("encoder.final_norm.weight"));
}

TEST(Init, DeterministicPerSeed) {
    EXPECT_EQ(cf::init_weights(small(), 5), cf::init_weights(small(), 5));
    EXPECT_FALSE(cf::init_weights(small(), 5) == cf::init_weights(small(), 6));
}

TEST(Init, UniformWithinFanInBound) {
    const auto w = cf::init_weights(small(), 3);
    for (const auto &spec : cf::tensor_specs(small())) {
        const auto &t = w.get(spec.name);
        ASSERT_EQ(t.shape, spec.shape);
        const double bound = 1.0 / std::sqrt(double(spec.fan_in));
        for (float v : t.data) {
            if (spec.init == cf::Init::ones) EXPECT_EQ(v, 1.0f);
            if (spec.init == cf::Init::zeros) EXPECT_EQ(v, 0.0f);
            if (spec.init == cf::Init::uniform) EXPECT_LE(std::abs(v), bound + 1e-7);
        }
    }
}

TEST(Init, VocabMatchesSize) {
    EXPECT_EQ(cf::init_weights(cf::ModelConfig{}, 1).vocab.token(3), "a");
    auto m = small();
    m.vocab_size = 7;
    const auto w = cf::init_weights(m, 1);
    EXPECT_EQ(w.vocab.size(), 7);
    EXPECT_EQ(w.vocab.token(0), "<blank>");
}

TEST(Checkpoint, SaveLoadRoundTripIsBitwise) {
    const auto w = cf::init_weights(small(), 11);
    const auto path = testing::TempDir() + "/cf_weights_rt.cfkw";
    cf::save_checkpoint(path, w);
    EXPECT_EQ(cf::load_checkpoint(path, small()), w);
    std::remove(path.c_str());
}

TEST(Checkpoint, ListsMissingLayerTensors) {
    auto w = cf::init_weights(small(), 1);
    std::vector<std::string> removed;
    for (auto it = w.tensors.begin(); it != w.tensors.end();)
        if (it->first.rfind("layers.3.", 0) == 0) {
            removed.push_back(it->first);
            it = w.tensors.erase(it);
        } else {
            ++it;
        }
    const auto err = decode_error(w, small());
    EXPECT_EQ(err.kind(), cf::ErrorKind::checkpoint);
    EXPECT_EQ(err.missing().size(), removed.size());
    for (const auto &n : removed)
        EXPECT_NE(std::find(err.missing().begin(), err.missing().end(), n), err.missing().end()) << n;
    EXPECT_NE(std::string(err.what()).find("layers.3.mhsa.q.weight"), std::string::npos);
}

TEST(Checkpoint, ListsUnknownAndMismatchedTensors) {
    auto w = cf::init_weights(small(), 1);
    w.tensors["layers.0.extra"] = cf::Tensor{{2}, {1.0f, 2.0f}};
    w.get("layers.1.conv.dw.weight") = cf::Tensor{{16, 3}, std::vector<float>(48, 0.0f)};
    const auto err = decode_error(w, small());
    EXPECT_EQ(err.unknown(), std::vector<std::string>{"layers.0.extra"});
    EXPECT_EQ(err.mismatched(), std::vector<std::string>{"layers.1.conv.dw.weight"});
    EXPECT_TRUE(err.missing().empty());
}

TEST(Checkpoint, ConfigWithMoreLayersIsRejected) {
    auto cfg = small();
    const auto w = cf::init_weights(cfg, 1);
    cfg.num_layers = 6;
    EXPECT_FALSE(decode_error(w, cfg).missing().empty());
}

TEST(Checkpoint, FormatErrors) {
    const auto bytes = cf::encode_checkpoint(cf::init_weights(small(), 1));
    auto kind = [&](std::vector<char> b) {
        try {
            cf::decode_checkpoint(cf::io::ByteReader(std::move(b)), small());
        } catch (const cf::Error &e) {
            return e.kind();
        }
        return cf::ErrorKind::usage;
    };
    auto truncated = bytes;
    truncated.resize(bytes.size() - 3);
    EXPECT_EQ(kind(truncated), cf::ErrorKind::format);
    auto magic = bytes;
    magic[1] = 'Z';
    EXPECT_EQ(kind(magic), cf::ErrorKind::format);
    auto version = bytes;
    version[4] = 9;
    EXPECT_EQ(kind(version), cf::ErrorKind::format);
    auto trailing = bytes;
    trailing.push_back(0);
    EXPECT_EQ(kind(trailing), cf::ErrorKind::format);
    EXPECT_EQ(kind({}), cf::ErrorKind::format);
    EXPECT_THROW(cf::load_checkpoint("/nonexistent/model.cfkw", small()), cf::Error);
}

TEST(Checkpoint, VocabSurvivesRoundTrip) {
    auto m = small();
    m.vocab_size = 4;
    auto w = cf::init_weights(m, 2);
    w.vocab = cf::Vocab({"<blank>", "\xc3\xa9", "ab", " "});
    const auto back = cf::decode_checkpoint(cf::io::ByteReader(cf::encode_checkpoint(w)), m);
    EXPECT_EQ(back.vocab.tokens(), w.vocab.tokens());
}

TEST(Params, LinearWeightsAreTransposed) {
    const auto w = cf::init_weights(small(), 4);
    const auto p = cf::ModelParams<double>::from(w);
    const auto &t = w.get("layers.2.ff1.w1.weight"); // [d_ff, d]
    const auto &lin = p.layers[2].ff1.w1;
    ASSERT_EQ(lin.in_features(), 16u);
    ASSERT_EQ(lin.out_features(), 32u);
    for (std::size_t o = 0; o < 32; ++o)
        for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(lin.weight(i, o), double(t.data[o * 16 + i]));
    const auto &dw = w.get("layers.2.conv.dw.weight"); // [d, K]
    for (std::size_t ch = 0; ch < 16; ++ch)
        for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(p.layers[2].conv.depthwise(k, ch), double(dw.data[ch * 5 + k]));
    EXPECT_EQ(p.layers.size(), 4u);
    EXPECT_EQ(p.subsample.channels(), 16);
}
