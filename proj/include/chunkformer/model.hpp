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

#include <array>
#include <string>
#include <vector>

#include "chunkformer/attention.hpp"
#include "chunkformer/config.hpp"
#include "chunkformer/conv.hpp"
#include "chunkformer/ctc.hpp"
#include "chunkformer/tensor.hpp"
#include "chunkformer/weights.hpp"

namespace chunkformer {

/// norm -> linear -> swish -> linear. The caller applies the half-step residual.
template <typename T>
struct FeedForward {
    LayerNorm<T> norm;
    Linear<T> w1;
    Linear<T> w2;

    Matrix<T> forward(const Matrix<T> &x) const {
        Matrix<T> h = w1.forward(norm.forward(x));
        swish_inplace(h);
        return w2.forward(h);
    }
};

template <typename T>
struct SubsampleBlock {
    Matrix<T> depthwise; // in_channels × 9, index kt * 3 + kf
    std::vector<T> depthwise_bias;
    Linear<T> pointwise; // in_channels -> channels
};

template <typename T>
struct SubsampleParams {
    std::array<SubsampleBlock<T>, 3> blocks;
    Linear<T> out; // (freq_out * channels) -> d_model

    int channels() const { return int(blocks[2].pointwise.out_features()); }
};

template <typename T>
struct LayerParams {
    FeedForward<T> ff1;
    LayerNorm<T> mhsa_norm;
    AttentionParams<T> mhsa;
    ConvParams<T> conv;
    FeedForward<T> ff2;
    LayerNorm<T> final_norm;
};

/// Runtime parameters in compute precision T, built from stored weights.
template <typename T>
struct ModelParams {
    ModelConfig config;
    SubsampleParams<T> subsample;
    std::vector<LayerParams<T>> layers;
    LayerNorm<T> final_norm;
    Linear<T> ctc;
    Vocab vocab;
    RelPosTable<T> table;

    static ModelParams from(const EncoderWeights &w) {
        ModelParams p;
        p.config = w.config;
        auto vec = [&](const std::string &name) {
            const auto &t = w.get(name);
            return std::vector<T>(t.data.begin(), t.data.end());
        };
        auto mat = [&](const std::string &name, bool transpose) {
            const auto &t = w.get(name);
            CF_CHECK(t.shape.size() == 2, ErrorKind::checkpoint, name + " is not rank 2");
            const std::size_t r = t.shape[0], c = t.shape[1];
            Matrix<T> m(transpose ? c : r, transpose ? r : c);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) {
                    const T v = T(t.data[i * c + j]);
                    if (transpose)
                        m(j, i) = v;
                    else
                        m(i, j) = v;
                }
            return m;
        };
        auto linear = [&](const std::string &name, bool bias) {
            Linear<T> l;
            l.weight = mat(name + ".weight", true);
            if (bias) l.bias = vec(name + ".bias");
            return l;
        };
        auto norm = [&](const std::string &name) { return LayerNorm<T>{vec(name + ".weight"), vec(name + ".bias")}; };
        auto ff = [&](const std::string &name) {
            return FeedForward<T>{norm(name + ".norm"), linear(name + ".w1", true), linear(name + ".w2", true)};
        };

        for (int b = 0; b < 3; ++b) {
            const std::string n = "subsample.block" + std::to_string(b + 1);
            p.subsample.blocks[std::size_t(b)] = {mat(n + ".dw.weight", false), vec(n + ".dw.bias"),
                                                  linear(n + ".pw", true)};
        }
        p.subsample.out = linear("subsample.out", true);

        for (int i = 0; i < w.config.num_layers; ++i) {
            const std::string n = "layers." + std::to_string(i);
            LayerParams<T> L;
            L.ff1 = ff(n + ".ff1");
            L.mhsa_norm = norm(n + ".mhsa.norm");
            L.mhsa.n_heads = w.config.n_heads;
            L.mhsa.query = linear(n + ".mhsa.q", false);
            L.mhsa.key = linear(n + ".mhsa.k", false);
            L.mhsa.value = linear(n + ".mhsa.v", false);
            L.mhsa.pos = linear(n + ".mhsa.pos", false);
            L.mhsa.pos_bias_u = vec(n + ".mhsa.pos_bias_u");
            L.mhsa.pos_bias_v = vec(n + ".mhsa.pos_bias_v");
            L.mhsa.out = linear(n + ".mhsa.out", true);
            L.conv.pre_norm = norm(n + ".conv.norm");
            L.conv.pointwise_in = linear(n + ".conv.pw_in", true);
            L.conv.depthwise = mat(n + ".conv.dw.weight", true);
            L.conv.depthwise_bias = vec(n + ".conv.dw.bias");
            L.conv.norm = norm(n + ".conv.ln");
            L.conv.pointwise_out = linear(n + ".conv.pw_out", true);
            L.ff2 = ff(n + ".ff2");
            L.final_norm = norm(n + ".final_norm");
            p.layers.push_back(std::move(L));
        }
        p.final_norm = norm("encoder.final_norm");
        p.ctc = linear("ctc", true);
        p.vocab = w.vocab;
        p.table = RelPosTable<T>(w.config.max_rel_distance, w.config.d_model);
        return p;
    }
};

} // namespace chunkformer
