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

// Streams two synthetic audios of different length through one masked batch
// and prints what each decode step emits.

#include <cmath>
#include <cstdio>
#include <vector>

#include "chunkformer/chunkformer.hpp"

namespace cf = chunkformer;

static cf::PcmAudio chirp(double seconds, double f0, double f1) {
    cf::PcmAudio a;
    const int n = int(seconds * a.sample_rate);
    for (int i = 0; i < n; ++i) {
        const double t = double(i) / a.sample_rate;
        const double f = f0 + (f1 - f0) * t / seconds;
        a.samples.push_back(std::int16_t(8000 * std::sin(2 * M_PI * f * t)));
    }
    return a;
}

int main() {
    const cf::ModelConfig model;
    const cf::ContextConfig ctx{8, 4, 4};
    const auto params = cf::ModelParams<float>::from(cf::init_weights(model, model.seed));

    const std::vector<cf::Matrix<float>> features{cf::compute_fbank(chirp(1.0, 200, 800)),
                                                  cf::compute_fbank(chirp(3.5, 300, 3000))};
    auto states = cf::feature_streams<float>(features, model);
    std::printf("lookahead %d frames, l_conv %d\n", cf::lookahead_frames(ctx, model.num_layers),
                cf::derive_l_conv(model.kernel_size));
    for (const auto &st : states) std::printf("audio %d: %d encoder frames\n", st.audio_id, st.total_frames);

    cf::EncodeOptions opt;
    opt.budget = 4;
    std::vector<cf::CtcHypothesis> hyps(features.size());
    cf::run_streams<float>(params, ctx, states, cf::feature_source(params, ctx, features),
                           [&](std::size_t i, const cf::Matrix<float> &h, cf::StreamState<float> &st) {
                               std::printf("  emit audio %zu: frames [%d, %d)\n", i,
                                           st.frames_consumed - int(h.rows()), st.frames_consumed);
                               cf::greedy_decode(cf::project_logits(h, params.ctc), st.ctc_carry, hyps[i]);
                           },
                           opt);
    for (std::size_t i = 0; i < hyps.size(); ++i)
        std::printf("audio %zu: %zu tokens (random weights)\n", i, hyps[i].tokens.size());
}
