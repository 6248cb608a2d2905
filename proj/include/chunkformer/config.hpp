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

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "chunkformer/errors.hpp"

namespace chunkformer {

// ─── Context Config ─────────────────────────────────────────────────────────

/// Attention window [l_att, c, r], all in post-subsample frames (80 ms each).
struct ContextConfig {
    int attention_left = 8; // l_att: cached left frames per layer
    int chunk_size = 4;     // c
    int right_context = 4;  // r

    /// Window covering `frames` frames completely in one chunk.
    static ContextConfig full(int frames) { return {frames, frames, frames}; }

    int window() const { return attention_left + chunk_size + right_context; }

    bool operator==(const ContextConfig &) const = default;
};

// ─── Model Config ───────────────────────────────────────────────────────────

struct ModelConfig {
    int num_layers = 4;        // N
    int d_model = 64;
    int n_heads = 4;
    int d_ff = 256;
    int kernel_size = 15;      // depthwise conv kernel, odd
    int subsample_factor = 8;
    int vocab_size = 29;       // blank, space, apostrophe, a-z
    int max_rel_distance = 64; // L_max
    std::uint64_t seed = 1234;

    static constexpr int kMelBins = 80;

    int d_k() const { return d_model / n_heads; }

    /// Encoder size used for cost accounting of the full model.
    static ModelConfig large() {
        ModelConfig m;
        m.num_layers = 17;
        m.d_model = 512;
        m.n_heads = 8;
        m.d_ff = 2048;
        m.kernel_size = 15;
        m.vocab_size = 5000;
        m.max_rel_distance = 512;
        return m;
    }

    bool operator==(const ModelConfig &) const = default;
};

// ─── Derived quantities ─────────────────────────────────────────────────────

/// Total future frames the input must carry so the emitted chunks see their
/// full right context through every layer: r + max(c, r) * (N - 1).
inline int derive_r_rel(const ContextConfig &ctx, int num_layers) {
    CF_CHECK(num_layers >= 1, ErrorKind::config, "derive_r_rel requires N >= 1");
    return ctx.right_context + std::max(ctx.chunk_size, ctx.right_context) * (num_layers - 1);
}

/// Exact lookahead reach of the layer stack. A frame in the right context of
/// chunk i belongs to chunk i + ceil(r / c), so every extra layer adds
/// c * ceil(r / c) frames. Equals derive_r_rel whenever 1 <= r <= c or c | r.
inline int exact_lookahead(const ContextConfig &ctx, int num_layers) {
    const int c = ctx.chunk_size, r = ctx.right_context;
    if (num_layers <= 0 || r == 0) return 0;
    const int growth = c * ((r + c - 1) / c);
    return r + growth * (num_layers - 1);
}

/// Lookahead frames the scheduler appends after the last emitted chunk.
inline int lookahead_frames(const ContextConfig &ctx, int num_layers) {
    if (num_layers <= 0) return 0;
    return std::max(derive_r_rel(ctx, num_layers), exact_lookahead(ctx, num_layers));
}

inline int derive_l_conv(int kernel_size) {
    CF_CHECK(kernel_size >= 1 && kernel_size % 2 == 1, ErrorKind::config,
             "kernel_size must be odd and >= 1, got " + std::to_string(kernel_size));
    return (kernel_size - 1) / 2;
}

// ─── Validation ─────────────────────────────────────────────────────────────

struct ConfigIssue {
    std::string field;
    std::string message;
};

/// Reports every violated invariant, not only the first.
inline std::vector<ConfigIssue> validate(const ModelConfig &m, const ContextConfig &ctx) {
    std::vector<ConfigIssue> issues;
    auto fail = [&](std::string field, std::string msg) {
        issues.push_back({std::move(field), std::move(msg)});
    };
    if (ctx.chunk_size < 1) fail("c", "chunk size must be >= 1");
    if (ctx.attention_left < 0) fail("l_att", "left context must be >= 0");
    if (ctx.right_context < 0) fail("r", "right context must be >= 0");
    if (m.num_layers < 0) fail("N", "layer count must be >= 0");
    if (m.d_model < 1) fail("d_model", "d_model must be >= 1");
    if (m.n_heads < 1)
        fail("n_heads", "n_heads must be >= 1");
    else if (m.d_model % m.n_heads != 0)
        fail("d_model", "d_model (" + std::to_string(m.d_model) + ") not divisible by n_heads (" +
                            std::to_string(m.n_heads) + ")");
    if (m.d_ff < 1) fail("d_ff", "d_ff must be >= 1");
    if (m.kernel_size < 1 || m.kernel_size % 2 == 0)
        fail("kernel_size", "kernel_size must be odd and >= 1");
    if (m.subsample_factor != 8) fail("subsample_factor", "subsample_factor must be 8");
    if (m.vocab_size < 2) fail("vocab_size", "vocab needs blank plus at least one token");
    if (m.max_rel_distance < ctx.window())
        fail("L_max", "L_max (" + std::to_string(m.max_rel_distance) + ") must be >= l_att + c + r (" +
                          std::to_string(ctx.window()) + ")");
    return issues;
}

inline void validate_or_throw(const ModelConfig &m, const ContextConfig &ctx) {
    auto issues = validate(m, ctx);
    if (issues.empty()) return;
    std::string msg;
    for (const auto &i : issues) msg += "\n  " + i.field + ": " + i.message;
    throw Error(ErrorKind::config, "invalid configuration:" + msg);
}

// ─── Config file ────────────────────────────────────────────────────────────
//
// Flat JSON object. Keys: N, d_model, n_heads, d_ff, kernel_size,
// subsample_factor, vocab_size, L_max, seed, l_att, c, r. Unknown keys are
// rejected. Missing keys keep their defaults.

struct Config {
    ModelConfig model;
    ContextConfig context;
};

inline Config parse_config(const std::string &text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
        throw Error(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
    }
    CF_CHECK(j.is_object(), ErrorKind::config, "config must be a JSON object");
    Config cfg;
    std::vector<std::string> unknown;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string &key = it.key();
        CF_CHECK(it->is_number_integer(), ErrorKind::config, "config key '" + key + "' must be an integer");
        const auto v = it->get<std::int64_t>();
        if (key == "N") cfg.model.num_layers = int(v);
        else if (key == "d_model") cfg.model.d_model = int(v);
        else if (key == "n_heads") cfg.model.n_heads = int(v);
        else if (key == "d_ff") cfg.model.d_ff = int(v);
        else if (key == "kernel_size") cfg.model.kernel_size = int(v);
        else if (key == "subsample_factor") cfg.model.subsample_factor = int(v);
        else if (key == "vocab_size") cfg.model.vocab_size = int(v);
        else if (key == "L_max") cfg.model.max_rel_distance = int(v);
        else if (key == "seed") cfg.model.seed = std::uint64_t(v);
        else if (key == "l_att") cfg.context.attention_left = int(v);
        else if (key == "c") cfg.context.chunk_size = int(v);
        else if (key == "r") cfg.context.right_context = int(v);
        else unknown.push_back(key);
    }
    if (!unknown.empty()) {
        std::string msg = "unknown config keys:";
        for (const auto &k : unknown) msg += " " + k;
        throw Error(ErrorKind::config, msg);
    }
    return cfg;
}

inline Config load_config(const std::string &path) {
    std::ifstream in(path);
    CF_CHECK(in.good(), ErrorKind::io, "cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline std::string to_json(const Config &cfg) {
    nlohmann::json j = {
        {"N", cfg.model.num_layers},         {"d_model", cfg.model.d_model},
        {"n_heads", cfg.model.n_heads},      {"d_ff", cfg.model.d_ff},
        {"kernel_size", cfg.model.kernel_size}, {"subsample_factor", cfg.model.subsample_factor},
        {"vocab_size", cfg.model.vocab_size}, {"L_max", cfg.model.max_rel_distance},
        {"seed", cfg.model.seed},            {"l_att", cfg.context.attention_left},
        {"c", cfg.context.chunk_size},       {"r", cfg.context.right_context},
    };
    return j.dump(2);
}

/// Parses "l,c,r".
inline ContextConfig parse_context(const std::string &text) {
    std::vector<int> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            parts.push_back(std::stoi(item, &used));
            CF_CHECK(used == item.size(), ErrorKind::usage, "bad context value '" + item + "'");
        } catch (const std::logic_error &) {
            throw Error(ErrorKind::usage, "bad context value '" + item + "'");
        }
    }
    CF_CHECK(parts.size() == 3, ErrorKind::usage, "context must be 'l_att,c,r'");
    return {parts[0], parts[1], parts[2]};
}

} // namespace chunkformer
