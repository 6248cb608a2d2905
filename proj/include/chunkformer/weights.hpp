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
#include <map>
#include <random>
#include <string>
#include <vector>

#include "chunkformer/binary_io.hpp"
#include "chunkformer/config.hpp"
#include "chunkformer/ctc.hpp"
#include "chunkformer/errors.hpp"

namespace chunkformer {

// ─── Tensor registry ────────────────────────────────────────────────────────

struct Tensor {
    std::vector<std::uint32_t> shape;
    std::vector<float> data;

    std::size_t numel() const {
        std::size_t n = 1;
        for (auto s : shape) n *= s;
        return n;
    }
    bool operator==(const Tensor &) const = default;
};

enum class Init { uniform, ones, zeros };

struct TensorSpec {
    std::string name;
    std::vector<std::uint32_t> shape;
    Init init = Init::uniform;
    std::uint32_t fan_in = 1;
};

/// Name of the optional tensor holding the vocabulary as UTF-8 bytes, one
/// value per byte, tokens separated by 0.
inline constexpr const char *kVocabTensor = "vocab";

/// Every tensor the encoder and CTC head need, in checkpoint order. Linear
/// weights are stored [out, in]; depthwise kernels [channels, taps].
inline std::vector<TensorSpec> tensor_specs(const ModelConfig &cfg) {
    const auto d = std::uint32_t(cfg.d_model), ff = std::uint32_t(cfg.d_ff), k = std::uint32_t(cfg.kernel_size);
    const std::uint32_t channels = d, freq_out = ModelConfig::kMelBins / 8;
    std::vector<TensorSpec> specs;
    auto linear = [&](const std::string &name, std::uint32_t out, std::uint32_t in, bool bias) {
        specs.push_back({name + ".weight", {out, in}, Init::uniform, in});
        if (bias) specs.push_back({name + ".bias", {out}, Init::uniform, in});
    };
    auto norm = [&](const std::string &name) {
        specs.push_back({name + ".weight", {d}, Init::ones, 1});
        specs.push_back({name + ".bias", {d}, Init::zeros, 1});
    };
    for (int b = 1; b <= 3; ++b) {
        const std::uint32_t in = b == 1 ? 1 : channels;
        const std::string p = "subsample.block" + std::to_string(b);
        specs.push_back({p + ".dw.weight", {in, 9}, Init::uniform, 9});
        specs.push_back({p + ".dw.bias", {in}, Init::uniform, 9});
        linear(p + ".pw", channels, in, true);
    }
    linear("subsample.out", d, channels * freq_out, true);
    for (int i = 0; i < cfg.num_layers; ++i) {
        const std::string p = "layers." + std::to_string(i);
        norm(p + ".ff1.norm");
        linear(p + ".ff1.w1", ff, d, true);
        linear(p + ".ff1.w2", d, ff, true);
        norm(p + ".mhsa.norm");
        linear(p + ".mhsa.q", d, d, false);
        linear(p + ".mhsa.k", d, d, false);
        linear(p + ".mhsa.v", d, d, false);
        linear(p + ".mhsa.pos", d, d, false);
        specs.push_back({p + ".mhsa.pos_bias_u", {d}, Init::uniform, d});
        specs.push_back({p + ".mhsa.pos_bias_v", {d}, Init::uniform, d});
        linear(p + ".mhsa.out", d, d, true);
        norm(p + ".conv.norm");
        linear(p + ".conv.pw_in", 2 * d, d, true);
        specs.push_back({p + ".conv.dw.weight", {d, k}, Init::uniform, k});
        specs.push_back({p + ".conv.dw.bias", {d}, Init::uniform, k});
        norm(p + ".conv.ln");
        linear(p + ".conv.pw_out", d, d, true);
        norm(p + ".ff2.norm");
        linear(p + ".ff2.w1", ff, d, true);
        linear(p + ".ff2.w2", d, ff, true);
        norm(p + ".final_norm");
    }
    norm("encoder.final_norm");
    linear("ctc", std::uint32_t(cfg.vocab_size), d, true);
    return specs;
}

// ─── Weights ────────────────────────────────────────────────────────────────

struct EncoderWeights {
    ModelConfig config;
    std::map<std::string, Tensor> tensors;
    Vocab vocab;

    const Tensor &get(const std::string &name) const {
        auto it = tensors.find(name);
        CF_CHECK(it != tensors.end(), ErrorKind::checkpoint, "missing tensor " + name);
        return it->second;
    }
    Tensor &get(const std::string &name) {
        auto it = tensors.find(name);
        CF_CHECK(it != tensors.end(), ErrorKind::checkpoint, "missing tensor " + name);
        return it->second;
    }

    bool operator==(const EncoderWeights &o) const {
        return config == o.config && tensors == o.tensors && vocab.tokens() == o.vocab.tokens();
    }
};

/// Deterministic per seed: uniform(-a, a), a = 1 / sqrt(fan_in), drawn from
/// mt19937_64 with an explicit bits-to-double mapping so every platform
/// produces the same values.
inline EncoderWeights init_weights(const ModelConfig &cfg, std::uint64_t seed) {
    EncoderWeights w;
    w.config = cfg;
    std::mt19937_64 rng(seed);
    for (const auto &spec : tensor_specs(cfg)) {
        Tensor t{spec.shape, {}};
        t.data.resize(t.numel());
        const double a = 1.0 / std::sqrt(double(spec.fan_in));
        for (float &v : t.data) {
            switch (spec.init) {
            case Init::ones: v = 1.0f; break;
            case Init::zeros: v = 0.0f; break;
            case Init::uniform: {
                const double u = double(rng() >> 11) * 0x1.0p-53;
                v = float(a * (2.0 * u - 1.0));
                break;
            }
            }
        }
        w.tensors.emplace(spec.name, std::move(t));
    }
    w.vocab = cfg.vocab_size == Vocab::characters().size() ? Vocab::characters() : Vocab::placeholder(cfg.vocab_size);
    return w;
}

// ─── Checkpoint container ───────────────────────────────────────────────────
//
// "CFKW" | u32 version = 1 | u32 tensor count | per tensor:
//   u16 name length | name bytes | u8 rank | u32 dims[rank] | f32 payload (LE)

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public Error {
  public:
    CheckpointError(std::vector<std::string> missing, std::vector<std::string> unknown,
                    std::vector<std::string> mismatched)
        : Error(ErrorKind::checkpoint, describe(missing, unknown, mismatched)), missing_(std::move(missing)),
          unknown_(std::move(unknown)), mismatched_(std::move(mismatched)) {}

    const std::vector<std::string> &missing() const { return missing_; }
    const std::vector<std::string> &unknown() const { return unknown_; }
    const std::vector<std::string> &mismatched() const { return mismatched_; }

  private:
    static std::string describe(const std::vector<std::string> &missing, const std::vector<std::string> &unknown,
                                const std::vector<std::string> &mismatched) {
        std::string msg = "checkpoint does not match config";
        auto list = [&](const char *what, const std::vector<std::string> &names) {
            if (names.empty()) return;
            msg += std::string("\n  ") + what + ":";
            for (const auto &n : names) msg += " " + n;
        };
        list("missing", missing);
        list("unknown", unknown);
        list("shape mismatch", mismatched);
        return msg;
    }

    std::vector<std::string> missing_, unknown_, mismatched_;
};

namespace detail {

inline Tensor vocab_to_tensor(const Vocab &vocab) {
    Tensor t;
    for (std::size_t i = 0; i < vocab.tokens().size(); ++i) {
        if (i) t.data.push_back(0.0f);
        for (unsigned char ch : vocab.tokens()[i]) t.data.push_back(float(ch));
    }
    t.shape = {std::uint32_t(t.data.size())};
    return t;
}

inline Vocab tensor_to_vocab(const Tensor &t) {
    std::vector<std::string> tokens(1);
    for (float v : t.data) {
        CF_CHECK(v >= 0.0f && v <= 255.0f && v == std::floor(v), ErrorKind::checkpoint, "vocab tensor holds a non-byte");
        if (v == 0.0f)
            tokens.emplace_back();
        else
            tokens.back().push_back(char(static_cast<unsigned char>(v)));
    }
    return Vocab(std::move(tokens));
}

} // namespace detail

inline std::vector<char> encode_checkpoint(const EncoderWeights &w) {
    io::ByteWriter out;
    out.bytes("CFKW");
    out.uint<std::uint32_t>(kCheckpointVersion);
    out.uint<std::uint32_t>(std::uint32_t(w.tensors.size() + 1));
    auto put = [&](const std::string &name, const Tensor &t) {
        out.uint<std::uint16_t>(std::uint16_t(name.size()));
        out.bytes(name);
        out.uint<std::uint8_t>(std::uint8_t(t.shape.size()));
        for (auto s : t.shape) out.uint<std::uint32_t>(s);
        for (float v : t.data) out.f32(v);
    };
    // Written as held; checking against a config is the reader's job.
    for (const auto &[name, t] : w.tensors) put(name, t);
    put(kVocabTensor, detail::vocab_to_tensor(w.vocab));
    return out.buffer();
}

inline void save_checkpoint(const std::string &path, const EncoderWeights &w) {
    io::write_file(path, encode_checkpoint(w));
}

/// Parses a checkpoint and checks it against `cfg`: every expected tensor
/// present with the expected shape, nothing unknown.
inline EncoderWeights decode_checkpoint(io::ByteReader rd, const ModelConfig &cfg) {
    CF_CHECK(rd.has(4) && rd.bytes(4) == "CFKW", ErrorKind::format, rd.what() + ": bad magic, not a CFKW checkpoint");
    const auto version = rd.uint<std::uint32_t>();
    CF_CHECK(version == kCheckpointVersion, ErrorKind::format,
             rd.what() + ": unsupported checkpoint version " + std::to_string(version));
    const auto count = rd.uint<std::uint32_t>();
    std::map<std::string, Tensor> raw;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = rd.uint<std::uint16_t>();
        std::string name = rd.bytes(len);
        const auto rank = rd.uint<std::uint8_t>();
        Tensor t;
        for (int r = 0; r < rank; ++r) t.shape.push_back(rd.uint<std::uint32_t>());
        CF_CHECK(rd.has(t.numel() * 4), ErrorKind::format, rd.what() + ": truncated payload in tensor " + name);
        t.data.resize(t.numel());
        for (float &v : t.data) v = rd.f32();
        CF_CHECK(raw.emplace(name, std::move(t)).second, ErrorKind::format, rd.what() + ": duplicate tensor " + name);
    }
    CF_CHECK(rd.remaining() == 0, ErrorKind::format, rd.what() + ": trailing bytes after last tensor");

    EncoderWeights w;
    w.config = cfg;
    std::vector<std::string> missing, unknown, mismatched;
    for (const auto &spec : tensor_specs(cfg)) {
        auto it = raw.find(spec.name);
        if (it == raw.end()) {
            missing.push_back(spec.name);
            continue;
        }
        if (it->second.shape != spec.shape)
            mismatched.push_back(spec.name);
        else
            w.tensors.emplace(spec.name, std::move(it->second));
        raw.erase(it);
    }
    auto vocab_it = raw.find(kVocabTensor);
    if (vocab_it != raw.end()) {
        w.vocab = detail::tensor_to_vocab(vocab_it->second);
        raw.erase(vocab_it);
        if (w.vocab.size() != cfg.vocab_size) mismatched.push_back(kVocabTensor);
    } else {
        w.vocab = Vocab::placeholder(cfg.vocab_size);
    }
    for (const auto &[name, t] : raw) unknown.push_back(name);
    if (!missing.empty() || !unknown.empty() || !mismatched.empty())
        throw CheckpointError(std::move(missing), std::move(unknown), std::move(mismatched));
    return w;
}

inline EncoderWeights load_checkpoint(const std::string &path, const ModelConfig &cfg) {
    return decode_checkpoint(io::ByteReader::from_file(path), cfg);
}

} // namespace chunkformer
