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
#include <cmath>
#include <complex>
#include <cstdint>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include <fftw3.h>

#include "chunkformer/binary_io.hpp"
#include "chunkformer/errors.hpp"
#include "chunkformer/tensor.hpp"

namespace chunkformer {

// ─── Types ──────────────────────────────────────────────────────────────────

struct PcmAudio {
    std::vector<std::int16_t> samples; // mono
    int sample_rate = 16000;
};

/// T × dim frames. Log-mel features use dim 80; encoder outputs reuse the same
/// container with dim d_model.
using FeatureMatrix = Matrix<float>;

struct FbankOptions {
    static constexpr int kSampleRate = 16000;
    static constexpr int kWindow = 400; // 25 ms
    static constexpr int kHop = 160;    // 10 ms
    static constexpr int kFftSize = 512;
    static constexpr int kMelBins = 80;
    static constexpr double kLowHz = 0.0;
    static constexpr double kHighHz = 8000.0;
    static constexpr double kEnergyFloor = 1e-10;
};

inline int fbank_frame_count(std::size_t num_samples) {
    if (num_samples < std::size_t(FbankOptions::kWindow)) return 0;
    return 1 + int((num_samples - FbankOptions::kWindow) / FbankOptions::kHop);
}

namespace detail {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

/// 80 triangular filters over the 257 FFT bins, triangles defined on the mel axis.
inline const std::vector<std::array<double, FbankOptions::kFftSize / 2 + 1>> &mel_banks() {
    static const auto banks = [] {
        constexpr int bins = FbankOptions::kFftSize / 2 + 1;
        constexpr int n = FbankOptions::kMelBins;
        std::vector<std::array<double, bins>> out(n);
        const double lo = hz_to_mel(FbankOptions::kLowHz), hi = hz_to_mel(FbankOptions::kHighHz);
        const double step = (hi - lo) / (n + 1);
        for (int m = 0; m < n; ++m) {
            const double left = lo + m * step, center = left + step, right = center + step;
            for (int k = 0; k < bins; ++k) {
                const double mel = hz_to_mel(double(k) * FbankOptions::kSampleRate / FbankOptions::kFftSize);
                double w = 0.0;
                if (mel > left && mel <= center)
                    w = (mel - left) / (center - left);
                else if (mel > center && mel < right)
                    w = (right - mel) / (right - center);
                out[m][k] = w;
            }
        }
        return out;
    }();
    return banks;
}

inline const std::array<double, FbankOptions::kWindow> &hamming() {
    static const auto win = [] {
        std::array<double, FbankOptions::kWindow> w{};
        for (int i = 0; i < FbankOptions::kWindow; ++i)
            w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (FbankOptions::kWindow - 1));
        return w;
    }();
    return win;
}

struct FftwFree {
    void operator()(void *p) const { fftw_free(p); }
};

/// Shared 512-point r2c plan. Planning is not thread-safe in FFTW, execution
/// on fresh arrays is.
inline fftw_plan fbank_plan() {
    static std::once_flag once;
    static fftw_plan plan = nullptr;
    std::call_once(once, [] {
        std::unique_ptr<double, FftwFree> in(fftw_alloc_real(FbankOptions::kFftSize));
        std::unique_ptr<fftw_complex, FftwFree> out(fftw_alloc_complex(FbankOptions::kFftSize / 2 + 1));
        plan = fftw_plan_dft_r2c_1d(FbankOptions::kFftSize, in.get(), out.get(), FFTW_ESTIMATE);
    });
    return plan;
}

} // namespace detail

// ─── Filterbank ─────────────────────────────────────────────────────────────

/// 80-dim log-mel energies: 25 ms Hamming window, 10 ms hop, 512-point FFT,
/// power spectrum, natural log floored at log(1e-10). No dither, no
/// pre-emphasis, no normalization.
inline FeatureMatrix compute_fbank(const PcmAudio &audio) {
    CF_CHECK(audio.sample_rate == FbankOptions::kSampleRate, ErrorKind::format,
             "sample rate must be 16000 Hz, got " + std::to_string(audio.sample_rate));
    const int frames = fbank_frame_count(audio.samples.size());
    CF_CHECK(frames > 0, ErrorKind::empty_input, "audio shorter than one 400-sample window");

    constexpr int bins = FbankOptions::kFftSize / 2 + 1;
    const auto &win = detail::hamming();
    const auto &banks = detail::mel_banks();
    const fftw_plan plan = detail::fbank_plan();
    std::unique_ptr<double, detail::FftwFree> in(fftw_alloc_real(FbankOptions::kFftSize));
    std::unique_ptr<fftw_complex, detail::FftwFree> out(fftw_alloc_complex(bins));
    std::array<double, bins> power{};

    FeatureMatrix feats(std::size_t(frames), FbankOptions::kMelBins);
    for (int t = 0; t < frames; ++t) {
        const std::size_t start = std::size_t(t) * FbankOptions::kHop;
        for (int i = 0; i < FbankOptions::kFftSize; ++i)
            in.get()[i] = i < FbankOptions::kWindow ? double(audio.samples[start + i]) * win[i] : 0.0;
        fftw_execute_dft_r2c(plan, in.get(), out.get());
        for (int k = 0; k < bins; ++k) power[k] = out.get()[k][0] * out.get()[k][0] + out.get()[k][1] * out.get()[k][1];
        for (int m = 0; m < FbankOptions::kMelBins; ++m) {
            double e = 0.0;
            for (int k = 0; k < bins; ++k) e += banks[m][k] * power[k];
            feats(t, m) = float(std::log(std::max(e, FbankOptions::kEnergyFloor)));
        }
    }
    return feats;
}

// ─── WAV ────────────────────────────────────────────────────────────────────

/// Reads RIFF PCM, 16-bit, 16 kHz, mono. Anything else is a format error.
inline PcmAudio read_wav(const std::string &path) {
    auto rd = io::ByteReader::from_file(path);
    CF_CHECK(rd.has(12), ErrorKind::format, path + ": not a RIFF/WAVE file");
    CF_CHECK(rd.bytes(4) == "RIFF", ErrorKind::format, path + ": missing RIFF header");
    rd.uint<std::uint32_t>();
    CF_CHECK(rd.bytes(4) == "WAVE", ErrorKind::format, path + ": missing WAVE tag");

    bool have_fmt = false;
    PcmAudio audio;
    while (rd.has(8)) {
        const std::string id = rd.bytes(4);
        const auto size = rd.uint<std::uint32_t>();
        if (id == "fmt ") {
            CF_CHECK(size >= 16, ErrorKind::format, path + ": short fmt chunk");
            const auto format = rd.uint<std::uint16_t>();
            const auto channels = rd.uint<std::uint16_t>();
            const auto rate = rd.uint<std::uint32_t>();
            rd.uint<std::uint32_t>(); // byte rate
            rd.uint<std::uint16_t>(); // block align
            const auto bits = rd.uint<std::uint16_t>();
            if (size > 16) rd.bytes(size - 16);
            CF_CHECK(format == 1, ErrorKind::format, path + ": only PCM WAV is supported");
            CF_CHECK(channels == 1, ErrorKind::format, path + ": only mono WAV is supported");
            CF_CHECK(rate == 16000, ErrorKind::format, path + ": sample rate must be 16000 Hz");
            CF_CHECK(bits == 16, ErrorKind::format, path + ": only 16-bit WAV is supported");
            audio.sample_rate = int(rate);
            have_fmt = true;
        } else if (id == "data") {
            CF_CHECK(have_fmt, ErrorKind::format, path + ": data chunk before fmt chunk");
            CF_CHECK(size % 2 == 0, ErrorKind::format, path + ": odd data size");
            audio.samples.resize(size / 2);
            for (auto &s : audio.samples) s = static_cast<std::int16_t>(rd.uint<std::uint16_t>());
            return audio;
        } else {
            rd.bytes(size + (size & 1));
        }
    }
    throw Error(ErrorKind::format, path + ": no data chunk");
}

inline void write_wav(const std::string &path, const PcmAudio &audio) {
    io::ByteWriter w;
    const auto data_bytes = std::uint32_t(audio.samples.size() * 2);
    w.bytes("RIFF");
    w.uint<std::uint32_t>(36 + data_bytes);
    w.bytes("WAVE");
    w.bytes("fmt ");
    w.uint<std::uint32_t>(16);
    w.uint<std::uint16_t>(1);
    w.uint<std::uint16_t>(1);
    w.uint<std::uint32_t>(std::uint32_t(audio.sample_rate));
    w.uint<std::uint32_t>(std::uint32_t(audio.sample_rate) * 2);
    w.uint<std::uint16_t>(2);
    w.uint<std::uint16_t>(16);
    w.bytes("data");
    w.uint<std::uint32_t>(data_bytes);
    for (auto s : audio.samples) w.uint<std::uint16_t>(static_cast<std::uint16_t>(s));
    w.write_file(path);
}

// ─── Feature container ──────────────────────────────────────────────────────
//
// "CFKF" | u32 version = 1 | u32 T | u32 dim | T*dim f32, little-endian, row-major.

inline constexpr std::uint32_t kFeatureVersion = 1;

inline std::vector<char> encode_features(const FeatureMatrix &m) {
    io::ByteWriter w;
    w.bytes("CFKF");
    w.uint<std::uint32_t>(kFeatureVersion);
    w.uint<std::uint32_t>(std::uint32_t(m.rows()));
    w.uint<std::uint32_t>(std::uint32_t(m.cols()));
    for (float v : m.data()) w.f32(v);
    return w.buffer();
}

inline void save_features(const std::string &path, const FeatureMatrix &m) {
    io::write_file(path, encode_features(m));
}

/// `expected_dim` of 0 accepts any width.
inline FeatureMatrix decode_features(io::ByteReader rd, std::uint32_t expected_dim = 0) {
    CF_CHECK(rd.has(4) && rd.bytes(4) == "CFKF", ErrorKind::format, rd.what() + ": bad magic, not a CFKF file");
    const auto version = rd.uint<std::uint32_t>();
    CF_CHECK(version == kFeatureVersion, ErrorKind::format,
             rd.what() + ": unsupported feature version " + std::to_string(version));
    const auto rows = rd.uint<std::uint32_t>();
    const auto cols = rd.uint<std::uint32_t>();
    CF_CHECK(expected_dim == 0 || cols == expected_dim, ErrorKind::format,
             rd.what() + ": dimension mismatch, expected " + std::to_string(expected_dim) + " got " +
                 std::to_string(cols));
    CF_CHECK(rd.remaining() == std::size_t(rows) * cols * 4, ErrorKind::format,
             rd.what() + ": truncated payload (header " + std::to_string(rows) + "x" + std::to_string(cols) +
                 ", " + std::to_string(rd.remaining()) + " payload bytes)");
    FeatureMatrix m(rows, cols);
    for (float &v : m.data()) v = rd.f32();
    return m;
}

inline FeatureMatrix load_features(const std::string &path, std::uint32_t expected_dim = 0) {
    return decode_features(io::ByteReader::from_file(path), expected_dim);
}

} // namespace chunkformer
