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
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "chunkformer/ctc.hpp"
#include "chunkformer/errors.hpp"
#include "chunkformer/tensor.hpp"

namespace chunkformer {

// ─── Chunk plans ────────────────────────────────────────────────────────────

struct ChunkPlan {
    int audio_id = 0;
    int chunk_index = 0;
    int valid_frames = 0; // c for every chunk but possibly the last
    bool is_final = false;

    bool operator==(const ChunkPlan &) const = default;
};

/// Splits T frames into ceil(T / c) equal-sized chunks.
inline std::vector<ChunkPlan> carve_chunks(int frames, int chunk_size, int audio_id = 0) {
    CF_CHECK(frames >= 1, ErrorKind::empty_input, "cannot chunk an empty sequence");
    CF_CHECK(chunk_size >= 1, ErrorKind::config, "chunk size must be >= 1");
    const int n = (frames + chunk_size - 1) / chunk_size;
    std::vector<ChunkPlan> plans;
    plans.reserve(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        const bool last = i == n - 1;
        plans.push_back({audio_id, i, last ? frames - chunk_size * (n - 1) : chunk_size, last});
    }
    return plans;
}

// ─── Chunk batch ────────────────────────────────────────────────────────────

/// B rows of (left + chunk + right) positions each, one validity bit per
/// position. Masked positions carry whatever the segmentation copied (often a
/// neighbouring audio's frames) and must not reach any valid output.
template <typename T>
struct ChunkBatch {
    int left = 0;
    int chunk = 0;
    int right = 0;
    Matrix<T> rows;                  // (B * width) × d
    std::vector<std::uint8_t> mask;  // B * width
    std::vector<ChunkPlan> plans;    // optional provenance, one per row when set

    int width() const { return left + chunk + right; }
    std::size_t batch_size() const { return width() == 0 ? 0 : rows.rows() / std::size_t(width()); }
    std::size_t dim() const { return rows.cols(); }

    std::span<T> at(std::size_t b, int p) { return rows.row(b * std::size_t(width()) + std::size_t(p)); }
    std::span<const T> at(std::size_t b, int p) const {
        return rows.row(b * std::size_t(width()) + std::size_t(p));
    }
    bool valid(std::size_t b, int p) const { return mask[b * std::size_t(width()) + std::size_t(p)] != 0; }
    std::span<const std::uint8_t> row_mask(std::size_t b) const {
        return {mask.data() + b * std::size_t(width()), std::size_t(width())};
    }
};

/// Overlapping Chunk Transformation: row b copies flat[start_b - l, start_b + c + r).
/// Indices outside the flat sequence become 0 with a false mask bit.
template <typename T>
ChunkBatch<T> oct_segment(const Matrix<T> &flat, std::span<const int> starts, int left, int chunk, int right) {
    CF_CHECK(left >= 0 && right >= 0, ErrorKind::config, "oct_segment: negative context");
    CF_CHECK(chunk >= 1, ErrorKind::config, "oct_segment: chunk must be >= 1");
    ChunkBatch<T> batch;
    batch.left = left;
    batch.chunk = chunk;
    batch.right = right;
    const int width = batch.width();
    const long n = long(flat.rows());
    batch.rows = Matrix<T>(starts.size() * std::size_t(width), flat.cols());
    batch.mask.assign(starts.size() * std::size_t(width), 0);
    for (std::size_t b = 0; b < starts.size(); ++b) {
        for (int p = 0; p < width; ++p) {
            const long src = long(starts[b]) - left + p;
            if (src < 0 || src >= n) continue;
            auto from = flat.row(std::size_t(src));
            std::copy(from.begin(), from.end(), batch.at(b, p).begin());
            batch.mask[b * std::size_t(width) + std::size_t(p)] = 1;
        }
    }
    return batch;
}

/// Inverse of oct_segment on the chunk columns: rows' chunk parts laid end to end.
template <typename T>
Matrix<T> chunk_columns(const ChunkBatch<T> &batch) {
    Matrix<T> out(batch.batch_size() * std::size_t(batch.chunk), batch.dim());
    for (std::size_t b = 0; b < batch.batch_size(); ++b)
        for (int p = 0; p < batch.chunk; ++p) {
            auto src = batch.at(b, batch.left + p);
            std::copy(src.begin(), src.end(), out.row(b * std::size_t(batch.chunk) + std::size_t(p)).begin());
        }
    return out;
}

// ─── Flat layout and masks ──────────────────────────────────────────────────

/// One audio's region of the concatenated flat stream. Frames in
/// [valid_begin, valid_end) are real; everything else in [begin, end) is
/// either unfilled cache or padding.
struct FlatSegment {
    int audio_id = 0;
    int begin = 0;
    int end = 0;
    int valid_begin = 0;
    int valid_end = 0;
};

/// Per-audio description used to lay out one decode step.
struct SegmentSpec {
    int audio_id = 0;
    int cache_len = 0;    // real history frames available (<= cache slots)
    int rows = 0;         // chunk rows this audio contributes
    int valid_frames = 0; // real frames among rows * c (audio end / lookahead end)
};

struct FlatLayout {
    int cache_slots = 0;
    int chunk = 0;
    int size = 0;
    std::vector<FlatSegment> segments;
    std::vector<int> row_starts; // flat index of each row's first chunk frame
    std::vector<int> row_segment;
};

/// Flat stream = for each audio [cache_slots | rows * c], cache right-aligned.
inline FlatLayout make_layout(std::span<const SegmentSpec> specs, int cache_slots, int chunk) {
    FlatLayout layout;
    layout.cache_slots = cache_slots;
    layout.chunk = chunk;
    int pos = 0;
    for (std::size_t s = 0; s < specs.size(); ++s) {
        const auto &spec = specs[s];
        CF_CHECK(spec.cache_len >= 0 && spec.cache_len <= cache_slots, ErrorKind::scheduler,
                 "cache longer than its slots");
        CF_CHECK(spec.valid_frames >= 0 && spec.valid_frames <= spec.rows * chunk, ErrorKind::scheduler,
                 "segment claims more valid frames than its rows hold");
        FlatSegment seg;
        seg.audio_id = spec.audio_id;
        seg.begin = pos;
        seg.valid_begin = pos + cache_slots - spec.cache_len;
        seg.valid_end = pos + cache_slots + spec.valid_frames;
        pos += cache_slots;
        for (int r = 0; r < spec.rows; ++r) {
            layout.row_starts.push_back(pos);
            layout.row_segment.push_back(int(s));
            pos += chunk;
        }
        seg.end = pos;
        layout.segments.push_back(seg);
    }
    layout.size = pos;
    return layout;
}

/// Validity mask for rows placed at `starts` in a flat stream split into
/// `segments`: a position is valid only inside its own row's segment and
/// inside that segment's real frames. Overlapping segments are a scheduler bug.
inline std::vector<std::uint8_t> build_masks(std::span<const int> starts, std::span<const FlatSegment> segments,
                                             int left, int chunk, int right) {
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto &a = segments[i];
        CF_CHECK(a.begin <= a.valid_begin && a.valid_begin <= a.valid_end && a.valid_end <= a.end,
                 ErrorKind::scheduler, "malformed flat segment");
        for (std::size_t j = i + 1; j < segments.size(); ++j) {
            const auto &b = segments[j];
            CF_CHECK(a.end <= b.begin || b.end <= a.begin, ErrorKind::scheduler,
                     "audios " + std::to_string(a.audio_id) + " and " + std::to_string(b.audio_id) +
                         " claim overlapping flat regions");
        }
    }
    const int width = left + chunk + right;
    std::vector<std::uint8_t> mask(starts.size() * std::size_t(width), 0);
    for (std::size_t b = 0; b < starts.size(); ++b) {
        const auto it = std::find_if(segments.begin(), segments.end(),
                                     [&](const FlatSegment &s) { return starts[b] >= s.begin && starts[b] < s.end; });
        CF_CHECK(it != segments.end(), ErrorKind::scheduler, "row start outside every segment");
        for (int p = 0; p < width; ++p) {
            const int idx = starts[b] - left + p;
            mask[b * std::size_t(width) + std::size_t(p)] = idx >= it->valid_begin && idx < it->valid_end;
        }
    }
    return mask;
}

template <typename T>
void apply_mask(ChunkBatch<T> &batch, std::span<const std::uint8_t> mask) {
    CF_CHECK(mask.size() == batch.mask.size(), ErrorKind::shape, "mask size mismatch");
    for (std::size_t i = 0; i < mask.size(); ++i) batch.mask[i] = batch.mask[i] && mask[i];
}

/// Overwrites every masked position with random values. Used by the poison
/// tests: outputs must not change.
template <typename T>
void poison_masked(ChunkBatch<T> &batch, std::mt19937_64 &rng) {
    std::uniform_real_distribution<double> dist(-50.0, 50.0);
    const int width = batch.width();
    for (std::size_t b = 0; b < batch.batch_size(); ++b)
        for (int p = 0; p < width; ++p)
            if (!batch.valid(b, p))
                for (T &v : batch.at(b, p)) v = T(dist(rng));
}

/// Flat matrix for `layout`: cache rows right-aligned in their slots (zeros
/// before), then the segment's chunk frames taken in order from `frames`.
template <typename T>
Matrix<T> flatten(const FlatLayout &layout, std::span<const Matrix<T> *const> caches, const Matrix<T> &frames) {
    const std::size_t d = frames.cols();
    Matrix<T> flat(std::size_t(layout.size), d);
    std::size_t next = 0;
    for (std::size_t s = 0; s < layout.segments.size(); ++s) {
        const auto &seg = layout.segments[s];
        const int cache_len = seg.begin + layout.cache_slots - seg.valid_begin;
        if (cache_len > 0) {
            const Matrix<T> &cache = *caches[s];
            CF_CHECK(int(cache.rows()) >= cache_len && cache.cols() == d, ErrorKind::shape, "cache shape mismatch");
            for (int i = 0; i < cache_len; ++i) {
                auto src = cache.row(cache.rows() - std::size_t(cache_len) + std::size_t(i));
                std::copy(src.begin(), src.end(), flat.row(std::size_t(seg.valid_begin + i)).begin());
            }
        }
        for (int i = seg.begin + layout.cache_slots; i < seg.end; ++i, ++next) {
            auto src = frames.row(next);
            std::copy(src.begin(), src.end(), flat.row(std::size_t(i)).begin());
        }
    }
    CF_CHECK(next == frames.rows(), ErrorKind::shape, "flatten: frame count does not match layout");
    return flat;
}

/// New cache after a step: last `capacity` rows of [old cache ; emitted].
template <typename T>
Matrix<T> roll_cache(const Matrix<T> &old_cache, const Matrix<T> &emitted, int capacity) {
    if (capacity <= 0) return Matrix<T>(0, emitted.cols());
    Matrix<T> joined = old_cache.rows() ? old_cache : Matrix<T>(0, emitted.cols());
    joined.append_rows(emitted);
    const std::size_t keep = std::min<std::size_t>(joined.rows(), std::size_t(capacity));
    return joined.slice_rows(joined.rows() - keep, joined.rows());
}

// ─── Stream state and scheduling ────────────────────────────────────────────

/// Per-audio decoding state. Caches hold only real history; before warm-up
/// they are shorter than their capacity and the gap is masked.
template <typename T>
struct StreamState {
    int audio_id = 0;
    int total_frames = 0;    // T' (post-subsample)
    int frames_consumed = 0; // emitted post-subsample frames
    std::vector<Matrix<T>> att_cache;  // per layer, <= l_att rows
    std::vector<Matrix<T>> conv_cache; // per layer, <= l_conv rows
    Matrix<float> raw_cache;           // feature frames just before 8 * frames_consumed
    CtcCarry ctc_carry;

    bool finished() const { return frames_consumed >= total_frames; }
};

struct ScheduledRow {
    ChunkPlan plan;
    bool lookahead = false; // computed for context only, never emitted
};

/// What one audio contributes to a step.
struct AudioStep {
    int state_index = 0;
    int first_chunk = 0;
    int emit_rows = 0;
    int lookahead_rows = 0;
    int start_frame = 0;  // S = first_chunk * c
    int emit_frames = 0;  // real frames emitted this step
    int lookahead = 0;    // real lookahead frames after the emitted chunks
    int valid_frames = 0; // emit_frames + lookahead
};

struct StepSchedule {
    int chunk = 0;
    std::vector<ScheduledRow> rows;
    std::vector<AudioStep> audios;

    int emitted_rows() const {
        int n = 0;
        for (const auto &a : audios) n += a.emit_rows;
        return n;
    }
};

/// Picks the next unprocessed chunks in audio order then chunk order, up to
/// `budget` emitted rows, and appends `lookahead` frames (rounded up to whole
/// rows, excess masked) for every audio that continues past this step.
template <typename T>
StepSchedule schedule_step(std::span<const StreamState<T>> states, int chunk, int budget, int lookahead) {
    CF_CHECK(budget >= 1, ErrorKind::config, "budget must be >= 1 chunk");
    StepSchedule step;
    step.chunk = chunk;
    int left = budget;
    for (std::size_t i = 0; i < states.size() && left > 0; ++i) {
        const auto &st = states[i];
        if (st.finished()) continue;
        CF_CHECK(st.frames_consumed % chunk == 0, ErrorKind::scheduler, "stream not aligned to a chunk boundary");
        const auto plans = carve_chunks(st.total_frames, chunk, st.audio_id);
        AudioStep a;
        a.state_index = int(i);
        a.first_chunk = st.frames_consumed / chunk;
        a.start_frame = st.frames_consumed;
        a.emit_rows = std::min<int>(left, int(plans.size()) - a.first_chunk);
        left -= a.emit_rows;
        const int emit_end = std::min(st.total_frames, (a.first_chunk + a.emit_rows) * chunk);
        a.emit_frames = emit_end - a.start_frame;
        a.lookahead = std::min(lookahead, st.total_frames - emit_end);
        a.lookahead_rows = (a.lookahead + chunk - 1) / chunk;
        a.valid_frames = a.emit_frames + a.lookahead;
        for (int k = 0; k < a.emit_rows + a.lookahead_rows; ++k)
            step.rows.push_back({plans[std::size_t(a.first_chunk + k)], k >= a.emit_rows});
        step.audios.push_back(a);
    }
    return step;
}

} // namespace chunkformer
