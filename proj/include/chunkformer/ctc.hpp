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

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "chunkformer/errors.hpp"
#include "chunkformer/tensor.hpp"

namespace chunkformer {

inline constexpr int kBlankId = 0;

// ─── Vocabulary ─────────────────────────────────────────────────────────────

class Vocab {
  public:
    Vocab() = default;
    explicit Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
        CF_CHECK(!tokens_.empty(), ErrorKind::checkpoint, "vocabulary is empty");
        std::set<std::string> seen;
        for (const auto &t : tokens_)
            CF_CHECK(seen.insert(t).second, ErrorKind::checkpoint, "duplicate vocabulary token '" + t + "'");
    }

    /// Blank, space, apostrophe and a-z.
    static Vocab characters() {
        std::vector<std::string> t{"<blank>", " ", "'"};
        for (char ch = 'a'; ch <= 'z'; ++ch) t.emplace_back(1, ch);
        return Vocab(std::move(t));
    }

    /// Placeholder names "<0>", "<1>", ... with "<blank>" at 0.
    static Vocab placeholder(int size) {
        std::vector<std::string> t{"<blank>"};
        for (int i = 1; i < size; ++i) t.push_back("<" + std::to_string(i) + ">");
        return Vocab(std::move(t));
    }

    int size() const { return int(tokens_.size()); }
    const std::string &token(int id) const { return tokens_.at(std::size_t(id)); }
    const std::vector<std::string> &tokens() const { return tokens_; }

    std::string detokenize(const std::vector<int> &ids) const {
        std::string out;
        for (int id : ids) out += token(id);
        return out;
    }

  private:
    std::vector<std::string> tokens_;
};

// ─── Projection ─────────────────────────────────────────────────────────────

template <typename T>
Matrix<T> project_logits(const Matrix<T> &hidden, const Linear<T> &head) {
    return head.forward(hidden);
}

// ─── Greedy decoding ────────────────────────────────────────────────────────

/// State carried across chunk boundaries: last argmax id (blank at audio
/// start) and the absolute index of the next frame.
struct CtcCarry {
    int last_id = kBlankId;
    int frame_offset = 0;

    bool operator==(const CtcCarry &) const = default;
};

struct CtcHypothesis {
    std::vector<int> tokens;
    std::vector<std::pair<int, int>> spans; // first/last frame of each token's run

    bool operator==(const CtcHypothesis &) const = default;
};

/// Per-frame argmax (lowest index wins ties), collapse repeats, drop blanks.
/// Appends to `hyp`; a run continuing from the previous call extends the
/// last token's span instead of emitting a new token.
template <typename T>
void greedy_decode(const Matrix<T> &logits, CtcCarry &carry, CtcHypothesis &hyp) {
    for (std::size_t t = 0; t < logits.rows(); ++t) {
        const auto row = logits.row(t);
        int best = 0;
        for (std::size_t v = 1; v < row.size(); ++v)
            if (row[v] > row[std::size_t(best)]) best = int(v);
        const int frame = carry.frame_offset + int(t);
        if (best != kBlankId) {
            if (best != carry.last_id) {
                hyp.tokens.push_back(best);
                hyp.spans.emplace_back(frame, frame);
            } else if (!hyp.spans.empty()) {
                hyp.spans.back().second = frame;
            }
        }
        carry.last_id = best;
    }
    carry.frame_offset += int(logits.rows());
}

template <typename T>
std::pair<std::vector<int>, CtcCarry> greedy_decode(const Matrix<T> &logits, CtcCarry carry = {}) {
    CtcHypothesis hyp;
    greedy_decode(logits, carry, hyp);
    return {std::move(hyp.tokens), carry};
}

} // namespace chunkformer
