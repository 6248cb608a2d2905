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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "chunkformer/errors.hpp"

namespace chunkformer::io {

// Little-endian byte buffers shared by the feature and checkpoint containers.

inline void write_file(const std::string &path, const std::vector<char> &bytes) {
    std::ofstream out(path, std::ios::binary);
    CF_CHECK(out.good(), ErrorKind::io, "cannot open " + path + " for writing");
    out.write(bytes.data(), std::streamsize(bytes.size()));
    CF_CHECK(out.good(), ErrorKind::io, "write failed for " + path);
}

class ByteWriter {
  public:
    void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

    template <typename U>
    void uint(U v) {
        for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(char((std::uint64_t(v) >> (8 * i)) & 0xff));
    }

    void f32(float v) { uint(std::bit_cast<std::uint32_t>(v)); }

    const std::vector<char> &buffer() const { return buf_; }

    void write_file(const std::string &path) const { io::write_file(path, buf_); }

  private:
    std::vector<char> buf_;
};

class ByteReader {
  public:
    explicit ByteReader(std::vector<char> data, std::string what = "input")
        : data_(std::move(data)), what_(std::move(what)) {}

    static ByteReader from_file(const std::string &path) {
        std::ifstream in(path, std::ios::binary);
        CF_CHECK(in.good(), ErrorKind::io, "cannot open " + path);
        std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        return ByteReader(std::move(data), path);
    }

    std::size_t remaining() const { return data_.size() - pos_; }
    bool has(std::size_t n) const { return remaining() >= n; }

    std::string bytes(std::size_t n) {
        need(n);
        std::string s(data_.data() + pos_, n);
        pos_ += n;
        return s;
    }

    template <typename U>
    U uint() {
        need(sizeof(U));
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i)
            v |= std::uint64_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += sizeof(U);
        return static_cast<U>(v);
    }

    float f32() { return std::bit_cast<float>(uint<std::uint32_t>()); }

    const std::string &what() const { return what_; }

  private:
    void need(std::size_t n) const {
        CF_CHECK(has(n), ErrorKind::format, "truncated payload in " + what_);
    }

    std::vector<char> data_;
    std::size_t pos_ = 0;
    std::string what_;
};

} // namespace chunkformer::io
