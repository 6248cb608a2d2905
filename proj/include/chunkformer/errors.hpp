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

#include <stdexcept>
#include <string>
#include <utility>

namespace chunkformer {

enum class ErrorKind {
    config,      // invalid hyperparameters or config file
    shape,       // tensor shape mismatch
    empty_input, // zero-length audio / features
    range,       // index or distance outside a table
    io,          // unreadable file
    format,      // bad magic, truncated payload, unsupported WAV
    checkpoint,  // missing/unknown tensors, shape vs config mismatch
    scheduler,   // internal batching invariant broken
    usage,       // bad command-line usage
};

inline const char *to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::shape: return "shape";
    case ErrorKind::empty_input: return "empty-input";
    case ErrorKind::range: return "range";
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::checkpoint: return "checkpoint";
    case ErrorKind::scheduler: return "scheduler";
    case ErrorKind::usage: return "usage";
    }
    return "unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

  private:
    ErrorKind kind_;
};

} // namespace chunkformer

#define CF_CHECK(cond, kind, msg)                                                                  \
    do {                                                                                           \
        if (!(cond)) throw ::chunkformer::Error((kind), (msg));                                    \
    } while (0)
