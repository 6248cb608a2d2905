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

#include "chunkformer/attention.hpp"
#include "chunkformer/binary_io.hpp"
#include "chunkformer/chunking.hpp"
#include "chunkformer/config.hpp"
#include "chunkformer/conv.hpp"
#include "chunkformer/costmodel.hpp"
#include "chunkformer/ctc.hpp"
#include "chunkformer/encoder.hpp"
#include "chunkformer/errors.hpp"
#include "chunkformer/frontend.hpp"
#include "chunkformer/model.hpp"
#include "chunkformer/oracle.hpp"
#include "chunkformer/selftest.hpp"
#include "chunkformer/subsample.hpp"
#include "chunkformer/tensor.hpp"
#include "chunkformer/weights.hpp"
