// Copyright 2026 The cloudrec Authors.
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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>

namespace cloudrec {

using FlowId = std::uint64_t;
using Seq = std::uint64_t;
using NodeId = std::uint32_t;

// Virtual time in microseconds.
using TimeUs = std::int64_t;

constexpr TimeUs kUsPerMs = 1000;
constexpr TimeUs kUsPerSec = 1000000;

constexpr TimeUs ms_to_us(double ms) { return static_cast<TimeUs>(ms * 1000.0 + (ms >= 0 ? 0.5 : -0.5)); }
constexpr double us_to_ms(TimeUs us) { return static_cast<double>(us) / 1000.0; }

constexpr std::size_t kMaxPayload = 1472;

// A (flow, seq) pair naming one data packet.
struct Entry {
  FlowId flow_id = 0;
  Seq seq = 0;

  friend auto operator<=>(const Entry&, const Entry&) = default;
};

struct EntryHash {
  std::size_t operator()(const Entry& e) const noexcept {
    std::uint64_t h = e.flow_id * 0x9E3779B97F4A7C15ull;
    h ^= e.seq + 0x632BE59BD9B4E019ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace cloudrec
