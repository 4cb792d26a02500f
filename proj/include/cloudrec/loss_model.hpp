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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "cloudrec/types.hpp"

namespace cloudrec {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

// Seeded stream with platform-independent draws. Streams are keyed by name so
// adding a stream never shifts the draws of another.
class Rng {
 public:
  Rng() : engine_(0) {}
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  Rng(std::uint64_t seed, std::string_view stream) : engine_(splitmix64(seed ^ splitmix64(fnv1a(stream)))) {}

  std::uint64_t next() { return engine_(); }
  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  bool bernoulli(double p) { return uniform() < p; }
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }

 private:
  std::mt19937_64 engine_;
};

struct NoLoss {};

struct BernoulliLoss {
  double p = 0.0;
};

struct GilbertElliottLoss {
  double p_good_to_bad = 0.0;
  double p_bad_to_good = 1.0;
  double loss_good = 0.0;
  double loss_bad = 1.0;
  bool bad = false;
};

// First loss of a burst with p_first, each further consecutive loss with p_cont.
struct GoogleBurstLoss {
  double p_first = 0.01;
  double p_cont = 0.5;
  bool last_lost = false;
};

// Drops everything sent inside any [start, end) interval.
struct ScheduledOutage {
  std::vector<std::pair<TimeUs, TimeUs>> intervals;
};

class LossModel;

struct CompositeLoss {
  std::vector<LossModel> parts;
};

class LossModel {
 public:
  using Variant = std::variant<NoLoss, BernoulliLoss, GilbertElliottLoss, GoogleBurstLoss, ScheduledOutage, CompositeLoss>;

  LossModel() = default;
  template <typename T>
  LossModel(T model) : model_(std::move(model)) {}  // NOLINT(google-explicit-constructor)

  const Variant& variant() const { return model_; }

  // Consulted exactly once per message.
  bool drop(TimeUs send_time, Rng& rng) {
    return std::visit([&](auto& m) { return drop_impl(m, send_time, rng); }, model_);
  }

  bool is_lossless() const {
    return std::visit(
        [](const auto& m) -> bool {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, NoLoss>) return true;
          else if constexpr (std::is_same_v<T, BernoulliLoss>) return m.p <= 0.0;
          else if constexpr (std::is_same_v<T, GilbertElliottLoss>) return m.loss_good <= 0.0 && (m.loss_bad <= 0.0 || m.p_good_to_bad <= 0.0);
          else if constexpr (std::is_same_v<T, GoogleBurstLoss>) return m.p_first <= 0.0;
          else if constexpr (std::is_same_v<T, ScheduledOutage>) return m.intervals.empty();
          else {
            for (const auto& p : m.parts)
              if (!p.is_lossless()) return false;
            return true;
          }
        },
        model_);
  }

  // Throws std::invalid_argument naming the offending field.
  void validate() const {
    auto prob = [](double v, const char* name) {
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + ": probability outside [0, 1]");
    };
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, BernoulliLoss>) {
            prob(m.p, "p");
          } else if constexpr (std::is_same_v<T, GilbertElliottLoss>) {
            prob(m.p_good_to_bad, "p_good_to_bad");
            prob(m.p_bad_to_good, "p_bad_to_good");
            prob(m.loss_good, "loss_good");
            prob(m.loss_bad, "loss_bad");
          } else if constexpr (std::is_same_v<T, GoogleBurstLoss>) {
            prob(m.p_first, "p_first");
            prob(m.p_cont, "p_cont");
          } else if constexpr (std::is_same_v<T, ScheduledOutage>) {
            auto sorted = m.intervals;
            std::sort(sorted.begin(), sorted.end());
            for (std::size_t i = 0; i < sorted.size(); ++i) {
              if (sorted[i].second <= sorted[i].first) throw std::invalid_argument("intervals: empty or reversed interval");
              if (i > 0 && sorted[i].first < sorted[i - 1].second) throw std::invalid_argument("intervals: overlapping intervals");
            }
          } else if constexpr (std::is_same_v<T, CompositeLoss>) {
            for (const auto& p : m.parts) p.validate();
          }
        },
        model_);
  }

 private:
  static bool drop_impl(NoLoss&, TimeUs, Rng&) { return false; }
  static bool drop_impl(BernoulliLoss& m, TimeUs, Rng& rng) { return rng.bernoulli(m.p); }
  static bool drop_impl(GilbertElliottLoss& m, TimeUs, Rng& rng) {
    // State transition first, then loss in the new state.
    if (m.bad) {
      if (rng.bernoulli(m.p_bad_to_good)) m.bad = false;
    } else {
      if (rng.bernoulli(m.p_good_to_bad)) m.bad = true;
    }
    return rng.bernoulli(m.bad ? m.loss_bad : m.loss_good);
  }
  static bool drop_impl(GoogleBurstLoss& m, TimeUs, Rng& rng) {
    m.last_lost = rng.bernoulli(m.last_lost ? m.p_cont : m.p_first);
    return m.last_lost;
  }
  static bool drop_impl(ScheduledOutage& m, TimeUs t, Rng&) {
    for (const auto& [start, end] : m.intervals)
      if (t >= start && t < end) return true;
    return false;
  }
  static bool drop_impl(CompositeLoss& m, TimeUs t, Rng& rng) {
    bool lost = false;
    for (auto& p : m.parts) lost = p.drop(t, rng) || lost;
    return lost;
  }

  Variant model_ = NoLoss{};
};

}  // namespace cloudrec
