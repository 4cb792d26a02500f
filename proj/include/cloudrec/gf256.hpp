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

// Arithmetic in GF(2^8) with the primitive polynomial x^8+x^4+x^3+x^2+1.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace cloudrec::gf256 {

constexpr unsigned kPolynomial = 0x11D;

struct Tables {
  std::array<std::uint8_t, 512> exp{};
  std::array<std::uint8_t, 256> log{};
};

constexpr Tables make_tables() {
  Tables t{};
  unsigned x = 1;
  for (unsigned i = 0; i < 255; ++i) {
    t.exp[i] = static_cast<std::uint8_t>(x);
    t.log[x] = static_cast<std::uint8_t>(i);
    x <<= 1;
    if (x & 0x100) x ^= kPolynomial;
  }
  // Doubled so mul can skip the mod 255.
  for (unsigned i = 255; i < 512; ++i) t.exp[i] = t.exp[i - 255];
  return t;
}

inline constexpr Tables kTables = make_tables();

constexpr std::uint8_t add(std::uint8_t a, std::uint8_t b) { return a ^ b; }

constexpr std::uint8_t mul(std::uint8_t a, std::uint8_t b) {
  if (a == 0 || b == 0) return 0;
  return kTables.exp[kTables.log[a] + kTables.log[b]];
}

constexpr std::uint8_t inv(std::uint8_t a) {
  if (a == 0) throw std::domain_error("gf256: inverse of zero");
  return kTables.exp[255 - kTables.log[a]];
}

constexpr std::uint8_t div(std::uint8_t a, std::uint8_t b) { return mul(a, inv(b)); }

constexpr std::uint8_t pow(std::uint8_t a, unsigned n) {
  if (n == 0) return 1;
  if (a == 0) return 0;
  return kTables.exp[(kTables.log[a] * n) % 255];
}

// dst[i] ^= c * src[i]
inline void mul_add_row(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src, std::uint8_t c) {
  if (c == 0) return;
  const std::size_t n = dst.size() < src.size() ? dst.size() : src.size();
  if (c == 1) {
    for (std::size_t i = 0; i < n; ++i) dst[i] ^= src[i];
    return;
  }
  const unsigned lc = kTables.log[c];
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t s = src[i];
    if (s != 0) dst[i] ^= kTables.exp[kTables.log[s] + lc];
  }
}

// Dense row-major square matrix over GF(256).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::uint8_t& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  std::uint8_t operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<const std::uint8_t> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
    return m;
  }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
      for (std::size_t k = 0; k < a.cols_; ++k) {
        const std::uint8_t v = a(i, k);
        if (v == 0) continue;
        for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) ^= mul(v, b(k, j));
      }
    return out;
  }

  // Gauss-Jordan inverse. Throws std::domain_error when singular.
  Matrix inverse() const {
    if (rows_ != cols_) throw std::invalid_argument("gf256: inverse of non-square matrix");
    const std::size_t n = rows_;
    Matrix a = *this;
    Matrix out = identity(n);
    for (std::size_t col = 0; col < n; ++col) {
      std::size_t pivot = col;
      while (pivot < n && a(pivot, col) == 0) ++pivot;
      if (pivot == n) throw std::domain_error("gf256: singular matrix");
      if (pivot != col) {
        for (std::size_t j = 0; j < n; ++j) {
          std::swap(a(pivot, j), a(col, j));
          std::swap(out(pivot, j), out(col, j));
        }
      }
      const std::uint8_t scale = gf256::inv(a(col, col));
      for (std::size_t j = 0; j < n; ++j) {
        a(col, j) = mul(a(col, j), scale);
        out(col, j) = mul(out(col, j), scale);
      }
      for (std::size_t r = 0; r < n; ++r) {
        if (r == col) continue;
        const std::uint8_t f = a(r, col);
        if (f == 0) continue;
        for (std::size_t j = 0; j < n; ++j) {
          a(r, j) ^= mul(f, a(col, j));
          out(r, j) ^= mul(f, out(col, j));
        }
      }
    }
    return out;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> data_;
};

}  // namespace cloudrec::gf256
