#pragma once

// Independent reference computations. Nothing here calls the simulator's
// schedulers or datapaths; formats are decoded straight from their bytes.

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "hsa/quant.hpp"

namespace oracle {

using hsa::quant::Int8Tensor;
using hsa::quant::MxInt4Tensor;

inline Int8Tensor random_int8(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> d(-128, 127);
  Int8Tensor t;
  t.shape = {rows, cols};
  t.values.resize(rows * cols);
  for (auto& v : t.values) v = static_cast<std::int8_t>(d(rng));
  return t;
}

// [M x K] * [K x N] in 64-bit.
inline std::vector<std::int64_t> matmul(const Int8Tensor& a, const Int8Tensor& b) {
  const std::size_t M = a.shape[0], K = a.shape[1], N = b.shape[1];
  std::vector<std::int64_t> c(M * N, 0);
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      std::int64_t acc = 0;
      for (std::size_t k = 0; k < K; ++k) acc += std::int64_t{a.values[i * K + k]} * b.values[k * N + j];
      c[i * N + j] = acc;
    }
  return c;
}

inline int nibble(const std::vector<std::uint8_t>& bytes, std::size_t idx) {
  const std::uint8_t b = bytes.at(idx / 2);
  return (idx % 2 == 0) ? (b & 0x0F) : (b >> 4);
}

inline int signed_nibble(const std::vector<std::uint8_t>& bytes, std::size_t idx) {
  const int n = nibble(bytes, idx);
  return n >= 8 ? n - 16 : n;
}

// y_i = sum_j m_ij * x_j * 2^code(i/16, j), straight from the packed payload.
inline std::vector<std::int64_t> mvm_direct(const MxInt4Tensor& w, const std::vector<std::int8_t>& x) {
  std::vector<std::int64_t> y(w.rows, 0);
  for (std::size_t i = 0; i < w.rows; ++i)
    for (std::size_t j = 0; j < w.cols; ++j) {
      const int m = signed_nibble(w.mantissas, i * w.cols + j);
      const int c = nibble(w.shift_codes, (i / w.group_size) * w.cols + j);
      y[i] += std::int64_t{m} * x[j] * (std::int64_t{1} << c);
    }
  return y;
}

// floor(log2(v)) from frexp, clamped to [-9, 5]; zero maps to -9.
inline int group_shift(double v) {
  if (v == 0.0) return -9;
  int e = 0;
  std::frexp(v, &e);
  return std::clamp(e - 1, -9, 5);
}

// Ties-to-even via the FPU's default rounding mode.
inline double rint_even(double v) {
  const int old = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double r = std::nearbyint(v);
  std::fesetround(old);
  return r;
}

inline int mantissa(double w, int shift) {
  return static_cast<int>(std::clamp(rint_even(std::ldexp(w, 2 - shift)), -8.0, 7.0));
}

// ---- closed-form roofline ---------------------------------------------------
//
// Tokens/s of the HSA on a RetNet-style graph, written out from the cost
// rules alone (tile counts, DRAM bytes, max(compute, memory) per phase).

struct Hardware {
  std::uint64_t rows = 16, cols = 16, clusters = 4;
  std::uint64_t fill = 30, drain = 16, mvm_drain = 5;
  std::uint64_t act_sram = 65536, max_kseg = 4096, max_mvm_segment = 16384, ppu_lanes = 16;
  double clock = 500e6, bandwidth = 51.2e9;
};

struct Dims {
  std::uint64_t layers, d, ffn, heads, dk, vf, vocab;
  bool mxint4 = true;
};

inline std::uint64_t cdiv(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

struct Totals {
  std::uint64_t cycles = 0;
  std::uint64_t dram = 0;
};

// One matmul [M x K] * [K x N]: activations staged in chunks, each (chunk,
// K-segment) pass pays one fill, every 16x16 output tile pays K + drain.
inline Totals mmm(const Hardware& h, std::uint64_t M, std::uint64_t K, std::uint64_t N, bool dram) {
  const std::uint64_t kseg = std::min({K, h.max_kseg, h.act_sram / h.rows});
  const std::uint64_t chunk = std::min(h.act_sram / kseg / h.rows * h.rows, cdiv(M, h.rows) * h.rows);
  const std::uint64_t nseg = cdiv(K, kseg);
  const std::uint64_t ntile = cdiv(N, h.cols);
  Totals t;
  auto chunk_cycles = [&](std::uint64_t rows) {
    return nseg * h.fill + cdiv(rows, h.rows) * ntile * (K + h.drain * nseg);
  };
  t.cycles = (M / chunk) * chunk_cycles(chunk) + (M % chunk ? chunk_cycles(M % chunk) : 0);
  if (dram) t.dram = cdiv(M, chunk) * K * N + M * K + M * N;
  return t;
}

inline Totals mvm(const Hardware& h, std::uint64_t c, std::uint64_t k, bool mxint4) {
  const std::uint64_t groups = cdiv(c, h.cols);
  const std::uint64_t rounds = cdiv(groups, h.clusters);
  Totals t;
  t.cycles = rounds * k + rounds * cdiv(k, h.max_mvm_segment) * h.mvm_drain;
  t.dram = mxint4 ? cdiv(c * k, 2) + cdiv(groups * k, 2) : c * k;
  return t;
}

inline void add(Totals& a, const Totals& b) {
  a.cycles += b.cycles;
  a.dram += b.dram;
}

inline Totals prefill(const Hardware& h, const Dims& m, std::uint64_t M) {
  const std::uint64_t vd = m.vf * m.d, dv = m.vf * m.dk, B = 64;
  Totals t;
  t.dram += M * m.d;  // embedding rows
  for (std::uint64_t l = 0; l < m.layers; ++l) {
    add(t, mmm(h, M, m.d, m.d, true));
    add(t, mmm(h, M, m.d, m.d, true));
    add(t, mmm(h, M, m.d, vd, true));
    add(t, mmm(h, M, m.d, vd, true));
    for (std::uint64_t hd = 0; hd < m.heads; ++hd) {
      for (std::uint64_t c0 = 0; c0 < M; c0 += B) {
        const std::uint64_t b = std::min(B, M - c0);
        add(t, mmm(h, b, m.dk, b, false));
        add(t, mmm(h, b, b, dv, false));
        if (c0 > 0) add(t, mmm(h, b, m.dk, dv, false));
        add(t, mmm(h, m.dk, b, dv, false));
      }
    }
    t.dram += M * (2 * m.d + vd) + M * vd;  // q, k, v in; retention out
    t.dram += M * vd;                       // gate
    add(t, mmm(h, M, vd, m.d, true));
    t.dram += M * m.d;                      // residual
    add(t, mmm(h, M, m.d, m.ffn, true));
    add(t, mmm(h, M, m.ffn, m.d, true));
    t.dram += M * m.d;                      // residual
  }
  add(t, mmm(h, 1, m.d, m.vocab, true));    // logits for the last position
  return t;
}

inline Totals decode_token(const Hardware& h, const Dims& m) {
  const std::uint64_t vd = m.vf * m.d, dv = m.vf * m.dk;
  Totals t;
  t.dram += m.d;
  for (std::uint64_t l = 0; l < m.layers; ++l) {
    add(t, mvm(h, m.d, m.d, m.mxint4));
    add(t, mvm(h, m.d, m.d, m.mxint4));
    add(t, mvm(h, vd, m.d, m.mxint4));
    add(t, mvm(h, vd, m.d, m.mxint4));
    t.cycles += m.heads * 2 * cdiv(m.dk * dv, h.clusters * h.cols);
    add(t, mvm(h, m.d, vd, m.mxint4));
    add(t, mvm(h, m.ffn, m.d, m.mxint4));
    add(t, mvm(h, m.d, m.ffn, m.mxint4));
  }
  add(t, mvm(h, m.vocab, m.d, m.mxint4));
  t.cycles += cdiv(m.dk / 2, h.ppu_lanes);  // angle memory update
  return t;
}

inline double phase_seconds(const Hardware& h, const Totals& t) {
  return std::max(static_cast<double>(t.cycles) / h.clock, static_cast<double>(t.dram) / h.bandwidth);
}

struct Rates {
  double prefill_s = 0.0;
  double decode_s = 0.0;
  double tokens_per_s = 0.0;
};

inline Rates roofline(const Hardware& h, const Dims& m, std::uint64_t prompt, std::uint64_t output) {
  Rates r;
  r.prefill_s = phase_seconds(h, prefill(h, m, prompt));
  Totals d = decode_token(h, m);
  d.cycles *= output;
  d.dram *= output;
  r.decode_s = phase_seconds(h, d);
  r.tokens_per_s = static_cast<double>(prompt + output) / (r.prefill_s + r.decode_s);
  return r;
}

inline Dims retnet_1p3b() { return {24, 2048, 4096, 8, 256, 2, 50304, true}; }

}  // namespace oracle
