#pragma once

// Float helpers shared by the reference pass and the functional simulator.

#include <cmath>
#include <span>
#include <vector>

#include "hsa/workload.hpp"

namespace hsa::workload::detail {

inline std::vector<float> matvec(const Matrix<float>& w, std::span<const float> x) {
  std::vector<float> out(w.rows);
  for (std::size_t i = 0; i < w.rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < w.cols; ++j) acc += static_cast<double>(w(i, j)) * x[j];
    out[i] = static_cast<float>(acc);
  }
  return out;
}

inline float max_abs(std::span<const float> v) {
  float m = 0.0f;
  for (float x : v) m = std::max(m, std::fabs(x));
  return m;
}

inline void track(ActivationStats* stats, const std::string& site, std::span<const float> v) {
  if (!stats) return;
  float& m = (*stats)[site];
  m = std::max(m, max_abs(v));
}

inline std::vector<float> times_gamma(std::span<const float> x, const ppu::NormParams& norm) {
  return ppu::apply_gamma(x, norm.gamma);
}

// One head of retention in recurrent form: S <- gamma S + k^T v; o = q S.
inline void retention_step(Matrix<float>& s, float gamma, std::span<const float> q, std::span<const float> k,
                           std::span<const float> v, std::span<float> o) {
  for (std::size_t a = 0; a < s.rows; ++a) {
    for (std::size_t b = 0; b < s.cols; ++b) s(a, b) = gamma * s(a, b) + k[a] * v[b];
  }
  for (std::size_t b = 0; b < s.cols; ++b) {
    double acc = 0.0;
    for (std::size_t a = 0; a < s.rows; ++a) acc += static_cast<double>(q[a]) * s(a, b);
    o[b] = static_cast<float>(acc);
  }
}

// Parallel form over a whole sequence for one head:
//   o_n = sum_{m <= n} gamma^(n-m) (q_n . k_m) v_m,  S = sum_m gamma^(M-1-m) k_m^T v_m.
// q, k are [M x dk] and v is [M x dv]; returns o [M x dv] and writes S.
inline Matrix<float> retention_parallel(const Matrix<float>& q, const Matrix<float>& k, const Matrix<float>& v,
                                        float gamma, Matrix<float>& state) {
  const std::size_t M = q.rows;
  Matrix<float> o(M, v.cols);
  for (std::size_t n = 0; n < M; ++n) {
    std::vector<double> acc(v.cols, 0.0);
    for (std::size_t m = 0; m <= n; ++m) {
      double dot = 0.0;
      for (std::size_t a = 0; a < q.cols; ++a) dot += static_cast<double>(q(n, a)) * k(m, a);
      const double w = dot * std::pow(static_cast<double>(gamma), static_cast<double>(n - m));
      for (std::size_t b = 0; b < v.cols; ++b) acc[b] += w * v(m, b);
    }
    for (std::size_t b = 0; b < v.cols; ++b) o(n, b) = static_cast<float>(acc[b]);
  }
  state = Matrix<float>(k.cols, v.cols);
  for (std::size_t a = 0; a < k.cols; ++a) {
    for (std::size_t b = 0; b < v.cols; ++b) {
      double acc = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        acc += std::pow(static_cast<double>(gamma), static_cast<double>(M - 1 - m)) * k(m, a) * v(m, b);
      }
      state(a, b) = static_cast<float>(acc);
    }
  }
  return o;
}

inline std::string layer_op(std::uint64_t layer, const char* op) {
  return "l" + std::to_string(layer) + "." + op;
}

}  // namespace hsa::workload::detail
