#include "hsa/ppu.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace hsa::ppu {
namespace {

void check_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    fail(ErrorCode::kShapeMismatch,
         std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

// Picks the float (sin, cos) pair nearest to the true rotation by angle. The
// recurrence multiplies this pair in thousands of times, so its angle error is
// what accumulates; its magnitude error is removed by renormalization.
SinCos best_step_pair(double theta) {
  const float s0 = static_cast<float>(std::sin(theta));
  const float c0 = static_cast<float>(std::cos(theta));
  constexpr int kUlps = 4;
  SinCos best{s0, c0};
  double best_angle = std::numeric_limits<double>::infinity();
  double best_mag = std::numeric_limits<double>::infinity();
  float s = s0;
  for (int i = 0; i < kUlps; ++i) s = std::nextafter(s, -2.0f);
  for (int i = -kUlps; i <= kUlps; ++i, s = std::nextafter(s, 2.0f)) {
    float c = c0;
    for (int j = 0; j < kUlps; ++j) c = std::nextafter(c, -2.0f);
    for (int j = -kUlps; j <= kUlps; ++j, c = std::nextafter(c, 2.0f)) {
      const double angle = std::fabs(std::atan2(double(s), double(c)) - theta);
      const double mag = std::fabs(std::hypot(double(s), double(c)) - 1.0);
      if (angle < best_angle || (angle == best_angle && mag < best_mag)) {
        best = {s, c};
        best_angle = angle;
        best_mag = mag;
      }
    }
  }
  return best;
}

constexpr int kSigmoidEntries = 1025;
constexpr float kSigmoidRange = 16.0f;

const std::array<float, kSigmoidEntries>& sigmoid_table() {
  static const auto table = [] {
    std::array<float, kSigmoidEntries> t{};
    for (int i = 0; i < kSigmoidEntries; ++i) {
      const double x = -kSigmoidRange + 2.0 * kSigmoidRange * i / (kSigmoidEntries - 1);
      t[static_cast<std::size_t>(i)] = static_cast<float>(1.0 / (1.0 + std::exp(-x)));
    }
    return t;
  }();
  return table;
}

float sigmoid_lut(float v) noexcept {
  if (std::isnan(v)) return v;
  if (v <= -kSigmoidRange) return 0.0f;
  if (v >= kSigmoidRange) return 1.0f;
  const auto& t = sigmoid_table();
  const float pos = (v + kSigmoidRange) *
                    ((kSigmoidEntries - 1) / (2.0f * kSigmoidRange));
  const int i = std::min(static_cast<int>(pos), kSigmoidEntries - 2);
  const float frac = pos - static_cast<float>(i);
  return t[static_cast<std::size_t>(i)] + frac * (t[static_cast<std::size_t>(i) + 1] - t[static_cast<std::size_t>(i)]);
}

constexpr float kGeluC = 0.7978845608028654f;  // sqrt(2/pi)

}  // namespace

NormParams NormParams::unit(std::size_t dim) {
  NormParams p;
  p.gamma.assign(dim, 1.0f);
  return p;
}

void NormParams::validate(std::size_t dim) const {
  check_same(gamma.size(), dim, "gamma length");
  if (has_beta()) check_same(beta.size(), dim, "beta length");
  if (!(epsilon > 0.0f)) fail(ErrorCode::kConfigError, "norm epsilon must be positive");
}

float sigma_inverse(std::span<const float> y, float epsilon) {
  float sum = 0.0f;
  for (float v : y) sum += v * v;
  const float mean = y.empty() ? 0.0f : sum / static_cast<float>(y.size());
  return 1.0f / std::sqrt(mean + epsilon);
}

std::vector<float> apply_gamma(std::span<const float> y, std::span<const float> gamma) {
  check_same(y.size(), gamma.size(), "gamma length");
  std::vector<float> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = y[i] * gamma[i];
  return out;
}

std::vector<float> rmsnorm_reference(std::span<const float> y, const NormParams& norm) {
  norm.validate(y.size());
  const float s = sigma_inverse(y, norm.epsilon);
  std::vector<float> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    out[i] = y[i] * s * norm.gamma[i] + (norm.has_beta() ? norm.beta[i] : 0.0f);
  }
  return out;
}

std::vector<float> fold_bias(const Matrix<float>& w, std::span<const float> beta, float s_next) {
  std::vector<float> b(w.rows, 0.0f);
  if (beta.empty()) return b;
  check_same(beta.size(), w.cols, "beta length");
  for (std::size_t i = 0; i < w.rows; ++i) {
    float acc = 0.0f;
    for (std::size_t j = 0; j < w.cols; ++j) acc += w(i, j) * beta[j];
    b[i] = acc * s_next;
  }
  return b;
}

std::vector<float> fused_rmsnorm_matmul(std::span<const float> y, const NormParams& norm,
                                        const Matrix<float>& w_next, float s_next,
                                        NormStageTrace* trace) {
  const auto bias = fold_bias(w_next, norm.beta, s_next);
  return fused_rmsnorm_matmul(y, norm, w_next, s_next, bias, trace);
}

std::vector<float> fused_rmsnorm_matmul(std::span<const float> y, const NormParams& norm,
                                        const Matrix<float>& w_next, float s_next,
                                        std::span<const float> folded_bias, NormStageTrace* trace) {
  norm.validate(y.size());
  check_same(w_next.cols, y.size(), "matmul input");
  check_same(folded_bias.size(), w_next.rows, "folded bias");

  NormStageTrace local;
  NormStageTrace& t = trace ? *trace : local;
  t = {};
  t.stages = {"stream_gamma_mac", "square_accumulate", "rsqrt", "output_scale", "bias_add"};
  t.scalar_registers = 2;

  // Stages 0 and 1 run side by side on every element as it arrives.
  std::vector<float> acc(w_next.rows, 0.0f);
  float sum_sq = 0.0f;
  for (std::size_t j = 0; j < y.size(); ++j) {
    const float ys = y[j] * norm.gamma[j];
    for (std::size_t i = 0; i < w_next.rows; ++i) acc[i] += w_next(i, j) * ys;
    sum_sq += y[j] * y[j];
    ++t.streamed_elements;
  }
  const float mean = y.empty() ? 0.0f : sum_sq / static_cast<float>(y.size());
  const float sigma_inv = 1.0f / std::sqrt(mean + norm.epsilon);
  t.sigma_inv_stage = 3;

  FusedLayerScale scale{s_next, sigma_inv, {}};
  const float s_star = scale.effective_scale();
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] = acc[i] * s_star + folded_bias[i];
  return acc;
}

std::vector<float> unfused_rmsnorm_matmul(std::span<const float> y, const NormParams& norm,
                                          const Matrix<float>& w_next, float s_next) {
  check_same(w_next.cols, y.size(), "matmul input");
  const std::vector<float> buffered = rmsnorm_reference(y, norm);
  std::vector<float> out(w_next.rows, 0.0f);
  for (std::size_t i = 0; i < w_next.rows; ++i) {
    float acc = 0.0f;
    for (std::size_t j = 0; j < buffered.size(); ++j) acc += w_next(i, j) * buffered[j];
    out[i] = acc * s_next;
  }
  return out;
}

double rope_theta(std::size_t k, std::size_t head_dim, double base) {
  return std::pow(base, -2.0 * static_cast<double>(k) / static_cast<double>(head_dim));
}

AngleMemory::AngleMemory(std::size_t head_dim, double base, int renorm_interval)
    : head_dim_(head_dim), base_(base), renorm_interval_(renorm_interval) {
  if (head_dim == 0 || head_dim % 2 != 0) fail(ErrorCode::kConfigError, "RoPE head_dim must be even");
  if (!(base > 1.0)) fail(ErrorCode::kConfigError, "RoPE base must exceed 1");
  if (renorm_interval < 0) fail(ErrorCode::kConfigError, "negative renormalization interval");
  const std::size_t n = head_dim / 2;
  step_.resize(n);
  current_.assign(n, SinCos{0.0f, 1.0f});
  for (std::size_t k = 0; k < n; ++k) step_[k] = best_step_pair(theta(k));
}

AngleMemory AngleMemory::at_position(std::size_t head_dim, std::uint64_t m, double base, int renorm_interval) {
  AngleMemory mem(head_dim, base, renorm_interval);
  mem.position_ = m;
  for (std::size_t k = 0; k < mem.pairs(); ++k) {
    const double a = static_cast<double>(m) * mem.theta(k);
    mem.current_[k] = {static_cast<float>(std::sin(a)), static_cast<float>(std::cos(a))};
  }
  return mem;
}

void AngleMemory::update() {
  for (std::size_t k = 0; k < current_.size(); ++k) {
    const SinCos m = current_[k];
    const SinCos one = step_[k];
    current_[k] = {m.sin * one.cos + one.sin * m.cos, m.cos * one.cos - m.sin * one.sin};
  }
  ++position_;
  if (renorm_interval_ > 0 && position_ % static_cast<std::uint64_t>(renorm_interval_) == 0) {
    for (auto& sc : current_) {
      const float inv = 1.0f / std::sqrt(sc.sin * sc.sin + sc.cos * sc.cos);
      sc.sin *= inv;
      sc.cos *= inv;
    }
  }
}

void AngleMemory::embed(std::span<float> x) const {
  check_same(x.size(), head_dim_, "RoPE vector");
  for (std::size_t k = 0; k < current_.size(); ++k) {
    const float a = x[2 * k];
    const float b = x[2 * k + 1];
    const SinCos sc = current_[k];
    x[2 * k] = a * sc.cos - b * sc.sin;
    x[2 * k + 1] = b * sc.cos + a * sc.sin;
  }
}

void rope_embed_direct(std::span<float> x, std::uint64_t m, double base) {
  if (x.size() % 2 != 0) fail(ErrorCode::kShapeMismatch, "RoPE vector length must be even");
  for (std::size_t k = 0; k < x.size() / 2; ++k) {
    const double angle = static_cast<double>(m) * rope_theta(k, x.size(), base);
    const auto s = static_cast<float>(std::sin(angle));
    const auto c = static_cast<float>(std::cos(angle));
    const float a = x[2 * k];
    const float b = x[2 * k + 1];
    x[2 * k] = a * c - b * s;
    x[2 * k + 1] = b * c + a * s;
  }
}

quant::Int8Tensor requantize(std::span<const std::int32_t> acc, float scale, float out_scale) {
  if (!(scale > 0.0f) || !std::isfinite(scale) || !(out_scale > 0.0f)) {
    fail(ErrorCode::kNonPositiveScale, "requantization scale must be finite and positive");
  }
  quant::Int8Tensor t;
  t.shape = {acc.size()};
  t.scale = out_scale;
  t.values.resize(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const float p = static_cast<float>(acc[i]) * scale;
    const double q = quant::round_half_even(p);
    t.values[i] = static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
  }
  return t;
}

const char* to_string(ActivationKind k) noexcept {
  switch (k) {
    case ActivationKind::kSilu: return "silu";
    case ActivationKind::kGeluTanh: return "gelu_tanh";
    case ActivationKind::kIdentity: break;
  }
  return "identity";
}

float activation(float v, ActivationKind kind) noexcept {
  switch (kind) {
    case ActivationKind::kSilu:
      return v * sigmoid_lut(v);
    case ActivationKind::kGeluTanh: {
      const float u = kGeluC * (v + 0.044715f * v * v * v);
      return v * sigmoid_lut(2.0f * u);
    }
    case ActivationKind::kIdentity: break;
  }
  return v;
}

void apply_activation(std::span<float> v, ActivationKind kind) noexcept {
  for (float& x : v) x = activation(x, kind);
}

double activation_reference(double v, ActivationKind kind) noexcept {
  switch (kind) {
    case ActivationKind::kSilu:
      return v / (1.0 + std::exp(-v));
    case ActivationKind::kGeluTanh:
      return 0.5 * v * (1.0 + std::tanh(0.7978845608028654 * (v + 0.044715 * v * v * v)));
    case ActivationKind::kIdentity: break;
  }
  return v;
}

}  // namespace hsa::ppu
