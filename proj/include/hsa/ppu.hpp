#pragma once

// Post-processing unit: RMSNorm fused into the next matmul, RoPE with an
// angle memory advanced by angle-sum identities, requantization and
// elementwise activations. Everything here runs in float32.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hsa/common.hpp"
#include "hsa/quant.hpp"

namespace hsa::ppu {

inline constexpr float kDefaultEpsilon = 1e-6f;

struct NormParams {
  std::vector<float> gamma;
  std::vector<float> beta;  // empty means zero
  float epsilon = kDefaultEpsilon;

  static NormParams unit(std::size_t dim);
  void validate(std::size_t dim) const;  // ShapeMismatch / ConfigError
  bool has_beta() const noexcept { return !beta.empty(); }
};

// 1 / sqrt(mean(y^2) + eps). All-zero y gives 1/sqrt(eps).
float sigma_inverse(std::span<const float> y, float epsilon = kDefaultEpsilon);

// y * gamma elementwise.
std::vector<float> apply_gamma(std::span<const float> y, std::span<const float> gamma);

// Plain RMSNorm: y * sigma_inv * gamma + beta.
std::vector<float> rmsnorm_reference(std::span<const float> y, const NormParams& norm);

// w: [N x D]. B = W * beta * s_next, computed once when the model is loaded.
std::vector<float> fold_bias(const Matrix<float>& w, std::span<const float> beta, float s_next);

struct FusedLayerScale {
  float base_scale = 1.0f;
  float sigma_inv = 1.0f;
  std::vector<float> folded_bias;
  float effective_scale() const noexcept { return sigma_inv * base_scale; }
};

// Record of how the fused path consumed its operands, for structural checks.
struct NormStageTrace {
  std::vector<std::string> stages;      // in execution order
  std::size_t sigma_inv_stage = 0;      // index of the stage that first reads sigma_inv
  std::size_t streamed_elements = 0;    // y*gamma values pushed straight into the accumulators
  std::size_t peak_buffered_elements = 0;  // normalized-vector elements held at once
  std::size_t scalar_registers = 0;     // running sum of squares, sigma_inv
};

// out = W * RMSNorm(y) * s_next, computed without materializing RMSNorm(y):
// y*gamma streams into the accumulators while the squares are summed, and
// sigma_inv is applied as a late output scale followed by the folded bias.
std::vector<float> fused_rmsnorm_matmul(std::span<const float> y, const NormParams& norm,
                                        const Matrix<float>& w_next, float s_next,
                                        NormStageTrace* trace = nullptr);
// Same, but with the folded bias already computed.
std::vector<float> fused_rmsnorm_matmul(std::span<const float> y, const NormParams& norm,
                                        const Matrix<float>& w_next, float s_next,
                                        std::span<const float> folded_bias, NormStageTrace* trace);

// Unfused reference: normalize, buffer, then multiply.
std::vector<float> unfused_rmsnorm_matmul(std::span<const float> y, const NormParams& norm,
                                          const Matrix<float>& w_next, float s_next);

// theta for 0-based pair index k: base^(-2k/d).
double rope_theta(std::size_t k, std::size_t head_dim, double base = 10000.0);

struct SinCos {
  float sin = 0.0f;
  float cos = 1.0f;
};

class AngleMemory {
 public:
  static constexpr int kDefaultRenormInterval = 256;

  // Token position 0: every pair at (0, 1).
  AngleMemory(std::size_t head_dim, double base = 10000.0, int renorm_interval = kDefaultRenormInterval);
  // Seeds position m directly (used to hand over from prefill to decode).
  static AngleMemory at_position(std::size_t head_dim, std::uint64_t m, double base = 10000.0,
                                 int renorm_interval = kDefaultRenormInterval);

  std::size_t head_dim() const noexcept { return head_dim_; }
  std::size_t pairs() const noexcept { return current_.size(); }
  std::uint64_t position() const noexcept { return position_; }
  const SinCos& current(std::size_t k) const { return current_.at(k); }
  const SinCos& step(std::size_t k) const { return step_.at(k); }
  double theta(std::size_t k) const { return rope_theta(k, head_dim_, base_); }

  // Update mode: m -> m + 1 with the angle-sum identities.
  void update();

  // Embed mode on one head vector (adjacent pairs 2k, 2k+1), in place.
  void embed(std::span<float> x) const;

 private:
  std::size_t head_dim_;
  double base_;
  int renorm_interval_;
  std::uint64_t position_ = 0;
  std::vector<SinCos> step_;
  std::vector<SinCos> current_;
};

// Direct evaluation for position m (prefill path).
void rope_embed_direct(std::span<float> x, std::uint64_t m, double base = 10000.0);

// v = clamp(round_half_even(acc * scale), -128, 127), tagged with out_scale.
quant::Int8Tensor requantize(std::span<const std::int32_t> acc, float scale, float out_scale = 1.0f);

enum class ActivationKind { kIdentity, kSilu, kGeluTanh };

const char* to_string(ActivationKind k) noexcept;

// Sigmoid-table implementations used by the PPU.
float activation(float v, ActivationKind kind) noexcept;
void apply_activation(std::span<float> v, ActivationKind kind) noexcept;
// Double-precision closed forms.
double activation_reference(double v, ActivationKind kind) noexcept;

}  // namespace hsa::ppu
