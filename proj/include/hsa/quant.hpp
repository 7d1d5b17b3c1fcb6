#pragma once

// MXINT4 weight quantization and INT8 activation quantization.
//
// MXINT4 layout used throughout the simulator:
//   * groups are `group_size` consecutive output channels (rows); every
//     (group, input column) pair owns one 4-bit shift code;
//   * shift S = clamp(floor(log2(max|w|)), -9, +5), stored code = S + 9;
//   * mantissa m = clamp(round_half_even(w / 2^(S-2)), -8, 7);
//   * value = m * 2^code * tensor_scale, tensor_scale = global * 2^-11.
//
// Folding 2^-2 (mantissa range) and 2^-9 (code offset) into tensor_scale keeps
// every shift on the integer datapath nonnegative.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hsa/common.hpp"

namespace hsa::quant {

inline constexpr int kMinShift = -9;
inline constexpr int kMaxShift = 5;
inline constexpr int kCodeOffset = -kMinShift;
inline constexpr int kMantissaExponentOffset = 2;
inline constexpr int kMaxCode = kMaxShift + kCodeOffset;  // 14; code 15 is never produced
inline constexpr int kMinMantissa = -8;
inline constexpr int kMaxMantissa = 7;
inline constexpr std::size_t kDefaultGroupSize = 16;

enum class WeightFormat { kInt8, kMxInt4 };

const char* to_string(WeightFormat f) noexcept;
WeightFormat weight_format_from_string(std::string_view s);

// Round to nearest, ties to even. Independent of the floating-point
// environment's current rounding mode.
double round_half_even(double v) noexcept;

// clamp(floor(log2(group_max)), -9, +5); an all-zero group maps to -9.
int compute_group_shift(double group_max) noexcept;

struct MxInt4Tensor {
  std::size_t rows = 0;  // output channels
  std::size_t cols = 0;  // input dimension
  std::size_t group_size = kDefaultGroupSize;
  // Two's-complement nibbles, flat row-major, low nibble holds the even index.
  std::vector<std::uint8_t> mantissas;
  // Unsigned nibbles in (group, column) row-major order, same packing.
  std::vector<std::uint8_t> shift_codes;
  float tensor_scale = 0.0f;

  static MxInt4Tensor zeros(std::size_t rows, std::size_t cols,
                            std::size_t group_size = kDefaultGroupSize,
                            float tensor_scale = 0x1p-11f);

  std::size_t groups() const noexcept { return rows == 0 ? 0 : ceil_div(rows, group_size); }
  std::size_t padded_rows() const noexcept { return groups() * group_size; }
  std::size_t element_count() const noexcept { return rows * cols; }

  int mantissa(std::size_t i, std::size_t j) const;
  void set_mantissa(std::size_t i, std::size_t j, int m);
  int code(std::size_t group, std::size_t j) const;
  void set_code(std::size_t group, std::size_t j, int code);

  // Packed payload (mantissa bytes + code bytes), no file header.
  std::size_t payload_bytes() const noexcept { return mantissas.size() + shift_codes.size(); }

  // Checks every structural invariant; throws InvalidCode or ShapeMismatch.
  void validate() const;

  bool operator==(const MxInt4Tensor&) const = default;
};

enum class ScalePolicy {
  kCaller,         // global scale = QuantizeOptions::global_scale (default 1)
  kTensorMaxPow2,  // power-of-two global scale putting the tensor max at shift +5
};

struct QuantizeOptions {
  std::size_t group_size = kDefaultGroupSize;
  ScalePolicy policy = ScalePolicy::kCaller;
  float global_scale = 1.0f;
};

// weights is [C_out x K]. Throws NonFiniteWeight / ShapeMismatch.
MxInt4Tensor quantize_mxint4(const Matrix<float>& weights, const QuantizeOptions& options = {});

// Exact reference semantics: m * 2^code * tensor_scale evaluated in double.
Matrix<double> dequantize_oracle(const MxInt4Tensor& t);

// Shift S_g actually used by group g at column j (code - 9).
inline int group_shift(const MxInt4Tensor& t, std::size_t group, std::size_t j) {
  return t.code(group, j) - kCodeOffset;
}

struct Int8Tensor {
  std::vector<std::size_t> shape;
  std::vector<std::int8_t> values;
  float scale = 1.0f;

  std::size_t size() const noexcept { return values.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }
  std::int8_t at(std::size_t i, std::size_t j) const { return values[i * shape[1] + j]; }

  bool operator==(const Int8Tensor&) const = default;
};

// v = clamp(round_half_even(x / scale), -128, 127). Throws NonPositiveScale.
Int8Tensor quantize_activation_int8(std::span<const float> x, float scale,
                                    std::vector<std::size_t> shape = {});

// Symmetric per-tensor INT8 weights (prefill format); scale = max|w| / 127.
Int8Tensor quantize_weights_int8(const Matrix<float>& weights);

std::vector<float> dequantize(const Int8Tensor& t);

// Storage of one weight matrix in the given decode format, header excluded.
std::uint64_t weight_payload_bytes(std::uint64_t rows, std::uint64_t cols, WeightFormat format,
                                   std::uint64_t group_size = kDefaultGroupSize);

}  // namespace hsa::quant
