#include "hsa/quant.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace hsa::quant {
namespace {

std::uint8_t get_nibble(const std::vector<std::uint8_t>& packed, std::size_t index) {
  const std::uint8_t byte = packed[index >> 1];
  return (index & 1U) ? static_cast<std::uint8_t>(byte >> 4) : static_cast<std::uint8_t>(byte & 0x0F);
}

void put_nibble(std::vector<std::uint8_t>& packed, std::size_t index, std::uint8_t nibble) {
  std::uint8_t& byte = packed[index >> 1];
  if (index & 1U) {
    byte = static_cast<std::uint8_t>((byte & 0x0F) | ((nibble & 0x0F) << 4));
  } else {
    byte = static_cast<std::uint8_t>((byte & 0xF0) | (nibble & 0x0F));
  }
}

void check_finite(const Matrix<float>& w) {
  for (std::size_t e = 0; e < w.data.size(); ++e) {
    if (!std::isfinite(w.data[e])) {
      fail(ErrorCode::kNonFiniteWeight,
           "element " + std::to_string(e / w.cols) + "," + std::to_string(e % w.cols));
    }
  }
}

}  // namespace

const char* to_string(WeightFormat f) noexcept {
  return f == WeightFormat::kInt8 ? "int8" : "mxint4";
}

WeightFormat weight_format_from_string(std::string_view s) {
  if (s == "int8" || s == "INT8") return WeightFormat::kInt8;
  if (s == "mxint4" || s == "MXINT4") return WeightFormat::kMxInt4;
  fail(ErrorCode::kConfigError, "unknown weight precision '" + std::string(s) + "'");
}

double round_half_even(double v) noexcept {
  const double lower = std::floor(v);
  const double diff = v - lower;
  if (diff > 0.5) return lower + 1.0;
  if (diff < 0.5) return lower;
  return std::fmod(lower, 2.0) == 0.0 ? lower : lower + 1.0;
}

int compute_group_shift(double group_max) noexcept {
  if (!(group_max > 0.0)) return kMinShift;
  // ilogb is exact floor(log2) for every finite positive double.
  const int raw = std::ilogb(group_max);
  return std::clamp(raw, kMinShift, kMaxShift);
}

MxInt4Tensor MxInt4Tensor::zeros(std::size_t rows, std::size_t cols, std::size_t group_size,
                                 float tensor_scale) {
  if (group_size == 0) fail(ErrorCode::kShapeMismatch, "group_size must be positive");
  MxInt4Tensor t;
  t.rows = rows;
  t.cols = cols;
  t.group_size = group_size;
  t.tensor_scale = tensor_scale;
  t.mantissas.assign(ceil_div(rows * cols, 2), 0);
  t.shift_codes.assign(ceil_div(t.groups() * cols, 2), 0);
  return t;
}

int MxInt4Tensor::mantissa(std::size_t i, std::size_t j) const {
  const int nibble = get_nibble(mantissas, i * cols + j);
  return (nibble ^ 0x8) - 0x8;
}

void MxInt4Tensor::set_mantissa(std::size_t i, std::size_t j, int m) {
  put_nibble(mantissas, i * cols + j, static_cast<std::uint8_t>(m & 0x0F));
}

int MxInt4Tensor::code(std::size_t group, std::size_t j) const {
  return get_nibble(shift_codes, group * cols + j);
}

void MxInt4Tensor::set_code(std::size_t group, std::size_t j, int code) {
  put_nibble(shift_codes, group * cols + j, static_cast<std::uint8_t>(code & 0x0F));
}

void MxInt4Tensor::validate() const {
  if (group_size == 0) fail(ErrorCode::kShapeMismatch, "group_size must be positive");
  if (mantissas.size() != ceil_div(rows * cols, 2) ||
      shift_codes.size() != ceil_div(groups() * cols, 2)) {
    fail(ErrorCode::kShapeMismatch, "packed storage does not match " + std::to_string(rows) +
                                        "x" + std::to_string(cols));
  }
  for (std::size_t g = 0; g < groups(); ++g) {
    for (std::size_t j = 0; j < cols; ++j) {
      if (code(g, j) > kMaxCode) {
        fail(ErrorCode::kInvalidCode, "shift code 15 at group " + std::to_string(g) + ", column " +
                                          std::to_string(j));
      }
    }
  }
  if (!std::isfinite(tensor_scale)) fail(ErrorCode::kNonFiniteWeight, "tensor_scale");
}

MxInt4Tensor quantize_mxint4(const Matrix<float>& weights, const QuantizeOptions& options) {
  if (options.group_size == 0) fail(ErrorCode::kShapeMismatch, "group_size must be positive");
  if (weights.data.size() != weights.rows * weights.cols) {
    fail(ErrorCode::kShapeMismatch, "matrix storage does not match its shape");
  }
  check_finite(weights);

  double global = 1.0;
  if (options.policy == ScalePolicy::kCaller) {
    if (!(options.global_scale > 0.0f) || !std::isfinite(options.global_scale)) {
      fail(ErrorCode::kNonPositiveScale, "global scale must be finite and positive");
    }
    global = options.global_scale;
  } else {
    float tensor_max = 0.0f;
    for (float w : weights.data) tensor_max = std::max(tensor_max, std::fabs(w));
    if (tensor_max > 0.0f) global = std::ldexp(1.0, std::ilogb(tensor_max) - kMaxShift);
  }

  MxInt4Tensor t = MxInt4Tensor::zeros(weights.rows, weights.cols, options.group_size,
                                       static_cast<float>(global * 0x1p-11));
  const std::size_t gs = options.group_size;
  for (std::size_t g = 0; g < t.groups(); ++g) {
    const std::size_t row_begin = g * gs;
    const std::size_t row_end = std::min(weights.rows, row_begin + gs);
    for (std::size_t j = 0; j < weights.cols; ++j) {
      double group_max = 0.0;
      for (std::size_t i = row_begin; i < row_end; ++i) {
        group_max = std::max(group_max, std::fabs(weights(i, j) / global));
      }
      const int shift = compute_group_shift(group_max);
      t.set_code(g, j, shift + kCodeOffset);
      for (std::size_t i = row_begin; i < row_end; ++i) {
        const double scaled = std::ldexp(weights(i, j) / global, kMantissaExponentOffset - shift);
        const double m = std::clamp(round_half_even(scaled), double(kMinMantissa), double(kMaxMantissa));
        t.set_mantissa(i, j, static_cast<int>(m));
      }
    }
  }
  return t;
}

Matrix<double> dequantize_oracle(const MxInt4Tensor& t) {
  Matrix<double> out(t.rows, t.cols);
  for (std::size_t i = 0; i < t.rows; ++i) {
    const std::size_t g = i / t.group_size;
    for (std::size_t j = 0; j < t.cols; ++j) {
      out(i, j) = std::ldexp(static_cast<double>(t.mantissa(i, j)) * t.tensor_scale, t.code(g, j));
    }
  }
  return out;
}

Int8Tensor quantize_activation_int8(std::span<const float> x, float scale,
                                    std::vector<std::size_t> shape) {
  if (!(scale > 0.0f) || !std::isfinite(scale)) {
    fail(ErrorCode::kNonPositiveScale, "activation scale must be finite and positive");
  }
  if (shape.empty()) shape = {x.size()};
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                        std::multiplies<>());
  if (n != x.size()) fail(ErrorCode::kShapeMismatch, "shape does not match element count");

  Int8Tensor t;
  t.shape = std::move(shape);
  t.scale = scale;
  t.values.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) fail(ErrorCode::kNonFiniteWeight, "non-finite activation");
    const double q = round_half_even(static_cast<double>(x[i]) / scale);
    t.values[i] = static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
  }
  return t;
}

Int8Tensor quantize_weights_int8(const Matrix<float>& weights) {
  check_finite(weights);
  float max_abs = 0.0f;
  for (float w : weights.data) max_abs = std::max(max_abs, std::fabs(w));
  Int8Tensor t;
  t.shape = {weights.rows, weights.cols};
  t.scale = max_abs > 0.0f ? max_abs / 127.0f : 1.0f;
  t.values.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double q = round_half_even(static_cast<double>(weights.data[i]) / t.scale);
    t.values[i] = static_cast<std::int8_t>(std::clamp(q, -127.0, 127.0));
  }
  return t;
}

std::vector<float> dequantize(const Int8Tensor& t) {
  std::vector<float> out(t.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(t.values[i]) * t.scale;
  return out;
}

std::uint64_t weight_payload_bytes(std::uint64_t rows, std::uint64_t cols, WeightFormat format,
                                   std::uint64_t group_size) {
  if (format == WeightFormat::kInt8) return rows * cols;
  const std::uint64_t groups = ceil_div(rows, group_size);
  return ceil_div(rows * cols, 2) + ceil_div(groups * cols, 2);
}

}  // namespace hsa::quant
