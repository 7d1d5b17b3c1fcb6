#pragma once

// Binary containers for quantized tensors. All fields little-endian.
//
// Weight file ("MXW4", version 1), 20-byte header:
//   magic[4] | version u16 | rows u32 | cols u32 | group_size u16 | tensor_scale f32
// followed by ceil(rows*cols/2) mantissa bytes (flat row-major, low nibble =
// even index) and ceil(groups*cols/2) shift-code bytes in (group, column)
// order, same packing.
//
// Activation file ("INT8", version 1):
//   magic[4] | version u16 | ndim u16 | dims u32[ndim] | scale f32 | int8 values

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hsa/quant.hpp"

namespace hsa::io {

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kWeightHeaderBytes = 20;

std::vector<std::uint8_t> encode_weights(const quant::MxInt4Tensor& t);
quant::MxInt4Tensor decode_weights(std::span<const std::uint8_t> bytes);

void export_weights(const quant::MxInt4Tensor& t, const std::filesystem::path& path);
quant::MxInt4Tensor import_weights(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_activations(const quant::Int8Tensor& t);
quant::Int8Tensor decode_activations(std::span<const std::uint8_t> bytes);

void export_activations(const quant::Int8Tensor& t, const std::filesystem::path& path);
quant::Int8Tensor import_activations(const std::filesystem::path& path);

// Size of an exported weight file, computed from the format alone.
std::uint64_t weight_file_bytes(std::uint64_t rows, std::uint64_t cols,
                                std::uint64_t group_size = quant::kDefaultGroupSize);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace hsa::io
