#include "hsa/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

namespace hsa::io {
namespace {

constexpr char kWeightMagic[4] = {'M', 'X', 'W', '4'};
constexpr char kActivationMagic[4] = {'I', 'N', 'T', '8'};

class Writer {
 public:
  void magic(const char (&m)[4]) { bytes_.insert(bytes_.end(), m, m + 4); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void f32(float v) { put(std::bit_cast<std::uint32_t>(v), 4); }
  void raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void expect_magic(const char (&m)[4]) {
    need(4, "magic");
    if (std::memcmp(bytes_.data(), m, 4) != 0) {
      fail(ErrorCode::kBadMagic, "expected '" + std::string(m, 4) + "'");
    }
    pos_ = 4;
  }
  std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(get(2, what)); }
  std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(get(4, what)); }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  std::span<const std::uint8_t> raw(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      fail(ErrorCode::kTruncatedFile, std::string("while reading ") + what);
    }
  }
  std::uint64_t get(int n, const char* what) {
    need(static_cast<std::size_t>(n), what);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_version(std::uint16_t version) {
  if (version != kFormatVersion) {
    fail(ErrorCode::kVersionMismatch, "file version " + std::to_string(version) + ", expected " +
                                          std::to_string(kFormatVersion));
  }
}

}  // namespace

std::vector<std::uint8_t> encode_weights(const quant::MxInt4Tensor& t) {
  t.validate();
  if (t.rows > std::numeric_limits<std::uint32_t>::max() ||
      t.cols > std::numeric_limits<std::uint32_t>::max() ||
      t.group_size > std::numeric_limits<std::uint16_t>::max()) {
    fail(ErrorCode::kShapeMismatch, "tensor dimensions exceed the file header fields");
  }
  Writer w;
  w.magic(kWeightMagic);
  w.u16(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(t.rows));
  w.u32(static_cast<std::uint32_t>(t.cols));
  w.u16(static_cast<std::uint16_t>(t.group_size));
  w.f32(t.tensor_scale);
  w.raw(t.mantissas);
  w.raw(t.shift_codes);
  return w.take();
}

quant::MxInt4Tensor decode_weights(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kWeightMagic);
  check_version(r.u16("version"));
  quant::MxInt4Tensor t;
  t.rows = r.u32("rows");
  t.cols = r.u32("cols");
  t.group_size = r.u16("group_size");
  t.tensor_scale = r.f32("tensor_scale");
  if (t.group_size == 0) fail(ErrorCode::kShapeMismatch, "group_size is zero");
  const auto m = r.raw(ceil_div(t.rows * t.cols, 2), "mantissas");
  t.mantissas.assign(m.begin(), m.end());
  const auto c = r.raw(ceil_div(t.groups() * t.cols, 2), "shift codes");
  t.shift_codes.assign(c.begin(), c.end());
  if (r.remaining() != 0) {
    fail(ErrorCode::kShapeMismatch, std::to_string(r.remaining()) + " trailing bytes");
  }
  t.validate();
  return t;
}

std::vector<std::uint8_t> encode_activations(const quant::Int8Tensor& t) {
  if (t.shape.size() > std::numeric_limits<std::uint16_t>::max()) {
    fail(ErrorCode::kShapeMismatch, "too many dimensions");
  }
  std::size_t n = 1;
  for (auto d : t.shape) n *= d;
  if (n != t.values.size()) fail(ErrorCode::kShapeMismatch, "shape does not match values");
  Writer w;
  w.magic(kActivationMagic);
  w.u16(kFormatVersion);
  w.u16(static_cast<std::uint16_t>(t.shape.size()));
  for (auto d : t.shape) w.u32(static_cast<std::uint32_t>(d));
  w.f32(t.scale);
  w.raw({reinterpret_cast<const std::uint8_t*>(t.values.data()), t.values.size()});
  return w.take();
}

quant::Int8Tensor decode_activations(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.expect_magic(kActivationMagic);
  check_version(r.u16("version"));
  quant::Int8Tensor t;
  const std::uint16_t ndim = r.u16("ndim");
  std::size_t n = 1;
  for (std::uint16_t i = 0; i < ndim; ++i) {
    t.shape.push_back(r.u32("dims"));
    n *= t.shape.back();
  }
  t.scale = r.f32("scale");
  const auto v = r.raw(n, "values");
  t.values.resize(n);
  std::memcpy(t.values.data(), v.data(), n);
  if (r.remaining() != 0) {
    fail(ErrorCode::kShapeMismatch, std::to_string(r.remaining()) + " trailing bytes");
  }
  return t;
}

std::uint64_t weight_file_bytes(std::uint64_t rows, std::uint64_t cols, std::uint64_t group_size) {
  return kWeightHeaderBytes +
         quant::weight_payload_bytes(rows, cols, quant::WeightFormat::kMxInt4, group_size);
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) fail(ErrorCode::kIoError, "read failed on " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoError, "write failed on " + path.string());
}

void export_weights(const quant::MxInt4Tensor& t, const std::filesystem::path& path) {
  write_file(path, encode_weights(t));
}

quant::MxInt4Tensor import_weights(const std::filesystem::path& path) {
  return decode_weights(read_file(path));
}

void export_activations(const quant::Int8Tensor& t, const std::filesystem::path& path) {
  write_file(path, encode_activations(t));
}

quant::Int8Tensor import_activations(const std::filesystem::path& path) {
  return decode_activations(read_file(path));
}

}  // namespace hsa::io
