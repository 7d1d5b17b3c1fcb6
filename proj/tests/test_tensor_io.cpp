#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "hsa/tensor_io.hpp"
#include "oracles.hpp"

using namespace hsa;

namespace {

quant::MxInt4Tensor sample(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 0.3f);
  Matrix<float> w(r, c);
  for (float& x : w.data) x = d(rng);
  return quant::quantize_mxint4(w);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kIoError;
}

std::filesystem::path temp(const char* name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST_CASE("weight file layout is the documented little-endian header") {
  const auto t = sample(33, 5, 1);
  const auto b = io::encode_weights(t);
  REQUIRE(b.size() == io::weight_file_bytes(33, 5));
  CHECK(std::string(b.begin(), b.begin() + 4) == "MXW4");
  CHECK((b[4] | b[5] << 8) == 1);
  CHECK((b[6] | b[7] << 8 | b[8] << 16 | b[9] << 24) == 33);
  CHECK((b[10] | b[11] << 8 | b[12] << 16 | b[13] << 24) == 5);
  CHECK((b[14] | b[15] << 8) == 16);
  std::uint32_t bits = b[16] | b[17] << 8 | b[18] << 16 | std::uint32_t(b[19]) << 24;
  CHECK(std::bit_cast<float>(bits) == t.tensor_scale);
  // Element (0,1) is the high nibble of the first mantissa byte.
  CHECK(oracle::signed_nibble({b.begin() + 20, b.end()}, 1) == t.mantissa(0, 1));
  CHECK(b.size() == 20 + (33 * 5 + 1) / 2 + (3 * 5 + 1) / 2);
}

TEST_CASE("export then import is the identity") {
  for (auto [r, c] : {std::pair<std::size_t, std::size_t>{16, 16}, {1, 1}, {100, 37}, {256, 256}}) {
    const auto t = sample(r, c, r * 31 + c);
    CHECK(io::decode_weights(io::encode_weights(t)) == t);
  }
  const auto t = sample(48, 64, 2);
  const auto path = temp("hsasim_test_weights.mxw4");
  io::export_weights(t, path);
  CHECK(std::filesystem::file_size(path) == io::weight_file_bytes(48, 64));
  CHECK(io::import_weights(path) == t);
  std::filesystem::remove(path);
}

TEST_CASE("footprint is 0.53125 bytes per weight plus the header") {
  CHECK(io::weight_file_bytes(4096, 4096) == 20 + 4096 * 4096 / 2 + 4096 * 4096 / 32);
  const std::uint64_t n = 1'300'000'000;
  const double per = double(io::weight_file_bytes(16, n / 16) - io::kWeightHeaderBytes) / double(n);
  CHECK(per == 0.53125);
}

TEST_CASE("corrupt weight files are rejected") {
  const auto good = io::encode_weights(sample(32, 8, 3));
  auto bad = good;
  bad[0] = 'X';
  CHECK(code_of([&] { io::decode_weights(bad); }) == ErrorCode::kBadMagic);
  bad = good;
  bad[4] = 2;
  CHECK(code_of([&] { io::decode_weights(bad); }) == ErrorCode::kVersionMismatch);
  bad.assign(good.begin(), good.end() - 1);
  CHECK(code_of([&] { io::decode_weights(bad); }) == ErrorCode::kTruncatedFile);
  bad.assign(good.begin(), good.begin() + 10);
  CHECK(code_of([&] { io::decode_weights(bad); }) == ErrorCode::kTruncatedFile);
  bad = good;
  bad.back() |= 0xF0;  // a code nibble of 15
  CHECK(code_of([&] { io::decode_weights(bad); }) == ErrorCode::kInvalidCode);
  bad = good;
  bad.push_back(0);
  CHECK(code_of([&] { io::decode_weights(bad); }) == ErrorCode::kShapeMismatch);
  CHECK(code_of([&] { io::import_weights(temp("hsasim_does_not_exist.mxw4")); }) == ErrorCode::kIoError);
}

TEST_CASE("activation files round trip") {
  quant::Int8Tensor t;
  t.shape = {3, 4};
  for (int i = 0; i < 12; ++i) t.values.push_back(static_cast<std::int8_t>(i * 21 - 128));
  t.scale = 0.125f;
  const auto b = io::encode_activations(t);
  CHECK(std::string(b.begin(), b.begin() + 4) == "INT8");
  CHECK(b.size() == 4 + 2 + 2 + 2 * 4 + 4 + 12);
  CHECK(io::decode_activations(b) == t);
  auto bad = b;
  bad[1] = 'Z';
  CHECK(code_of([&] { io::decode_activations(bad); }) == ErrorCode::kBadMagic);
  bad.assign(b.begin(), b.end() - 3);
  CHECK(code_of([&] { io::decode_activations(bad); }) == ErrorCode::kTruncatedFile);

  const auto path = temp("hsasim_test_act.int8");
  io::export_activations(t, path);
  CHECK(io::import_activations(path) == t);
  std::filesystem::remove(path);
}
