#include <doctest.h>

#include <cmath>
#include <random>

#include "hsa/ppu.hpp"

using namespace hsa;
using namespace hsa::ppu;

namespace {

std::vector<float> randn(std::size_t n, std::mt19937_64& rng, float sd = 1.0f) {
  std::normal_distribution<float> d(0.0f, sd);
  std::vector<float> v(n);
  for (float& x : v) x = d(rng);
  return v;
}

Matrix<float> randm(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  Matrix<float> m(r, c);
  m.data = randn(r * c, rng, 1.0f / std::sqrt(float(c)));
  return m;
}

// max |a - b| / max |b|
double rel_dev(const std::vector<float>& a, const std::vector<float>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::fabs(double(a[i]) - b[i]));
    den = std::max(den, std::fabs(double(b[i])));
  }
  return den == 0.0 ? num : num / den;
}

// Plain double-precision RMSNorm + matmul.
std::vector<double> norm_matmul_double(const std::vector<float>& y, const NormParams& p, const Matrix<float>& w,
                                       double s) {
  double ss = 0.0;
  for (float v : y) ss += double(v) * v;
  const double inv = 1.0 / std::sqrt(ss / double(y.size()) + double(p.epsilon));
  std::vector<double> out(w.rows, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    for (std::size_t j = 0; j < w.cols; ++j) {
      const double n = double(y[j]) * inv * p.gamma[j] + (p.has_beta() ? double(p.beta[j]) : 0.0);
      out[i] += double(w(i, j)) * n;
    }
    out[i] *= s;
  }
  return out;
}

}  // namespace

TEST_CASE("sigma inverse") {
  const std::vector<float> y = {3.0f, 4.0f};
  CHECK(sigma_inverse(y, 0.0f) == doctest::Approx(1.0 / std::sqrt(12.5)));
  const std::vector<float> z(8, 0.0f);
  CHECK(sigma_inverse(z) == doctest::Approx(1.0 / std::sqrt(1e-6)));
}

TEST_CASE("fused norm matches unfused and a double oracle") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t d = 16 + 16 * (rep % 8), n = 8 + rep % 40;
    NormParams p;
    p.gamma = randn(d, rng);
    if (rep % 2) p.beta = randn(d, rng, 0.1f);
    const auto y = randn(d, rng, 3.0f);
    const auto w = randm(n, d, rng);
    const float s = 0.37f;
    NormStageTrace trace;
    const auto fused = fused_rmsnorm_matmul(y, p, w, s, &trace);
    const auto unfused = unfused_rmsnorm_matmul(y, p, w, s);
    CHECK(rel_dev(fused, unfused) <= 1e-5);
    const auto ref = norm_matmul_double(y, p, w, s);
    for (std::size_t i = 0; i < n; ++i) CHECK(fused[i] == doctest::Approx(ref[i]).epsilon(1e-4).scale(1.0));
    CHECK(trace.streamed_elements == d);
  }
}

TEST_CASE("fused norm applies sigma late and buffers no vector") {
  std::mt19937_64 rng(1);
  NormParams p = NormParams::unit(64);
  const auto w = randm(32, 64, rng);
  NormStageTrace t;
  fused_rmsnorm_matmul(randn(64, rng), p, w, 1.0f, &t);
  REQUIRE(t.stages.size() == 5);
  CHECK(t.stages.front() == "stream_gamma_mac");
  CHECK(t.stages[t.sigma_inv_stage] == "output_scale");
  CHECK(t.sigma_inv_stage > 0);
  CHECK(t.peak_buffered_elements == 0);
  CHECK(t.scalar_registers == 2);
}

TEST_CASE("bias folding") {
  std::mt19937_64 rng(2);
  const auto w = randm(5, 6, rng);
  const auto beta = randn(6, rng);
  const auto b = fold_bias(w, beta, 2.0f);
  for (std::size_t i = 0; i < 5; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < 6; ++j) acc += double(w(i, j)) * beta[j];
    CHECK(b[i] == doctest::Approx(2.0 * acc).epsilon(1e-5));
  }
  CHECK(fold_bias(w, {}, 1.0f) == std::vector<float>(5, 0.0f));
}

TEST_CASE("norm shape errors") {
  NormParams p = NormParams::unit(4);
  const std::vector<float> y(5, 1.0f);
  CHECK_THROWS_AS(rmsnorm_reference(y, p), Error);
  p = NormParams::unit(5);
  p.epsilon = 0.0f;
  CHECK_THROWS_AS(rmsnorm_reference(y, p), Error);
}

TEST_CASE("rope theta") {
  CHECK(rope_theta(0, 64) == 1.0);
  CHECK(rope_theta(16, 64) == doctest::Approx(std::pow(10000.0, -0.5)));
}

TEST_CASE("angle memory tracks direct evaluation") {
  for (std::size_t dim : {32u, 64u, 256u}) {
    AngleMemory mem(dim);
    double worst = 0.0;
    for (int step = 1; step <= 4096; ++step) {
      mem.update();
      if (step % 64 != 0 && step != 4096) continue;
      for (std::size_t k = 0; k < mem.pairs(); ++k) {
        const double a = double(step) * rope_theta(k, dim);
        worst = std::max(worst, std::fabs(mem.current(k).sin - std::sin(a)));
        worst = std::max(worst, std::fabs(mem.current(k).cos - std::cos(a)));
      }
    }
    CHECK(mem.position() == 4096);
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("seeded angle memory continues like a stepped one") {
  AngleMemory stepped(64);
  for (int i = 0; i < 300; ++i) stepped.update();
  AngleMemory seeded = AngleMemory::at_position(64, 300);
  CHECK(seeded.position() == 300);
  for (int i = 0; i < 10; ++i) {
    stepped.update();
    seeded.update();
  }
  CHECK(seeded.position() == 310);
  for (std::size_t k = 0; k < 32; ++k) {
    const double a = 310.0 * rope_theta(k, 64);
    CHECK(std::fabs(seeded.current(k).sin - std::sin(a)) <= 1e-4);
    CHECK(std::fabs(seeded.current(k).cos - std::cos(a)) <= 1e-4);
    CHECK(std::fabs(stepped.current(k).sin - seeded.current(k).sin) <= 2e-4);
    CHECK(std::fabs(stepped.current(k).cos - seeded.current(k).cos) <= 2e-4);
  }
}

TEST_CASE("embed rotates pairs and keeps their norms") {
  std::mt19937_64 rng(3);
  AngleMemory mem(64);
  for (int i = 0; i < 777; ++i) mem.update();
  auto x = randn(64, rng);
  auto direct = x;
  const auto before = x;
  mem.embed(x);
  rope_embed_direct(direct, 777);
  for (std::size_t k = 0; k < 32; ++k) {
    const double n0 = std::hypot(double(before[2 * k]), double(before[2 * k + 1]));
    const double n1 = std::hypot(double(x[2 * k]), double(x[2 * k + 1]));
    CHECK(std::fabs(n1 - n0) <= 1e-4 * n0);
    CHECK(x[2 * k] == doctest::Approx(direct[2 * k]).epsilon(1e-3).scale(1.0));
    CHECK(x[2 * k + 1] == doctest::Approx(direct[2 * k + 1]).epsilon(1e-3).scale(1.0));
  }
  std::vector<float> wrong(10);
  CHECK_THROWS_AS(mem.embed(wrong), Error);
  CHECK_THROWS_AS(AngleMemory(7), Error);
}

TEST_CASE("position zero is the identity rotation") {
  std::mt19937_64 rng(4);
  auto x = randn(32, rng);
  const auto y = x;
  AngleMemory(32).embed(x);
  CHECK(x == y);
  rope_embed_direct(x, 0);
  CHECK(x == y);
}

TEST_CASE("requantize rounds half to even and saturates") {
  const std::vector<std::int32_t> acc = {0, 5, 7, -5, 1000, -1000, 254};
  const auto q = requantize(acc, 0.5f, 0.25f);
  CHECK(q.values == std::vector<std::int8_t>{0, 2, 4, -2, 127, -128, 127});
  CHECK(q.scale == 0.25f);
  CHECK_THROWS_AS(requantize(acc, 0.0f), Error);
}

TEST_CASE("table activations stay close to the closed forms") {
  for (auto kind : {ActivationKind::kSilu, ActivationKind::kGeluTanh}) {
    double worst = 0.0;
    for (double v = -20.0; v <= 20.0; v += 0.01) {
      worst = std::max(worst, std::fabs(activation(float(v), kind) - activation_reference(v, kind)));
    }
    CHECK(worst < 2e-3);
  }
  CHECK(activation(3.0f, ActivationKind::kIdentity) == 3.0f);
  CHECK(activation(-20.0f, ActivationKind::kSilu) == 0.0f);
  CHECK(activation(20.0f, ActivationKind::kSilu) == 20.0f);
  std::vector<float> v = {-1.0f, 0.0f, 1.0f};
  apply_activation(v, ActivationKind::kSilu);
  CHECK(v[1] == 0.0f);
  CHECK(v[2] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-3));
}
