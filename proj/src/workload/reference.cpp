#include <algorithm>
#include <cmath>
#include <limits>

#include "hsa/workload.hpp"
#include "internal.hpp"

namespace hsa::workload {

using detail::layer_op;
using detail::matvec;
using detail::track;

std::uint64_t RetentionState::bytes() const noexcept {
  std::uint64_t n = 0;
  for (const auto& h : heads) n += h.size() * sizeof(float);
  return n;
}

std::uint64_t SequenceState::bytes() const noexcept {
  std::uint64_t n = 0;
  for (const auto& l : layers) n += l.bytes();
  return n;
}

SequenceState empty_state(const ModelConfig& cfg) {
  SequenceState s;
  s.layers.resize(cfg.num_layers);
  for (auto& l : s.layers) l.heads.assign(cfg.num_heads, Matrix<float>(cfg.head_dim, cfg.head_value_dim()));
  return s;
}

namespace {

void check_token(const Model& model, std::uint32_t t) {
  if (t >= model.graph.model.vocab_size) {
    fail(ErrorCode::kShapeMismatch, "token " + std::to_string(t) + " outside the vocabulary");
  }
}

std::vector<float> embed_row(const Model& model, std::uint32_t t) {
  check_token(model, t);
  auto r = model.embedding.row(t);
  return {r.begin(), r.end()};
}

void rope_heads(std::span<float> v, const ModelConfig& mc, std::uint64_t pos) {
  for (std::uint64_t h = 0; h < mc.num_heads; ++h) {
    ppu::rope_embed_direct(v.subspan(h * mc.head_dim, mc.head_dim), pos, mc.rope_base);
  }
}

void scale_keys(std::span<float> k, const ModelConfig& mc) {
  const float s = 1.0f / std::sqrt(static_cast<float>(mc.head_dim));
  for (float& x : k) x *= s;
}

void activate(std::span<float> v, ppu::ActivationKind kind) {
  for (float& x : v) x = static_cast<float>(ppu::activation_reference(x, kind));
}

// Everything after retention for one position; x is updated in place.
void finish_layer(const Model& model, std::uint64_t l, std::span<float> x, std::span<const float> g,
                  std::span<const float> o, ActivationStats* stats) {
  std::vector<float> gated(o.size());
  for (std::size_t i = 0; i < o.size(); ++i) {
    gated[i] = static_cast<float>(ppu::activation_reference(g[i], ppu::ActivationKind::kSilu)) * o[i];
  }
  track(stats, layer_op(l, "o_proj"), gated);
  const auto attn = matvec(model.matrix(layer_op(l, "o_proj")), gated);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += attn[i];

  const auto& fn = model.norm(layer_op(l, "ffn_norm"));
  track(stats, layer_op(l, "ffn_norm"), detail::times_gamma(x, fn));
  const auto h2 = ppu::rmsnorm_reference(x, fn);
  auto up = matvec(model.matrix(layer_op(l, "ffn_up")), h2);
  activate(up, ppu::ActivationKind::kGeluTanh);
  track(stats, layer_op(l, "ffn_down"), up);
  const auto down = matvec(model.matrix(layer_op(l, "ffn_down")), up);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += down[i];
}

std::vector<float> logits_for(const Model& model, std::span<const float> x, ActivationStats* stats) {
  const auto& fn = model.norm("final_norm");
  track(stats, "final_norm", detail::times_gamma(x, fn));
  return matvec(model.embedding, ppu::rmsnorm_reference(x, fn));
}

}  // namespace

std::vector<std::vector<float>> reference_prefill(const Model& model, std::span<const std::uint32_t> tokens,
                                                  SequenceState* state, ActivationStats* stats) {
  const ModelConfig& mc = model.graph.model;
  const std::size_t M = tokens.size();
  if (M == 0) fail(ErrorCode::kShapeMismatch, "empty prompt");
  const std::size_t dk = mc.head_dim;
  const std::size_t dv = mc.head_value_dim();

  std::vector<std::vector<float>> x(M);
  for (std::size_t n = 0; n < M; ++n) x[n] = embed_row(model, tokens[n]);

  SequenceState st = empty_state(mc);
  for (std::uint64_t l = 0; l < mc.num_layers; ++l) {
    const auto& an = model.norm(layer_op(l, "attn_norm"));
    Matrix<float> q(M, mc.hidden_dim), k(M, mc.hidden_dim), v(M, mc.value_dim());
    std::vector<std::vector<float>> g(M);
    for (std::size_t n = 0; n < M; ++n) {
      track(stats, layer_op(l, "attn_norm"), detail::times_gamma(x[n], an));
      const auto h = ppu::rmsnorm_reference(x[n], an);
      auto qn = matvec(model.matrix(layer_op(l, "q_proj")), h);
      auto kn = matvec(model.matrix(layer_op(l, "k_proj")), h);
      const auto vn = matvec(model.matrix(layer_op(l, "v_proj")), h);
      g[n] = matvec(model.matrix(layer_op(l, "g_proj")), h);
      rope_heads(qn, mc, n);
      rope_heads(kn, mc, n);
      scale_keys(kn, mc);
      std::copy(qn.begin(), qn.end(), q.row(n).begin());
      std::copy(kn.begin(), kn.end(), k.row(n).begin());
      std::copy(vn.begin(), vn.end(), v.row(n).begin());
    }
    Matrix<float> o(M, mc.value_dim());
    for (std::uint64_t h = 0; h < mc.num_heads; ++h) {
      Matrix<float> qh(M, dk), kh(M, dk), vh(M, dv);
      for (std::size_t n = 0; n < M; ++n) {
        for (std::size_t a = 0; a < dk; ++a) {
          qh(n, a) = q(n, h * dk + a);
          kh(n, a) = k(n, h * dk + a);
        }
        for (std::size_t b = 0; b < dv; ++b) vh(n, b) = v(n, h * dv + b);
      }
      const Matrix<float> oh = detail::retention_parallel(qh, kh, vh, model.decay(h), st.layers[l].heads[h]);
      for (std::size_t n = 0; n < M; ++n)
        for (std::size_t b = 0; b < dv; ++b) o(n, h * dv + b) = oh(n, b);
    }
    for (std::size_t n = 0; n < M; ++n) finish_layer(model, l, x[n], g[n], o.row(n), stats);
  }
  st.position = M;

  std::vector<std::vector<float>> logits(M);
  for (std::size_t n = 0; n < M; ++n) logits[n] = logits_for(model, x[n], stats);
  if (state) *state = std::move(st);
  return logits;
}

std::vector<float> reference_decode_step(const Model& model, SequenceState& state, std::uint32_t token,
                                         ActivationStats* stats) {
  const ModelConfig& mc = model.graph.model;
  if (state.layers.size() != mc.num_layers) fail(ErrorCode::kShapeMismatch, "state does not match the model");
  const std::size_t dk = mc.head_dim;
  const std::size_t dv = mc.head_value_dim();
  std::vector<float> x = embed_row(model, token);
  for (std::uint64_t l = 0; l < mc.num_layers; ++l) {
    const auto& an = model.norm(layer_op(l, "attn_norm"));
    track(stats, layer_op(l, "attn_norm"), detail::times_gamma(x, an));
    const auto h = ppu::rmsnorm_reference(x, an);
    auto q = matvec(model.matrix(layer_op(l, "q_proj")), h);
    auto k = matvec(model.matrix(layer_op(l, "k_proj")), h);
    const auto v = matvec(model.matrix(layer_op(l, "v_proj")), h);
    const auto g = matvec(model.matrix(layer_op(l, "g_proj")), h);
    rope_heads(q, mc, state.position);
    rope_heads(k, mc, state.position);
    scale_keys(k, mc);
    std::vector<float> o(mc.value_dim());
    for (std::uint64_t hd = 0; hd < mc.num_heads; ++hd) {
      detail::retention_step(state.layers[l].heads[hd], model.decay(hd),
                             std::span<const float>(q).subspan(hd * dk, dk),
                             std::span<const float>(k).subspan(hd * dk, dk),
                             std::span<const float>(v).subspan(hd * dv, dv),
                             std::span<float>(o).subspan(hd * dv, dv));
    }
    finish_layer(model, l, x, g, o, stats);
  }
  ++state.position;
  return logits_for(model, x, stats);
}

double sqnr_db(std::span<const float> ref, std::span<const float> test) {
  if (ref.size() != test.size()) fail(ErrorCode::kShapeMismatch, "SQNR operands differ in length");
  double sig = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    sig += static_cast<double>(ref[i]) * ref[i];
    const double e = static_cast<double>(ref[i]) - test[i];
    noise += e * e;
  }
  if (noise == 0.0) return std::numeric_limits<double>::infinity();
  if (sig == 0.0) return -std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(sig / noise);
}

}  // namespace hsa::workload
