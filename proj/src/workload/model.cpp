#include <cmath>
#include <numbers>
#include <random>

#include "hsa/workload.hpp"

namespace hsa::workload {
namespace {

// Box-Muller over mt19937_64, whose output sequence is fixed by the standard.
// std::normal_distribution is not, and weights must match across toolchains.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  float operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(rng_() >> 11) + 1.0) * 0x1p-53;
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = static_cast<float>(r * std::sin(2.0 * std::numbers::pi * u2));
    has_spare_ = true;
    return static_cast<float>(r * std::cos(2.0 * std::numbers::pi * u2));
  }

 private:
  std::mt19937_64 rng_;
  float spare_ = 0.0f;
  bool has_spare_ = false;
};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Each tensor gets its own stream so adding an op never reshuffles the others.
Gaussian stream_for(std::uint64_t seed, std::string_view name) {
  return Gaussian(seed ^ fnv1a(name));
}

Matrix<float> random_matrix(std::uint64_t rows, std::uint64_t cols, float stddev, std::uint64_t seed,
                            std::string_view name) {
  Matrix<float> m(rows, cols);
  Gaussian g = stream_for(seed, name);
  for (float& v : m.data) v = stddev * g();
  return m;
}

std::string layer_name(std::uint64_t layer, std::string_view op) {
  return "l" + std::to_string(layer) + "." + std::string(op);
}

}  // namespace

void ModelConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::kConfigError, m); };
  if (num_layers == 0 || hidden_dim == 0 || ffn_dim == 0 || num_heads == 0 || head_dim == 0 ||
      vocab_size == 0 || value_factor == 0) {
    bad("model dimensions must be positive");
  }
  if (hidden_dim != num_heads * head_dim) bad("hidden_dim must equal num_heads * head_dim");
  if (head_dim % 2 != 0) bad("head_dim must be even for RoPE pairs");
  if (!(rope_base > 1.0)) bad("rope_base must exceed 1");
}

ModelConfig model_preset(std::string_view name) {
  ModelConfig c;
  if (name == "retnet-1.3b-like") {
    c.name = "retnet-1.3b-like";
    c.num_layers = 24;
    c.hidden_dim = 2048;
    c.ffn_dim = 4096;
    c.num_heads = 8;
    c.head_dim = 256;
    c.value_factor = 2;
    c.vocab_size = 50304;
  } else if (name == "toy") {
    c.name = "toy";
    c.num_layers = 2;
    c.hidden_dim = 64;
    c.ffn_dim = 128;
    c.num_heads = 2;
    c.head_dim = 32;
    c.value_factor = 2;
    c.vocab_size = 256;
  } else {
    fail(ErrorCode::kConfigError, "unknown model preset '" + std::string(name) + "'");
  }
  return c;
}

std::vector<std::string> model_preset_names() { return {"retnet-1.3b-like", "toy"}; }

ParameterCount parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::uint64_t d = cfg.hidden_dim;
  const std::uint64_t vd = cfg.value_dim();
  ParameterCount p;
  p.per_layer_matrices = 2 * d * d + 2 * d * vd + vd * d + 2 * d * cfg.ffn_dim;
  p.per_layer_norms = 2 * d;
  p.embedding = cfg.vocab_size * d;
  p.final_norm = d;
  p.total = cfg.num_layers * (p.per_layer_matrices + p.per_layer_norms) + p.embedding + p.final_norm;
  p.matrix_weights = cfg.num_layers * p.per_layer_matrices + p.embedding;
  return p;
}

void ScenarioConfig::validate() const {
  if (prompt_tokens == 0) fail(ErrorCode::kConfigError, "scenario needs at least one prompt token");
}

ScenarioConfig scenario_preset(std::string_view name) {
  if (name == "liso" || name == "LISO") return ScenarioConfig::liso();
  if (name == "silo" || name == "SILO") return ScenarioConfig::silo();
  fail(ErrorCode::kConfigError, "unknown scenario preset '" + std::string(name) + "'");
}

const char* to_string(OpKind k) noexcept {
  switch (k) {
    case OpKind::kEmbed: return "embed";
    case OpKind::kNorm: return "norm";
    case OpKind::kProjection: return "projection";
    case OpKind::kRope: return "rope";
    case OpKind::kRetention: return "retention";
    case OpKind::kGate: return "gate";
    case OpKind::kActivation: return "activation";
    case OpKind::kResidual: return "residual";
    case OpKind::kHead: return "head";
    case OpKind::kRopeUpdate: return "rope_update";
  }
  return "?";
}

const LayerOp& LayerGraph::op(std::string_view name) const {
  for (const auto& o : ops) {
    if (o.name == name) return o;
  }
  fail(ErrorCode::kConfigError, "no op named '" + std::string(name) + "'");
}

std::uint64_t LayerGraph::matrix_weights() const {
  std::uint64_t n = 0;
  for (const auto& o : ops) {
    if (o.kind == OpKind::kProjection || o.kind == OpKind::kHead) n += o.out_dim * o.in_dim;
  }
  return n;
}

LayerGraph build_graph(const ModelConfig& cfg) {
  cfg.validate();
  const std::uint64_t d = cfg.hidden_dim;
  const std::uint64_t vd = cfg.value_dim();
  LayerGraph g;
  g.model = cfg;
  auto add = [&g](LayerOp op) { g.ops.push_back(std::move(op)); };
  auto proj = [&](std::uint64_t l, const char* name, std::uint64_t out, std::uint64_t in,
                  const std::string& norm) {
    LayerOp op;
    op.kind = OpKind::kProjection;
    op.name = layer_name(l, name);
    op.layer = static_cast<int>(l);
    op.out_dim = out;
    op.in_dim = in;
    op.fused_norm_input = !norm.empty();
    op.norm = norm;
    return op;
  };
  auto elementwise = [&](std::uint64_t l, OpKind kind, const char* name, std::uint64_t width) {
    LayerOp op;
    op.kind = kind;
    op.name = layer_name(l, name);
    op.layer = static_cast<int>(l);
    op.out_dim = width;
    return op;
  };

  add({OpKind::kEmbed, "embed", -1, d, 0, false, false, "", ppu::ActivationKind::kIdentity});
  for (std::uint64_t l = 0; l < cfg.num_layers; ++l) {
    const std::string attn_norm = layer_name(l, "attn_norm");
    const std::string ffn_norm = layer_name(l, "ffn_norm");
    add(elementwise(l, OpKind::kNorm, "attn_norm", d));
    add(proj(l, "q_proj", d, d, attn_norm));
    LayerOp k = proj(l, "k_proj", d, d, attn_norm);
    k.transpose_out = true;
    add(k);
    add(proj(l, "v_proj", vd, d, attn_norm));
    add(proj(l, "g_proj", vd, d, attn_norm));
    add(elementwise(l, OpKind::kRope, "rope", 2 * d));
    add(elementwise(l, OpKind::kRetention, "retention", vd));
    LayerOp gate = elementwise(l, OpKind::kGate, "gate", vd);
    gate.activation = ppu::ActivationKind::kSilu;
    add(gate);
    add(proj(l, "o_proj", d, vd, ""));
    add(elementwise(l, OpKind::kResidual, "attn_residual", d));
    add(elementwise(l, OpKind::kNorm, "ffn_norm", d));
    add(proj(l, "ffn_up", cfg.ffn_dim, d, ffn_norm));
    LayerOp act = elementwise(l, OpKind::kActivation, "ffn_act", cfg.ffn_dim);
    act.activation = ppu::ActivationKind::kGeluTanh;
    add(act);
    add(proj(l, "ffn_down", d, cfg.ffn_dim, ""));
    add(elementwise(l, OpKind::kResidual, "ffn_residual", d));
  }
  add({OpKind::kNorm, "final_norm", -1, d, 0, false, false, "", ppu::ActivationKind::kIdentity});
  add({OpKind::kHead, "lm_head", -1, cfg.vocab_size, d, false, true, "final_norm",
       ppu::ActivationKind::kIdentity});
  add({OpKind::kRopeUpdate, "rope_update", -1, cfg.head_dim / 2, 0, false, false, "",
       ppu::ActivationKind::kIdentity});
  return g;
}

float retention_decay(std::uint64_t head) {
  return static_cast<float>(1.0 - std::ldexp(1.0, -5 - static_cast<int>(head)));
}

const Matrix<float>& Model::matrix(const std::string& op_name) const {
  if (op_name == "lm_head") return embedding;
  auto it = matrices.find(op_name);
  if (it == matrices.end()) fail(ErrorCode::kConfigError, "no weights for '" + op_name + "'");
  return it->second;
}

const QuantizedMatrix& Model::quantized_matrix(const std::string& op_name) const {
  auto it = quantized.find(op_name);
  if (it == quantized.end()) fail(ErrorCode::kConfigError, "no quantized weights for '" + op_name + "'");
  return it->second;
}

const ppu::NormParams& Model::norm(const std::string& op_name) const {
  auto it = norms.find(op_name);
  if (it == norms.end()) fail(ErrorCode::kConfigError, "no norm parameters for '" + op_name + "'");
  return it->second;
}

float Model::decay(std::uint64_t head) const { return retention_decay(head); }

Model build_model(const ModelConfig& cfg, std::uint64_t seed, bool zero_weights) {
  const ParameterCount count = parameter_count(cfg);
  if (count.total > kMaxFunctionalParameters) {
    fail(ErrorCode::kConfigError, "model '" + cfg.name + "' has " + std::to_string(count.total) +
                                      " parameters; functional simulation is limited to " +
                                      std::to_string(kMaxFunctionalParameters));
  }
  Model m;
  m.graph = build_graph(cfg);
  const float zero = zero_weights ? 0.0f : 1.0f;
  m.embedding = random_matrix(cfg.vocab_size, cfg.hidden_dim, zero, seed, "embed");

  for (const auto& op : m.graph.ops) {
    if (op.kind == OpKind::kProjection) {
      const float stddev = zero / std::sqrt(static_cast<float>(op.in_dim));
      m.matrices[op.name] = random_matrix(op.out_dim, op.in_dim, stddev, seed, op.name);
    } else if (op.kind == OpKind::kNorm) {
      ppu::NormParams p = ppu::NormParams::unit(op.out_dim);
      Gaussian g = stream_for(seed, op.name);
      for (float& v : p.gamma) v = 1.0f + 0.1f * g();
      m.norms[op.name] = std::move(p);
    }
  }
  for (const auto& op : m.graph.ops) {
    if (op.kind != OpKind::kProjection && op.kind != OpKind::kHead) continue;
    const Matrix<float>& w = m.matrix(op.name);
    m.quantized[op.name] = {quant::quantize_mxint4(w), quant::quantize_weights_int8(w)};
  }
  return m;
}

}  // namespace hsa::workload
