#pragma once

// RetNet-style layer graphs, the prefill/decode schedulers and their cost
// accounting, and a float reference forward pass for toy-scale models.
//
// Layer (pre-norm):
//   h  = RMSNorm(x);  q,k = RoPE(Wq h, Wk h);  v = Wv h;  g = Wg h
//   o  = Retention(q, k / sqrt(dk), v)   per head, decay 1 - 2^(-5-h)
//   x += Wo (SiLU(g) * o)
//   x += Wdown GeLU(Wup RMSNorm(x))
// followed by a final RMSNorm and the LM head (tied to the embedding table).

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hsa/common.hpp"
#include "hsa/core.hpp"
#include "hsa/memsys.hpp"
#include "hsa/ppu.hpp"
#include "hsa/quant.hpp"

namespace hsa::workload {

struct ModelConfig {
  std::string name = "custom";
  std::uint64_t num_layers = 0;
  std::uint64_t hidden_dim = 0;
  std::uint64_t ffn_dim = 0;
  std::uint64_t num_heads = 0;
  std::uint64_t head_dim = 0;
  std::uint64_t value_factor = 2;  // value/gate width = value_factor * hidden_dim
  std::uint64_t vocab_size = 0;
  quant::WeightFormat weight_precision = quant::WeightFormat::kMxInt4;  // decode weights
  std::uint64_t seed = 0;
  double rope_base = 10000.0;

  std::uint64_t value_dim() const noexcept { return value_factor * hidden_dim; }
  std::uint64_t head_value_dim() const noexcept { return value_factor * head_dim; }
  void validate() const;  // ConfigError
  bool operator==(const ModelConfig&) const = default;
};

// "retnet-1.3b-like", "toy".
ModelConfig model_preset(std::string_view name);
std::vector<std::string> model_preset_names();

struct ParameterCount {
  std::uint64_t per_layer_matrices = 0;
  std::uint64_t per_layer_norms = 0;
  std::uint64_t embedding = 0;  // shared with the LM head
  std::uint64_t final_norm = 0;
  std::uint64_t total = 0;
  std::uint64_t matrix_weights = 0;  // everything streamed through the array
};
ParameterCount parameter_count(const ModelConfig& cfg);

struct ScenarioConfig {
  std::string name = "custom";
  std::uint64_t prompt_tokens = 0;
  std::uint64_t output_tokens = 0;

  static ScenarioConfig liso() { return {"liso", 750, 50}; }
  static ScenarioConfig silo() { return {"silo", 50, 750}; }
  std::uint64_t total_tokens() const noexcept { return prompt_tokens + output_tokens; }
  void validate() const;
  bool operator==(const ScenarioConfig&) const = default;
};
ScenarioConfig scenario_preset(std::string_view name);

enum class OpKind { kEmbed, kNorm, kProjection, kRope, kRetention, kGate, kActivation, kResidual, kHead, kRopeUpdate };
const char* to_string(OpKind k) noexcept;

struct LayerOp {
  OpKind kind = OpKind::kNorm;
  std::string name;
  int layer = -1;               // -1 for model-level ops
  std::uint64_t out_dim = 0;    // weight rows, or vector width for elementwise ops
  std::uint64_t in_dim = 0;     // weight columns
  bool transpose_out = false;   // prefill result consumed transposed (K^T)
  bool fused_norm_input = false;
  std::string norm;             // norm op feeding this projection through the fused path
  ppu::ActivationKind activation = ppu::ActivationKind::kIdentity;
};

struct LayerGraph {
  ModelConfig model;
  std::vector<LayerOp> ops;

  const LayerOp& op(std::string_view name) const;
  // Sum of out_dim * in_dim over projection and head ops.
  std::uint64_t matrix_weights() const;
};

LayerGraph build_graph(const ModelConfig& cfg);

// Synthetic weights for functional runs. Every projection / head matrix is
// keyed by its op name ("l0.q_proj", "lm_head"); norms by their op name.
struct QuantizedMatrix {
  quant::MxInt4Tensor mx;
  quant::Int8Tensor int8;
};

struct Model {
  LayerGraph graph;
  Matrix<float> embedding;  // [vocab x d]; the LM head reads the same table
  std::map<std::string, Matrix<float>> matrices;
  std::map<std::string, ppu::NormParams> norms;
  std::map<std::string, QuantizedMatrix> quantized;

  const Matrix<float>& matrix(const std::string& op_name) const;
  const QuantizedMatrix& quantized_matrix(const std::string& op_name) const;
  const ppu::NormParams& norm(const std::string& op_name) const;
  float decay(std::uint64_t head) const;
};

// Parameter budget above which build_model refuses (use the analytic path).
inline constexpr std::uint64_t kMaxFunctionalParameters = std::uint64_t{1} << 26;

// Deterministic Gaussian weights from `seed`. zero_weights gives an all-zero
// model (embedding included).
Model build_model(const ModelConfig& cfg, std::uint64_t seed, bool zero_weights = false);

// Per-head retention decay 1 - 2^(-5-h).
float retention_decay(std::uint64_t head);

// ---- scheduling -----------------------------------------------------------

// Weights and activation chunks staged through the array. Loop order:
// activation chunk -> output column tile -> output row tile -> K segment.
struct MmmTile {
  std::uint64_t m0 = 0, rows = 0;
  std::uint64_t n0 = 0, cols = 0;
  std::uint64_t k0 = 0, klen = 0;
};

struct MmmTraffic {
  bool weights_from_dram = true;
  bool activations_from_dram = true;
  bool outputs_to_dram = true;
};

struct MmmSchedule {
  std::uint64_t m = 0, k = 0, n = 0;
  std::uint64_t chunk_rows = 0;  // activation rows resident at once
  std::uint64_t k_segment = 0;
  core::CycleCount cycles;
  mem::TrafficLedger ledger;

  std::uint64_t chunks() const noexcept { return ceil_div(m, chunk_rows); }
  std::uint64_t k_segments() const noexcept { return ceil_div(k, k_segment); }
  std::vector<MmmTile> tiles(const core::HsaConfig& cfg) const;
};

inline constexpr std::uint64_t kMaxMmmKSegment = 4096;

// Throws SramOverflow if no legal chunking exists for the activation SRAM.
MmmSchedule tile_mmm(std::uint64_t m, std::uint64_t k, std::uint64_t n, const core::HsaConfig& cfg,
                     const MmmTraffic& traffic = {});

struct MvmRound {
  std::uint64_t first_group = 0;
  std::uint64_t groups = 0;  // <= clusters
};

struct MvmSchedule {
  std::uint64_t c_out = 0, k = 0;
  std::uint64_t groups = 0, rounds = 0, segments = 0;
  core::CycleCount cycles;
  mem::TrafficLedger ledger;

  std::vector<MvmRound> round_list(const core::HsaConfig& cfg) const;
};

MvmSchedule tile_mvm(std::uint64_t c_out, std::uint64_t k, quant::WeightFormat format,
                     const core::HsaConfig& cfg);

// ---- analytic phase costs -------------------------------------------------

struct OpCost {
  std::string name;
  OpKind kind = OpKind::kNorm;
  core::CycleCount cycles;
  mem::TrafficLedger ledger;
  std::uint64_t ppu_cycles = 0;  // overlapped with the array, reported only
};

struct PhaseCost {
  core::CycleCount cycles;
  mem::TrafficLedger ledger;
  std::uint64_t ppu_cycles = 0;
  std::vector<OpCost> ops;

  void add(OpCost op);
};

inline constexpr std::uint64_t kRetentionChunk = 64;

PhaseCost prefill_cost(const LayerGraph& graph, std::uint64_t n_tokens, const core::HsaConfig& cfg);
PhaseCost decode_step_cost(const LayerGraph& graph, const core::HsaConfig& cfg,
                           quant::WeightFormat format);
PhaseCost decode_step_cost(const LayerGraph& graph, const core::HsaConfig& cfg);

// Cost of a single graph op; the phase costs are these summed in graph order.
// Prefill skips rope_update; decode skips nothing.
OpCost op_cost_prefill(const LayerGraph& graph, const LayerOp& op, std::uint64_t n_tokens,
                       const core::HsaConfig& cfg);
OpCost op_cost_decode(const LayerGraph& graph, const LayerOp& op, const core::HsaConfig& cfg,
                      quant::WeightFormat format);

// Shared pieces reused by the baseline models.
OpCost retention_prefill_cost(const LayerGraph& graph, int layer, std::uint64_t n_tokens,
                              const core::HsaConfig& cfg);
OpCost retention_decode_cost(const LayerGraph& graph, int layer, const core::HsaConfig& cfg);
std::uint64_t rope_update_cycles(const ModelConfig& model, const core::HsaConfig& cfg);
std::uint64_t ppu_pass_cycles(std::uint64_t elements, const core::HsaConfig& cfg);

// ---- phase roll-up --------------------------------------------------------

struct PhaseReport {
  std::uint64_t steps = 0;  // 1 for prefill, output_tokens for decode
  PhaseCost cost;           // whole phase; cycles.stall filled from the roofline
  mem::PhaseTiming timing;
  mem::EnergyBreakdown energy;
};

PhaseReport finalize_phase(const PhaseCost& per_step, std::uint64_t steps, const core::HsaConfig& cfg,
                           const mem::MemConfig& mem_cfg);

struct ScenarioResult {
  std::string arch = "hsa";
  ModelConfig model;
  ScenarioConfig scenario;
  PhaseReport prefill;
  PhaseReport decode;
  double seconds = 0.0;
  double joules = 0.0;
  double tokens_per_s = 0.0;  // (prompt + output) / seconds
  double tokens_per_j = 0.0;
  double decode_fraction = 0.0;
};

ScenarioResult combine_phases(std::string arch, const ModelConfig& model, const ScenarioConfig& scenario,
                              PhaseReport prefill, PhaseReport decode);

ScenarioResult simulate_scenario(const ModelConfig& model, const ScenarioConfig& scenario,
                                 const core::HsaConfig& cfg, const mem::MemConfig& mem_cfg);

// ---- float reference ------------------------------------------------------

struct RetentionState {
  std::vector<Matrix<float>> heads;  // [dk x dv] each
  std::uint64_t bytes() const noexcept;
};

struct SequenceState {
  std::vector<RetentionState> layers;
  std::uint64_t position = 0;
  std::uint64_t bytes() const noexcept;
};

SequenceState empty_state(const ModelConfig& cfg);

// Largest |value| seen at each quantization site, keyed by the consuming op.
using ActivationStats = std::map<std::string, float>;

// Parallel (prefill) form. Returns logits for every position; `state`
// receives the recurrent state after the last token.
std::vector<std::vector<float>> reference_prefill(const Model& model, std::span<const std::uint32_t> tokens,
                                                  SequenceState* state = nullptr,
                                                  ActivationStats* stats = nullptr);
// Recurrent (decode) form, one token at the state's position.
std::vector<float> reference_decode_step(const Model& model, SequenceState& state, std::uint32_t token,
                                         ActivationStats* stats = nullptr);

// ---- functional simulation on the HSA ------------------------------------

struct FunctionalRun {
  PhaseCost prefill;
  PhaseCost decode;  // summed over every decode step
  std::vector<float> prefill_logits;              // last prompt position
  std::vector<std::vector<float>> decode_logits;  // one per decode step
  std::vector<std::uint32_t> decode_tokens;       // tokens fed to each decode step
  SequenceState state;
};

// Prefill through tiled run_mmm (INT8), then `output_tokens` greedy decode
// steps through run_mvm with the model's decode weight format. Activation
// scales are calibrated statically from a reference pass over the prompt.
FunctionalRun run_functional(const Model& model, std::span<const std::uint32_t> prompt,
                             std::uint64_t output_tokens, const core::HsaConfig& cfg);

// Signal-to-quantization-noise ratio in dB of `test` against `ref`.
double sqnr_db(std::span<const float> ref, std::span<const float> test);

}  // namespace hsa::workload
