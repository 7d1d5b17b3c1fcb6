#include <algorithm>
#include <cmath>

#include "hsa/workload.hpp"

namespace hsa::workload {
namespace {

using core::CycleCount;
using core::HsaConfig;
using mem::TrafficLedger;

std::uint64_t u64(int v) { return static_cast<std::uint64_t>(v); }

OpCost make_cost(const LayerOp& op) {
  OpCost c;
  c.name = op.name;
  c.kind = op.kind;
  return c;
}

void add_schedule(OpCost& c, const MmmSchedule& s) {
  c.cycles += s.cycles;
  c.ledger += s.ledger;
}

}  // namespace

// ---- MMM tiling ------------------------------------------------------------

MmmSchedule tile_mmm(std::uint64_t m, std::uint64_t k, std::uint64_t n, const HsaConfig& cfg,
                     const MmmTraffic& traffic) {
  cfg.validate();
  if (m == 0 || k == 0 || n == 0) fail(ErrorCode::kShapeMismatch, "empty MMM");
  const std::uint64_t R = u64(cfg.pe_rows);
  const std::uint64_t C = u64(cfg.pe_cols);
  const std::uint64_t sram = cfg.activation_sram_bytes;

  MmmSchedule s;
  s.m = m;
  s.k = k;
  s.n = n;
  s.k_segment = std::min({k, kMaxMmmKSegment, sram / R});
  if (s.k_segment == 0) fail(ErrorCode::kSramOverflow, "activation SRAM cannot hold one 16-row slice");
  s.chunk_rows = std::min(sram / s.k_segment / R * R, ceil_div(m, R) * R);
  if (s.chunk_rows == 0 || s.chunk_rows * s.k_segment > sram) {
    fail(ErrorCode::kSramOverflow, "no activation chunk fits the SRAM");
  }

  const std::uint64_t n_tiles = ceil_div(n, C);
  const std::uint64_t full_chunks = m / s.chunk_rows;
  const std::uint64_t tail_rows = m % s.chunk_rows;
  const std::uint64_t full_segs = k / s.k_segment;
  const std::uint64_t tail_k = k % s.k_segment;

  // Every (chunk, K segment) pass is one run through the array: it pays the
  // skew fill once and K + drain per output tile.
  auto chunk_cost = [&](std::uint64_t rows, std::uint64_t count) {
    if (count == 0 || rows == 0) return;
    const std::uint64_t m_tiles = ceil_div(rows, R);
    auto seg = [&](std::uint64_t klen, std::uint64_t segs) {
      if (segs == 0 || klen == 0) return;
      const CycleCount one = core::mmm_cycles(rows, klen, n, cfg);
      s.cycles += one.scaled(count * segs);
    };
    seg(s.k_segment, full_segs);
    seg(tail_k, tail_k ? 1 : 0);
    s.ledger.weight_sram_reads += count * m_tiles * k * n;
    s.ledger.activation_sram_reads += count * rows * k * n_tiles;
  };
  chunk_cost(s.chunk_rows, full_chunks);
  chunk_cost(tail_rows, tail_rows ? 1 : 0);

  const std::uint64_t chunks = s.chunks();
  if (traffic.weights_from_dram) {
    s.ledger.dram_weight_bytes = chunks * k * n;
    s.ledger.weight_sram_writes = s.ledger.dram_weight_bytes;
  }
  if (traffic.activations_from_dram) {
    s.ledger.dram_activation_bytes += m * k;
    s.ledger.activation_sram_writes += m * k;
  }
  if (traffic.outputs_to_dram) s.ledger.dram_activation_bytes += m * n;
  s.ledger.mac_ops = m * k * n;
  s.ledger.enabled_pe_cycles = u64(cfg.pe_count()) * s.cycles.compute;
  return s;
}

std::vector<MmmTile> MmmSchedule::tiles(const HsaConfig& cfg) const {
  const std::uint64_t R = u64(cfg.pe_rows);
  const std::uint64_t C = u64(cfg.pe_cols);
  std::vector<MmmTile> out;
  for (std::uint64_t c0 = 0; c0 < m; c0 += chunk_rows) {
    const std::uint64_t c1 = std::min(m, c0 + chunk_rows);
    for (std::uint64_t n0 = 0; n0 < n; n0 += C) {
      for (std::uint64_t m0 = c0; m0 < c1; m0 += R) {
        for (std::uint64_t k0 = 0; k0 < k; k0 += k_segment) {
          out.push_back({m0, std::min(R, c1 - m0), n0, std::min(C, n - n0), k0, std::min(k_segment, k - k0)});
        }
      }
    }
  }
  return out;
}

// ---- MVM grouping ------------------------------------------------------------

MvmSchedule tile_mvm(std::uint64_t c_out, std::uint64_t k, quant::WeightFormat format, const HsaConfig& cfg) {
  cfg.validate();
  if (c_out == 0 || k == 0) fail(ErrorCode::kShapeMismatch, "empty MVM");
  MvmSchedule s;
  s.c_out = c_out;
  s.k = k;
  s.groups = ceil_div(c_out, u64(cfg.pe_cols));
  s.rounds = ceil_div(s.groups, u64(cfg.clusters));
  s.segments = ceil_div(k, cfg.mvm_max_segment);
  s.cycles = core::mvm_cycles(c_out, k, cfg);

  const std::uint64_t bytes = quant::weight_payload_bytes(c_out, k, format, u64(cfg.pe_cols));
  s.ledger.dram_weight_bytes = bytes;
  s.ledger.weight_sram_writes = bytes;
  s.ledger.weight_sram_reads = bytes;
  s.ledger.activation_sram_reads = s.rounds * k;
  s.ledger.activation_sram_writes = c_out;
  s.ledger.mac_ops = c_out * k;
  s.ledger.enabled_pe_cycles = u64(cfg.pe_cols) * k * s.groups;
  return s;
}

std::vector<MvmRound> MvmSchedule::round_list(const HsaConfig& cfg) const {
  std::vector<MvmRound> out;
  const std::uint64_t per = u64(cfg.clusters);
  for (std::uint64_t g = 0; g < groups; g += per) out.push_back({g, std::min(per, groups - g)});
  return out;
}

// ---- op costs ------------------------------------------------------------------

void PhaseCost::add(OpCost op) {
  cycles += op.cycles;
  ledger += op.ledger;
  ppu_cycles += op.ppu_cycles;
  ops.push_back(std::move(op));
}

std::uint64_t ppu_pass_cycles(std::uint64_t elements, const HsaConfig& cfg) {
  return ceil_div(elements, u64(cfg.ppu_lanes));
}

std::uint64_t rope_update_cycles(const ModelConfig& model, const HsaConfig& cfg) {
  return ppu_pass_cycles(model.head_dim / 2, cfg);
}

OpCost retention_prefill_cost(const LayerGraph& graph, int layer, std::uint64_t n_tokens, const HsaConfig& cfg) {
  const ModelConfig& mc = graph.model;
  const std::uint64_t dk = mc.head_dim;
  const std::uint64_t dv = mc.head_value_dim();
  const std::uint64_t d = mc.hidden_dim;
  const std::uint64_t vd = mc.value_dim();
  OpCost c;
  c.name = "l" + std::to_string(layer) + ".retention";
  c.kind = OpKind::kRetention;

  const MmmTraffic on_chip{false, false, false};
  for (std::uint64_t h = 0; h < mc.num_heads; ++h) {
    for (std::uint64_t c0 = 0; c0 < n_tokens; c0 += kRetentionChunk) {
      const std::uint64_t b = std::min(kRetentionChunk, n_tokens - c0);
      add_schedule(c, tile_mmm(b, dk, b, cfg, on_chip));  // Q K^T inside the chunk
      add_schedule(c, tile_mmm(b, b, dv, cfg, on_chip));  // (QK^T . D) V
      if (c0 > 0) add_schedule(c, tile_mmm(b, dk, dv, cfg, on_chip));  // Q S from earlier chunks
      add_schedule(c, tile_mmm(dk, b, dv, cfg, on_chip));  // S update with K^T V
      c.ppu_cycles += ppu_pass_cycles(b * b + dk * dv, cfg);  // decay mask, state decay
    }
  }
  const std::uint64_t chunks = ceil_div(n_tokens, kRetentionChunk);
  c.ledger.state_sram_writes += mc.num_heads * 4 * dk * dv * chunks;
  c.ledger.state_sram_reads += mc.num_heads * 4 * dk * dv * (chunks - 1);
  // q, k, v come back from DRAM; the retention output goes out once.
  c.ledger.dram_activation_bytes += n_tokens * (2 * d + vd) + n_tokens * vd;
  c.ledger.activation_sram_writes += n_tokens * (2 * d + vd);
  return c;
}

OpCost retention_decode_cost(const LayerGraph& graph, int layer, const HsaConfig& cfg) {
  const ModelConfig& mc = graph.model;
  const std::uint64_t dk = mc.head_dim;
  const std::uint64_t dv = mc.head_value_dim();
  OpCost c;
  c.name = "l" + std::to_string(layer) + ".retention";
  c.kind = OpKind::kRetention;
  const std::uint64_t per_pass = ceil_div(dk * dv, u64(cfg.mvm_channels_per_round()));
  // S <- gamma S + k^T v, then o = q S: two passes over the state per head.
  c.cycles.compute = mc.num_heads * 2 * per_pass;
  c.ledger.mac_ops = mc.num_heads * 2 * dk * dv;
  c.ledger.enabled_pe_cycles = c.ledger.mac_ops;
  c.ledger.state_sram_reads = mc.num_heads * 8 * dk * dv;
  c.ledger.state_sram_writes = mc.num_heads * 4 * dk * dv;
  c.ppu_cycles = mc.num_heads * ppu_pass_cycles(dk * dv, cfg);
  return c;
}

OpCost op_cost_prefill(const LayerGraph& graph, const LayerOp& op, std::uint64_t n_tokens, const HsaConfig& cfg) {
  const ModelConfig& mc = graph.model;
  const std::uint64_t M = n_tokens;
  OpCost c = make_cost(op);
  switch (op.kind) {
    case OpKind::kEmbed:
      c.ledger.dram_activation_bytes = M * op.out_dim;
      c.ledger.activation_sram_writes = M * op.out_dim;
      c.ppu_cycles = ppu_pass_cycles(M * op.out_dim, cfg);
      break;
    case OpKind::kNorm:
    case OpKind::kRope:
    case OpKind::kActivation:
      c.ppu_cycles = ppu_pass_cycles(M * op.out_dim, cfg);
      break;
    case OpKind::kProjection:
      add_schedule(c, tile_mmm(M, op.in_dim, op.out_dim, cfg));
      c.ppu_cycles = ppu_pass_cycles(M * op.out_dim, cfg);
      break;
    case OpKind::kRetention: {
      OpCost r = retention_prefill_cost(graph, op.layer, M, cfg);
      r.name = op.name;
      return r;
    }
    case OpKind::kGate:
      c.ledger.dram_activation_bytes = M * op.out_dim;
      c.ledger.activation_sram_writes = M * op.out_dim;
      c.ppu_cycles = ppu_pass_cycles(M * op.out_dim, cfg);
      break;
    case OpKind::kResidual:
      c.ledger.dram_activation_bytes = M * op.out_dim;
      c.ppu_cycles = ppu_pass_cycles(M * op.out_dim, cfg);
      break;
    case OpKind::kHead:
      // Only the last prompt position produces logits.
      add_schedule(c, tile_mmm(1, op.in_dim, op.out_dim, cfg));
      c.ppu_cycles = ppu_pass_cycles(op.out_dim, cfg);
      break;
    case OpKind::kRopeUpdate:
      break;
  }
  (void)mc;
  return c;
}

OpCost op_cost_decode(const LayerGraph& graph, const LayerOp& op, const HsaConfig& cfg,
                      quant::WeightFormat format) {
  OpCost c = make_cost(op);
  switch (op.kind) {
    case OpKind::kEmbed:
      c.ledger.dram_activation_bytes = op.out_dim;
      c.ledger.activation_sram_writes = op.out_dim;
      c.ppu_cycles = ppu_pass_cycles(op.out_dim, cfg);
      break;
    case OpKind::kNorm:
    case OpKind::kRope:
    case OpKind::kGate:
    case OpKind::kActivation:
    case OpKind::kResidual:
      c.ppu_cycles = ppu_pass_cycles(op.out_dim, cfg);
      break;
    case OpKind::kProjection:
    case OpKind::kHead: {
      const MvmSchedule s = tile_mvm(op.out_dim, op.in_dim, format, cfg);
      c.cycles = s.cycles;
      c.ledger = s.ledger;
      c.ppu_cycles = ppu_pass_cycles(op.out_dim, cfg);
      break;
    }
    case OpKind::kRetention: {
      OpCost r = retention_decode_cost(graph, op.layer, cfg);
      r.name = op.name;
      return r;
    }
    case OpKind::kRopeUpdate:
      // Serialized after the last embed of the token.
      c.cycles.compute = rope_update_cycles(graph.model, cfg);
      c.ppu_cycles = c.cycles.compute;
      break;
  }
  return c;
}

PhaseCost prefill_cost(const LayerGraph& graph, std::uint64_t n_tokens, const HsaConfig& cfg) {
  if (n_tokens == 0) fail(ErrorCode::kConfigError, "prefill needs at least one token");
  PhaseCost p;
  for (const auto& op : graph.ops) {
    if (op.kind == OpKind::kRopeUpdate) continue;
    p.add(op_cost_prefill(graph, op, n_tokens, cfg));
  }
  return p;
}

PhaseCost decode_step_cost(const LayerGraph& graph, const HsaConfig& cfg, quant::WeightFormat format) {
  PhaseCost p;
  for (const auto& op : graph.ops) p.add(op_cost_decode(graph, op, cfg, format));
  return p;
}

PhaseCost decode_step_cost(const LayerGraph& graph, const HsaConfig& cfg) {
  return decode_step_cost(graph, cfg, graph.model.weight_precision);
}

// ---- roll-up ---------------------------------------------------------------------

PhaseReport finalize_phase(const PhaseCost& per_step, std::uint64_t steps, const HsaConfig& cfg,
                           const mem::MemConfig& mem_cfg) {
  PhaseReport r;
  r.steps = steps;
  r.cost.cycles = per_step.cycles.scaled(steps);
  r.cost.ledger = per_step.ledger.scaled(steps);
  r.cost.ppu_cycles = per_step.ppu_cycles * steps;
  for (const auto& op : per_step.ops) {
    OpCost o = op;
    o.cycles = op.cycles.scaled(steps);
    o.ledger = op.ledger.scaled(steps);
    o.ppu_cycles = op.ppu_cycles * steps;
    r.cost.ops.push_back(std::move(o));
  }
  r.cost.cycles.stall = 0;
  r.timing = mem::phase_latency(r.cost.cycles.total(), r.cost.ledger.dram_bytes(), mem_cfg, cfg.clock_hz);
  r.cost.cycles.stall = r.timing.stall_cycles;
  r.energy = mem::phase_energy(r.cost.ledger, r.timing.seconds, mem_cfg);
  return r;
}

ScenarioResult combine_phases(std::string arch, const ModelConfig& model, const ScenarioConfig& scenario,
                              PhaseReport prefill, PhaseReport decode) {
  ScenarioResult s;
  s.arch = std::move(arch);
  s.model = model;
  s.scenario = scenario;
  s.prefill = std::move(prefill);
  s.decode = std::move(decode);
  s.seconds = s.prefill.timing.seconds + s.decode.timing.seconds;
  s.joules = s.prefill.energy.total() + s.decode.energy.total();
  const auto tokens = static_cast<double>(scenario.total_tokens());
  s.tokens_per_s = s.seconds > 0.0 ? tokens / s.seconds : 0.0;
  s.tokens_per_j = s.joules > 0.0 ? tokens / s.joules : 0.0;
  s.decode_fraction = s.seconds > 0.0 ? s.decode.timing.seconds / s.seconds : 0.0;
  return s;
}

ScenarioResult simulate_scenario(const ModelConfig& model, const ScenarioConfig& scenario, const HsaConfig& cfg,
                                 const mem::MemConfig& mem_cfg) {
  cfg.validate();
  mem_cfg.validate();
  scenario.validate();
  const LayerGraph graph = build_graph(model);
  PhaseReport prefill = finalize_phase(prefill_cost(graph, scenario.prompt_tokens, cfg), 1, cfg, mem_cfg);
  PhaseReport decode = finalize_phase(decode_step_cost(graph, cfg), scenario.output_tokens, cfg, mem_cfg);
  return combine_phases("hsa", model, scenario, std::move(prefill), std::move(decode));
}

}  // namespace hsa::workload
