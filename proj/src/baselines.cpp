#include "hsa/baselines.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace hsa::baselines {

using workload::LayerGraph;
using workload::OpCost;
using workload::OpKind;
using workload::PhaseCost;

const char* to_string(ArchKind k) noexcept {
  switch (k) {
    case ArchKind::kConvSa: return "conv-sa";
    case ArchKind::kVectorUnit: return "vector";
    case ArchKind::kHsa: break;
  }
  return "hsa";
}

ArchKind arch_from_string(std::string_view s) {
  if (s == "hsa") return ArchKind::kHsa;
  if (s == "conv-sa") return ArchKind::kConvSa;
  if (s == "vector") return ArchKind::kVectorUnit;
  fail(ErrorCode::kConfigError, "unknown architecture '" + std::string(s) + "' (hsa, conv-sa, vector)");
}

std::vector<ArchKind> all_archs() { return {ArchKind::kHsa, ArchKind::kConvSa, ArchKind::kVectorUnit}; }

PhaseCost conv_sa_decode_step_cost(const LayerGraph& graph, const core::HsaConfig& cfg, const BaselineParams& params) {
  if (!(params.conv_sa_decode_exponent >= 1.0)) fail(ErrorCode::kConfigError, "conv-sa exponent must be >= 1");
  const double factor = std::pow(16.0, params.conv_sa_decode_exponent - 1.0);
  PhaseCost p;
  for (const auto& op : graph.ops) {
    if (op.kind != OpKind::kProjection && op.kind != OpKind::kHead) {
      p.add(workload::op_cost_decode(graph, op, cfg, quant::WeightFormat::kInt8));
      continue;
    }
    // A batch-1 matvec as an M = 1 matmul: INT8 weights streamed from DRAM,
    // the activation vector already on chip.
    const workload::MmmSchedule s = workload::tile_mmm(1, op.in_dim, op.out_dim, cfg, {true, false, false});
    OpCost c;
    c.name = op.name;
    c.kind = op.kind;
    c.cycles = s.cycles;
    c.cycles.compute = static_cast<std::uint64_t>(std::llround(static_cast<double>(s.cycles.compute) * factor));
    c.ledger = s.ledger;
    c.ledger.activation_sram_writes += op.out_dim;
    c.ppu_cycles = workload::ppu_pass_cycles(op.out_dim, cfg);
    p.add(std::move(c));
  }
  return p;
}

PhaseCost vector_unit_prefill_cost(const LayerGraph& graph, std::uint64_t n_tokens, const core::HsaConfig& cfg) {
  PhaseCost hsa = workload::prefill_cost(graph, n_tokens, cfg);
  PhaseCost p;
  for (OpCost op : hsa.ops) {
    // One weight SRAM byte per MAC instead of one per 16 MACs.
    if (op.ledger.mac_ops > op.ledger.weight_sram_reads) op.ledger.weight_sram_reads = op.ledger.mac_ops;
    p.add(std::move(op));
  }
  return p;
}

workload::ScenarioResult model_scenario(ArchKind kind, const workload::ModelConfig& model,
                                        const workload::ScenarioConfig& scenario, const core::HsaConfig& cfg,
                                        const mem::MemConfig& mem_cfg, const BaselineParams& params) {
  if (kind == ArchKind::kHsa) return workload::simulate_scenario(model, scenario, cfg, mem_cfg);
  cfg.validate();
  mem_cfg.validate();
  scenario.validate();
  const LayerGraph graph = workload::build_graph(model);
  PhaseCost prefill;
  PhaseCost decode;
  if (kind == ArchKind::kConvSa) {
    prefill = workload::prefill_cost(graph, scenario.prompt_tokens, cfg);
    decode = conv_sa_decode_step_cost(graph, cfg, params);
  } else {
    prefill = vector_unit_prefill_cost(graph, scenario.prompt_tokens, cfg);
    decode = workload::decode_step_cost(graph, cfg);
  }
  return workload::combine_phases(to_string(kind), model, scenario,
                                  workload::finalize_phase(prefill, 1, cfg, mem_cfg),
                                  workload::finalize_phase(decode, scenario.output_tokens, cfg, mem_cfg));
}

std::vector<workload::ScenarioResult> compare(const workload::ModelConfig& model,
                                              const std::vector<workload::ScenarioConfig>& scenarios,
                                              const std::vector<ArchKind>& archs, const core::HsaConfig& cfg,
                                              const mem::MemConfig& mem_cfg, const BaselineParams& params,
                                              unsigned threads) {
  const std::size_t jobs = scenarios.size() * archs.size();
  std::vector<workload::ScenarioResult> out(jobs);
  if (jobs == 0) return out;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs));

  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) {
      try {
        out[i] = model_scenario(archs[i % archs.size()], model, scenarios[i / archs.size()], cfg, mem_cfg, params);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace hsa::baselines
