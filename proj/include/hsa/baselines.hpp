#pragma once

// Comparison architectures on the same 256 PEs, clock and tiling:
//   conv-sa  plain 2-D systolic array; INT8 weights only, and a batch-1
//            matvec occupies one row of the array (1/16 utilization).
//   vector   matches the HSA in decode, but every prefill MAC fetches its
//            weight from SRAM again (no reuse across the 16 output rows).

#include <string_view>
#include <vector>

#include "hsa/workload.hpp"

namespace hsa::baselines {

enum class ArchKind { kHsa, kConvSa, kVectorUnit };

const char* to_string(ArchKind k) noexcept;
ArchKind arch_from_string(std::string_view s);  // ConfigError
std::vector<ArchKind> all_archs();

struct BaselineParams {
  // Conv-SA decode compute cycles are multiplied by 16^(exponent - 1).
  // 1.0 = exactly one array row busy per matvec cycle.
  double conv_sa_decode_exponent = 1.0;
};

workload::PhaseCost conv_sa_decode_step_cost(const workload::LayerGraph& graph, const core::HsaConfig& cfg,
                                             const BaselineParams& params = {});
workload::PhaseCost vector_unit_prefill_cost(const workload::LayerGraph& graph, std::uint64_t n_tokens,
                                             const core::HsaConfig& cfg);

workload::ScenarioResult model_scenario(ArchKind kind, const workload::ModelConfig& model,
                                        const workload::ScenarioConfig& scenario, const core::HsaConfig& cfg,
                                        const mem::MemConfig& mem_cfg, const BaselineParams& params = {});

// Every (scenario, arch) pair, fanned out over worker threads; results come
// back in scenario-major order regardless of scheduling.
std::vector<workload::ScenarioResult> compare(const workload::ModelConfig& model,
                                              const std::vector<workload::ScenarioConfig>& scenarios,
                                              const std::vector<ArchKind>& archs, const core::HsaConfig& cfg,
                                              const mem::MemConfig& mem_cfg, const BaselineParams& params = {},
                                              unsigned threads = 0);

}  // namespace hsa::baselines
