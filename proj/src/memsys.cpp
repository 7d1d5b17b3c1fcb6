#include "hsa/memsys.hpp"

#include <algorithm>
#include <cmath>

#include "hsa/common.hpp"

namespace hsa::mem {

void MemConfig::validate() const {
  if (!(dram_bandwidth_bytes_per_s > 0.0) || !std::isfinite(dram_bandwidth_bytes_per_s)) {
    fail(ErrorCode::kConfigError, "DRAM bandwidth must be positive");
  }
  for (double v : {dram_energy_pj_per_byte, sram_energy_pj_per_byte, mac_energy_pj, static_power_w}) {
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorCode::kConfigError, "energy constants must be nonnegative");
  }
}

TrafficLedger& TrafficLedger::operator+=(const TrafficLedger& o) noexcept {
  dram_weight_bytes += o.dram_weight_bytes;
  dram_activation_bytes += o.dram_activation_bytes;
  dram_state_bytes += o.dram_state_bytes;
  weight_sram_reads += o.weight_sram_reads;
  weight_sram_writes += o.weight_sram_writes;
  activation_sram_reads += o.activation_sram_reads;
  activation_sram_writes += o.activation_sram_writes;
  state_sram_reads += o.state_sram_reads;
  state_sram_writes += o.state_sram_writes;
  mac_ops += o.mac_ops;
  enabled_pe_cycles += o.enabled_pe_cycles;
  return *this;
}

TrafficLedger TrafficLedger::scaled(std::uint64_t n) const noexcept {
  TrafficLedger t = *this;
  t.dram_weight_bytes *= n;
  t.dram_activation_bytes *= n;
  t.dram_state_bytes *= n;
  t.weight_sram_reads *= n;
  t.weight_sram_writes *= n;
  t.activation_sram_reads *= n;
  t.activation_sram_writes *= n;
  t.state_sram_reads *= n;
  t.state_sram_writes *= n;
  t.mac_ops *= n;
  t.enabled_pe_cycles *= n;
  return t;
}

PhaseTiming phase_latency(std::uint64_t compute_cycles, std::uint64_t dram_bytes, const MemConfig& cfg,
                          double clock_hz) {
  cfg.validate();
  if (!(clock_hz > 0.0)) fail(ErrorCode::kConfigError, "clock must be positive");
  PhaseTiming t;
  t.compute_seconds = static_cast<double>(compute_cycles) / clock_hz;
  t.memory_seconds = static_cast<double>(dram_bytes) / cfg.dram_bandwidth_bytes_per_s;
  t.seconds = std::max(t.compute_seconds, t.memory_seconds);
  t.memory_bound = t.memory_seconds > t.compute_seconds;
  if (t.memory_bound) {
    const auto memory_cycles = static_cast<std::uint64_t>(std::ceil(t.memory_seconds * clock_hz));
    t.stall_cycles = memory_cycles > compute_cycles ? memory_cycles - compute_cycles : 0;
  }
  return t;
}

EnergyBreakdown phase_energy(const TrafficLedger& ledger, double seconds, const MemConfig& cfg) {
  cfg.validate();
  EnergyBreakdown e;
  e.dram_j = static_cast<double>(ledger.dram_bytes()) * cfg.dram_energy_pj_per_byte * 1e-12;
  e.sram_j = static_cast<double>(ledger.sram_bytes()) * cfg.sram_energy_pj_per_byte * 1e-12;
  e.mac_j = static_cast<double>(ledger.mac_ops) * cfg.mac_energy_pj * 1e-12;
  e.static_j = cfg.static_power_w * seconds;
  return e;
}

}  // namespace hsa::mem
