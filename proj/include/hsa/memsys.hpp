#pragma once

// DRAM bandwidth / energy accounting. Latency per phase assumes weight
// prefetch fully overlaps compute (double-buffered weight SRAM), so a phase
// costs max(compute time, transfer time).

#include <cstdint>

namespace hsa::mem {

struct MemConfig {
  double dram_bandwidth_bytes_per_s = 51.2e9;  // DDR5
  double dram_energy_pj_per_byte = 32.0;
  double sram_energy_pj_per_byte = 1.0;
  double mac_energy_pj = 0.5;
  double static_power_w = 0.108;

  void validate() const;  // ConfigError
};

// Bytes moved and work done by one phase.
struct TrafficLedger {
  std::uint64_t dram_weight_bytes = 0;
  std::uint64_t dram_activation_bytes = 0;
  std::uint64_t dram_state_bytes = 0;

  std::uint64_t weight_sram_reads = 0;
  std::uint64_t weight_sram_writes = 0;
  std::uint64_t activation_sram_reads = 0;
  std::uint64_t activation_sram_writes = 0;
  std::uint64_t state_sram_reads = 0;
  std::uint64_t state_sram_writes = 0;

  std::uint64_t mac_ops = 0;
  std::uint64_t enabled_pe_cycles = 0;

  std::uint64_t dram_bytes() const noexcept {
    return dram_weight_bytes + dram_activation_bytes + dram_state_bytes;
  }
  std::uint64_t sram_bytes() const noexcept {
    return weight_sram_reads + weight_sram_writes + activation_sram_reads + activation_sram_writes +
           state_sram_reads + state_sram_writes;
  }

  TrafficLedger& operator+=(const TrafficLedger& o) noexcept;
  TrafficLedger scaled(std::uint64_t n) const noexcept;
  bool operator==(const TrafficLedger&) const = default;
};

struct PhaseTiming {
  double compute_seconds = 0.0;
  double memory_seconds = 0.0;
  double seconds = 0.0;
  std::uint64_t stall_cycles = 0;  // cycles the array waits on DRAM
  bool memory_bound = false;
};

PhaseTiming phase_latency(std::uint64_t compute_cycles, std::uint64_t dram_bytes, const MemConfig& cfg,
                          double clock_hz);

struct EnergyBreakdown {
  double dram_j = 0.0;
  double sram_j = 0.0;
  double mac_j = 0.0;
  double static_j = 0.0;

  double total() const noexcept { return dram_j + sram_j + mac_j + static_j; }
};

EnergyBreakdown phase_energy(const TrafficLedger& ledger, double seconds, const MemConfig& cfg);

}  // namespace hsa::mem
