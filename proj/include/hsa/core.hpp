#pragma once

// Functional + cycle-level model of the 16x16 hybrid systolic array.
//
// MMM (prefill): output-stationary INT8 x INT8, one 16x16 output tile at a
// time, drained horizontally (or vertically for a transposed result).
//
// MVM (decode): the four 4x16 clusters work on disjoint 16-channel groups.
// Each MXINT4 shift code is split by the bucket selector: the two LSBs shift
// the 4-bit mantissa in the per-column shifter, the two MSBs pick which of the
// cluster's four rows accumulates (the other rows are clock-gated). The
// vertical drain folds the rows together as acc0 + acc1<<4 + acc2<<8 + acc3<<12.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "hsa/common.hpp"
#include "hsa/quant.hpp"

namespace hsa::core {

struct HsaConfig {
  int pe_rows = 16;
  int pe_cols = 16;
  int clusters = 4;
  double clock_hz = 5.0e8;
  int accumulator_width_bits = 32;
  std::size_t weight_sram_bytes_per_cluster = 64 * 1024;
  std::size_t activation_sram_bytes = 4096 * 16;  // dim 4096 at batch 16, INT8
  int mmm_fill_cycles = 30;    // 15 skew-in + 15 flush for one 16x16 tile
  int mmm_drain_cycles = 16;
  int mvm_drain_cycles = 5;    // 4 shift-accumulate hops + 1 writeback
  int ppu_lanes = 16;          // PPU elements per cycle
  std::size_t mvm_max_segment = std::size_t{1} << 14;

  int rows_per_cluster() const noexcept { return pe_rows / clusters; }
  int pe_count() const noexcept { return pe_rows * pe_cols; }
  // Channels the array covers per MVM round (clusters x columns).
  int mvm_channels_per_round() const noexcept { return clusters * pe_cols; }

  // Throws ConfigError.
  void validate() const;
};

// 2 ops per MAC per PE per cycle.
double peak_ops_per_s(const HsaConfig& cfg) noexcept;

// Bytes/s the MVM dataflow pulls from memory when every cluster consumes one
// weight column slice per cycle (mantissas plus the shared code for MXINT4).
double mvm_stream_demand_bytes_per_s(const HsaConfig& cfg, quant::WeightFormat format) noexcept;

struct CycleCount {
  std::uint64_t compute = 0;
  std::uint64_t fill = 0;
  std::uint64_t drain = 0;
  std::uint64_t stall = 0;

  std::uint64_t total() const noexcept { return compute + fill + drain + stall; }
  CycleCount& operator+=(const CycleCount& o) noexcept {
    compute += o.compute;
    fill += o.fill;
    drain += o.drain;
    stall += o.stall;
    return *this;
  }
  CycleCount scaled(std::uint64_t n) const noexcept {
    return {compute * n, fill * n, drain * n, stall * n};
  }
  bool operator==(const CycleCount&) const = default;
};

enum class Dataflow { kMmm, kMvm };

// Non-stall, non-drain (and non-fill) cycle fraction.
double mvm_utilization(const CycleCount& c) noexcept;
// Useful MACs over PE-cycles of the whole array.
double mmm_utilization(const CycleCount& c, std::uint64_t mac_ops, const HsaConfig& cfg) noexcept;
// 1 - stall/total; exactly 1 iff the weight stream never starved the array.
double dataflow_utilization(const CycleCount& c) noexcept;
double utilization(const CycleCount& c, Dataflow mode, std::uint64_t mac_ops, const HsaConfig& cfg) noexcept;

struct BucketSelection {
  int fine = 0;  // shifter amount, code[1:0]
  int row = 0;   // enabled PE row inside the cluster, code[3:2]
  bool operator==(const BucketSelection&) const = default;
};

// Throws InvalidCode for codes outside [0, 14].
BucketSelection bucket_select(int code);

// Vertical drain of one cluster column: sum_r accums[r] << 4r, evaluated as
// the hop-by-hop ((a3*16 + a2)*16 + a1)*16 + a0 in 32-bit with overflow
// detection (AccumulatorOverflow).
std::int32_t drain_mvm(std::span<const std::int32_t, 4> accums);

// Per-PE architectural state shared by both dataflows.
class PeArrayState {
 public:
  explicit PeArrayState(const HsaConfig& cfg);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }

  void clear_accumulators() noexcept;
  std::int32_t accumulator(int r, int c) const noexcept { return acc_[index(r, c)]; }
  void set_accumulator(int r, int c, std::int32_t v) noexcept { acc_[index(r, c)] = v; }
  // acc += product with 32-bit overflow detection.
  void accumulate(int r, int c, std::int64_t product);

  std::int8_t weight_register(int r, int c) const noexcept { return weight_[index(r, c)]; }
  void set_weight_register(int r, int c, std::int8_t w) noexcept { weight_[index(r, c)] = w; }

  bool enabled(int r, int c) const noexcept { return enable_[index(r, c)] != 0; }
  void set_enable(int r, int c, bool on) noexcept { enable_[index(r, c)] = on ? 1 : 0; }
  void set_all_enables(bool on) noexcept;
  std::uint64_t enabled_count() const noexcept;

 private:
  std::size_t index(int r, int c) const noexcept { return static_cast<std::size_t>(r * cols_ + c); }

  int rows_;
  int cols_;
  std::vector<std::int32_t> acc_;
  std::vector<std::int8_t> weight_;
  std::vector<std::uint8_t> enable_;
};

struct MmmOptions {
  bool transpose_out = false;
  // Activation rows are staged k_segment columns at a time when 16*K does not
  // fit the activation SRAM. 0 = whole K resident (DimensionOverflow if not).
  std::size_t k_segment = 0;
};

struct MmmResult {
  Matrix<std::int32_t> out;  // [M x N], or [N x M] when transposed
  CycleCount cycles;
  std::uint64_t mac_ops = 0;
  std::uint64_t tiles = 0;
  // Operand values injected at the array edges (padding lanes excluded).
  std::uint64_t activation_reads = 0;
  std::uint64_t weight_reads = 0;
};

// a: [M x K], b: [K x N], both INT8. Exact integer product; every tile runs
// through the cycle-stepped output-stationary pipeline.
MmmResult run_mmm(const quant::Int8Tensor& a, const quant::Int8Tensor& b, const MmmOptions& options,
                  const HsaConfig& cfg);

struct MvmResult {
  std::vector<std::int32_t> out;  // pre-scale integer outputs, length C_out
  CycleCount cycles;
  std::uint64_t mac_ops = 0;
  std::uint64_t enabled_pe_cycles = 0;
  std::array<std::uint64_t, 4> row_enabled_pe_cycles{};  // by bucket row
  std::uint64_t rounds = 0;
  std::uint64_t segments = 0;  // K segments per round
  std::uint64_t activation_reads = 0;  // x[j] broadcasts, one per column per round
};

// w: [C_out x K] MXINT4, x: K INT8 values.
MvmResult run_mvm(const quant::MxInt4Tensor& w, const quant::Int8Tensor& x, const HsaConfig& cfg);
// INT8 weights [C_out x K] through the same array with the shifter bypassed.
MvmResult run_mvm(const quant::Int8Tensor& w, const quant::Int8Tensor& x, const HsaConfig& cfg);

// Closed-form cycle model the scheduler uses when no data is simulated.
// run_mmm / run_mvm must reproduce these exactly.
CycleCount mmm_cycles(std::uint64_t m, std::uint64_t k, std::uint64_t n, const HsaConfig& cfg);
CycleCount mvm_cycles(std::uint64_t c_out, std::uint64_t k, const HsaConfig& cfg);

// Drain/tile constants measured by driving one tile through the pipeline.
struct TileTimingProbe {
  std::uint64_t busy_cycles = 0;   // inject + skew + flush
  std::uint64_t drain_cycles = 0;
  std::uint64_t fill_cycles = 0;   // busy - K
};
TileTimingProbe probe_mmm_tile(std::size_t k, bool transpose_out, const HsaConfig& cfg);

}  // namespace hsa::core
