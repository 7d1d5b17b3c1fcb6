#include "hsa/core.hpp"

#include <algorithm>
#include <limits>
#include <string>

namespace hsa::core {
namespace {

constexpr std::int64_t kAccMin = std::numeric_limits<std::int32_t>::min();
constexpr std::int64_t kAccMax = std::numeric_limits<std::int32_t>::max();

std::int32_t checked_i32(std::int64_t v, const char* where) {
  if (v < kAccMin || v > kAccMax) {
    fail(ErrorCode::kAccumulatorOverflow, std::string(where) + " exceeds 32 bits (" +
                                              std::to_string(v) + ")");
  }
  return static_cast<std::int32_t>(v);
}

// One operand slot travelling through the skewed pipeline. `live` marks a
// scheduled slot (padding lanes included, so timing never depends on tile
// occupancy); `valid` marks a slot that carries real data.
struct Slot {
  std::int8_t value = 0;
  bool live = false;
  bool valid = false;
};

struct StreamCounters {
  std::uint64_t macs = 0;
  std::uint64_t a_reads = 0;
  std::uint64_t b_reads = 0;
};

// Streams one output-stationary tile: row r of A enters the left edge skewed by
// r cycles, column c of B enters the top edge skewed by c cycles. Returns the
// number of cycles until the last slot has left the array.

template <typename FetchA, typename FetchB>
std::uint64_t stream_os_tile(PeArrayState& pe, std::size_t k, FetchA&& fetch_a, FetchB&& fetch_b,
                             StreamCounters& n) {
  const int rows = pe.rows();
  const int cols = pe.cols();
  std::vector<Slot> act(static_cast<std::size_t>(rows * cols));
  std::vector<Slot> wgt(static_cast<std::size_t>(rows * cols));
  auto at = [cols](int r, int c) { return static_cast<std::size_t>(r * cols + c); };

  pe.clear_accumulators();
  std::uint64_t t = 0;
  for (;; ++t) {
    for (int r = 0; r < rows; ++r) {
      for (int c = cols - 1; c > 0; --c) act[at(r, c)] = act[at(r, c - 1)];
      const std::int64_t kk = static_cast<std::int64_t>(t) - r;
      Slot in;
      if (kk >= 0 && kk < static_cast<std::int64_t>(k)) {
        in.live = true;
        in.valid = fetch_a(r, static_cast<std::size_t>(kk), in.value);
        n.a_reads += in.valid ? 1 : 0;
      }
      act[at(r, 0)] = in;
    }
    for (int c = 0; c < cols; ++c) {
      for (int r = rows - 1; r > 0; --r) wgt[at(r, c)] = wgt[at(r - 1, c)];
      const std::int64_t kk = static_cast<std::int64_t>(t) - c;
      Slot in;
      if (kk >= 0 && kk < static_cast<std::int64_t>(k)) {
        in.live = true;
        in.valid = fetch_b(static_cast<std::size_t>(kk), c, in.value);
        n.b_reads += in.valid ? 1 : 0;
      }
      wgt[at(0, c)] = in;
    }

    bool any_live = false;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const Slot& a = act[at(r, c)];
        const Slot& w = wgt[at(r, c)];
        any_live = any_live || a.live || w.live;
        if (a.valid && w.valid) {
          pe.set_weight_register(r, c, w.value);
          pe.accumulate(r, c, static_cast<std::int64_t>(a.value) * w.value);
          ++n.macs;
        }
      }
    }
    if (!any_live) break;
  }
  return t;
}

// Shifts accumulators out of the right edge (row-major result) or the bottom
// edge (transposed result), one PE hop per cycle. `sink(r, c, value)` gets
// the array coordinates the value originated from.
template <typename Sink>
std::uint64_t drain_os_tile(PeArrayState& pe, bool vertical, Sink&& sink) {
  const int rows = pe.rows();
  const int cols = pe.cols();
  std::uint64_t cycles = 0;
  if (!vertical) {
    for (int step = 0; step < cols; ++step, ++cycles) {
      for (int r = 0; r < rows; ++r) {
        sink(r, cols - 1 - step, pe.accumulator(r, cols - 1));
        for (int c = cols - 1; c > 0; --c) pe.set_accumulator(r, c, pe.accumulator(r, c - 1));
        pe.set_accumulator(r, 0, 0);
      }
    }
  } else {
    for (int step = 0; step < rows; ++step, ++cycles) {
      for (int c = 0; c < cols; ++c) {
        sink(rows - 1 - step, c, pe.accumulator(rows - 1, c));
        for (int r = rows - 1; r > 0; --r) pe.set_accumulator(r, c, pe.accumulator(r - 1, c));
        pe.set_accumulator(0, c, 0);
      }
    }
  }
  return cycles;
}

std::size_t vector_length(const quant::Int8Tensor& x) {
  if (x.shape.size() == 1) return x.shape[0];
  if (x.shape.size() == 2 && x.shape[0] == 1) return x.shape[1];
  fail(ErrorCode::kShapeMismatch, "MVM activation must be a vector");
}

// Shared MVM engine. `fetch(i, j)` returns the shifter input for channel i,
// column j as {mantissa_or_int8, code}; channels beyond C_out are zero.
template <typename Fetch>
MvmResult run_mvm_engine(std::size_t c_out, std::size_t k, const quant::Int8Tensor& x,
                         const HsaConfig& cfg, Fetch&& fetch) {
  cfg.validate();
  if (vector_length(x) != k) {
    fail(ErrorCode::kShapeMismatch, "activation length " + std::to_string(x.size()) +
                                        " != weight columns " + std::to_string(k));
  }
  const int cols = cfg.pe_cols;
  const int rpc = cfg.rows_per_cluster();
  const std::size_t groups = ceil_div(c_out, static_cast<std::size_t>(cols));
  const std::size_t rounds = ceil_div(groups, static_cast<std::size_t>(cfg.clusters));
  const std::size_t seg_len = cfg.mvm_max_segment;
  const std::size_t segments = k == 0 ? 1 : ceil_div(k, seg_len);

  MvmResult res;
  res.out.assign(c_out, 0);
  res.rounds = rounds;
  res.segments = segments;
  PeArrayState pe(cfg);

  for (std::size_t round = 0; round < rounds; ++round) {
    for (std::size_t seg = 0; seg < segments; ++seg) {
      const std::size_t j0 = seg * seg_len;
      const std::size_t j1 = std::min(k, j0 + seg_len);
      pe.clear_accumulators();
      for (std::size_t j = j0; j < j1; ++j) {
        const std::int64_t xj = x.values[j];
        for (int cl = 0; cl < cfg.clusters; ++cl) {
          const std::size_t g = round * static_cast<std::size_t>(cfg.clusters) + static_cast<std::size_t>(cl);
          const int base_row = cl * rpc;
          if (g >= groups) {
            for (int r = 0; r < rpc; ++r)
              for (int c = 0; c < cols; ++c) pe.set_enable(base_row + r, c, false);
            continue;
          }
          // One code drives the whole 16-column slice of this group.
          int code = 0;
          {
            int dummy = 0;
            fetch(g * static_cast<std::size_t>(cols), j, dummy, code);
          }
          const BucketSelection sel = bucket_select(code);
          for (int r = 0; r < rpc; ++r)
            for (int c = 0; c < cols; ++c) pe.set_enable(base_row + r, c, r == sel.row);
          const int row = base_row + sel.row;
          for (int c = 0; c < cols; ++c) {
            const std::size_t i = g * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c);
            int m = 0;
            int unused_code = 0;
            if (i < c_out) fetch(i, j, m, unused_code);
            const auto shifted = static_cast<std::int8_t>(m * (1 << sel.fine));
            pe.set_weight_register(row, c, shifted);
            if (pe.enabled(row, c)) {
              pe.accumulate(row, c, static_cast<std::int64_t>(shifted) * xj);
              if (i < c_out) ++res.mac_ops;
            }
          }
          std::uint64_t enabled_here = 0;
          for (int c = 0; c < cols; ++c) enabled_here += pe.enabled(row, c) ? 1 : 0;
          res.row_enabled_pe_cycles[static_cast<std::size_t>(sel.row)] += enabled_here;
        }
        res.enabled_pe_cycles += pe.enabled_count();
      }
      for (int cl = 0; cl < cfg.clusters; ++cl) {
        const std::size_t g = round * static_cast<std::size_t>(cfg.clusters) + static_cast<std::size_t>(cl);
        if (g >= groups) continue;
        for (int c = 0; c < cols; ++c) {
          const std::size_t i = g * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c);
          std::array<std::int32_t, 4> col{};
          for (int r = 0; r < 4; ++r) col[static_cast<std::size_t>(r)] = pe.accumulator(cl * rpc + r, c);
          const std::int32_t partial = drain_mvm(col);
          if (i < c_out) {
            res.out[i] = checked_i32(static_cast<std::int64_t>(res.out[i]) + partial, "segment sum");
          }
        }
      }
      res.cycles.compute += j1 - j0;
      res.activation_reads += j1 - j0;
      res.cycles.drain += static_cast<std::uint64_t>(cfg.mvm_drain_cycles);
    }
  }
  return res;
}

}  // namespace

void HsaConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::kConfigError, m); };
  if (pe_rows <= 0 || pe_cols <= 0 || clusters <= 0) bad("array dimensions must be positive");
  if (pe_rows * pe_cols != 256) bad("the array must total 256 PEs");
  if (pe_rows % clusters != 0) bad("pe_rows must split evenly into clusters");
  if (rows_per_cluster() != 4) bad("the bucket path needs exactly 4 rows per cluster");
  if (accumulator_width_bits != 32) bad("accumulators are 32-bit");
  if (!(clock_hz > 0.0)) bad("clock_hz must be positive");
  if (mmm_fill_cycles < 0 || mmm_drain_cycles < 0 || mvm_drain_cycles < 0) bad("negative cycle constant");
  if (ppu_lanes <= 0) bad("ppu_lanes must be positive");
  if (activation_sram_bytes < static_cast<std::size_t>(pe_rows)) bad("activation SRAM too small");
  if (mvm_max_segment == 0 || mvm_max_segment > (std::size_t{1} << 14)) {
    bad("mvm_max_segment must be in [1, 2^14]");
  }
}

double peak_ops_per_s(const HsaConfig& cfg) noexcept {
  return 2.0 * static_cast<double>(cfg.pe_count()) * cfg.clock_hz;
}

double mvm_stream_demand_bytes_per_s(const HsaConfig& cfg, quant::WeightFormat format) noexcept {
  const double bits_per_cluster_cycle = format == quant::WeightFormat::kMxInt4
                                            ? cfg.pe_cols * 4.0 + 4.0
                                            : cfg.pe_cols * 8.0;
  return cfg.clusters * bits_per_cluster_cycle / 8.0 * cfg.clock_hz;
}

double mvm_utilization(const CycleCount& c) noexcept {
  return c.total() == 0 ? 0.0 : static_cast<double>(c.compute) / static_cast<double>(c.total());
}

double mmm_utilization(const CycleCount& c, std::uint64_t mac_ops, const HsaConfig& cfg) noexcept {
  if (c.total() == 0) return 0.0;
  return static_cast<double>(mac_ops) / (static_cast<double>(cfg.pe_count()) * static_cast<double>(c.total()));
}

double dataflow_utilization(const CycleCount& c) noexcept {
  return c.total() == 0 ? 0.0 : 1.0 - static_cast<double>(c.stall) / static_cast<double>(c.total());
}

double utilization(const CycleCount& c, Dataflow mode, std::uint64_t mac_ops, const HsaConfig& cfg) noexcept {
  return mode == Dataflow::kMvm ? mvm_utilization(c) : mmm_utilization(c, mac_ops, cfg);
}

BucketSelection bucket_select(int code) {
  if (code < 0 || code > quant::kMaxCode) {
    fail(ErrorCode::kInvalidCode, "shift code " + std::to_string(code));
  }
  return {code & 0x3, code >> 2};
}

std::int32_t drain_mvm(std::span<const std::int32_t, 4> accums) {
  std::int64_t v = accums[3];
  for (int r = 2; r >= 0; --r) {
    v = static_cast<std::int64_t>(checked_i32(v * 16, "vertical drain")) + accums[static_cast<std::size_t>(r)];
    checked_i32(v, "vertical drain");
  }
  return static_cast<std::int32_t>(v);
}

PeArrayState::PeArrayState(const HsaConfig& cfg)
    : rows_(cfg.pe_rows),
      cols_(cfg.pe_cols),
      acc_(static_cast<std::size_t>(cfg.pe_count()), 0),
      weight_(static_cast<std::size_t>(cfg.pe_count()), 0),
      enable_(static_cast<std::size_t>(cfg.pe_count()), 1) {}

void PeArrayState::clear_accumulators() noexcept { std::fill(acc_.begin(), acc_.end(), 0); }

void PeArrayState::accumulate(int r, int c, std::int64_t product) {
  std::int32_t& a = acc_[index(r, c)];
  a = checked_i32(static_cast<std::int64_t>(a) + product, "PE accumulator");
}

void PeArrayState::set_all_enables(bool on) noexcept {
  std::fill(enable_.begin(), enable_.end(), on ? 1 : 0);
}

std::uint64_t PeArrayState::enabled_count() const noexcept {
  return static_cast<std::uint64_t>(std::count(enable_.begin(), enable_.end(), 1));
}

MmmResult run_mmm(const quant::Int8Tensor& a, const quant::Int8Tensor& b, const MmmOptions& options,
                  const HsaConfig& cfg) {
  cfg.validate();
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0]) {
    fail(ErrorCode::kShapeMismatch, "MMM operands must be [M x K] and [K x N]");
  }
  const std::size_t m = a.shape[0];
  const std::size_t k = a.shape[1];
  const std::size_t n = b.shape[1];
  if (m == 0 || n == 0 || k == 0) fail(ErrorCode::kShapeMismatch, "empty MMM operand");

  const std::size_t resident_k = options.k_segment == 0 ? k : options.k_segment;
  if (static_cast<std::size_t>(cfg.pe_rows) * resident_k > cfg.activation_sram_bytes) {
    fail(ErrorCode::kDimensionOverflow,
         "a 16 x " + std::to_string(resident_k) + " activation slice exceeds the activation SRAM");
  }

  const auto R = static_cast<std::size_t>(cfg.pe_rows);
  const auto C = static_cast<std::size_t>(cfg.pe_cols);
  MmmResult res;
  res.out = options.transpose_out ? Matrix<std::int32_t>(n, m) : Matrix<std::int32_t>(m, n);
  PeArrayState pe(cfg);

  for (std::size_t m0 = 0; m0 < m; m0 += R) {
    for (std::size_t n0 = 0; n0 < n; n0 += C) {
      auto fetch_a = [&](int r, std::size_t kk, std::int8_t& v) {
        const std::size_t i = m0 + static_cast<std::size_t>(r);
        if (i >= m) return false;
        v = a.values[i * k + kk];
        return true;
      };
      auto fetch_b = [&](std::size_t kk, int c, std::int8_t& v) {
        const std::size_t j = n0 + static_cast<std::size_t>(c);
        if (j >= n) return false;
        v = b.values[kk * n + j];
        return true;
      };
      StreamCounters counters;
      const std::uint64_t busy = stream_os_tile(pe, k, fetch_a, fetch_b, counters);
      res.mac_ops += counters.macs;
      res.activation_reads += counters.a_reads;
      res.weight_reads += counters.b_reads;
      const std::uint64_t drain = drain_os_tile(pe, options.transpose_out, [&](int r, int c, std::int32_t v) {
        const std::size_t i = m0 + static_cast<std::size_t>(r);
        const std::size_t j = n0 + static_cast<std::size_t>(c);
        if (i >= m || j >= n) return;
        if (options.transpose_out) {
          res.out(j, i) = v;
        } else {
          res.out(i, j) = v;
        }
      });
      // Consecutive tiles overlap their skew, so only the first one pays it.
      if (res.tiles == 0) res.cycles.fill = busy - k;
      res.cycles.compute += k;
      res.cycles.drain += drain;
      ++res.tiles;
    }
  }
  return res;
}

MvmResult run_mvm(const quant::MxInt4Tensor& w, const quant::Int8Tensor& x, const HsaConfig& cfg) {
  if (w.group_size != static_cast<std::size_t>(cfg.pe_cols)) {
    fail(ErrorCode::kShapeMismatch, "MXINT4 group size must match the cluster width");
  }
  return run_mvm_engine(w.rows, w.cols, x, cfg, [&](std::size_t i, std::size_t j, int& m, int& code) {
    m = w.mantissa(i, j);
    code = w.code(i / w.group_size, j);
  });
}

MvmResult run_mvm(const quant::Int8Tensor& w, const quant::Int8Tensor& x, const HsaConfig& cfg) {
  if (w.shape.size() != 2) fail(ErrorCode::kShapeMismatch, "INT8 weights must be [C_out x K]");
  const std::size_t k = w.shape[1];
  return run_mvm_engine(w.shape[0], k, x, cfg, [&](std::size_t i, std::size_t j, int& m, int& code) {
    m = i < w.shape[0] ? w.values[i * k + j] : 0;
    code = 0;
  });
}

CycleCount mmm_cycles(std::uint64_t m, std::uint64_t k, std::uint64_t n, const HsaConfig& cfg) {
  CycleCount c;
  const std::uint64_t tiles = ceil_div(m, static_cast<std::uint64_t>(cfg.pe_rows)) *
                              ceil_div(n, static_cast<std::uint64_t>(cfg.pe_cols));
  if (tiles == 0) return c;
  c.fill = static_cast<std::uint64_t>(cfg.mmm_fill_cycles);
  c.compute = tiles * k;
  c.drain = tiles * static_cast<std::uint64_t>(cfg.mmm_drain_cycles);
  return c;
}

CycleCount mvm_cycles(std::uint64_t c_out, std::uint64_t k, const HsaConfig& cfg) {
  CycleCount c;
  const std::uint64_t groups = ceil_div(c_out, static_cast<std::uint64_t>(cfg.pe_cols));
  const std::uint64_t rounds = ceil_div(groups, static_cast<std::uint64_t>(cfg.clusters));
  const std::uint64_t segments = k == 0 ? 1 : ceil_div(k, cfg.mvm_max_segment);
  c.compute = rounds * k;
  c.drain = rounds * segments * static_cast<std::uint64_t>(cfg.mvm_drain_cycles);
  return c;
}

TileTimingProbe probe_mmm_tile(std::size_t k, bool transpose_out, const HsaConfig& cfg) {
  cfg.validate();
  PeArrayState pe(cfg);
  StreamCounters macs;
  auto one = [](auto&&...) { return true; };
  auto fa = [&](int, std::size_t, std::int8_t& v) { v = 1; return one(); };
  auto fb = [&](std::size_t, int, std::int8_t& v) { v = 1; return one(); };
  TileTimingProbe p;
  p.busy_cycles = stream_os_tile(pe, k, fa, fb, macs);
  p.drain_cycles = drain_os_tile(pe, transpose_out, [](int, int, std::int32_t) {});
  p.fill_cycles = p.busy_cycles - k;
  return p;
}

}  // namespace hsa::core
