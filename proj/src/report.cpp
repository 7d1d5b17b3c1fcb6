#include "hsa/report.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <limits>

#include "hsa/tensor_io.hpp"

namespace hsa::report {

using workload::ModelConfig;
using workload::PhaseReport;
using workload::ScenarioConfig;
using workload::ScenarioResult;

namespace {

[[noreturn]] void config_error(const std::string& m) { fail(ErrorCode::kConfigError, m); }
[[noreturn]] void invariant(const std::string& m) { fail(ErrorCode::kInvariantViolation, "report: " + m); }

void require_object(const Json& j, const char* what) {
  if (!j.is_object()) config_error(std::string(what) + " config must be a JSON object");
}

void reject_unknown(const Json& j, std::initializer_list<std::string_view> known, const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      config_error(std::string("unknown ") + what + " key '" + it.key() + "'");
    }
  }
}

void read_u64(const Json& j, const char* key, std::uint64_t& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number_integer() || (!it->is_number_unsigned() && it->get<std::int64_t>() < 0)) {
    config_error(std::string("'") + key + "' must be a nonnegative integer");
  }
  out = it->get<std::uint64_t>();
}

template <typename T>
void read_int(const Json& j, const char* key, T& out) {
  std::uint64_t v = static_cast<std::uint64_t>(out);
  read_u64(j, key, v);
  if (v > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) {
    config_error(std::string("'") + key + "' is out of range");
  }
  out = static_cast<T>(v);
}

void read_double(const Json& j, const char* key, double& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_number()) config_error(std::string("'") + key + "' must be a number");
  out = it->get<double>();
}

void read_string(const Json& j, const char* key, std::string& out) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (!it->is_string()) config_error(std::string("'") + key + "' must be a string");
  out = it->get<std::string>();
}

bool looks_like_file(std::string_view s) {
  return s.find('/') != std::string_view::npos || s.ends_with(".json") || std::filesystem::exists(s);
}

Json cycles_json(const core::CycleCount& c) {
  return {{"compute", c.compute}, {"fill", c.fill}, {"drain", c.drain}, {"stall", c.stall}, {"total", c.total()}};
}

Json ledger_json(const mem::TrafficLedger& l) {
  return {{"dram_weight_bytes", l.dram_weight_bytes},
          {"dram_activation_bytes", l.dram_activation_bytes},
          {"dram_state_bytes", l.dram_state_bytes},
          {"weight_sram_reads", l.weight_sram_reads},
          {"weight_sram_writes", l.weight_sram_writes},
          {"activation_sram_reads", l.activation_sram_reads},
          {"activation_sram_writes", l.activation_sram_writes},
          {"state_sram_reads", l.state_sram_reads},
          {"state_sram_writes", l.state_sram_writes},
          {"mac_ops", l.mac_ops},
          {"enabled_pe_cycles", l.enabled_pe_cycles},
          {"dram_bytes", l.dram_bytes()},
          {"sram_bytes", l.sram_bytes()}};
}

constexpr const char* kLedgerFields[] = {
    "dram_weight_bytes",      "dram_activation_bytes", "dram_state_bytes",  "weight_sram_reads",
    "weight_sram_writes",     "activation_sram_reads", "activation_sram_writes", "state_sram_reads",
    "state_sram_writes",      "mac_ops",               "enabled_pe_cycles"};

Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double mj_per(double joules, std::uint64_t n) { return n == 0 ? 0.0 : joules * 1e3 / static_cast<double>(n); }

}  // namespace

// ---- config -----------------------------------------------------------------

ModelConfig model_from_json(const Json& j) {
  require_object(j, "model");
  reject_unknown(j,
                 {"preset", "name", "num_layers", "hidden_dim", "ffn_dim", "num_heads", "head_dim", "value_factor",
                  "vocab_size", "weight_precision", "seed", "rope_base"},
                 "model");
  ModelConfig m;
  std::string preset;
  read_string(j, "preset", preset);
  if (!preset.empty()) m = workload::model_preset(preset);
  read_string(j, "name", m.name);
  read_u64(j, "num_layers", m.num_layers);
  read_u64(j, "hidden_dim", m.hidden_dim);
  read_u64(j, "ffn_dim", m.ffn_dim);
  read_u64(j, "num_heads", m.num_heads);
  read_u64(j, "head_dim", m.head_dim);
  read_u64(j, "value_factor", m.value_factor);
  read_u64(j, "vocab_size", m.vocab_size);
  read_u64(j, "seed", m.seed);
  read_double(j, "rope_base", m.rope_base);
  std::string precision;
  read_string(j, "weight_precision", precision);
  if (!precision.empty()) m.weight_precision = quant::weight_format_from_string(precision);
  m.validate();
  return m;
}

ScenarioConfig scenario_from_json(const Json& j) {
  require_object(j, "scenario");
  reject_unknown(j, {"preset", "name", "prompt_tokens", "output_tokens", "arch"}, "scenario");
  ScenarioConfig s;
  std::string preset;
  read_string(j, "preset", preset);
  if (!preset.empty()) s = workload::scenario_preset(preset);
  read_string(j, "name", s.name);
  read_u64(j, "prompt_tokens", s.prompt_tokens);
  read_u64(j, "output_tokens", s.output_tokens);
  std::string arch;
  read_string(j, "arch", arch);
  if (!arch.empty()) baselines::arch_from_string(arch);
  s.validate();
  return s;
}

core::HsaConfig hsa_from_json(const Json& j) {
  require_object(j, "hsa");
  reject_unknown(j,
                 {"pe_rows", "pe_cols", "clusters", "clock_hz", "accumulator_width_bits",
                  "weight_sram_bytes_per_cluster", "activation_sram_bytes", "mmm_fill_cycles", "mmm_drain_cycles",
                  "mvm_drain_cycles", "ppu_lanes", "mvm_max_segment"},
                 "hsa");
  core::HsaConfig c;
  read_int(j, "pe_rows", c.pe_rows);
  read_int(j, "pe_cols", c.pe_cols);
  read_int(j, "clusters", c.clusters);
  read_double(j, "clock_hz", c.clock_hz);
  read_int(j, "accumulator_width_bits", c.accumulator_width_bits);
  read_int(j, "weight_sram_bytes_per_cluster", c.weight_sram_bytes_per_cluster);
  read_int(j, "activation_sram_bytes", c.activation_sram_bytes);
  read_int(j, "mmm_fill_cycles", c.mmm_fill_cycles);
  read_int(j, "mmm_drain_cycles", c.mmm_drain_cycles);
  read_int(j, "mvm_drain_cycles", c.mvm_drain_cycles);
  read_int(j, "ppu_lanes", c.ppu_lanes);
  read_int(j, "mvm_max_segment", c.mvm_max_segment);
  c.validate();
  return c;
}

mem::MemConfig mem_from_json(const Json& j) {
  require_object(j, "mem");
  reject_unknown(j,
                 {"dram_bandwidth_bytes_per_s", "dram_energy_pj_per_byte", "sram_energy_pj_per_byte", "mac_energy_pj",
                  "static_power_w"},
                 "mem");
  mem::MemConfig c;
  read_double(j, "dram_bandwidth_bytes_per_s", c.dram_bandwidth_bytes_per_s);
  read_double(j, "dram_energy_pj_per_byte", c.dram_energy_pj_per_byte);
  read_double(j, "sram_energy_pj_per_byte", c.sram_energy_pj_per_byte);
  read_double(j, "mac_energy_pj", c.mac_energy_pj);
  read_double(j, "static_power_w", c.static_power_w);
  c.validate();
  return c;
}

Json to_json(const ModelConfig& m) {
  return {{"name", m.name},
          {"num_layers", m.num_layers},
          {"hidden_dim", m.hidden_dim},
          {"ffn_dim", m.ffn_dim},
          {"num_heads", m.num_heads},
          {"head_dim", m.head_dim},
          {"value_factor", m.value_factor},
          {"vocab_size", m.vocab_size},
          {"weight_precision", quant::to_string(m.weight_precision)},
          {"seed", m.seed},
          {"rope_base", m.rope_base}};
}

Json to_json(const ScenarioConfig& s) {
  return {{"name", s.name}, {"prompt_tokens", s.prompt_tokens}, {"output_tokens", s.output_tokens}};
}

Json to_json(const core::HsaConfig& c) {
  return {{"pe_rows", c.pe_rows},
          {"pe_cols", c.pe_cols},
          {"clusters", c.clusters},
          {"clock_hz", c.clock_hz},
          {"accumulator_width_bits", c.accumulator_width_bits},
          {"weight_sram_bytes_per_cluster", c.weight_sram_bytes_per_cluster},
          {"activation_sram_bytes", c.activation_sram_bytes},
          {"mmm_fill_cycles", c.mmm_fill_cycles},
          {"mmm_drain_cycles", c.mmm_drain_cycles},
          {"mvm_drain_cycles", c.mvm_drain_cycles},
          {"ppu_lanes", c.ppu_lanes},
          {"mvm_max_segment", c.mvm_max_segment}};
}

Json to_json(const mem::MemConfig& c) {
  return {{"dram_bandwidth_bytes_per_s", c.dram_bandwidth_bytes_per_s},
          {"dram_energy_pj_per_byte", c.dram_energy_pj_per_byte},
          {"sram_energy_pj_per_byte", c.sram_energy_pj_per_byte},
          {"mac_energy_pj", c.mac_energy_pj},
          {"static_power_w", c.static_power_w}};
}

Json parse_json_file(std::string_view path) {
  const auto bytes = io::read_file(std::filesystem::path(path));
  try {
    return Json::parse(bytes.begin(), bytes.end());
  } catch (const Json::parse_error& e) {
    config_error(std::string(path) + ": " + e.what());
  }
}

ModelConfig load_model(std::string_view preset_or_path) {
  if (!looks_like_file(preset_or_path)) return workload::model_preset(preset_or_path);
  return model_from_json(parse_json_file(preset_or_path));
}

ScenarioConfig load_scenario(std::string_view preset_or_path, std::optional<std::string>* arch) {
  if (!looks_like_file(preset_or_path)) return workload::scenario_preset(preset_or_path);
  const Json j = parse_json_file(preset_or_path);
  ScenarioConfig s = scenario_from_json(j);
  if (arch && j.contains("arch")) *arch = j["arch"].get<std::string>();
  return s;
}

void load_hardware(std::string_view path, core::HsaConfig& hsa, mem::MemConfig& mem_cfg) {
  const Json j = parse_json_file(path);
  require_object(j, "hardware");
  reject_unknown(j, {"hsa", "mem"}, "hardware");
  if (j.contains("hsa")) hsa = hsa_from_json(j["hsa"]);
  if (j.contains("mem")) mem_cfg = mem_from_json(j["mem"]);
}

Json config_json(const RunConfig& rc) {
  return {{"model", to_json(rc.model)},
          {"scenario", to_json(rc.scenario)},
          {"hsa", to_json(rc.hsa)},
          {"mem", to_json(rc.mem)},
          {"arch", baselines::to_string(rc.arch)},
          {"baseline", {{"conv_sa_decode_exponent", rc.params.conv_sa_decode_exponent}}},
          {"seed", rc.seed}};
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

// ---- reports ----------------------------------------------------------------

Json phase_json(const PhaseReport& p, core::Dataflow mode, const core::HsaConfig& hsa) {
  Json ops = Json::array();
  for (const auto& op : p.cost.ops) {
    ops.push_back({{"name", op.name},
                   {"kind", workload::to_string(op.kind)},
                   {"cycles", cycles_json(op.cycles)},
                   {"ledger", ledger_json(op.ledger)},
                   {"ppu_cycles", op.ppu_cycles}});
  }
  const auto& c = p.cost.cycles;
  return {{"steps", p.steps},
          {"dataflow", mode == core::Dataflow::kMmm ? "mmm" : "mvm"},
          {"cycles", cycles_json(c)},
          {"timing",
           {{"compute_seconds", p.timing.compute_seconds},
            {"memory_seconds", p.timing.memory_seconds},
            {"seconds", p.timing.seconds},
            {"memory_bound", p.timing.memory_bound}}},
          {"ledger", ledger_json(p.cost.ledger)},
          {"energy_j",
           {{"dram", p.energy.dram_j},
            {"sram", p.energy.sram_j},
            {"mac", p.energy.mac_j},
            {"static", p.energy.static_j},
            {"total", p.energy.total()}}},
          {"utilization",
           {{"dataflow", core::dataflow_utilization(c)},
            {"array", core::utilization(c, mode, p.cost.ledger.mac_ops, hsa)}}},
          {"ppu_cycles", p.cost.ppu_cycles},
          {"ops", std::move(ops)}};
}

Json external_constants() {
  return {{"label",
           "external constants: published silicon and comparison figures, carried for annotation only; "
           "nothing in this block is simulated"},
          {"area_mm2", 0.636},
          {"power_w", 0.108},
          {"peak_tops", 0.256},
          {"peak_tops_per_w", 2.37},
          {"prefill_mj_per_token", 0.773},
          {"decode_mj_per_token", 24.06},
          {"vector_unit_prefill_energy_overhead", 0.36},
          {"tokens_per_s",
           {{"liso", {{"conv-sa", 90.2}, {"vector", 138.3}, {"hsa", 138.3}}},
            {"silo", {{"conv-sa", 11.8}, {"vector", 37.6}, {"hsa", 37.6}}}}},
          {"tokens_per_j",
           {{"liso", {{"conv-sa", 1060.7}, {"vector", 719.1}, {"hsa", 1060.7}}},
            {"silo", {{"conv-sa", 21.83}, {"vector", 21.6}, {"hsa", 21.83}}}}}};
}

Json simulate_report(const ScenarioResult& r, const RunConfig& rc, const FunctionalSummary* functional) {
  const Json cfg = config_json(rc);
  const auto params = workload::parameter_count(rc.model);
  const std::uint64_t out_tokens = rc.scenario.output_tokens;
  const double area = external_constants()["area_mm2"].get<double>();

  Json rep;
  rep["schema"] = kReportSchema;
  rep["metadata"] = {{"tool", "hsasim"},
                     {"config_hash", hex64(fnv1a64(cfg.dump()))},
                     {"seed", rc.seed},
                     {"arch", r.arch}};
  rep["config"] = cfg;
  rep["model_stats"] = {{"parameters", params.total},
                        {"matrix_weights", params.matrix_weights},
                        {"embedding", params.embedding}};
  rep["phases"] = {{"prefill", phase_json(r.prefill, core::Dataflow::kMmm, rc.hsa)},
                   {"decode", phase_json(r.decode, core::Dataflow::kMvm, rc.hsa)}};
  rep["totals"] = {{"tokens", rc.scenario.total_tokens()},
                   {"seconds", r.seconds},
                   {"joules", r.joules},
                   {"tokens_per_s", r.tokens_per_s},
                   {"tokens_per_j", r.tokens_per_j},
                   {"decode_fraction", r.decode_fraction},
                   {"prefill_mj_per_prompt_token", mj_per(r.prefill.energy.total(), rc.scenario.prompt_tokens)},
                   {"decode_mj_per_token", mj_per(r.decode.energy.total(), out_tokens)}};
  rep["derived"] = {
      {"peak_tops", core::peak_ops_per_s(rc.hsa) / 1e12},
      {"mvm_weight_stream_demand_bytes_per_s", core::mvm_stream_demand_bytes_per_s(rc.hsa, rc.model.weight_precision)},
      {"dram_bandwidth_bytes_per_s", rc.mem.dram_bandwidth_bytes_per_s},
      {"decode_dram_weight_bytes_per_token",
       out_tokens == 0 ? 0 : r.decode.cost.ledger.dram_weight_bytes / out_tokens},
      {"tokens_per_s_per_mm2_at_external_area", r.tokens_per_s / area}};
  rep["notes"] = Json::array({
      "phase latency = max(compute, DRAM transfer); weight prefetch fully overlaps compute",
      "stall cycles are the exposed DRAM time of a memory-bound phase",
      "retention state is held on chip; it adds SRAM traffic only",
      "post-processing unit work overlaps the array; ppu_cycles are informational",
      "tokens_per_s counts prompt plus output tokens",
  });
  rep["external_constants"] = external_constants();

  if (functional) {
    Json sq = Json::array();
    for (double v : functional->decode_sqnr_db) sq.push_back(finite_or_null(v));
    rep["functional"] = {{"prompt_tokens", functional->prompt_tokens},
                         {"output_tokens", functional->output_tokens},
                         {"prefill_matches_analytic", functional->prefill_matches_analytic},
                         {"decode_matches_analytic", functional->decode_matches_analytic},
                         {"prefill_sqnr_db", finite_or_null(functional->prefill_sqnr_db)},
                         {"decode_sqnr_db", std::move(sq)},
                         {"decode_tokens", functional->decode_tokens},
                         {"note", "SQNR of simulated logits against the float reference; informational"}};
  }
  return rep;
}

namespace {

bool close(double a, double b) {
  return std::fabs(a - b) <= 1e-12 * std::max({1.0, std::fabs(a), std::fabs(b)});
}

const Json& at(const Json& j, const char* key, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) invariant("missing '" + std::string(key) + "' in " + where);
  return *it;
}

std::uint64_t u64(const Json& j, const char* key, const std::string& where) {
  const Json& v = at(j, key, where);
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    invariant("'" + std::string(key) + "' in " + where + " is not a count");
  }
  return v.get<std::uint64_t>();
}

double num(const Json& j, const char* key, const std::string& where) {
  const Json& v = at(j, key, where);
  if (!v.is_number()) invariant("'" + std::string(key) + "' in " + where + " is not a number");
  return v.get<double>();
}

void expect(double got, double want, const std::string& what) {
  if (!close(got, want)) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.17g vs %.17g)", got, want);
    invariant(what + " does not match its recomputation" + buf);
  }
}

struct PhaseCheck {
  double seconds = 0.0;
  double joules = 0.0;
};

PhaseCheck verify_phase(const Json& p, const std::string& name, const core::HsaConfig& hsa,
                        const mem::MemConfig& mc) {
  const Json& cyc = at(p, "cycles", name);
  const Json& led = at(p, "ledger", name);
  const std::string cw = name + ".cycles", lw = name + ".ledger";

  // Per-op items must sum to the phase totals.
  std::uint64_t sums[4] = {0, 0, 0, 0};
  std::vector<std::uint64_t> ledger_sums(std::size(kLedgerFields), 0);
  for (const auto& op : at(p, "ops", name)) {
    const std::string ow = name + ".ops";
    const Json& oc = at(op, "cycles", ow);
    sums[0] += u64(oc, "compute", ow);
    sums[1] += u64(oc, "fill", ow);
    sums[2] += u64(oc, "drain", ow);
    for (std::size_t i = 0; i < std::size(kLedgerFields); ++i) {
      ledger_sums[i] += u64(at(op, "ledger", ow), kLedgerFields[i], ow);
    }
  }
  const std::uint64_t compute = u64(cyc, "compute", cw), fill = u64(cyc, "fill", cw), drain = u64(cyc, "drain", cw);
  const std::uint64_t stall = u64(cyc, "stall", cw);
  if (sums[0] != compute || sums[1] != fill || sums[2] != drain) invariant(name + " op cycles do not sum to the phase");
  if (u64(cyc, "total", cw) != compute + fill + drain + stall) invariant(name + " cycle total is inconsistent");
  for (std::size_t i = 0; i < std::size(kLedgerFields); ++i) {
    if (ledger_sums[i] != u64(led, kLedgerFields[i], lw)) {
      invariant(name + " op ledgers do not sum to the phase field " + kLedgerFields[i]);
    }
  }
  const std::uint64_t dram = u64(led, "dram_weight_bytes", lw) + u64(led, "dram_activation_bytes", lw) +
                             u64(led, "dram_state_bytes", lw);
  std::uint64_t sram = 0;
  for (const char* f : {"weight_sram_reads", "weight_sram_writes", "activation_sram_reads", "activation_sram_writes",
                        "state_sram_reads", "state_sram_writes"}) {
    sram += u64(led, f, lw);
  }
  if (dram != u64(led, "dram_bytes", lw) || sram != u64(led, "sram_bytes", lw)) {
    invariant(name + " byte totals are inconsistent");
  }

  // Roofline latency from cycles and DRAM bytes.
  const std::uint64_t busy = compute + fill + drain;
  const double compute_s = static_cast<double>(busy) / hsa.clock_hz;
  const double memory_s = static_cast<double>(dram) / mc.dram_bandwidth_bytes_per_s;
  const double seconds = std::max(compute_s, memory_s);
  const Json& t = at(p, "timing", name);
  const std::string tw = name + ".timing";
  expect(num(t, "compute_seconds", tw), compute_s, tw + ".compute_seconds");
  expect(num(t, "memory_seconds", tw), memory_s, tw + ".memory_seconds");
  expect(num(t, "seconds", tw), seconds, tw + ".seconds");
  const bool memory_bound = memory_s > compute_s;
  if (at(t, "memory_bound", tw) != memory_bound) invariant(tw + ".memory_bound is inconsistent");
  std::uint64_t want_stall = 0;
  if (memory_bound) {
    const auto mem_cycles = static_cast<std::uint64_t>(std::ceil(memory_s * hsa.clock_hz));
    want_stall = mem_cycles > busy ? mem_cycles - busy : 0;
  }
  if (stall != want_stall) invariant(name + " stall cycles do not match the roofline");

  // Energy from ledger counts.
  const Json& e = at(p, "energy_j", name);
  const std::string ew = name + ".energy_j";
  const double dram_j = static_cast<double>(dram) * mc.dram_energy_pj_per_byte * 1e-12;
  const double sram_j = static_cast<double>(sram) * mc.sram_energy_pj_per_byte * 1e-12;
  const double mac_j = static_cast<double>(u64(led, "mac_ops", lw)) * mc.mac_energy_pj * 1e-12;
  const double static_j = mc.static_power_w * seconds;
  expect(num(e, "dram", ew), dram_j, ew + ".dram");
  expect(num(e, "sram", ew), sram_j, ew + ".sram");
  expect(num(e, "mac", ew), mac_j, ew + ".mac");
  expect(num(e, "static", ew), static_j, ew + ".static");
  const double total = dram_j + sram_j + mac_j + static_j;
  expect(num(e, "total", ew), total, ew + ".total");

  const double cycles_total = static_cast<double>(busy + stall);
  const double dataflow_u = cycles_total == 0.0 ? 0.0 : 1.0 - static_cast<double>(stall) / cycles_total;
  expect(num(at(p, "utilization", name), "dataflow", name), dataflow_u, name + ".utilization.dataflow");
  return {seconds, total};
}

}  // namespace

void verify_report(const Json& rep) {
  if (!rep.is_object() || rep.value("schema", std::string()) != kReportSchema) invariant("unknown schema");
  const Json& cfg = at(rep, "config", "report");
  core::HsaConfig hsa;
  mem::MemConfig mc;
  ScenarioConfig sc;
  try {
    hsa = hsa_from_json(at(cfg, "hsa", "config"));
    mc = mem_from_json(at(cfg, "mem", "config"));
    sc = scenario_from_json(at(cfg, "scenario", "config"));
  } catch (const Error& e) {
    invariant(std::string("embedded config is invalid: ") + e.what());
  }
  if (at(at(rep, "metadata", "report"), "config_hash", "metadata") != hex64(fnv1a64(cfg.dump()))) {
    invariant("config_hash does not match the embedded config");
  }

  const Json& phases = at(rep, "phases", "report");
  const PhaseCheck pre = verify_phase(at(phases, "prefill", "phases"), "prefill", hsa, mc);
  const PhaseCheck dec = verify_phase(at(phases, "decode", "phases"), "decode", hsa, mc);
  if (u64(at(phases, "decode", "phases"), "steps", "decode") != sc.output_tokens) {
    invariant("decode steps differ from output_tokens");
  }

  const Json& tot = at(rep, "totals", "report");
  const double seconds = pre.seconds + dec.seconds;
  const double joules = pre.joules + dec.joules;
  const auto tokens = static_cast<double>(sc.total_tokens());
  if (u64(tot, "tokens", "totals") != sc.total_tokens()) invariant("token count differs from the scenario");
  expect(num(tot, "seconds", "totals"), seconds, "totals.seconds");
  expect(num(tot, "joules", "totals"), joules, "totals.joules");
  expect(num(tot, "tokens_per_s", "totals"), seconds > 0.0 ? tokens / seconds : 0.0, "totals.tokens_per_s");
  expect(num(tot, "tokens_per_j", "totals"), joules > 0.0 ? tokens / joules : 0.0, "totals.tokens_per_j");
  expect(num(tot, "decode_fraction", "totals"), seconds > 0.0 ? dec.seconds / seconds : 0.0,
         "totals.decode_fraction");
  expect(num(tot, "decode_mj_per_token", "totals"), mj_per(dec.joules, sc.output_tokens),
         "totals.decode_mj_per_token");
  expect(num(tot, "prefill_mj_per_prompt_token", "totals"), mj_per(pre.joules, sc.prompt_tokens),
         "totals.prefill_mj_per_prompt_token");
}

namespace {

struct CompareRow {
  const ScenarioResult* r;
  double speed_vs_hsa;
  double prefill_energy_vs_hsa;
};

std::vector<CompareRow> compare_rows(const std::vector<ScenarioResult>& rows) {
  std::vector<CompareRow> out;
  for (const auto& r : rows) {
    const ScenarioResult* hsa = nullptr;
    for (const auto& o : rows) {
      if (o.arch == "hsa" && o.scenario == r.scenario) hsa = &o;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.push_back({&r, hsa && hsa->tokens_per_s > 0.0 ? r.tokens_per_s / hsa->tokens_per_s : nan,
                   hsa && hsa->prefill.energy.total() > 0.0 ? r.prefill.energy.total() / hsa->prefill.energy.total()
                                                           : nan});
  }
  return out;
}

}  // namespace

Json compare_json(const std::vector<ScenarioResult>& rows, const RunConfig& rc) {
  Json list = Json::array();
  for (const auto& c : compare_rows(rows)) {
    const ScenarioResult& r = *c.r;
    list.push_back({{"scenario", r.scenario.name},
                    {"arch", r.arch},
                    {"prompt_tokens", r.scenario.prompt_tokens},
                    {"output_tokens", r.scenario.output_tokens},
                    {"tokens_per_s", r.tokens_per_s},
                    {"tokens_per_j", r.tokens_per_j},
                    {"prefill_seconds", r.prefill.timing.seconds},
                    {"decode_seconds", r.decode.timing.seconds},
                    {"prefill_joules", r.prefill.energy.total()},
                    {"decode_joules", r.decode.energy.total()},
                    {"decode_fraction", r.decode_fraction},
                    {"decode_mj_per_token", mj_per(r.decode.energy.total(), r.scenario.output_tokens)},
                    {"decode_stall_cycles", r.decode.cost.cycles.stall},
                    {"tokens_per_s_vs_hsa", finite_or_null(c.speed_vs_hsa)},
                    {"prefill_energy_vs_hsa", finite_or_null(c.prefill_energy_vs_hsa)}});
  }
  Json cfg = config_json(rc);
  cfg.erase("scenario");
  cfg.erase("arch");
  return {{"schema", kCompareSchema},
          {"metadata", {{"tool", "hsasim"}, {"config_hash", hex64(fnv1a64(cfg.dump()))}, {"seed", rc.seed}}},
          {"config", cfg},
          {"rows", std::move(list)},
          {"external_constants", external_constants()}};
}

std::string compare_csv(const std::vector<ScenarioResult>& rows) {
  std::string out =
      "scenario,arch,prompt_tokens,output_tokens,tokens_per_s,tokens_per_j,prefill_seconds,decode_seconds,"
      "prefill_joules,decode_joules,decode_fraction,decode_mj_per_token,decode_stall_cycles,tokens_per_s_vs_hsa,"
      "prefill_energy_vs_hsa\n";
  char buf[512];
  for (const auto& c : compare_rows(rows)) {
    const ScenarioResult& r = *c.r;
    std::snprintf(buf, sizeof buf,
                  "%s,%s,%" PRIu64 ",%" PRIu64 ",%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%" PRIu64
                  ",%.10g,%.10g\n",
                  r.scenario.name.c_str(), r.arch.c_str(), r.scenario.prompt_tokens, r.scenario.output_tokens,
                  r.tokens_per_s, r.tokens_per_j, r.prefill.timing.seconds, r.decode.timing.seconds,
                  r.prefill.energy.total(), r.decode.energy.total(), r.decode_fraction,
                  mj_per(r.decode.energy.total(), r.scenario.output_tokens), r.decode.cost.cycles.stall,
                  c.speed_vs_hsa, c.prefill_energy_vs_hsa);
    out += buf;
  }
  return out;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace hsa::report
