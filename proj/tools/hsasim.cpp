// hsasim: quantize weights, simulate scenarios, compare architectures.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hsa/baselines.hpp"
#include "hsa/core.hpp"
#include "hsa/quant.hpp"
#include "hsa/report.hpp"
#include "hsa/tensor_io.hpp"
#include "hsa/workload.hpp"

namespace {

using namespace hsa;
using report::Json;

enum Exit { kOk = 0, kConfig = 2, kInvariant = 3, kIo = 4 };

int exit_code(ErrorCode c) {
  switch (c) {
    case ErrorCode::kIoError:
    case ErrorCode::kBadMagic:
    case ErrorCode::kVersionMismatch:
    case ErrorCode::kTruncatedFile:
    case ErrorCode::kInvalidCode:
      return kIo;
    case ErrorCode::kInvariantViolation:
    case ErrorCode::kAccumulatorOverflow:
    case ErrorCode::kSramOverflow:
      return kInvariant;
    default:
      return kConfig;
  }
}

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  io::write_file(out, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::size_t end = comma == std::string::npos ? s.size() : comma;
    if (end > start) parts.push_back(s.substr(start, end - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return parts;
}

struct HardwareFlags {
  std::string hardware;
  double mem_bandwidth = 0.0;
  double conv_sa_exponent = 1.0;

  void add(CLI::App* app) {
    app->add_option("--hardware", hardware, "JSON file with optional \"hsa\" and \"mem\" blocks");
    app->add_option("--mem-bandwidth", mem_bandwidth, "DRAM bandwidth in bytes/s (overrides --hardware)");
    app->add_option("--conv-sa-exponent", conv_sa_exponent, "conv-sa decode compute scale exponent (>= 1)");
  }

  void apply(report::RunConfig& rc) const {
    if (!hardware.empty()) report::load_hardware(hardware, rc.hsa, rc.mem);
    if (mem_bandwidth != 0.0) rc.mem.dram_bandwidth_bytes_per_s = mem_bandwidth;
    rc.params.conv_sa_decode_exponent = conv_sa_exponent;
    rc.hsa.validate();
    rc.mem.validate();
  }
};

// ---- quantize ---------------------------------------------------------------

struct QuantizeArgs {
  std::string in;
  std::string out;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::uint64_t group_size = quant::kDefaultGroupSize;
  std::string policy = "caller";
  float global_scale = 1.0f;
  bool random = false;
  std::uint64_t seed = 0;
};

int cmd_quantize(const QuantizeArgs& a) {
  if (a.rows == 0 || a.cols == 0) fail(ErrorCode::kConfigError, "--rows and --cols must be positive");
  if (a.random == !a.in.empty()) fail(ErrorCode::kConfigError, "give exactly one of --in and --random");

  Matrix<float> w(a.rows, a.cols);
  if (a.random) {
    std::mt19937_64 rng(a.seed);
    std::normal_distribution<float> dist(0.0f, 1.0f);
    for (float& x : w.data) x = dist(rng);
  } else {
    const auto bytes = io::read_file(a.in);
    if (bytes.size() != w.size() * sizeof(float)) {
      fail(ErrorCode::kShapeMismatch, a.in + ": expected " + std::to_string(w.size() * sizeof(float)) +
                                          " bytes of little-endian f32, found " + std::to_string(bytes.size()));
    }
    std::memcpy(w.data.data(), bytes.data(), bytes.size());
  }

  quant::QuantizeOptions opt;
  opt.group_size = a.group_size;
  opt.global_scale = a.global_scale;
  if (a.policy == "caller") {
    opt.policy = quant::ScalePolicy::kCaller;
  } else if (a.policy == "tensor-max") {
    opt.policy = quant::ScalePolicy::kTensorMaxPow2;
  } else {
    fail(ErrorCode::kConfigError, "unknown --scale-policy '" + a.policy + "' (caller, tensor-max)");
  }
  const quant::MxInt4Tensor t = quant::quantize_mxint4(w, opt);
  const Matrix<double> back = quant::dequantize_oracle(t);
  double max_err = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) max_err = std::max(max_err, std::fabs(back.data[i] - w.data[i]));

  std::uint64_t clamped_codes = 0;
  for (std::size_t g = 0; g < t.groups(); ++g)
    for (std::size_t j = 0; j < t.cols; ++j) {
      const int c = t.code(g, j);
      clamped_codes += (c == 0 || c == quant::kMaxCode) ? 1 : 0;
    }

  const auto bytes = io::encode_weights(t);
  if (!a.out.empty()) io::write_file(a.out, bytes);
  Json summary = {{"rows", t.rows},
                  {"cols", t.cols},
                  {"group_size", t.group_size},
                  {"tensor_scale", t.tensor_scale},
                  {"file_bytes", bytes.size()},
                  {"bytes_per_weight", static_cast<double>(bytes.size() - io::kWeightHeaderBytes) /
                                           static_cast<double>(t.element_count())},
                  {"max_abs_error", max_err},
                  {"codes_at_range_limits", clamped_codes},
                  {"out", a.out}};
  std::cout << report::dump(summary);
  return kOk;
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string model = "retnet-1.3b-like";
  std::string scenario = "liso";
  std::string arch;
  std::string out;
  std::optional<std::uint64_t> seed;  // defaults to the model config's seed
  bool functional = false;
  HardwareFlags hw;
};

report::FunctionalSummary run_functional_check(const report::RunConfig& rc) {
  const workload::Model model = workload::build_model(rc.model, rc.seed);
  std::mt19937_64 rng(rc.seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_int_distribution<std::uint32_t> tok(0, static_cast<std::uint32_t>(rc.model.vocab_size - 1));
  std::vector<std::uint32_t> prompt(rc.scenario.prompt_tokens);
  for (auto& t : prompt) t = tok(rng);

  const workload::FunctionalRun run = workload::run_functional(model, prompt, rc.scenario.output_tokens, rc.hsa);

  report::FunctionalSummary s;
  s.prompt_tokens = prompt.size();
  s.output_tokens = rc.scenario.output_tokens;
  const workload::PhaseCost pre = workload::prefill_cost(model.graph, prompt.size(), rc.hsa);
  const workload::PhaseCost dec = workload::decode_step_cost(model.graph, rc.hsa);
  s.prefill_matches_analytic = pre.ledger == run.prefill.ledger && pre.cycles == run.prefill.cycles;
  s.decode_matches_analytic = dec.ledger.scaled(s.output_tokens) == run.decode.ledger &&
                              dec.cycles.scaled(s.output_tokens) == run.decode.cycles;

  workload::SequenceState ref_state;
  const auto ref_logits = workload::reference_prefill(model, prompt, &ref_state);
  s.prefill_sqnr_db = workload::sqnr_db(ref_logits.back(), run.prefill_logits);
  for (std::size_t t = 0; t < run.decode_tokens.size(); ++t) {
    const auto ref = workload::reference_decode_step(model, ref_state, run.decode_tokens[t]);
    s.decode_sqnr_db.push_back(workload::sqnr_db(ref, run.decode_logits[t]));
  }
  s.decode_tokens = run.decode_tokens;
  return s;
}

int cmd_simulate(const SimulateArgs& a) {
  report::RunConfig rc;
  rc.model = report::load_model(a.model);
  std::optional<std::string> scenario_arch;
  rc.scenario = report::load_scenario(a.scenario, &scenario_arch);
  std::string arch = a.arch.empty() ? scenario_arch.value_or("hsa") : a.arch;
  rc.arch = baselines::arch_from_string(arch);
  rc.seed = a.seed.value_or(rc.model.seed);
  a.hw.apply(rc);

  std::optional<report::FunctionalSummary> functional;
  if (a.functional) {
    if (rc.arch != baselines::ArchKind::kHsa) fail(ErrorCode::kConfigError, "--functional runs the hsa only");
    functional = run_functional_check(rc);
  }

  const auto result = baselines::model_scenario(rc.arch, rc.model, rc.scenario, rc.hsa, rc.mem, rc.params);
  const Json rep = report::simulate_report(result, rc, functional ? &*functional : nullptr);
  report::verify_report(rep);
  // Round trip through text so the check covers exactly what gets written.
  const std::string text = report::dump(rep);
  report::verify_report(Json::parse(text));
  emit(text, a.out);

  if (functional && !(functional->prefill_matches_analytic && functional->decode_matches_analytic)) {
    fail(ErrorCode::kInvariantViolation, "functional run diverged from the analytic cost model");
  }
  return kOk;
}

// ---- compare ----------------------------------------------------------------

struct CompareArgs {
  std::string model = "retnet-1.3b-like";
  std::string scenarios = "liso,silo";
  std::string archs = "conv-sa,vector,hsa";
  std::string out;
  std::string format;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  HardwareFlags hw;
};

int cmd_compare(const CompareArgs& a) {
  report::RunConfig rc;
  rc.model = report::load_model(a.model);
  rc.seed = a.seed;
  a.hw.apply(rc);
  std::vector<workload::ScenarioConfig> scenarios;
  for (const auto& s : split(a.scenarios)) scenarios.push_back(report::load_scenario(s));
  std::vector<baselines::ArchKind> archs;
  for (const auto& s : split(a.archs)) archs.push_back(baselines::arch_from_string(s));
  if (scenarios.empty() || archs.empty()) fail(ErrorCode::kConfigError, "no scenarios or architectures given");

  std::string format = a.format;
  if (format.empty()) format = a.out.ends_with(".json") ? "json" : "csv";
  if (format != "csv" && format != "json") fail(ErrorCode::kConfigError, "--format must be csv or json");

  const auto rows = baselines::compare(rc.model, scenarios, archs, rc.hsa, rc.mem, rc.params, a.threads);
  emit(format == "csv" ? report::compare_csv(rows) : report::dump(report::compare_json(rows, rc)), a.out);
  return kOk;
}

// ---- selftest ---------------------------------------------------------------

int cmd_selftest() {
  const core::HsaConfig cfg;
  std::uint64_t cases = 0, failures = 0;

  // Every (code, mantissa, activation) through the bucket/shifter/drain path.
  quant::Int8Tensor x;
  x.shape = {1};
  x.values = {0};
  for (int code = 0; code <= quant::kMaxCode; ++code) {
    for (int m = quant::kMinMantissa; m <= quant::kMaxMantissa; ++m) {
      quant::MxInt4Tensor w = quant::MxInt4Tensor::zeros(1, 1);
      w.set_mantissa(0, 0, m);
      w.set_code(0, 0, code);
      for (int a = -128; a <= 127; ++a) {
        x.values[0] = static_cast<std::int8_t>(a);
        const auto r = core::run_mvm(w, x, cfg);
        const std::int64_t want = static_cast<std::int64_t>(m) * a * (std::int64_t{1} << code);
        ++cases;
        if (r.out.at(0) != want) ++failures;
      }
    }
  }
  std::printf("dequant scalar sweep: %" PRIu64 " cases, %" PRIu64 " mismatches\n", cases, failures);

  bool cycles_ok = true;
  for (std::size_t k : {1u, 16u, 100u, 256u}) {
    for (bool tr : {false, true}) {
      const auto p = core::probe_mmm_tile(k, tr, cfg);
      const bool ok = p.drain_cycles == static_cast<std::uint64_t>(cfg.mmm_drain_cycles) &&
                      p.busy_cycles == k + static_cast<std::uint64_t>(cfg.mmm_fill_cycles);
      cycles_ok = cycles_ok && ok;
      std::printf("mmm tile k=%zu%s: busy %" PRIu64 " drain %" PRIu64 " %s\n", k, tr ? " (transposed)" : "",
                  p.busy_cycles, p.drain_cycles, ok ? "ok" : "MISMATCH");
    }
  }
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> mant(quant::kMinMantissa, quant::kMaxMantissa), code(0, quant::kMaxCode),
      act(-128, 127);
  for (auto [c_out, k] : {std::pair<std::size_t, std::size_t>{64, 128}, {100, 300}, {16, 20000}}) {
    quant::MxInt4Tensor w = quant::MxInt4Tensor::zeros(c_out, k);
    for (std::size_t i = 0; i < c_out; ++i)
      for (std::size_t j = 0; j < k; ++j) w.set_mantissa(i, j, mant(rng));
    // Low codes only, so long rows stay inside the 32-bit accumulators.
    for (std::size_t g = 0; g < w.groups(); ++g)
      for (std::size_t j = 0; j < k; ++j) w.set_code(g, j, code(rng) % 4);
    quant::Int8Tensor v;
    v.shape = {k};
    for (std::size_t j = 0; j < k; ++j) v.values.push_back(static_cast<std::int8_t>(act(rng)));
    const auto r = core::run_mvm(w, v, cfg);
    const bool ok = r.cycles == core::mvm_cycles(c_out, k, cfg);
    cycles_ok = cycles_ok && ok;
    std::printf("mvm %zux%zu: %" PRIu64 " cycles %s\n", c_out, k, r.cycles.total(), ok ? "ok" : "MISMATCH");
  }
  const bool pass = failures == 0 && cycles_ok;
  std::printf("selftest %s\n", pass ? "PASS" : "FAIL");
  return pass ? kOk : kInvariant;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid systolic array accelerator simulator"};
  app.require_subcommand(1);

  QuantizeArgs qa;
  auto* q = app.add_subcommand("quantize", "Quantize a f32 matrix to an MXINT4 weight file");
  q->add_option("--in", qa.in, "raw little-endian f32 matrix, row-major [rows x cols]");
  q->add_flag("--random", qa.random, "use a seeded standard Gaussian matrix instead of --in");
  q->add_option("--rows", qa.rows, "output channels")->required();
  q->add_option("--cols", qa.cols, "input dimension")->required();
  q->add_option("--group-size", qa.group_size, "output channels per shift group");
  q->add_option("--scale-policy", qa.policy, "caller or tensor-max");
  q->add_option("--global-scale", qa.global_scale, "global scale for the caller policy");
  q->add_option("--seed", qa.seed, "seed for --random");
  q->add_option("--out", qa.out, "weight file to write");

  SimulateArgs sa;
  auto* s = app.add_subcommand("simulate", "Run one scenario on one architecture and emit a JSON report");
  s->add_option("--model", sa.model, "model preset (retnet-1.3b-like, toy) or JSON file");
  s->add_option("--scenario", sa.scenario, "scenario preset (liso, silo) or JSON file");
  s->add_option("--arch", sa.arch, "hsa, conv-sa or vector");
  s->add_option("--out", sa.out, "report path (default stdout)");
  s->add_option("--seed", sa.seed, "seed for synthetic weights and prompt tokens");
  s->add_flag("--functional", sa.functional, "also run the bit-level pipeline (small models only)");
  sa.hw.add(s);

  CompareArgs ca;
  auto* c = app.add_subcommand("compare", "Run every scenario on every architecture");
  c->add_option("--model", ca.model, "model preset or JSON file");
  c->add_option("--scenarios", ca.scenarios, "comma-separated scenario presets or JSON files");
  c->add_option("--archs", ca.archs, "comma-separated architectures");
  c->add_option("--out", ca.out, "output path (default stdout)");
  c->add_option("--format", ca.format, "csv or json (default from --out extension, else csv)");
  c->add_option("--threads", ca.threads, "worker threads (0 = hardware concurrency)");
  c->add_option("--seed", ca.seed, "recorded in the report");
  ca.hw.add(c);

  auto* t = app.add_subcommand("selftest", "Exhaustive dequant-path sweep and cycle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*q) return cmd_quantize(qa);
    if (*s) return cmd_simulate(sa);
    if (*c) return cmd_compare(ca);
    if (*t) return cmd_selftest();
  } catch (const Error& e) {
    std::fprintf(stderr, "hsasim: %s\n", e.what());
    return exit_code(e.code());
  } catch (const Json::exception& e) {
    std::fprintf(stderr, "hsasim: %s\n", e.what());
    return kConfig;
  }
  return kOk;
}
