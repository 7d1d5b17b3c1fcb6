#pragma once

// Config loading (JSON) and the machine-readable run/compare reports.
// Reports carry no timestamps: the same invocation yields the same bytes.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hsa/baselines.hpp"
#include "hsa/workload.hpp"

namespace hsa::report {

using Json = nlohmann::json;

inline constexpr const char* kReportSchema = "hsasim.report/1";
inline constexpr const char* kCompareSchema = "hsasim.compare/1";

// ---- config ---------------------------------------------------------------

// Each parser starts from defaults (or from "preset" when given) and
// overrides only the keys present. Unknown keys are a ConfigError.
workload::ModelConfig model_from_json(const Json& j);
workload::ScenarioConfig scenario_from_json(const Json& j);
core::HsaConfig hsa_from_json(const Json& j);
mem::MemConfig mem_from_json(const Json& j);

Json to_json(const workload::ModelConfig& m);
Json to_json(const workload::ScenarioConfig& s);
Json to_json(const core::HsaConfig& c);
Json to_json(const mem::MemConfig& c);

// A preset name, or a path to a JSON file. ConfigError / IoError.
workload::ModelConfig load_model(std::string_view preset_or_path);
workload::ScenarioConfig load_scenario(std::string_view preset_or_path, std::optional<std::string>* arch = nullptr);
// {"hsa": {...}, "mem": {...}}, both optional.
void load_hardware(std::string_view path, core::HsaConfig& hsa, mem::MemConfig& mem);

Json parse_json_file(std::string_view path);  // IoError on read, ConfigError on syntax

struct RunConfig {
  workload::ModelConfig model;
  workload::ScenarioConfig scenario;
  core::HsaConfig hsa;
  mem::MemConfig mem;
  baselines::ArchKind arch = baselines::ArchKind::kHsa;
  baselines::BaselineParams params;
  std::uint64_t seed = 0;
};

Json config_json(const RunConfig& rc);
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t v);

// ---- reports --------------------------------------------------------------

// Summary of a functional (bit-level) run attached to a simulate report.
struct FunctionalSummary {
  std::uint64_t prompt_tokens = 0;
  std::uint64_t output_tokens = 0;
  bool prefill_matches_analytic = false;
  bool decode_matches_analytic = false;
  double prefill_sqnr_db = 0.0;
  std::vector<double> decode_sqnr_db;
  std::vector<std::uint32_t> decode_tokens;
};

Json phase_json(const workload::PhaseReport& p, core::Dataflow mode, const core::HsaConfig& hsa);
Json simulate_report(const workload::ScenarioResult& r, const RunConfig& rc,
                     const FunctionalSummary* functional = nullptr);

// Recomputes every latency/energy/rate figure from the ledger, cycle and
// config fields the report carries. Throws InvariantViolation on mismatch.
void verify_report(const Json& report);

Json external_constants();

Json compare_json(const std::vector<workload::ScenarioResult>& rows, const RunConfig& rc);
std::string compare_csv(const std::vector<workload::ScenarioResult>& rows);

// Pretty JSON with a trailing newline.
std::string dump(const Json& j);

}  // namespace hsa::report
