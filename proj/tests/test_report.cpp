#include <doctest.h>

#include <sstream>

#include "hsa/report.hpp"

using namespace hsa;
using namespace hsa::report;

namespace {

RunConfig liso_run() {
  RunConfig rc;
  rc.model = workload::model_preset("retnet-1.3b-like");
  rc.scenario = workload::ScenarioConfig::liso();
  return rc;
}

Json liso_report() {
  const auto rc = liso_run();
  const auto r = baselines::model_scenario(rc.arch, rc.model, rc.scenario, rc.hsa, rc.mem);
  return simulate_report(r, rc);
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("config parsers") {
  const auto m = model_from_json(Json{{"preset", "toy"}, {"num_layers", 3}});
  CHECK(m.num_layers == 3);
  CHECK(m.hidden_dim == workload::model_preset("toy").hidden_dim);
  CHECK(model_from_json(to_json(workload::model_preset("retnet-1.3b-like"))) ==
        workload::model_preset("retnet-1.3b-like"));
  CHECK_THROWS_AS(model_from_json(Json{{"preset", "toy"}, {"layers", 3}}), Error);
  CHECK_THROWS_AS(model_from_json(Json{{"preset", "toy"}, {"num_layers", -1}}), Error);
  CHECK_THROWS_AS(model_from_json(Json{{"preset", "toy"}, {"weight_precision", "fp16"}}), Error);
  CHECK_THROWS_AS(model_from_json(Json::array()), Error);

  const auto s = scenario_from_json(Json{{"preset", "silo"}, {"output_tokens", 10}});
  CHECK(s.prompt_tokens == 50);
  CHECK(s.output_tokens == 10);
  CHECK_THROWS_AS(scenario_from_json(Json{{"prompt_tokens", 0}}), Error);

  core::HsaConfig def;
  CHECK(hsa_from_json(Json::object()).clock_hz == def.clock_hz);
  CHECK(hsa_from_json(Json{{"mvm_drain_cycles", 7}}).mvm_drain_cycles == 7);
  CHECK_THROWS_AS(hsa_from_json(Json{{"clusters", 0}}), Error);
  CHECK_THROWS_AS(hsa_from_json(Json{{"lanes", 4}}), Error);
  CHECK(mem_from_json(Json{{"dram_bandwidth_bytes_per_s", 1e9}}).dram_bandwidth_bytes_per_s == 1e9);
  CHECK_THROWS_AS(mem_from_json(Json{{"dram_bandwidth_bytes_per_s", -1.0}}), Error);

  CHECK(load_model("toy") == workload::model_preset("toy"));
  CHECK(load_scenario("liso") == workload::ScenarioConfig::liso());
  try {
    load_model("/nonexistent/model.json");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIoError);
  }
}

TEST_CASE("simulate report verifies and survives a text round trip") {
  const Json rep = liso_report();
  CHECK(rep["schema"] == kReportSchema);
  for (const char* k : {"metadata", "config", "model_stats", "phases", "totals", "derived", "notes",
                        "external_constants"}) {
    CHECK(rep.contains(k));
  }
  CHECK(rep["external_constants"]["label"].get<std::string>().find("external") != std::string::npos);
  CHECK_NOTHROW(verify_report(rep));
  CHECK_NOTHROW(verify_report(Json::parse(dump(rep))));
  CHECK(rep["phases"]["decode"]["steps"] == 50);
  CHECK(rep["phases"]["prefill"]["dataflow"] == "mmm");
  CHECK(rep["phases"]["decode"]["dataflow"] == "mvm");
}

TEST_CASE("verify_report catches tampering") {
  const Json base = liso_report();
  auto expect_violation = [](const Json& j) {
    try {
      verify_report(j);
      return false;
    } catch (const Error& e) {
      return e.code() == ErrorCode::kInvariantViolation;
    }
  };
  Json j = base;
  j["totals"]["tokens_per_s"] = j["totals"]["tokens_per_s"].get<double>() * 1.001;
  CHECK(expect_violation(j));
  j = base;
  j["phases"]["decode"]["ledger"]["dram_weight_bytes"] = j["phases"]["decode"]["ledger"]["dram_weight_bytes"].get<std::uint64_t>() + 1;
  CHECK(expect_violation(j));
  j = base;
  j["phases"]["prefill"]["ops"][3]["cycles"]["compute"] = 0;
  CHECK(expect_violation(j));
  j = base;
  j["phases"]["prefill"]["energy_j"]["static"] = 0.0;
  CHECK(expect_violation(j));
  j = base;
  j["phases"]["decode"]["cycles"]["stall"] = 12345;
  CHECK(expect_violation(j));
  j = base;
  j["config"]["mem"]["dram_bandwidth_bytes_per_s"] = 25.6e9;
  CHECK(expect_violation(j));
  j = base;
  j["phases"]["decode"]["steps"] = 49;
  CHECK(expect_violation(j));
  j = base;
  j.erase("totals");
  CHECK(expect_violation(j));
}

TEST_CASE("reports are deterministic and hashes track the config") {
  CHECK(dump(liso_report()) == dump(liso_report()));
  auto rc = liso_run();
  const auto h1 = fnv1a64(config_json(rc).dump());
  rc.seed = 9;
  CHECK(fnv1a64(config_json(rc).dump()) != h1);
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(hex64(0xabcull) == "0000000000000abc");
}

TEST_CASE("compare outputs") {
  auto rc = liso_run();
  const std::vector<workload::ScenarioConfig> sc = {workload::ScenarioConfig::liso(), workload::ScenarioConfig::silo()};
  const auto rows = baselines::compare(rc.model, sc, baselines::all_archs(), rc.hsa, rc.mem);
  const std::string csv = compare_csv(rows);
  CHECK(count_lines(csv) == 7);
  CHECK(csv.rfind("scenario,arch,", 0) == 0);
  const Json j = compare_json(rows, rc);
  CHECK(j["schema"] == kCompareSchema);
  REQUIRE(j["rows"].size() == 6);
  for (const auto& r : j["rows"]) {
    if (r["arch"] == "hsa") CHECK(r["tokens_per_s_vs_hsa"] == 1.0);
    if (r["arch"] == "vector") CHECK(r["prefill_energy_vs_hsa"].get<double>() > 1.0);
    if (r["arch"] == "conv-sa") CHECK(r["tokens_per_s_vs_hsa"].get<double>() < 1.0);
  }
}
