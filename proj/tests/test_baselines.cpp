#include <doctest.h>

#include "hsa/baselines.hpp"

using namespace hsa;
using namespace hsa::baselines;

namespace {
const auto kModel = workload::model_preset("retnet-1.3b-like");
}

TEST_CASE("arch names") {
  for (auto a : all_archs()) CHECK(arch_from_string(to_string(a)) == a);
  CHECK_THROWS_AS(arch_from_string("gpu"), Error);
}

TEST_CASE("hsa delegate equals the simulator") {
  core::HsaConfig cfg;
  mem::MemConfig mc;
  const auto a = model_scenario(ArchKind::kHsa, kModel, workload::ScenarioConfig::liso(), cfg, mc);
  const auto b = workload::simulate_scenario(kModel, workload::ScenarioConfig::liso(), cfg, mc);
  CHECK(a.tokens_per_s == b.tokens_per_s);
  CHECK(a.tokens_per_j == b.tokens_per_j);
}

TEST_CASE("prefill latency is identical across architectures") {
  core::HsaConfig cfg;
  mem::MemConfig mc;
  for (auto s : {workload::ScenarioConfig::liso(), workload::ScenarioConfig::silo()}) {
    const auto h = model_scenario(ArchKind::kHsa, kModel, s, cfg, mc);
    const auto c = model_scenario(ArchKind::kConvSa, kModel, s, cfg, mc);
    const auto v = model_scenario(ArchKind::kVectorUnit, kModel, s, cfg, mc);
    CHECK(c.prefill.timing.seconds == h.prefill.timing.seconds);
    CHECK(v.prefill.timing.seconds == h.prefill.timing.seconds);
    CHECK(v.decode.timing.seconds == h.decode.timing.seconds);
    CHECK(c.decode.timing.seconds > h.decode.timing.seconds);
    CHECK(v.prefill.energy.total() > h.prefill.energy.total());
    CHECK(c.decode.cost.ledger.dram_weight_bytes > h.decode.cost.ledger.dram_weight_bytes);
  }
}

TEST_CASE("conv-sa decode uses one array row per matvec") {
  core::HsaConfig cfg;
  const auto g = workload::build_graph(kModel);
  const auto c = conv_sa_decode_step_cost(g, cfg);
  const auto& q = c.ops.at(2);
  REQUIRE(q.name == "l0.q_proj");
  // M = 1: every 16-column output tile streams all of K through one row.
  CHECK(q.cycles.compute == 2048 / 16 * 2048);
  CHECK(q.ledger.dram_weight_bytes == 2048 * 2048);
  BaselineParams p;
  p.conv_sa_decode_exponent = 1.5;
  const auto c2 = conv_sa_decode_step_cost(g, cfg, p);
  CHECK(c2.ops.at(2).cycles.compute == 4 * q.cycles.compute);
  p.conv_sa_decode_exponent = 0.5;
  CHECK_THROWS_AS(conv_sa_decode_step_cost(g, cfg, p), Error);
}

TEST_CASE("compare is ordered and deterministic under threading") {
  core::HsaConfig cfg;
  mem::MemConfig mc;
  const std::vector<workload::ScenarioConfig> sc = {workload::ScenarioConfig::liso(), workload::ScenarioConfig::silo()};
  const auto archs = all_archs();
  const auto one = compare(kModel, sc, archs, cfg, mc, {}, 1);
  const auto many = compare(kModel, sc, archs, cfg, mc, {}, 8);
  REQUIRE(one.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(one[i].scenario == sc[i / 3]);
    CHECK(one[i].arch == to_string(archs[i % 3]));
    CHECK(many[i].tokens_per_s == one[i].tokens_per_s);
    CHECK(many[i].joules == one[i].joules);
  }
  workload::ScenarioConfig bad{"bad", 0, 0};
  CHECK_THROWS_AS(compare(kModel, {bad}, archs, cfg, mc, {}, 4), Error);
}
