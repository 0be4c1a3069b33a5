// Acceptance suite. One PASS/FAIL line per criterion; exit status is the
// number of failed criteria (0 when everything holds).

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "blocknas/bkd_filter.hpp"
#include "blocknas/errors.hpp"
#include "blocknas/evo_search.hpp"
#include "blocknas/io.hpp"
#include "blocknas/latency_client.hpp"
#include "blocknas/mock_device.hpp"
#include "blocknas/oracle.hpp"
#include "blocknas/pareto_tools.hpp"
#include "test_support.hpp"

using namespace blocknas;
namespace bt = blocknas::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::set<ModelGenome> genomes_of(const std::vector<EvaluatedGenome>& front) {
  std::set<ModelGenome> out;
  for (const auto& m : front) out.insert(m.genome);
  return out;
}

SearchConfig search_config(std::uint64_t seed, CostKind kind) {
  SearchConfig c;
  c.population_size = 100;
  c.steps = 50;
  c.rng_seed = seed;
  c.cost_kind = kind;
  return c;
}

// Mock device used by the latency criteria.
MockDeviceConfig fused_device() {
  MockDeviceConfig c;
  c.fusion_us = 12.5;
  c.seed = 7;
  return c;
}

// 1. Search equals the oracle on a 2x4 space.
Outcome small_oracle_equivalence() {
  const auto t0 = Clock::now();
  const auto space = bt::small_space();
  const auto lib = synth_library(space, {}, 11);
  CostEvaluator oracle_ev(space, lib, CostKind::macs);
  const auto oracle = exhaustive_front(oracle_ev);
  CostEvaluator ev(space, lib, CostKind::macs);
  const auto result = evolve(ev, search_config(2024, CostKind::macs));
  const double secs = seconds_since(t0);
  const bool equal = genomes_of(result.front) == genomes_of(oracle.true_front);
  std::ostringstream d;
  d << "search front " << result.front.size() << " vs oracle front " << oracle.true_front.size()
    << (equal ? " (set-equal)" : " (DIFFERENT)") << ", " << secs << " s (limit 5 s)";
  return {equal && secs < 5.0, d.str()};
}

// 2. Medium space, mock latency with fusion, 5 seeds.
Outcome medium_hypervolume() {
  const auto t0 = Clock::now();
  const auto space = bt::medium_space();
  const auto lib = synth_library(space, {}, 5);
  MockDeviceServer server(MockDevice(space, fused_device()));
  server.start();

  ServiceLatencyProvider oracle_provider(server.endpoint(), space);
  CostEvaluator oracle_ev(space, lib, CostKind::latency, &oracle_provider);
  const auto oracle = exhaustive_front(oracle_ev);

  bool pass = true;
  std::ostringstream d;
  d << "oracle hv " << format_double9(oracle.hypervolume) << "; ratios";
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ServiceLatencyProvider provider(server.endpoint(), space);
    CostEvaluator ev(space, lib, CostKind::latency, &provider);
    const auto result = evolve(ev, search_config(seed, CostKind::latency));
    const double ratio = hypervolume(result.front, CostKind::latency, oracle.reference) / oracle.hypervolume;
    d << " " << format_double9(ratio);
    pass = pass && ratio >= 0.99;
  }
  const double secs = seconds_since(t0);
  d << " (need >= 0.99), " << secs << " s (limit 60 s)";
  return {pass && secs < 60.0, d.str()};
}

// 3. Filter at D=0 equals the per-slot Pareto set on random synthetic slots.
SearchSpace random_slot_space(Rng& rng, int index) {
  static const int kKernels[] = {3, 5};
  static const int kExp[] = {2, 3, 4, 6};
  static const int kDepth[] = {1, 2, 3, 4, 6, 8};
  SearchSpace s;
  s.name = "random_slot_" + std::to_string(index);
  BlockSlot slot;
  slot.in_channels = 8 * static_cast<int>(1 + rng.uniform_index(8));
  slot.out_channels = 8 * static_cast<int>(1 + rng.uniform_index(8));
  slot.stride = rng.bernoulli(0.5) ? 2 : 1;
  const int res = 4 * static_cast<int>(1 + rng.uniform_index(8));
  slot.in_resolution = {res, res};
  const auto options = 1 + rng.uniform_index(16);
  for (std::size_t m = 0; m < options; ++m)
    slot.options.push_back(bt::option(
        "o" + std::to_string(m), kKernels[rng.uniform_index(2)], kExp[rng.uniform_index(4)],
        kDepth[rng.uniform_index(6)],
        rng.bernoulli(0.5) ? LayerType::depthwise_inverted_bottleneck : LayerType::grouped_inverted_bottleneck,
        rng.bernoulli(0.5) ? Activation::relu : Activation::swish,
        rng.bernoulli(0.5) ? ChannelScale::full : ChannelScale::half));
  s.slots.push_back(slot);
  return s;
}

Outcome filter_soundness() {
  Rng rng(31337);
  int mismatches = 0, not_nested = 0, discards = 0;
  for (int t = 0; t < 100; ++t) {
    const auto space = random_slot_space(rng, t);
    const auto lib = synth_library(space, {}, rng.next());
    const auto r0 = filter_library(lib, space, {0.0, CostKind::macs}).second;
    const auto r25 = filter_library(lib, space, {0.25, CostKind::macs}).second;

    std::vector<Objectives> pts;
    for (const auto& r : lib.slots[0]) pts.push_back({r.mse_loss, static_cast<double>(r.cost_macs)});
    std::set<std::string> oracle;
    for (auto i : bt::oracle_pareto(pts)) oracle.insert(lib.slots[0][i].option_id);
    oracle.insert(lib.slots[0][0].option_id);

    std::set<std::string> kept0, kept25;
    for (const auto& o : r0.slots[0].retained) kept0.insert(o.option_id);
    for (const auto& o : r25.slots[0].retained) kept25.insert(o.option_id);
    discards += static_cast<int>(r0.slots[0].discarded.size());
    if (kept0 != oracle) ++mismatches;
    if (!std::includes(kept25.begin(), kept25.end(), kept0.begin(), kept0.end())) ++not_nested;
  }
  std::ostringstream d;
  d << "100 slots, " << discards << " discards at D=0; " << mismatches << " Pareto mismatches, " << not_nested
    << " nesting violations";
  return {mismatches == 0 && not_nested == 0 && discards > 0, d.str()};
}

// 4. Filtering at D=0.1 shrinks the medium space by >= 30% and keeps the
// oracle hypervolume within 2%, for MAC cost and for measured latency.
Outcome filter_efficacy() {
  const auto space = bt::medium_space();
  const auto lib = synth_library(space, SynthProfile{}, 5);
  MockDeviceServer server(MockDevice(space, fused_device()));
  server.start();
  ServiceLatencyProvider provider(server.endpoint(), space);
  const auto measured = measure_library(lib, space, provider);

  bool pass = true;
  std::ostringstream d;
  for (CostKind kind : {CostKind::macs, CostKind::latency}) {
    auto [filtered, report] = filter_library(measured, space, {0.1, kind});
    const auto reduced = filtered_space(report, space);
    const BigInt before = cardinality(space), after = cardinality(reduced);
    const double shrink = 1.0 - after.convert_to<double>() / before.convert_to<double>();

    LatencyProvider* p = kind == CostKind::latency ? &provider : nullptr;
    CostEvaluator full_ev(space, measured, kind, p);
    const auto full = exhaustive_front(full_ev);
    CostEvaluator reduced_ev(reduced, filtered, kind, p);
    const auto part = exhaustive_front(reduced_ev);
    // Both fronts are scored against the unfiltered reference point.
    const double hv_ratio = hypervolume(part.true_front, kind, full.reference) / full.hypervolume;
    d << to_string(kind) << ": " << before.str() << " -> " << after.str() << " (shrink "
      << format_double9(100 * shrink) << "%), hv ratio " << format_double9(hv_ratio) << "; ";
    pass = pass && shrink >= 0.30 && hv_ratio >= 0.98 && hv_ratio <= 1.0 + 1e-12;
  }
  d << "need shrink >= 30%, hv within 2%";
  return {pass, d.str()};
}

// 5. Fusion makes layer sums wrong by exactly F per same-type adjacency, and
// changes the front.
SearchSpace fusion_space() {
  SearchSpace s;
  s.name = "fusion_demo";
  s.stem_cost_macs = 100000;
  s.head_cost_macs = 100000;
  for (int n = 0; n < 4; ++n) {
    BlockSlot slot;
    slot.in_channels = 16;
    slot.out_channels = 16;
    slot.in_resolution = {8, 8};
    // Grouped mothernet, depthwise everything else: mixing types forfeits fusion.
    slot.options = {bt::option("mother", 3, 3, 2, LayerType::grouped_inverted_bottleneck),
                    bt::option("dw_k3_e3", 3, 3, 1), bt::option("dw_k3_e4_d2", 3, 4, 2),
                    bt::option("dw_k5_e6_d2", 5, 6, 2)};
    s.slots.push_back(slot);
  }
  return s;
}

Outcome non_additive_latency() {
  std::ostringstream d;
  bool pass = true;

  // Exact gap on every genome of the medium space.
  {
    const auto space = bt::medium_space();
    const auto cfg = fused_device();
    MockDeviceServer server(MockDevice(space, cfg));
    server.start();
    ServiceLatencyProvider service(server.endpoint(), space);
    const auto measured = measure_library(synth_library(space, {}, 5), space, service);
    auto table = compositional_provider(measured, space);
    const auto genomes = enumerate_genomes(space);
    const auto live = service.measure_batch(genomes);
    std::size_t exact = 0, differing = 0;
    for (std::size_t i = 0; i < genomes.size(); ++i) {
      const std::vector<std::int64_t> c(genomes[i].choices.begin(), genomes[i].choices.end());
      const double k = static_cast<double>(MockDevice::same_type_adjacencies(space, c));
      const double gap = table.measure(genomes[i]) - live[i];
      if (gap == cfg.fusion_us * k) ++exact;
      if (gap != 0) ++differing;
    }
    d << exact << "/" << genomes.size() << " genomes with gap exactly F*k (" << differing << " nonzero); ";
    pass = pass && exact == genomes.size() && differing > 0;
  }

  // Fronts differ on a constructed space.
  {
    const auto space = fusion_space();
    const auto lib = synth_library(space, {}, 3);
    MockDeviceConfig cfg;
    cfg.fusion_us = 40;
    MockDeviceServer server(MockDevice(space, cfg));
    server.start();
    ServiceLatencyProvider service(server.endpoint(), space);
    const auto measured = measure_library(lib, space, service);
    auto table = compositional_provider(measured, space);

    CostEvaluator ev_table(space, measured, CostKind::latency, &table);
    CostEvaluator ev_service(space, measured, CostKind::latency, &service);
    const auto front_table = evolve(ev_table, search_config(1, CostKind::latency)).front;
    const auto front_service = evolve(ev_service, search_config(1, CostKind::latency)).front;
    const bool differ = genomes_of(front_table) != genomes_of(front_service);

    // The layer-sum front, re-measured on the device, is worse than the device front.
    std::vector<EvaluatedGenome> remeasured = front_table;
    for (auto& m : remeasured) m.cost.latency_us = service.measure(m.genome);
    CostEvaluator ev_oracle(space, measured, CostKind::latency, &service);
    const auto oracle = exhaustive_front(ev_oracle);
    const double hv_table = hypervolume(remeasured, CostKind::latency, oracle.reference);
    const double hv_service = hypervolume(front_service, CostKind::latency, oracle.reference);
    d << "fronts " << (differ ? "differ" : "IDENTICAL") << " (" << front_table.size() << " vs "
      << front_service.size() << " models; device hv " << format_double9(hv_table) << " vs "
      << format_double9(hv_service) << ")";
    pass = pass && differ;
  }
  return {pass, d.str()};
}

// 6. Epoch bookkeeping strings.
Outcome search_cost_accounting() {
  const auto predictor = estimate_search_cost(4000, 10, 50, {});
  const auto v2 = estimate_search_cost(0, 1, 50, parse_bkd_epochs("1e"));
  const auto flat = estimate_search_cost(0, 1, 1200, {});
  std::ostringstream d;
  d << "\"" << predictor.rendered << "\" = " << predictor.total_epochs << "; \"" << v2.rendered << "\"; \""
    << flat.rendered << "\"";
  const bool pass = predictor.rendered == "4000 + 10 x 50" && predictor.total_epochs == 4500 && v2.rendered == "50 + 1e" &&
                    flat.rendered == "1200";
  return {pass, d.str()};
}

// 7. Two consecutive CLI pipelines produce identical files.
int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const auto space = bt::medium_space();
  MockDeviceServer server(MockDevice(space, fused_device()));
  server.start();
  bt::TempDir dir;
  const std::string cli = BLOCKNAS_CLI;
  const std::string sp = "'" + (bt::data_dir() / "spaces/medium_space.json").string() + "'";
  const std::string prof = "'" + (bt::data_dir() / "profiles/default.json").string() + "'";
  const std::vector<std::string> files{"lib.jsonl", "measured.jsonl", "filtered.jsonl", "report.json",
                                       "result.json", "front.csv", "front.json"};
  double slowest = 0;
  for (const std::string run : {"a", "b"}) {
    const auto t0 = Clock::now();
    const auto out = dir.path / run;
    std::filesystem::create_directories(out);
    const auto at = [&](const std::string& f) { return "'" + (out / f).string() + "'"; };
    const std::vector<std::string> steps{
        cli + " library synth " + sp + " --profile " + prof + " --seed 17 -o " + at("lib.jsonl"),
        cli + " library measure " + at("lib.jsonl") + " --space " + sp + " --endpoint " + server.endpoint() + " -o " +
            at("measured.jsonl"),
        cli + " filter " + at("measured.jsonl") + " --space " + sp + " --d 0.1 --cost latency -o " +
            at("filtered.jsonl") + " --report " + at("report.json"),
        cli + " search " + at("filtered.jsonl") + " --space " + sp + " --pop 100 --steps 50 --seed 3 --cost latency" +
            " --endpoint " + server.endpoint() + " -o " + at("result.json"),
        cli + " pareto export " + at("result.json") + " --format csv -o " + at("front.csv"),
        cli + " pareto export " + at("result.json") + " --format json -o " + at("front.json")};
    for (const auto& s : steps)
      if (shell(s) != 0) return {false, "command failed: " + s};
    slowest = std::max(slowest, seconds_since(t0));
  }
  std::size_t same = 0;
  for (const auto& f : files)
    if (read_file(dir.path / "a" / f) == read_file(dir.path / "b" / f)) ++same;
  std::ostringstream d;
  d << same << "/" << files.size() << " files byte-identical; slowest pipeline " << slowest << " s (limit 60 s)";
  return {same == files.size() && slowest < 60.0, d.str()};
}

// 8. Exact cardinalities.
Outcome cardinality_arithmetic() {
  auto uniform = [](int slots, int options) {
    std::vector<std::vector<std::string>> ids(slots);
    for (auto& s : ids)
      for (int m = 0; m < options; ++m) s.push_back("o" + std::to_string(m));
    return bt::chain_space(ids);
  };
  const BigInt a = cardinality(uniform(5, 192));
  const BigInt b = cardinality(uniform(7, 128));
  std::ostringstream d;
  d << "192^5 = " << a.str() << ", 128^7 = " << b.str();
  return {a == BigInt("260919263232") && b == BigInt("562949953421312"), d.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 oracle equivalence, small space", small_oracle_equivalence},
      {"2 oracle equivalence, medium space with fused latency", medium_hypervolume},
      {"3 filter soundness", filter_soundness},
      {"4 filter efficacy", filter_efficacy},
      {"5 non-additive latency", non_additive_latency},
      {"6 search-cost accounting", search_cost_accounting},
      {"7 determinism", determinism},
      {"8 cardinality arithmetic", cardinality_arithmetic},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << name << ": " << o.detail << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed;
}
