// blocknas command line front end.

#include <csignal>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <pthread.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "blocknas/bkd_filter.hpp"
#include "blocknas/bkd_library.hpp"
#include "blocknas/errors.hpp"
#include "blocknas/evaluator.hpp"
#include "blocknas/evo_search.hpp"
#include "blocknas/io.hpp"
#include "blocknas/latency_client.hpp"
#include "blocknas/mock_device.hpp"
#include "blocknas/oracle.hpp"
#include "blocknas/pareto_tools.hpp"
#include "blocknas/search_space.hpp"

using namespace blocknas;
using nlohmann::json;

namespace {

constexpr const char* kEndpointEnv = "BLOCKNAS_ENDPOINT";

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r') c = ' ';
  return s;
}

// Latency source for search and oracle. Keeps whichever provider was built
// alive for the evaluator's lifetime.
struct ProviderHolder {
  std::unique_ptr<LatencyProvider> provider;
  std::string kind = "none";
};

ProviderHolder make_provider(CostKind kind, const std::string& choice, const std::string& endpoint,
                             const SearchSpace& full_space, const LibraryView& view) {
  ProviderHolder h;
  if (kind != CostKind::latency) return h;
  std::string mode = choice;
  if (mode.empty()) mode = endpoint.empty() ? "table" : "service";
  if (mode == "service") {
    if (endpoint.empty())
      throw ConfigurationError("latency via service needs --endpoint or " + std::string(kEndpointEnv));
    h.provider = std::make_unique<ServiceLatencyProvider>(endpoint, full_space);
  } else if (mode == "table") {
    if (!view.library.has_latency())
      throw ConfigurationError("library has no block latencies; run `library measure` first or pass --endpoint");
    h.provider = std::make_unique<CompositionalLatencyProvider>(compositional_provider(view.library, view.space));
  } else {
    throw ConfigurationError("unknown provider '" + mode + "' (expected service or table)");
  }
  h.kind = mode;
  return h;
}

void write_or_print(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-")
    std::cout << text;
  else
    write_file_atomic(path, text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blockwise-distillation NAS toolkit: block libraries, filtering and evolutionary search"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());
  app.set_config("--config", "", "TOML/INI file with option defaults (flags override it)");

  // space validate
  auto* space_cmd = app.add_subcommand("space", "Search space files");
  space_cmd->require_subcommand(1);
  std::string sv_path;
  auto* space_validate = space_cmd->add_subcommand("validate", "Check a space file and print its cardinality");
  space_validate->add_option("space", sv_path, "Space JSON")->required();

  // library synth / validate / measure
  auto* lib_cmd = app.add_subcommand("library", "Block libraries");
  lib_cmd->require_subcommand(1);

  std::string synth_space, synth_profile, synth_out;
  std::uint64_t synth_seed = 0;
  auto* lib_synth = lib_cmd->add_subcommand("synth", "Generate a synthetic library");
  lib_synth->add_option("space", synth_space, "Space JSON")->required();
  lib_synth->add_option("--profile", synth_profile, "Loss-law profile JSON (built-in default if omitted)");
  lib_synth->add_option("--seed", synth_seed, "RNG seed");
  lib_synth->add_option("-o,--output", synth_out, "Output library (JSON Lines)")->required();

  std::string lv_lib, lv_space;
  auto* lib_validate = lib_cmd->add_subcommand("validate", "Check a library against a space");
  lib_validate->add_option("library", lv_lib, "Library JSONL")->required();
  lib_validate->add_option("--space", lv_space, "Space JSON")->required();

  std::string lm_lib, lm_space, lm_endpoint, lm_out;
  auto* lib_measure = lib_cmd->add_subcommand("measure", "Fill per-block latencies from a measurement service");
  lib_measure->add_option("library", lm_lib, "Library JSONL")->required();
  lib_measure->add_option("--space", lm_space, "Space JSON")->required();
  lib_measure->add_option("--endpoint", lm_endpoint, "Measurement service URL")->envname(kEndpointEnv)->required();
  lib_measure->add_option("-o,--output", lm_out, "Output library")->required();

  // filter
  std::string f_lib, f_space, f_cost = "macs", f_out, f_report, f_plot;
  double f_d = 0.0;
  auto* filter_cmd = app.add_subcommand("filter", "Drop cost-inefficient blocks per slot");
  filter_cmd->add_option("library", f_lib, "Library JSONL")->required();
  filter_cmd->add_option("--space", f_space, "Space JSON")->required();
  filter_cmd->add_option("--d", f_d, "Relative cost slack D >= 0")->capture_default_str();
  filter_cmd->add_option("--cost", f_cost, "macs or latency")->capture_default_str();
  filter_cmd->add_option("-o,--output", f_out, "Filtered library")->required();
  filter_cmd->add_option("--report", f_report, "Filter report JSON");
  filter_cmd->add_option("--plot-data", f_plot, "CSV of (mse, cost_ratio, retained) per block");

  // search
  std::string s_lib, s_space, s_cost = "macs", s_endpoint, s_provider, s_out, s_resume, s_ckpt;
  SearchConfig s_cfg;
  std::optional<double> s_mutation;
  auto* search_cmd = app.add_subcommand("search", "Evolutionary search over a (filtered) library");
  search_cmd->add_option("library", s_lib, "Library JSONL")->required();
  search_cmd->add_option("--space", s_space, "Space JSON")->required();
  search_cmd->add_option("--pop", s_cfg.population_size, "Population size (even)")->capture_default_str();
  search_cmd->add_option("--steps", s_cfg.steps, "Generations")->capture_default_str();
  search_cmd->add_option("--seed", s_cfg.rng_seed, "RNG seed")->capture_default_str();
  search_cmd->add_option("--cost", s_cost, "macs or latency")->capture_default_str();
  search_cmd->add_option("--mutation", s_mutation, "Per-slot mutation probability (default 1/slots)");
  search_cmd->add_option("--crossover", s_cfg.crossover_prob, "Crossover probability")->capture_default_str();
  search_cmd->add_option("--endpoint", s_endpoint, "Measurement service URL")->envname(kEndpointEnv);
  search_cmd->add_option("--provider", s_provider, "Latency source: service or table (default: service iff an endpoint is set)");
  search_cmd->add_option("-o,--output", s_out, "Result JSON")->required();
  search_cmd->add_option("--resume", s_resume, "Checkpoint to continue from");
  search_cmd->add_option("--checkpoint", s_ckpt, "Checkpoint written on transport failure (default <output>.ckpt.json)");

  // oracle
  std::string o_lib, o_space, o_cost = "macs", o_endpoint, o_provider, o_out;
  std::uint64_t o_bound = kDefaultOracleBound;
  auto* oracle_cmd = app.add_subcommand("oracle", "Exhaustive Pareto front of a small space");
  oracle_cmd->add_option("library", o_lib, "Library JSONL")->required();
  oracle_cmd->add_option("--space", o_space, "Space JSON")->required();
  oracle_cmd->add_option("--bound", o_bound, "Refuse spaces with more genomes than this")->capture_default_str();
  oracle_cmd->add_option("--cost", o_cost, "macs or latency")->capture_default_str();
  oracle_cmd->add_option("--endpoint", o_endpoint, "Measurement service URL")->envname(kEndpointEnv);
  oracle_cmd->add_option("--provider", o_provider, "Latency source: service or table");
  oracle_cmd->add_option("-o,--output", o_out, "Oracle JSON")->required();

  // pareto select / export
  auto* pareto_cmd = app.add_subcommand("pareto", "Work with search results");
  pareto_cmd->require_subcommand(1);
  std::string ps_result, ps_cost = "macs", ps_out;
  double ps_budget = 0.0;
  auto* pareto_select = pareto_cmd->add_subcommand("select", "Best model within a cost budget");
  pareto_select->add_option("result", ps_result, "Result JSON")->required();
  pareto_select->add_option("--budget", ps_budget, "Budget in the cost's unit (MACs or microseconds)")->required();
  pareto_select->add_option("--cost", ps_cost, "macs or latency_us")->capture_default_str();
  pareto_select->add_option("-o,--output", ps_out, "Write the selection as JSON");

  std::string pe_result, pe_format = "csv", pe_out, pe_plot;
  auto* pareto_export = pareto_cmd->add_subcommand("export", "Front as CSV or JSON");
  pareto_export->add_option("result", pe_result, "Result JSON")->required();
  pareto_export->add_option("--format", pe_format, "csv or json")->capture_default_str();
  pareto_export->add_option("-o,--output", pe_out, "Output file (stdout if omitted)");
  pareto_export->add_option("--plot-data", pe_plot, "CSV of (cost, surrogate) pairs");

  // cost report
  auto* cost_cmd = app.add_subcommand("cost", "Search-cost accounting");
  cost_cmd->require_subcommand(1);
  double c_predictor = 0.0, c_models = 0.0, c_epochs = 0.0;
  std::string c_bkd = "0";
  auto* cost_report = cost_cmd->add_subcommand("report", "Total epochs as P + M x E + B");
  cost_report->add_option("--predictor", c_predictor, "Epochs spent building an accuracy predictor")->capture_default_str();
  cost_report->add_option("--models", c_models, "Models finetuned")->capture_default_str();
  cost_report->add_option("--epochs", c_epochs, "Epochs per finetuned model")->capture_default_str();
  cost_report->add_option("--bkd", c_bkd, "Library build epochs, e.g. 1e or 3")->capture_default_str();

  // serve-mock-device
  std::string m_space, m_host = "127.0.0.1";
  int m_port = 8080;
  MockDeviceConfig m_cfg;
  auto* serve_cmd = app.add_subcommand("serve-mock-device", "Simulated latency service");
  serve_cmd->add_option("--space", m_space, "Space JSON the device answers for")->required();
  serve_cmd->add_option("--host", m_host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--port", m_port, "Port (0 picks a free one)")->capture_default_str();
  serve_cmd->add_option("--seed", m_cfg.seed, "Noise seed")->capture_default_str();
  serve_cmd->add_option("--fusion", m_cfg.fusion_us, "Microseconds saved per adjacent same-type block pair")->capture_default_str();
  serve_cmd->add_option("--base", m_cfg.base_us, "Empty-model latency in microseconds")->capture_default_str();
  serve_cmd->add_option("--noise", m_cfg.noise_us, "Uniform noise amplitude in microseconds")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << one_line(e.what()) << "\n";
    return exit_code(ErrorKind::validation);
  }

  try {
    if (*space_validate) {
      const SearchSpace space = load_space(sv_path, false);
      const auto violations = validate_space(space);
      if (!violations.empty()) {
        for (const auto& v : violations)
          std::cout << (v.slot ? "slot " + std::to_string(*v.slot) : std::string("space")) << ": " << v.rule
                    << ": " << v.message << "\n";
        throw SchemaError(std::to_string(violations.size()) + " invariant violation(s) in " + sv_path);
      }
      std::cout << "ok space=" << space.name << " slots=" << space.num_slots()
                << " cardinality=" << cardinality(space).str() << "\n";
    } else if (*lib_synth) {
      const SearchSpace space = load_space(synth_space);
      const SynthProfile profile =
          synth_profile.empty() ? SynthProfile{} : SynthProfile::from_json(read_json_file(synth_profile));
      save_library(synth_out, synth_library(space, profile, synth_seed));
    } else if (*lib_validate) {
      const SearchSpace space = load_space(lv_space);
      const LibraryView view = load_library_view(lv_lib, space);
      std::cout << "ok space=" << view.library.space_name << " records=" << view.library.size()
                << " filtered=" << (view.library.filtered_with_d ? format_double(*view.library.filtered_with_d) : "no")
                << " latency=" << (view.library.has_latency() ? "yes" : "no") << "\n";
    } else if (*lib_measure) {
      const SearchSpace space = load_space(lm_space);
      const LibraryView view = load_library_view(lm_lib, space);
      ServiceLatencyProvider provider(lm_endpoint, space);
      save_library(lm_out, measure_library(view.library, view.space, provider));
    } else if (*filter_cmd) {
      const SearchSpace space = load_space(f_space);
      const LibraryView view = load_library_view(f_lib, space);
      if (!(f_d >= 0.0)) throw ConfigurationError("--d must be non-negative");
      const FilterConfig cfg{f_d, parse_cost_kind(f_cost)};
      auto [filtered, report] = filter_library(view.library, view.space, cfg);
      save_library(f_out, filtered);
      if (!f_report.empty()) {
        json doc = report.to_json();
        doc["tool_version"] = tool_version();
        doc["space_name"] = view.space.name;
        write_file_atomic(f_report, dump_json(doc));
      }
      if (!f_plot.empty()) write_file_atomic(f_plot, filter_scatter_csv(report));
      const auto card = filtered_cardinality(report, view.space);
      std::cout << format_filter_report(report);
      std::cout << "blocks " << card.retained_blocks << "/" << card.total_blocks << " cardinality "
                << card.cardinality.str() << " (was " << cardinality(view.space).str() << ")\n";
    } else if (*search_cmd) {
      const SearchSpace space = load_space(s_space);
      const LibraryView view = load_library_view(s_lib, space);
      s_cfg.cost_kind = parse_cost_kind(s_cost);
      s_cfg.mutation_prob = s_mutation;
      EvolveOptions options;
      if (!s_resume.empty()) {
        options.resume_from = SearchCheckpoint::from_json(read_json_file(s_resume));
        if (options.resume_from->space_name != view.space.name)
          throw ConsistencyError("checkpoint is for space '" + options.resume_from->space_name + "'");
        s_cfg = options.resume_from->config;
      }
      options.checkpoint_path = s_ckpt.empty() ? s_out + ".ckpt.json" : s_ckpt;
      ProviderHolder holder = make_provider(s_cfg.cost_kind, s_provider, s_endpoint, space, view);
      CostEvaluator evaluator(view.space, view.library, s_cfg.cost_kind, holder.provider.get());
      const SearchResult result = evolve(evaluator, s_cfg, options);
      json doc = search_result_to_json(result);
      doc["config"]["provider"] = holder.kind;
      doc["config"]["library_filtered_with_d"] =
          view.library.filtered_with_d ? json(*view.library.filtered_with_d) : json(nullptr);
      write_file_atomic(s_out, dump_json(doc));
      std::cout << "front " << result.front.size() << " models, " << result.cost_queries << " cost queries\n";
    } else if (*oracle_cmd) {
      const SearchSpace space = load_space(o_space);
      const LibraryView view = load_library_view(o_lib, space);
      const CostKind kind = parse_cost_kind(o_cost);
      ProviderHolder holder = make_provider(kind, o_provider, o_endpoint, space, view);
      CostEvaluator evaluator(view.space, view.library, kind, holder.provider.get());
      const OracleResult result = exhaustive_front(evaluator, o_bound);
      json doc = oracle_result_to_json(result);
      doc["config"]["provider"] = holder.kind;
      doc["config"]["bound"] = o_bound;
      write_file_atomic(o_out, dump_json(doc));
      std::cout << "front " << result.true_front.size() << " of " << result.evaluated_count
                << " models, hypervolume " << format_double9(result.hypervolume) << "\n";
    } else if (*pareto_select) {
      const SearchResult result = search_result_from_json(read_json_file(ps_result));
      const CostKind kind = parse_cost_kind(ps_cost);
      const EvaluatedGenome best = select_by_budget(result.front, ps_budget, kind);
      json doc = {{"tool_version", tool_version()},
                  {"config", {{"budget", ps_budget}, {"cost_kind", to_string(kind)}, {"result", ps_result}}},
                  {"choices", best.genome.choices},
                  {"surrogate", best.surrogate},
                  {"macs", best.cost.macs},
                  {"latency_ms", best.cost.latency_us ? json(*best.cost.latency_us / 1000.0) : json(nullptr)}};
      std::cout << "choices=" << to_string(best.genome) << " surrogate=" << format_double9(best.surrogate)
                << " macs=" << best.cost.macs;
      if (best.cost.latency_us) std::cout << " latency_ms=" << format_double9(*best.cost.latency_us / 1000.0);
      std::cout << "\n";
      if (!ps_out.empty()) write_file_atomic(ps_out, dump_json(doc));
    } else if (*pareto_export) {
      const SearchResult result = search_result_from_json(read_json_file(pe_result));
      write_or_print(pe_out, export_front(result, parse_export_format(pe_format)));
      if (!pe_plot.empty()) write_file_atomic(pe_plot, front_plot_data(result));
    } else if (*cost_report) {
      const auto est = estimate_search_cost(c_predictor, c_models, c_epochs, parse_bkd_epochs(c_bkd));
      std::cout << est.rendered << " = " << format_double9(est.total_epochs) << " epochs\n";
    } else if (*serve_cmd) {
      MockDeviceServer server(MockDevice(load_space(m_space), m_cfg));
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      server.start(m_host, m_port);
      std::cout << "listening " << server.endpoint() << std::endl;
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
      std::cout << "served " << server.requests_served() << " requests" << std::endl;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.tag() << ": " << one_line(e.what()) << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}
