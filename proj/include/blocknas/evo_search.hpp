#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "blocknas/evaluator.hpp"
#include "blocknas/nsga2.hpp"
#include "blocknas/search_space.hpp"

namespace blocknas {

struct SearchConfig {
  int population_size = 100;  // must be even
  int steps = 50;
  std::optional<double> mutation_prob;  // per slot; defaults to 1/num_slots
  double crossover_prob = 0.9;
  std::uint64_t rng_seed = 0;
  CostKind cost_kind = CostKind::macs;

  /// Throws ConfigurationError on invalid settings.
  void validate() const;
  double effective_mutation_prob(std::size_t num_slots) const;

  nlohmann::json to_json(std::size_t num_slots) const;
  static SearchConfig from_json(const nlohmann::json& doc);
};

struct EvaluatedGenome {
  ModelGenome genome;
  double surrogate = 0.0;
  CostVector cost;
  std::size_t rank = 0;
  double crowding = 0.0;  // may be +infinity

  bool operator==(const EvaluatedGenome&) const = default;
};

struct GenerationStats {
  int generation = 0;
  double best_surrogate = 0.0;
  double best_cost = 0.0;
  std::size_t front_size = 0;

  bool operator==(const GenerationStats&) const = default;
};

struct SearchResult {
  std::string space_name;
  SearchConfig config;
  std::vector<EvaluatedGenome> front;  // cost ascending, then surrogate, then genome
  std::vector<GenerationStats> history;
  std::uint64_t cost_queries = 0;
};

Objectives objectives_of(const EvaluatedGenome& e, CostKind kind);

/// Sorts by (cost, surrogate, genome) and fills rank 0 plus crowding.
void finalize_front(std::vector<EvaluatedGenome>& front, CostKind kind);

inline constexpr int kCheckpointFormatVersion = 1;

// Everything needed to continue a search from the start of `generation`.
struct SearchCheckpoint {
  std::string space_name;
  SearchConfig config;
  int generation = 0;  // next generation to run; 0 means not initialized
  std::string rng_state;
  std::vector<EvaluatedGenome> population;
  std::vector<EvaluatedGenome> archive;
  std::vector<GenerationStats> history;
  std::uint64_t cost_queries = 0;

  nlohmann::json to_json() const;
  static SearchCheckpoint from_json(const nlohmann::json& doc);
};

struct EvolveOptions {
  /// Written when a cost query fails, before the error propagates.
  std::optional<std::filesystem::path> checkpoint_path;
  std::optional<SearchCheckpoint> resume_from;
};

// NSGA-II over genomes of the evaluator's space, minimizing (surrogate loss,
// cost). Keeps an external archive of every non-dominated point seen; the
// result front is that archive. Deterministic for a fixed seed and a
// deterministic cost provider.
SearchResult evolve(CostEvaluator& evaluator, const SearchConfig& config,
                    const EvolveOptions& options = {});

nlohmann::json search_result_to_json(const SearchResult& result);
SearchResult search_result_from_json(const nlohmann::json& doc);

}  // namespace blocknas
