#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "blocknas/evaluator.hpp"
#include "blocknas/evo_search.hpp"
#include "blocknas/nsga2.hpp"

namespace blocknas {

inline constexpr std::uint64_t kDefaultOracleBound = 1'000'000;
inline constexpr double kReferenceScale = 1.1;

struct OracleResult {
  std::string space_name;
  CostKind cost_kind = CostKind::macs;
  std::vector<EvaluatedGenome> true_front;  // same ordering as SearchResult::front
  std::uint64_t evaluated_count = 0;
  Objectives reference;  // 1.1 x (max loss, max cost) over all evaluated genomes
  double hypervolume = 0.0;
};

/// Indices of the non-dominated points (ties in both objectives all kept),
/// ascending.
std::vector<std::size_t> pareto_front_indices(std::span<const Objectives> points);

/// kReferenceScale times the per-objective maxima.
Objectives reference_point(std::span<const Objectives> points);

// Exact 2-D hypervolume: area dominated by `points` and bounded by
// `reference`, via a sweep over loss. Throws ConsistencyError if a point is
// worse than the reference in either objective or equals it.
double hypervolume(std::span<const Objectives> points, const Objectives& reference);

double hypervolume(const std::vector<EvaluatedGenome>& front, CostKind kind, const Objectives& reference);

/// Scores every genome of the evaluator's space. Throws BoundExceededError
/// when the space holds more than `bound` genomes.
OracleResult exhaustive_front(CostEvaluator& evaluator, std::uint64_t bound = kDefaultOracleBound);

nlohmann::json oracle_result_to_json(const OracleResult& result);

}  // namespace blocknas
