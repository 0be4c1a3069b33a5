#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "blocknas/bkd_library.hpp"
#include "blocknas/cost_model.hpp"
#include "blocknas/search_space.hpp"

namespace blocknas {

struct Evaluation {
  double surrogate = 0.0;
  CostVector cost;

  bool operator==(const Evaluation&) const = default;
};

// Scores genomes of one (possibly filtered) space: surrogate loss from the
// library plus analytic MACs/params, and latency from the provider when the
// cost kind asks for it. Genomes are translated into the provider's space
// by option id. Every distinct genome is scored once per evaluator.
class CostEvaluator {
 public:
  CostEvaluator(const SearchSpace& space, const BlockLibrary& library, CostKind kind,
                LatencyProvider* provider = nullptr);

  Evaluation evaluate(const ModelGenome& genome);

  /// Order-preserving; uncached latency queries go out as one batch.
  std::vector<Evaluation> evaluate_batch(std::span<const ModelGenome> genomes);

  /// Pre-populates the cache (checkpoint resume).
  void seed(const ModelGenome& genome, const Evaluation& evaluation);

  CostKind kind() const { return kind_; }
  const SearchSpace& space() const { return space_; }
  const BlockLibrary& library() const { return library_; }

  /// Distinct genomes scored so far (cache misses).
  std::uint64_t queries() const { return queries_; }

  double objective_cost(const Evaluation& e) const { return cost_value(e.cost, kind_); }

 private:
  const SearchSpace& space_;
  const BlockLibrary& library_;
  CostKind kind_;
  LatencyProvider* provider_;
  bool translate_ = false;
  std::map<ModelGenome, Evaluation> cache_;
  std::uint64_t queries_ = 0;
};

}  // namespace blocknas
