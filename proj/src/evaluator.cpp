#include "blocknas/evaluator.hpp"

#include "blocknas/errors.hpp"

namespace blocknas {

CostEvaluator::CostEvaluator(const SearchSpace& space, const BlockLibrary& library, CostKind kind,
                             LatencyProvider* provider)
    : space_(space), library_(library), kind_(kind), provider_(provider) {
  if (library_.space_name != space_.name)
    throw ConsistencyError("library space '" + library_.space_name + "' does not match '" + space_.name + "'");
  if (library_.slots.size() != space_.slots.size())
    throw CoverageError("library does not cover the space's slots");
  if (kind_ == CostKind::latency && !provider_)
    throw ConfigurationError("latency cost requires a latency provider");
  if (provider_) translate_ = !(provider_->space() == space_);
}

Evaluation CostEvaluator::evaluate(const ModelGenome& genome) {
  return evaluate_batch(std::span<const ModelGenome>(&genome, 1)).front();
}

std::vector<Evaluation> CostEvaluator::evaluate_batch(std::span<const ModelGenome> genomes) {
  std::vector<ModelGenome> misses;
  std::map<ModelGenome, Evaluation> fresh;
  for (const auto& g : genomes) {
    if (cache_.contains(g) || fresh.contains(g)) continue;
    if (!is_valid_genome(space_, g))
      throw ConsistencyError("genome " + to_string(g) + " is not valid for space '" + space_.name + "'");
    fresh.emplace(g, Evaluation{surrogate_loss(g, library_), macs_of_model(g, space_)});
    misses.push_back(g);
  }

  if (kind_ == CostKind::latency && !misses.empty()) {
    std::vector<ModelGenome> queries;
    queries.reserve(misses.size());
    for (const auto& g : misses) queries.push_back(translate_ ? expand_genome(space_, provider_->space(), g) : g);
    const auto latencies = provider_->measure_batch(queries);
    for (std::size_t i = 0; i < misses.size(); ++i) fresh.at(misses[i]).cost.latency_us = latencies[i];
  }

  queries_ += misses.size();
  cache_.merge(fresh);

  std::vector<Evaluation> out;
  out.reserve(genomes.size());
  for (const auto& g : genomes) out.push_back(cache_.at(g));
  return out;
}

void CostEvaluator::seed(const ModelGenome& genome, const Evaluation& evaluation) {
  cache_.insert_or_assign(genome, evaluation);
}

}  // namespace blocknas
