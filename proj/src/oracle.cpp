#include "blocknas/oracle.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>

#include "blocknas/errors.hpp"
#include "blocknas/io.hpp"

namespace blocknas {

using nlohmann::json;

std::vector<std::size_t> pareto_front_indices(std::span<const Objectives> points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].loss != points[b].loss) return points[a].loss < points[b].loss;
    if (points[a].cost != points[b].cost) return points[a].cost < points[b].cost;
    return a < b;
  });

  // Sweep by increasing loss. A point survives iff its cost is below every
  // cost seen at strictly smaller loss, and equal to the best cost within
  // its own loss group.
  std::vector<std::size_t> front;
  double best_cost_before = std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && points[order[j]].loss == points[order[i]].loss) ++j;
    const double group_best = points[order[i]].cost;
    if (group_best < best_cost_before) {
      for (std::size_t k = i; k < j && points[order[k]].cost == group_best; ++k) front.push_back(order[k]);
      best_cost_before = group_best;
    }
    i = j;
  }
  std::sort(front.begin(), front.end());
  return front;
}

Objectives reference_point(std::span<const Objectives> points) {
  Objectives ref{0.0, 0.0};
  for (const auto& p : points) {
    ref.loss = std::max(ref.loss, p.loss);
    ref.cost = std::max(ref.cost, p.cost);
  }
  return {ref.loss * kReferenceScale, ref.cost * kReferenceScale};
}

double hypervolume(std::span<const Objectives> points, const Objectives& reference) {
  for (const auto& p : points) {
    if (p.loss > reference.loss || p.cost > reference.cost || p == reference) {
      std::ostringstream msg;
      msg << "point (" << p.loss << ", " << p.cost << ") does not dominate reference ("
          << reference.loss << ", " << reference.cost << ")";
      throw ConsistencyError(msg.str());
    }
  }
  std::vector<Objectives> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const Objectives& a, const Objectives& b) {
    return a.loss != b.loss ? a.loss < b.loss : a.cost < b.cost;
  });
  double area = 0.0;
  double best_cost = reference.cost;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    best_cost = std::min(best_cost, sorted[i].cost);
    const double next_loss = i + 1 < sorted.size() ? sorted[i + 1].loss : reference.loss;
    area += (next_loss - sorted[i].loss) * (reference.cost - best_cost);
  }
  return area;
}

double hypervolume(const std::vector<EvaluatedGenome>& front, CostKind kind, const Objectives& reference) {
  std::vector<Objectives> points;
  points.reserve(front.size());
  for (const auto& m : front) points.push_back(objectives_of(m, kind));
  return hypervolume(points, reference);
}

OracleResult exhaustive_front(CostEvaluator& evaluator, std::uint64_t bound) {
  const SearchSpace& space = evaluator.space();
  const auto genomes = enumerate_genomes(space, std::nullopt, bound);
  const auto evals = evaluator.evaluate_batch(genomes);

  std::vector<Objectives> points;
  points.reserve(evals.size());
  for (const auto& e : evals) points.push_back({e.surrogate, evaluator.objective_cost(e)});

  OracleResult result;
  result.space_name = space.name;
  result.cost_kind = evaluator.kind();
  result.evaluated_count = genomes.size();
  for (std::size_t idx : pareto_front_indices(points))
    result.true_front.push_back({genomes[idx], evals[idx].surrogate, evals[idx].cost, 0, 0.0});
  finalize_front(result.true_front, result.cost_kind);
  result.reference = reference_point(points);
  result.hypervolume = hypervolume(result.true_front, result.cost_kind, result.reference);
  return result;
}

json oracle_result_to_json(const OracleResult& result) {
  SearchResult as_search;
  as_search.space_name = result.space_name;
  as_search.config.cost_kind = result.cost_kind;
  as_search.front = result.true_front;
  as_search.cost_queries = result.evaluated_count;
  json doc = search_result_to_json(as_search);
  doc["config"] = {{"cost_kind", to_string(result.cost_kind)}, {"mode", "exhaustive"}};
  doc["evaluated_count"] = result.evaluated_count;
  doc["hypervolume"] = result.hypervolume;
  doc["reference_point"] = {{"surrogate", result.reference.loss},
                            {"cost", result.reference.cost},
                            {"scale", kReferenceScale}};
  return doc;
}

}  // namespace blocknas
