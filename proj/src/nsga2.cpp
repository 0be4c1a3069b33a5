#include "blocknas/nsga2.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace blocknas {

bool dominates(const Objectives& a, const Objectives& b) {
  return a.loss <= b.loss && a.cost <= b.cost && (a.loss < b.loss || a.cost < b.cost);
}

std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const Objectives> points) {
  const std::size_t n = points.size();
  std::vector<std::vector<std::size_t>> dominated_by_me(n);
  std::vector<std::size_t> domination_count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;

  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n; ++q) {
      if (dominates(points[p], points[q])) {
        dominated_by_me[p].push_back(q);
        ++domination_count[q];
      } else if (dominates(points[q], points[p])) {
        dominated_by_me[q].push_back(p);
        ++domination_count[p];
      }
    }
  }

  std::vector<std::size_t> current;
  for (std::size_t p = 0; p < n; ++p)
    if (domination_count[p] == 0) current.push_back(p);

  while (!current.empty()) {
    std::vector<std::size_t> next;
    for (std::size_t p : current) {
      for (std::size_t q : dominated_by_me[p]) {
        if (--domination_count[q] == 0) next.push_back(q);
      }
    }
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(current));
    current = std::move(next);
  }
  return fronts;
}

std::vector<double> crowding_distance(std::span<const Objectives> points,
                                      std::span<const std::size_t> front) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const std::size_t m = front.size();
  std::vector<double> distance(m, 0.0);
  if (m <= 2) {
    std::fill(distance.begin(), distance.end(), inf);
    return distance;
  }

  std::vector<std::size_t> order(m);
  auto accumulate_objective = [&](double Objectives::*field) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return points[front[a]].*field < points[front[b]].*field;
    });
    const double lo = points[front[order.front()]].*field;
    const double hi = points[front[order.back()]].*field;
    distance[order.front()] = inf;
    distance[order.back()] = inf;
    if (!(hi > lo)) return;
    for (std::size_t i = 1; i + 1 < m; ++i) {
      const double gap = points[front[order[i + 1]]].*field - points[front[order[i - 1]]].*field;
      distance[order[i]] += gap / (hi - lo);
    }
  };
  accumulate_objective(&Objectives::loss);
  accumulate_objective(&Objectives::cost);
  return distance;
}

}  // namespace blocknas
