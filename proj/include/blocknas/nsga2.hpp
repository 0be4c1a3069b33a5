#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace blocknas {

/// Bi-objective point; both coordinates are minimized.
struct Objectives {
  double loss = 0.0;
  double cost = 0.0;

  bool operator==(const Objectives&) const = default;
};

/// a is no worse in both objectives and strictly better in at least one.
bool dominates(const Objectives& a, const Objectives& b);

/// Fronts of point indices by non-domination rank; indices within a front
/// are ascending.
std::vector<std::vector<std::size_t>> non_dominated_sort(std::span<const Objectives> points);

/// Crowding distance for the points of `front` (indices into `points`),
/// aligned with `front`. Extremes of either objective get +infinity;
/// zero-range objectives contribute nothing.
std::vector<double> crowding_distance(std::span<const Objectives> points,
                                      std::span<const std::size_t> front);

}  // namespace blocknas
