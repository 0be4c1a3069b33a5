#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "blocknas/bkd_library.hpp"
#include "blocknas/cost_model.hpp"
#include "blocknas/search_space.hpp"

namespace blocknas {

struct FilterConfig {
  double threshold_d = 0.0;  // relative cost slack, >= 0
  CostKind cost_kind = CostKind::macs;
};

struct DiscardedOption {
  std::string option_id;
  double mse = 0.0;
  double cost_ratio = 0.0;
  std::string binding_competitor;
};

struct RetainedOption {
  std::string option_id;
  double mse = 0.0;
  double cost_ratio = 0.0;
};

struct SlotFilterReport {
  std::vector<RetainedOption> retained;
  std::vector<DiscardedOption> discarded;
};

struct FilterReport {
  FilterConfig config;
  std::vector<SlotFilterReport> slots;

  nlohmann::json to_json() const;
};

/// Option cost relative to the slot's mothernet block, in the given kind.
double cost_ratio(const BkdRecord& record, const BkdRecord& mothernet, CostKind kind);

// Per-slot staircase filter. Option b is discarded iff some option b' in the
// same slot has mse(b') <= mse(b) and (1 + D) * ratio(b') <= ratio(b), with
// at least one of the two strict. With D = 0 this keeps exactly the
// per-slot Pareto set of (mse, cost ratio). The mothernet is always kept.
std::pair<BlockLibrary, FilterReport> filter_library(const BlockLibrary& library,
                                                     const SearchSpace& space,
                                                     const FilterConfig& config);

/// Reduced space holding only the options retained by `report`.
SearchSpace filtered_space(const FilterReport& report, const SearchSpace& space);

struct FilteredCardinality {
  BigInt cardinality;
  std::size_t retained_blocks = 0;
  std::size_t total_blocks = 0;
};

FilteredCardinality filtered_cardinality(const FilterReport& report, const SearchSpace& space);

/// Human-readable per-slot table.
std::string format_filter_report(const FilterReport& report);

/// (slot, option_id, mse, cost_ratio, retained) rows for external plotting.
std::string filter_scatter_csv(const FilterReport& report);

}  // namespace blocknas
