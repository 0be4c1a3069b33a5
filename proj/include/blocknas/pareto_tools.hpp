#pragma once

#include <string>
#include <vector>

#include "blocknas/evo_search.hpp"

namespace blocknas {

/// Lowest-surrogate front member whose cost (in `kind`) is within budget.
/// Throws InfeasibleError naming the cheapest front cost when none fits.
EvaluatedGenome select_by_budget(const std::vector<EvaluatedGenome>& front, double budget, CostKind kind);

enum class ExportFormat { csv, json };

ExportFormat parse_export_format(const std::string& text);

// Front rows sorted by the result's cost kind, ascending. CSV columns are
// choices,surrogate,macs,latency_us with choices joined by '-', numbers at
// 9 significant digits and an empty field for unmeasured latency. A
// leading '#' line records the tool version and search configuration.
std::string export_front(const SearchResult& result, ExportFormat format);

struct FrontRow {
  ModelGenome genome;
  double surrogate = 0.0;
  std::uint64_t macs = 0;
  std::optional<double> latency_us;
};

/// Reads the CSV written by export_front.
std::vector<FrontRow> parse_front_csv(const std::string& text);

/// x=cost,y=surrogate rows for plotting.
std::string front_plot_data(const SearchResult& result);

// Epoch accounting in the "P + M x E + Be" style used by NAS cost tables.
struct BkdEpochs {
  double value = 0.0;
  bool symbolic = false;  // render as "<value>e" (e.g. "1e") instead of a number
};

/// Parses "1e"-style symbolic counts or plain numbers.
BkdEpochs parse_bkd_epochs(const std::string& text);

struct SearchCostEstimate {
  double total_epochs = 0.0;
  std::string rendered;
};

SearchCostEstimate estimate_search_cost(double predictor_epochs, double finetune_models,
                                        double epochs_per_finetune, BkdEpochs bkd);

}  // namespace blocknas
