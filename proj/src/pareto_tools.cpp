#include "blocknas/pareto_tools.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "blocknas/errors.hpp"
#include "blocknas/io.hpp"

namespace blocknas {

using nlohmann::json;

EvaluatedGenome select_by_budget(const std::vector<EvaluatedGenome>& front, double budget, CostKind kind) {
  if (front.empty()) throw InfeasibleError("front is empty");
  const EvaluatedGenome* best = nullptr;
  double cheapest = std::numeric_limits<double>::infinity();
  for (const auto& m : front) {
    const double c = cost_value(m.cost, kind);
    cheapest = std::min(cheapest, c);
    if (c > budget) continue;
    if (!best || m.surrogate < best->surrogate ||
        (m.surrogate == best->surrogate && c < cost_value(best->cost, kind)))
      best = &m;
  }
  if (!best)
    throw InfeasibleError("no front member fits budget " + format_double9(budget) + " " + to_string(kind) +
                          "; cheapest front cost is " + format_double9(cheapest));
  return *best;
}

ExportFormat parse_export_format(const std::string& text) {
  if (text == "csv") return ExportFormat::csv;
  if (text == "json") return ExportFormat::json;
  throw ConfigurationError("unknown export format '" + text + "' (expected csv or json)");
}

namespace {

std::vector<EvaluatedGenome> sorted_front(const SearchResult& result) {
  auto front = result.front;
  const CostKind kind = result.config.cost_kind;
  std::stable_sort(front.begin(), front.end(), [&](const EvaluatedGenome& a, const EvaluatedGenome& b) {
    const double ca = cost_value(a.cost, kind), cb = cost_value(b.cost, kind);
    if (ca != cb) return ca < cb;
    if (a.surrogate != b.surrogate) return a.surrogate < b.surrogate;
    return a.genome < b.genome;
  });
  return front;
}

std::string join_choices(const ModelGenome& g) {
  std::string out;
  for (std::size_t i = 0; i < g.choices.size(); ++i) {
    if (i) out += '-';
    out += std::to_string(g.choices[i]);
  }
  return out;
}

}  // namespace

std::string export_front(const SearchResult& result, ExportFormat format) {
  const auto front = sorted_front(result);
  const std::size_t slots = front.empty() ? 0 : front.front().genome.choices.size();
  if (format == ExportFormat::json) {
    SearchResult copy = result;
    copy.front = front;
    return dump_json(search_result_to_json(copy));
  }
  std::string out = "# " + std::string("blocknas ") + tool_version() + " space=" + result.space_name +
                    " config=" + result.config.to_json(slots).dump() + "\n";
  out += "choices,surrogate,macs,latency_us\n";
  for (const auto& m : front) {
    out += join_choices(m.genome) + "," + format_double9(m.surrogate) + "," + std::to_string(m.cost.macs) + "," +
           (m.cost.latency_us ? format_double9(*m.cost.latency_us) : "") + "\n";
  }
  return out;
}

std::vector<FrontRow> parse_front_csv(const std::string& text) {
  std::vector<FrontRow> rows;
  std::istringstream in(text);
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "choices,surrogate,macs,latency_us") throw ParseError("unexpected CSV header: " + line);
      header_seen = true;
      continue;
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != 4) throw ParseError("CSV row must have 4 fields: " + line);
    FrontRow row;
    std::istringstream cs(fields[0]);
    std::string c;
    try {
      while (std::getline(cs, c, '-')) row.genome.choices.push_back(static_cast<std::uint32_t>(std::stoul(c)));
      row.surrogate = std::stod(fields[1]);
      row.macs = std::stoull(fields[2]);
      if (!fields[3].empty()) row.latency_us = std::stod(fields[3]);
    } catch (const std::exception&) {
      throw ParseError("malformed CSV row: " + line);
    }
    rows.push_back(std::move(row));
  }
  if (!header_seen) throw ParseError("CSV has no header");
  return rows;
}

std::string front_plot_data(const SearchResult& result) {
  std::string out = "x_cost,y_surrogate\n";
  for (const auto& m : sorted_front(result))
    out += format_double9(cost_value(m.cost, result.config.cost_kind)) + "," + format_double9(m.surrogate) + "\n";
  return out;
}

BkdEpochs parse_bkd_epochs(const std::string& text) {
  BkdEpochs out;
  std::string number = text;
  if (!number.empty() && number.back() == 'e') {
    out.symbolic = true;
    number.pop_back();
    if (number.empty()) number = "1";
  }
  try {
    std::size_t used = 0;
    out.value = std::stod(number, &used);
    if (used != number.size()) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigurationError("cannot parse BKD epochs '" + text + "' (expected e.g. 1e or 3)");
  }
  if (out.value < 0) throw ConfigurationError("BKD epochs must be non-negative");
  return out;
}

SearchCostEstimate estimate_search_cost(double predictor_epochs, double finetune_models,
                                        double epochs_per_finetune, BkdEpochs bkd) {
  if (predictor_epochs < 0 || finetune_models < 0 || epochs_per_finetune < 0 || bkd.value < 0)
    throw ConfigurationError("epoch counts must be non-negative");
  std::vector<std::string> parts;
  if (predictor_epochs > 0) parts.push_back(format_double9(predictor_epochs));
  if (finetune_models > 0 && epochs_per_finetune > 0) {
    parts.push_back(finetune_models == 1 ? format_double9(epochs_per_finetune)
                                         : format_double9(finetune_models) + " x " + format_double9(epochs_per_finetune));
  }
  if (bkd.value > 0) parts.push_back(format_double9(bkd.value) + (bkd.symbolic ? "e" : ""));

  SearchCostEstimate out;
  out.total_epochs = predictor_epochs + finetune_models * epochs_per_finetune + bkd.value;
  if (parts.empty()) {
    out.rendered = "0";
  } else {
    for (std::size_t i = 0; i < parts.size(); ++i) out.rendered += (i ? " + " : "") + parts[i];
  }
  return out;
}

}  // namespace blocknas
