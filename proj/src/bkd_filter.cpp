#include "blocknas/bkd_filter.hpp"

#include <cmath>
#include <sstream>

#include "blocknas/errors.hpp"
#include "blocknas/io.hpp"

namespace blocknas {

using nlohmann::json;

namespace {

double record_cost(const BkdRecord& r, CostKind kind) {
  if (kind == CostKind::macs) return static_cast<double>(r.cost_macs);
  if (!r.cost_latency_us)
    throw ConfigurationError("latency cost requested but option '" + r.option_id +
                             "' has no measured latency; run `library measure` first");
  return *r.cost_latency_us;
}

}  // namespace

double cost_ratio(const BkdRecord& record, const BkdRecord& mothernet, CostKind kind) {
  const double base = record_cost(mothernet, kind);
  if (!(base > 0))
    throw ConsistencyError("mothernet block '" + mothernet.option_id + "' has zero cost; ratio undefined");
  return record_cost(record, kind) / base;
}

std::pair<BlockLibrary, FilterReport> filter_library(const BlockLibrary& library,
                                                     const SearchSpace& space,
                                                     const FilterConfig& config) {
  if (!(config.threshold_d >= 0) || !std::isfinite(config.threshold_d))
    throw ConfigurationError("threshold D must be a finite non-negative number");
  if (library.slots.size() != space.slots.size())
    throw CoverageError("library and space disagree on slot count");

  const double slack = 1.0 + config.threshold_d;
  FilterReport report{config, {}};
  BlockLibrary filtered = library;
  filtered.filtered_with_d = config.threshold_d;

  for (std::size_t n = 0; n < library.slots.size(); ++n) {
    const auto& records = library.slots[n];
    if (records.empty()) throw CoverageError("slot " + std::to_string(n) + " has no records");
    std::vector<double> ratio;
    ratio.reserve(records.size());
    for (const auto& r : records) ratio.push_back(cost_ratio(r, records[0], config.cost_kind));

    SlotFilterReport slot_report;
    std::vector<BkdRecord> kept;
    for (std::size_t b = 0; b < records.size(); ++b) {
      // Among dominating competitors, report the cheapest (earliest on ties).
      std::optional<std::size_t> binding;
      if (b != 0) {
        for (std::size_t c = 0; c < records.size(); ++c) {
          if (c == b) continue;
          const bool loss_ok = records[c].mse_loss <= records[b].mse_loss;
          const double scaled = slack * ratio[c];
          const bool cost_ok = scaled <= ratio[b];
          const bool strict = records[c].mse_loss < records[b].mse_loss || scaled < ratio[b];
          if (loss_ok && cost_ok && strict && (!binding || ratio[c] < ratio[*binding])) binding = c;
        }
      }
      if (binding) {
        slot_report.discarded.push_back(
            {records[b].option_id, records[b].mse_loss, ratio[b], records[*binding].option_id});
      } else {
        slot_report.retained.push_back({records[b].option_id, records[b].mse_loss, ratio[b]});
        kept.push_back(records[b]);
      }
    }
    filtered.slots[n] = std::move(kept);
    report.slots.push_back(std::move(slot_report));
  }

  filtered.provenance = {{"tool_version", tool_version()},
                         {"config",
                          {{"source", library.provenance},
                           {"filter", {{"threshold_d", config.threshold_d},
                                       {"cost_kind", to_string(config.cost_kind)}}}}}};
  return {std::move(filtered), std::move(report)};
}

SearchSpace filtered_space(const FilterReport& report, const SearchSpace& space) {
  std::vector<std::vector<std::string>> kept;
  kept.reserve(report.slots.size());
  for (const auto& s : report.slots) {
    std::vector<std::string> ids;
    for (const auto& r : s.retained) ids.push_back(r.option_id);
    kept.push_back(std::move(ids));
  }
  return restrict_space(space, kept);
}

FilteredCardinality filtered_cardinality(const FilterReport& report, const SearchSpace& space) {
  if (report.slots.size() != space.slots.size())
    throw ConsistencyError("filter report and space disagree on slot count");
  FilteredCardinality out{1, 0, 0};
  for (std::size_t n = 0; n < report.slots.size(); ++n) {
    out.cardinality *= report.slots[n].retained.size();
    out.retained_blocks += report.slots[n].retained.size();
    out.total_blocks += space.slots[n].options.size();
  }
  return out;
}

json FilterReport::to_json() const {
  json slots_json = json::array();
  for (std::size_t n = 0; n < slots.size(); ++n) {
    json retained = json::array();
    for (const auto& r : slots[n].retained)
      retained.push_back({{"option_id", r.option_id}, {"mse", r.mse}, {"cost_ratio", r.cost_ratio}});
    json discarded = json::array();
    for (const auto& d : slots[n].discarded)
      discarded.push_back({{"option_id", d.option_id},
                           {"mse", d.mse},
                           {"cost_ratio", d.cost_ratio},
                           {"binding_competitor", d.binding_competitor}});
    slots_json.push_back({{"slot_index", n}, {"retained", retained}, {"discarded", discarded}});
  }
  return {{"threshold_d", config.threshold_d},
          {"cost_kind", to_string(config.cost_kind)},
          {"slots", slots_json}};
}

std::string format_filter_report(const FilterReport& report) {
  std::ostringstream os;
  os << "slot  retained  discarded\n";
  for (std::size_t n = 0; n < report.slots.size(); ++n) {
    os << n << "     " << report.slots[n].retained.size() << "         "
       << report.slots[n].discarded.size() << "\n";
    for (const auto& d : report.slots[n].discarded) {
      os << "      - " << d.option_id << "  mse=" << format_double9(d.mse)
         << "  ratio=" << format_double9(d.cost_ratio) << "  beaten by " << d.binding_competitor << "\n";
    }
  }
  return os.str();
}

std::string filter_scatter_csv(const FilterReport& report) {
  std::string out = "slot,option_id,mse,cost_ratio,retained\n";
  for (std::size_t n = 0; n < report.slots.size(); ++n) {
    for (const auto& r : report.slots[n].retained)
      out += std::to_string(n) + "," + r.option_id + "," + format_double9(r.mse) + "," +
             format_double9(r.cost_ratio) + ",1\n";
    for (const auto& d : report.slots[n].discarded)
      out += std::to_string(n) + "," + d.option_id + "," + format_double9(d.mse) + "," +
             format_double9(d.cost_ratio) + ",0\n";
  }
  return out;
}

}  // namespace blocknas
