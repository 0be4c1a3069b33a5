#include "blocknas/cost_model.hpp"

#include "blocknas/errors.hpp"

namespace blocknas {

const char* to_string(CostKind kind) { return kind == CostKind::macs ? "macs" : "latency"; }

CostKind parse_cost_kind(const std::string& text) {
  if (text == "macs") return CostKind::macs;
  if (text == "latency" || text == "latency_us") return CostKind::latency;
  throw ConfigurationError("unknown cost kind '" + text + "' (expected macs or latency)");
}

double cost_value(const CostVector& cost, CostKind kind) {
  if (kind == CostKind::macs) return static_cast<double>(cost.macs);
  if (!cost.latency_us)
    throw ConfigurationError("latency cost requested but no latency was measured");
  return *cost.latency_us;
}

namespace {

std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_mul_overflow(a, b, &out)) throw ConsistencyError("MAC count overflows 64 bits");
  return out;
}

std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_add_overflow(a, b, &out)) throw ConsistencyError("MAC count overflows 64 bits");
  return out;
}

std::uint64_t pixels(Resolution r) {
  return mul(static_cast<std::uint64_t>(r.height), static_cast<std::uint64_t>(r.width));
}

struct CellShape {
  Resolution in_res;
  Resolution out_res;
  std::uint64_t in_ch;
  std::uint64_t out_ch;
  std::uint64_t expanded;
};

template <typename F>
void for_each_cell(const BlockSlot& slot, const BlockOption& option, F&& f) {
  const auto out_ch = static_cast<std::uint64_t>(slot.out_channels);
  const Resolution out_res = slot.out_resolution();
  f(CellShape{slot.in_resolution, out_res, static_cast<std::uint64_t>(slot.in_channels), out_ch,
              expanded_channels(slot.in_channels, option.expansion, option.channel_scale)});
  const auto repeat_expanded =
      expanded_channels(slot.out_channels, option.expansion, option.channel_scale);
  for (int d = 1; d < option.depth; ++d) {
    f(CellShape{out_res, out_res, out_ch, out_ch, repeat_expanded});
  }
}

}  // namespace

std::uint64_t expanded_channels(int cell_in_channels, int expansion, ChannelScale scale) {
  const std::uint64_t num =
      mul(mul(static_cast<std::uint64_t>(cell_in_channels), static_cast<std::uint64_t>(expansion)),
          static_cast<std::uint64_t>(numerator(scale)));
  const auto den = static_cast<std::uint64_t>(denominator(scale));
  return (2 * num + den) / (2 * den);
}

std::uint64_t pointwise_macs(Resolution res, std::uint64_t in_ch, std::uint64_t out_ch) {
  return mul(mul(pixels(res), in_ch), out_ch);
}

std::uint64_t spatial_macs(LayerType type, Resolution out_res, std::uint64_t expanded, int kernel) {
  const auto k2 = static_cast<std::uint64_t>(kernel) * static_cast<std::uint64_t>(kernel);
  const std::uint64_t per_pixel =
      type == LayerType::depthwise_inverted_bottleneck
          ? mul(k2, expanded)
          : mul(mul(k2, expanded), expanded) / static_cast<std::uint64_t>(kGroupedConvGroups);
  return mul(pixels(out_res), per_pixel);
}

std::uint64_t macs_of_block(const BlockSlot& slot, const BlockOption& option) {
  std::uint64_t total = 0;
  for_each_cell(slot, option, [&](const CellShape& c) {
    total = add(total, pointwise_macs(c.in_res, c.in_ch, c.expanded));
    total = add(total, spatial_macs(option.layer_type, c.out_res, c.expanded, option.kernel));
    total = add(total, pointwise_macs(c.out_res, c.expanded, c.out_ch));
  });
  return total;
}

std::uint64_t params_of_block(const BlockSlot& slot, const BlockOption& option) {
  const auto k2 = static_cast<std::uint64_t>(option.kernel) * static_cast<std::uint64_t>(option.kernel);
  std::uint64_t total = 0;
  for_each_cell(slot, option, [&](const CellShape& c) {
    const std::uint64_t spatial =
        option.layer_type == LayerType::depthwise_inverted_bottleneck
            ? mul(k2, c.expanded)
            : mul(mul(k2, c.expanded), c.expanded) / static_cast<std::uint64_t>(kGroupedConvGroups);
    total = add(total, add(add(mul(c.in_ch, c.expanded), spatial), mul(c.expanded, c.out_ch)));
  });
  return total;
}

CostVector macs_of_model(const ModelGenome& genome, const SearchSpace& space) {
  if (!is_valid_genome(space, genome))
    throw ConsistencyError("genome " + to_string(genome) + " is not valid for space '" + space.name + "'");
  CostVector cost;
  cost.macs = add(space.stem_cost_macs, space.head_cost_macs);
  for (std::size_t n = 0; n < space.slots.size(); ++n) {
    const auto& slot = space.slots[n];
    const auto& option = slot.options[genome.choices[n]];
    cost.macs = add(cost.macs, macs_of_block(slot, option));
    cost.params = add(cost.params, params_of_block(slot, option));
  }
  return cost;
}

std::vector<double> LatencyProvider::measure_batch(std::span<const ModelGenome> genomes) {
  std::vector<double> out;
  out.reserve(genomes.size());
  for (const auto& g : genomes) out.push_back(measure(g));
  return out;
}

CompositionalLatencyProvider::CompositionalLatencyProvider(SearchSpace space, double stem_head_us,
                                                           std::vector<std::vector<double>> block_us)
    : space_(std::move(space)), stem_head_us_(stem_head_us), block_us_(std::move(block_us)) {
  if (block_us_.size() != space_.slots.size())
    throw ConsistencyError("latency table has wrong slot count");
  for (std::size_t n = 0; n < block_us_.size(); ++n) {
    if (block_us_[n].size() != space_.slots[n].options.size())
      throw ConsistencyError("latency table has wrong option count in slot " + std::to_string(n));
  }
}

double CompositionalLatencyProvider::measure(const ModelGenome& genome) {
  if (!is_valid_genome(space_, genome))
    throw ConsistencyError("genome " + to_string(genome) + " is not valid for the latency table");
  double total = stem_head_us_;
  for (std::size_t n = 0; n < genome.choices.size(); ++n) total += block_us_[n][genome.choices[n]];
  return total;
}

}  // namespace blocknas
