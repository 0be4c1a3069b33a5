#include "blocknas/search_space.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "blocknas/errors.hpp"
#include "blocknas/io.hpp"

namespace blocknas {

using nlohmann::json;

const char* to_string(LayerType t) {
  switch (t) {
    case LayerType::depthwise_inverted_bottleneck: return "depthwise_inverted_bottleneck";
    case LayerType::grouped_inverted_bottleneck: return "grouped_inverted_bottleneck";
  }
  return "?";
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::swish: return "swish";
  }
  return "?";
}

double to_double(ChannelScale s) { return s == ChannelScale::half ? 0.5 : 1.0; }

std::optional<std::size_t> BlockSlot::find_option(std::string_view option_id) const {
  for (std::size_t i = 0; i < options.size(); ++i) {
    if (options[i].option_id == option_id) return i;
  }
  return std::nullopt;
}

std::string to_string(const ModelGenome& genome) {
  std::string out = "(";
  for (std::size_t i = 0; i < genome.choices.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(genome.choices[i]);
  }
  return out + ")";
}

namespace {

bool in(int value, std::initializer_list<int> domain) {
  return std::find(domain.begin(), domain.end(), value) != domain.end();
}

}  // namespace

std::vector<Violation> validate_space(const SearchSpace& space) {
  std::vector<Violation> report;
  auto add = [&](std::optional<std::size_t> slot, std::string rule, std::string message) {
    report.push_back({slot, std::move(rule), std::move(message)});
  };

  if (space.name.empty()) add(std::nullopt, "name_nonempty", "space name is empty");

  for (std::size_t n = 0; n < space.slots.size(); ++n) {
    const BlockSlot& slot = space.slots[n];
    if (slot.in_channels <= 0 || slot.out_channels <= 0)
      add(n, "positive_channels", "in_channels and out_channels must be positive");
    if (slot.in_resolution.height <= 0 || slot.in_resolution.width <= 0)
      add(n, "positive_resolution", "in_resolution entries must be positive");
    if (slot.stride != 1 && slot.stride != 2) {
      add(n, "stride_domain", "stride must be 1 or 2, got " + std::to_string(slot.stride));
    } else if (slot.in_resolution.height % slot.stride != 0 ||
               slot.in_resolution.width % slot.stride != 0) {
      add(n, "stride_divides_resolution", "stride must divide in_resolution");
    }
    if (slot.options.empty()) add(n, "options_nonempty", "slot has no options");

    std::set<std::string> ids;
    for (std::size_t m = 0; m < slot.options.size(); ++m) {
      const BlockOption& o = slot.options[m];
      const std::string where = "option " + std::to_string(m) + " ('" + o.option_id + "')";
      if (o.option_id.empty()) add(n, "option_id_nonempty", where + ": empty option_id");
      if (!ids.insert(o.option_id).second)
        add(n, "option_id_unique", where + ": duplicate option_id");
      if (!in(o.kernel, {3, 5}))
        add(n, "kernel_domain", where + ": kernel must be 3 or 5");
      if (!in(o.expansion, {2, 3, 4, 6}))
        add(n, "expansion_domain", where + ": expansion must be one of 2,3,4,6");
      if (!in(o.depth, {1, 2, 3, 4, 6, 8}))
        add(n, "depth_domain", where + ": depth must be one of 1,2,3,4,6,8");
      if (o.layer_type == LayerType::grouped_inverted_bottleneck) {
        // round(in * expansion * scale), halves up; checked for the first and repeated cells
        auto expanded = [&](int in) {
          const int full = in * o.expansion;
          return o.channel_scale == ChannelScale::half ? (full + 1) / 2 : full;
        };
        const bool repeats = o.depth > 1;
        if (expanded(slot.in_channels) % kGroupedConvGroups != 0 ||
            (repeats && expanded(slot.out_channels) % kGroupedConvGroups != 0))
          add(n, "grouped_channels_divisible",
              where + ": expanded channels must divide into " + std::to_string(kGroupedConvGroups) + " groups");
      }
    }

    if (n > 0) {
      const BlockSlot& prev = space.slots[n - 1];
      if (slot.in_channels != prev.out_channels)
        add(n, "chain_channels",
            "in_channels " + std::to_string(slot.in_channels) + " != previous out_channels " +
                std::to_string(prev.out_channels));
      if (prev.stride > 0 && slot.in_resolution != prev.out_resolution())
        add(n, "chain_resolution", "in_resolution does not equal previous slot's output resolution");
    }
  }
  return report;
}

bool is_valid_genome(const SearchSpace& space, const ModelGenome& genome) {
  if (genome.choices.size() != space.slots.size()) return false;
  for (std::size_t n = 0; n < space.slots.size(); ++n) {
    if (genome.choices[n] >= space.slots[n].options.size()) return false;
  }
  return true;
}

BigInt cardinality(const SearchSpace& space) {
  BigInt total = 1;
  for (const auto& slot : space.slots) total *= slot.options.size();
  return total;
}

GenomeEnumerator::GenomeEnumerator(const SearchSpace& space) {
  radices_.reserve(space.slots.size());
  for (const auto& slot : space.slots) {
    radices_.push_back(static_cast<std::uint32_t>(slot.options.size()));
    if (slot.options.empty()) done_ = true;
  }
  current_.choices.assign(radices_.size(), 0);
}

std::optional<ModelGenome> GenomeEnumerator::next() {
  if (done_) return std::nullopt;
  ModelGenome out = current_;
  // Odometer increment, last slot fastest.
  std::size_t i = radices_.size();
  while (i > 0) {
    --i;
    if (++current_.choices[i] < radices_[i]) return out;
    current_.choices[i] = 0;
  }
  done_ = true;
  return out;
}

std::vector<ModelGenome> enumerate_genomes(const SearchSpace& space,
                                           std::optional<std::uint64_t> limit,
                                           std::uint64_t bound) {
  BigInt count = cardinality(space);
  if (limit && BigInt(*limit) < count) count = *limit;
  if (count > bound) {
    std::ostringstream msg;
    msg << "materializing " << count << " genomes exceeds the bound of " << bound;
    throw BoundExceededError(msg.str());
  }
  const auto n = count.convert_to<std::uint64_t>();
  std::vector<ModelGenome> out;
  out.reserve(n);
  GenomeEnumerator it(space);
  while (out.size() < n) {
    auto g = it.next();
    if (!g) break;
    out.push_back(std::move(*g));
  }
  return out;
}

ModelGenome random_genome(const SearchSpace& space, Rng& rng) {
  ModelGenome g;
  g.choices.reserve(space.slots.size());
  for (const auto& slot : space.slots) {
    g.choices.push_back(static_cast<std::uint32_t>(rng.uniform_index(slot.options.size())));
  }
  return g;
}

ModelGenome mothernet_genome(const SearchSpace& space) {
  return ModelGenome{std::vector<std::uint32_t>(space.slots.size(), 0)};
}

SearchSpace restrict_space(const SearchSpace& space,
                           const std::vector<std::vector<std::string>>& kept_ids) {
  if (kept_ids.size() != space.slots.size())
    throw ConsistencyError("restriction lists " + std::to_string(kept_ids.size()) +
                           " slots, space has " + std::to_string(space.slots.size()));
  SearchSpace out = space;
  for (std::size_t n = 0; n < space.slots.size(); ++n) {
    const std::set<std::string> keep(kept_ids[n].begin(), kept_ids[n].end());
    for (const auto& id : keep) {
      if (!space.slots[n].find_option(id))
        throw ConsistencyError("slot " + std::to_string(n) + " has no option '" + id + "'");
    }
    auto& opts = out.slots[n].options;
    std::erase_if(opts, [&](const BlockOption& o) { return !keep.contains(o.option_id); });
  }
  return out;
}

ModelGenome expand_genome(const SearchSpace& reduced, const SearchSpace& full,
                          const ModelGenome& genome) {
  ModelGenome out;
  out.choices.reserve(genome.choices.size());
  for (std::size_t n = 0; n < genome.choices.size(); ++n) {
    const auto& id = reduced.slots.at(n).options.at(genome.choices[n]).option_id;
    auto idx = full.slots.at(n).find_option(id);
    if (!idx) throw ConsistencyError("option '" + id + "' missing from full space slot " + std::to_string(n));
    out.choices.push_back(static_cast<std::uint32_t>(*idx));
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + "." + key + ": missing required key");
  return *it;
}

std::int64_t get_int(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_number_integer()) throw SchemaError(path + "." + key + ": expected an integer");
  return v.get<std::int64_t>();
}

std::uint64_t get_uint(const json& obj, const std::string& key, const std::string& path) {
  const auto v = get_int(obj, key, path);
  if (v < 0) throw SchemaError(path + "." + key + ": must be non-negative");
  return static_cast<std::uint64_t>(v);
}

std::string get_string(const json& obj, const std::string& key, const std::string& path) {
  const json& v = require(obj, key, path);
  if (!v.is_string()) throw SchemaError(path + "." + key + ": expected a string");
  return v.get<std::string>();
}

int narrow(std::int64_t v, const std::string& path) {
  if (v < INT32_MIN || v > INT32_MAX) throw SchemaError(path + ": value out of range");
  return static_cast<int>(v);
}

LayerType parse_layer_type(const json& obj, const std::string& path) {
  const auto s = get_string(obj, "layer_type", path);
  if (s == "depthwise_inverted_bottleneck") return LayerType::depthwise_inverted_bottleneck;
  if (s == "grouped_inverted_bottleneck") return LayerType::grouped_inverted_bottleneck;
  throw SchemaError(path + ".layer_type: unknown layer type '" + s + "'");
}

Activation parse_activation(const json& obj, const std::string& path) {
  const auto s = get_string(obj, "activation", path);
  if (s == "relu") return Activation::relu;
  if (s == "swish") return Activation::swish;
  throw SchemaError(path + ".activation: unknown activation '" + s + "'");
}

ChannelScale parse_channel_scale(const json& obj, const std::string& path) {
  const json& v = require(obj, "channel_scale", path);
  if (v.is_number()) {
    const double d = v.get<double>();
    if (d == 0.5) return ChannelScale::half;
    if (d == 1.0) return ChannelScale::full;
  } else if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "1/2") return ChannelScale::half;
    if (s == "1") return ChannelScale::full;
  }
  throw SchemaError(path + ".channel_scale: must be 0.5 or 1");
}

}  // namespace

SearchSpace space_from_json(const json& doc, bool check_invariants) {
  const std::string root = "$";
  SearchSpace space;
  space.name = get_string(doc, "name", root);
  space.stem_cost_macs = get_uint(doc, "stem_cost_macs", root);
  space.head_cost_macs = get_uint(doc, "head_cost_macs", root);
  if (auto it = doc.find("grouped_conv_groups"); it != doc.end()) {
    if (!it->is_number_integer() || it->get<int>() != kGroupedConvGroups)
      throw SchemaError(root + ".grouped_conv_groups: only " + std::to_string(kGroupedConvGroups) +
                        " groups are supported");
  }

  const json& slots = require(doc, "slots", root);
  if (!slots.is_array()) throw SchemaError(root + ".slots: expected an array");
  for (std::size_t n = 0; n < slots.size(); ++n) {
    const std::string sp = root + ".slots[" + std::to_string(n) + "]";
    const json& js = slots[n];
    BlockSlot slot;
    slot.in_channels = narrow(get_int(js, "in_channels", sp), sp + ".in_channels");
    slot.out_channels = narrow(get_int(js, "out_channels", sp), sp + ".out_channels");
    const json& res = require(js, "in_resolution", sp);
    if (!res.is_array() || res.size() != 2 || !res[0].is_number_integer() ||
        !res[1].is_number_integer())
      throw SchemaError(sp + ".in_resolution: expected [H, W] integers");
    slot.in_resolution = {narrow(res[0].get<std::int64_t>(), sp + ".in_resolution[0]"),
                          narrow(res[1].get<std::int64_t>(), sp + ".in_resolution[1]")};
    slot.stride = narrow(get_int(js, "stride", sp), sp + ".stride");

    const json& opts = require(js, "options", sp);
    if (!opts.is_array()) throw SchemaError(sp + ".options: expected an array");
    for (std::size_t m = 0; m < opts.size(); ++m) {
      const std::string op = sp + ".options[" + std::to_string(m) + "]";
      const json& jo = opts[m];
      BlockOption o;
      o.layer_type = parse_layer_type(jo, op);
      o.kernel = narrow(get_int(jo, "kernel", op), op + ".kernel");
      o.expansion = narrow(get_int(jo, "expansion", op), op + ".expansion");
      o.depth = narrow(get_int(jo, "depth", op), op + ".depth");
      o.activation = parse_activation(jo, op);
      o.channel_scale = parse_channel_scale(jo, op);
      o.option_id = get_string(jo, "option_id", op);
      slot.options.push_back(std::move(o));
    }
    space.slots.push_back(std::move(slot));
  }

  const auto report = check_invariants ? validate_space(space) : std::vector<Violation>{};
  if (!report.empty()) {
    const auto& v = report.front();
    std::string where = v.slot ? root + ".slots[" + std::to_string(*v.slot) + "]" : root;
    std::string msg = where + ": " + v.rule + ": " + v.message;
    if (report.size() > 1) msg += " (and " + std::to_string(report.size() - 1) + " more)";
    throw SchemaError(msg);
  }
  return space;
}

json space_to_json(const SearchSpace& space) {
  json slots = json::array();
  for (const auto& slot : space.slots) {
    json opts = json::array();
    for (const auto& o : slot.options) {
      opts.push_back({{"option_id", o.option_id},
                      {"layer_type", to_string(o.layer_type)},
                      {"kernel", o.kernel},
                      {"expansion", o.expansion},
                      {"depth", o.depth},
                      {"activation", to_string(o.activation)},
                      {"channel_scale", to_double(o.channel_scale)}});
    }
    slots.push_back({{"in_channels", slot.in_channels},
                     {"out_channels", slot.out_channels},
                     {"in_resolution", {slot.in_resolution.height, slot.in_resolution.width}},
                     {"stride", slot.stride},
                     {"options", std::move(opts)}});
  }
  return {{"name", space.name},
          {"stem_cost_macs", space.stem_cost_macs},
          {"head_cost_macs", space.head_cost_macs},
          {"grouped_conv_groups", kGroupedConvGroups},
          {"slots", std::move(slots)}};
}

SearchSpace load_space(const std::filesystem::path& path, bool check_invariants) {
  const json doc = read_json_file(path);
  try {
    return space_from_json(doc, check_invariants);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

}  // namespace blocknas
