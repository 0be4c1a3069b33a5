#include "blocknas/bkd_library.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "blocknas/errors.hpp"
#include "blocknas/io.hpp"
#include "blocknas/rng.hpp"

namespace blocknas {

using nlohmann::json;

const BkdRecord& BlockLibrary::record(std::size_t slot, std::size_t option) const {
  if (slot >= slots.size() || option >= slots[slot].size())
    throw CoverageError("no record for slot " + std::to_string(slot) + ", option index " +
                        std::to_string(option));
  return slots[slot][option];
}

std::size_t BlockLibrary::size() const {
  std::size_t n = 0;
  for (const auto& s : slots) n += s.size();
  return n;
}

bool BlockLibrary::has_latency() const {
  if (!base_latency_us) return false;
  for (const auto& s : slots)
    for (const auto& r : s)
      if (!r.cost_latency_us) return false;
  return true;
}

namespace {

BkdRecord record_from_json(const json& j, std::size_t line) {
  const std::string where = "line " + std::to_string(line);
  if (!j.is_object()) throw ParseError(where + ": record must be a JSON object");
  auto need = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(where + ": missing key '" + key + "'");
    return *it;
  };
  BkdRecord r;
  const json& slot = need("slot_index");
  if (!slot.is_number_integer() || slot.get<std::int64_t>() < 0)
    throw ParseError(where + ": slot_index must be a non-negative integer");
  r.slot_index = slot.get<std::size_t>();
  const json& id = need("option_id");
  if (!id.is_string()) throw ParseError(where + ": option_id must be a string");
  r.option_id = id.get<std::string>();
  const json& mse = need("mse_loss");
  if (!mse.is_number()) throw ParseError(where + ": mse_loss must be a number");
  r.mse_loss = mse.get<double>();
  const json& macs = need("cost_macs");
  if (!macs.is_number_integer()) throw ParseError(where + ": cost_macs must be an integer");
  if (macs.get<std::int64_t>() <= 0 && !macs.is_number_unsigned())
    throw ConsistencyError(where + ": cost_macs must be positive");
  r.cost_macs = macs.get<std::uint64_t>();
  const json& lat = need("cost_latency_us");
  if (!lat.is_null()) {
    if (!lat.is_number()) throw ParseError(where + ": cost_latency_us must be a number or null");
    r.cost_latency_us = lat.get<double>();
  }
  const json& epochs = need("trained_epochs");
  if (!epochs.is_number()) throw ParseError(where + ": trained_epochs must be a number");
  r.trained_epochs = epochs.get<double>();
  return r;
}

json record_to_json(const BkdRecord& r) {
  return {{"slot_index", r.slot_index},
          {"option_id", r.option_id},
          {"mse_loss", r.mse_loss},
          {"cost_macs", r.cost_macs},
          {"cost_latency_us", r.cost_latency_us ? json(*r.cost_latency_us) : json(nullptr)},
          {"trained_epochs", r.trained_epochs}};
}

std::string record_label(std::size_t slot, const std::string& id) {
  return "(slot " + std::to_string(slot) + ", option \"" + id + "\")";
}

}  // namespace

LibraryFile parse_library(const std::string& text) {
  LibraryFile file;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      if (!j.is_object() || !j.contains("space_name") || !j["space_name"].is_string())
        throw ParseError("line " + std::to_string(line_no) + ": header must carry a string space_name");
      if (!j.contains("format_version") || j["format_version"] != kLibraryFormatVersion)
        throw ParseError("unsupported library format_version (expected " +
                         std::to_string(kLibraryFormatVersion) + ")");
      file.header = std::move(j);
      have_header = true;
      continue;
    }
    file.records.push_back(record_from_json(j, line_no));
  }
  if (!have_header) throw ParseError("library file is empty");
  return file;
}

BlockLibrary bind_library(const LibraryFile& file, const SearchSpace& space) {
  BlockLibrary lib;
  lib.space_name = file.header.at("space_name").get<std::string>();
  if (lib.space_name != space.name)
    throw ConsistencyError("library is for space '" + lib.space_name + "', not '" + space.name + "'");
  if (auto it = file.header.find("filtered_with_d"); it != file.header.end() && !it->is_null()) {
    if (!it->is_number()) throw ParseError("header filtered_with_d must be a number");
    lib.filtered_with_d = it->get<double>();
  }
  if (auto it = file.header.find("base_latency_us"); it != file.header.end() && !it->is_null()) {
    if (!it->is_number() || it->get<double>() < 0)
      throw ConsistencyError("header base_latency_us must be a non-negative number");
    lib.base_latency_us = it->get<double>();
  }
  for (auto key : {"tool_version", "config"}) {
    if (auto it = file.header.find(key); it != file.header.end()) lib.provenance[key] = *it;
  }

  std::vector<std::vector<std::optional<BkdRecord>>> placed(space.slots.size());
  for (std::size_t n = 0; n < space.slots.size(); ++n) placed[n].resize(space.slots[n].options.size());

  for (const auto& r : file.records) {
    const std::string label = record_label(r.slot_index, r.option_id);
    if (r.slot_index >= space.slots.size())
      throw CoverageError("extra record " + label + ": slot does not exist");
    const auto idx = space.slots[r.slot_index].find_option(r.option_id);
    if (!idx) throw CoverageError("extra record " + label + ": option does not exist");
    auto& cell = placed[r.slot_index][*idx];
    if (cell) throw ConsistencyError("duplicate record " + label);
    if (!std::isfinite(r.mse_loss) || r.mse_loss < 0)
      throw ConsistencyError("record " + label + " has negative or non-finite mse_loss");
    if (*idx == 0 && r.mse_loss != 0.0)
      throw ConsistencyError("mothernet record " + label + " must have mse_loss 0");
    if (r.cost_macs == 0) throw ConsistencyError("record " + label + " must have positive cost_macs");
    if (r.cost_latency_us && !(*r.cost_latency_us > 0 && std::isfinite(*r.cost_latency_us)))
      throw ConsistencyError("record " + label + " must have positive cost_latency_us");
    if (!(r.trained_epochs >= 0)) throw ConsistencyError("record " + label + " has negative trained_epochs");
    cell = r;
  }

  lib.slots.resize(space.slots.size());
  for (std::size_t n = 0; n < space.slots.size(); ++n) {
    for (std::size_t m = 0; m < placed[n].size(); ++m) {
      if (!placed[n][m])
        throw CoverageError("missing record " + record_label(n, space.slots[n].options[m].option_id));
      lib.slots[n].push_back(*placed[n][m]);
    }
  }
  return lib;
}

BlockLibrary load_library(const std::filesystem::path& path, const SearchSpace& space) {
  return bind_library(parse_library(read_file(path)), space);
}

LibraryView load_library_view(const std::filesystem::path& path, const SearchSpace& full_space) {
  const LibraryFile file = parse_library(read_file(path));
  const auto it = file.header.find("filtered_with_d");
  if (it == file.header.end() || it->is_null()) return {full_space, bind_library(file, full_space)};

  std::vector<std::vector<std::string>> kept(full_space.slots.size());
  for (const auto& r : file.records) {
    if (r.slot_index >= kept.size())
      throw CoverageError("extra record " + record_label(r.slot_index, r.option_id) + ": slot does not exist");
    kept[r.slot_index].push_back(r.option_id);
  }
  for (std::size_t n = 0; n < kept.size(); ++n) {
    const auto& mothernet_id = full_space.slots[n].options.at(0).option_id;
    if (std::find(kept[n].begin(), kept[n].end(), mothernet_id) == kept[n].end())
      throw CoverageError("filtered library lost mothernet record " + record_label(n, mothernet_id));
  }
  SearchSpace reduced = restrict_space(full_space, kept);
  BlockLibrary lib = bind_library(file, reduced);
  return {std::move(reduced), std::move(lib)};
}

std::string serialize_library(const BlockLibrary& library) {
  json header = {{"space_name", library.space_name}, {"format_version", kLibraryFormatVersion}};
  header["tool_version"] = library.provenance.value("tool_version", std::string(tool_version()));
  if (library.provenance.contains("config")) header["config"] = library.provenance["config"];
  if (library.filtered_with_d) header["filtered_with_d"] = *library.filtered_with_d;
  if (library.base_latency_us) header["base_latency_us"] = *library.base_latency_us;

  std::string out = header.dump() + "\n";
  for (const auto& slot : library.slots)
    for (const auto& r : slot) out += record_to_json(r).dump() + "\n";
  return out;
}

void save_library(const std::filesystem::path& path, const BlockLibrary& library) {
  write_file_atomic(path, serialize_library(library));
}

json SynthProfile::to_json() const {
  return {{"alpha", alpha},         {"beta", beta},           {"gamma", gamma},
          {"delta", delta},         {"noise_max", noise_max}, {"trained_epochs", trained_epochs}};
}

SynthProfile SynthProfile::from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaError("synth profile must be a JSON object");
  SynthProfile p;
  auto read = [&](const char* key, double& field) {
    if (auto it = doc.find(key); it != doc.end()) {
      if (!it->is_number()) throw SchemaError(std::string("$.") + key + ": expected a number");
      field = it->get<double>();
      if (field < 0) throw SchemaError(std::string("$.") + key + ": must be non-negative");
    }
  };
  read("alpha", p.alpha);
  read("beta", p.beta);
  read("gamma", p.gamma);
  read("delta", p.delta);
  read("noise_max", p.noise_max);
  read("trained_epochs", p.trained_epochs);
  for (const auto& [key, _] : doc.items()) {
    static const std::vector<std::string> known = {"alpha", "beta", "gamma", "delta", "noise_max",
                                                   "trained_epochs"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw SchemaError("$." + key + ": unknown profile key");
  }
  return p;
}

BlockLibrary synth_library(const SearchSpace& space, const SynthProfile& profile, std::uint64_t seed) {
  Rng rng(seed);
  BlockLibrary lib;
  lib.space_name = space.name;
  lib.provenance = {{"tool_version", tool_version()},
                    {"config", {{"generator", "synth"}, {"seed", seed}, {"profile", profile.to_json()}}}};
  lib.slots.resize(space.slots.size());
  for (std::size_t n = 0; n < space.slots.size(); ++n) {
    const BlockSlot& slot = space.slots[n];
    for (std::size_t m = 0; m < slot.options.size(); ++m) {
      const BlockOption& o = slot.options[m];
      // Always draw, so a record's noise depends only on its position.
      const double noise = rng.uniform01() * profile.noise_max;
      double mse = profile.alpha / o.depth + profile.beta / o.expansion +
                   (o.kernel == 3 ? profile.gamma : 0.0) +
                   (o.channel_scale == ChannelScale::half ? profile.delta : 0.0) + noise;
      if (m == 0) mse = 0.0;
      BkdRecord r;
      r.slot_index = n;
      r.option_id = o.option_id;
      r.mse_loss = std::max(mse, 0.0);
      r.cost_macs = macs_of_block(slot, o);
      r.trained_epochs = profile.trained_epochs;
      lib.slots[n].push_back(std::move(r));
    }
  }
  return lib;
}

double surrogate_loss(const ModelGenome& genome, const BlockLibrary& library) {
  if (genome.choices.size() != library.slots.size())
    throw CoverageError("genome " + to_string(genome) + " does not match the library's slot count");
  std::vector<double> terms;
  terms.reserve(genome.choices.size());
  for (std::size_t n = 0; n < genome.choices.size(); ++n)
    terms.push_back(library.record(n, genome.choices[n]).mse_loss);
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  return total;
}

CompositionalLatencyProvider compositional_provider(const BlockLibrary& library,
                                                    const SearchSpace& space) {
  if (!library.has_latency())
    throw ConfigurationError("library has no measured latencies; run `library measure` first");
  std::vector<std::vector<double>> table(library.slots.size());
  for (std::size_t n = 0; n < library.slots.size(); ++n)
    for (const auto& r : library.slots[n]) table[n].push_back(*r.cost_latency_us);
  return CompositionalLatencyProvider(space, *library.base_latency_us, std::move(table));
}

}  // namespace blocknas
