#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "blocknas/cost_model.hpp"
#include "blocknas/search_space.hpp"

namespace blocknas {

inline constexpr int kLibraryFormatVersion = 1;

/// Distillation result and cost for one (slot, option) pair.
struct BkdRecord {
  std::size_t slot_index = 0;
  std::string option_id;
  double mse_loss = 0.0;
  std::uint64_t cost_macs = 1;
  std::optional<double> cost_latency_us;
  double trained_epochs = 0.0;

  bool operator==(const BkdRecord&) const = default;
};

// Per-(slot, option) records aligned with a search space: slots[n][m]
// belongs to option m of slot n of the space the library was bound to.
struct BlockLibrary {
  std::string space_name;
  std::optional<double> filtered_with_d;
  /// Whole-model latency with every slot absent; written by `library measure`.
  std::optional<double> base_latency_us;
  /// Producer metadata echoed from the header (tool version, configuration).
  nlohmann::json provenance = nlohmann::json::object();
  std::vector<std::vector<BkdRecord>> slots;

  const BkdRecord& record(std::size_t slot, std::size_t option) const;
  std::size_t size() const;
  bool has_latency() const;

  bool operator==(const BlockLibrary&) const = default;
};

/// Library file contents before coverage checks against a space.
struct LibraryFile {
  nlohmann::json header;
  std::vector<BkdRecord> records;  // file order
};

LibraryFile parse_library(const std::string& text);

/// Checks coverage and consistency against `space` and aligns records to it.
BlockLibrary bind_library(const LibraryFile& file, const SearchSpace& space);

BlockLibrary load_library(const std::filesystem::path& path, const SearchSpace& space);

struct LibraryView {
  SearchSpace space;  // the full space, or its reduced view for filtered libraries
  BlockLibrary library;
};

// Loads a library that may have been filtered. Filtered files are bound to
// the reduced space holding exactly the option ids they contain.
LibraryView load_library_view(const std::filesystem::path& path, const SearchSpace& full_space);

/// JSON Lines text: header line then one record per line in slot/option order.
std::string serialize_library(const BlockLibrary& library);
void save_library(const std::filesystem::path& path, const BlockLibrary& library);

// Analytic loss law for synthetic libraries:
//   mse = alpha/depth + beta/expansion + gamma*[kernel==3] + delta*[scale==1/2] + U[0, noise_max)
struct SynthProfile {
  double alpha = 0.2;
  double beta = 0.1;
  double gamma = 0.02;
  double delta = 0.05;
  double noise_max = 0.01;
  double trained_epochs = 0.0;

  nlohmann::json to_json() const;
  static SynthProfile from_json(const nlohmann::json& doc);
};

BlockLibrary synth_library(const SearchSpace& space, const SynthProfile& profile, std::uint64_t seed);

/// Sum of the chosen blocks' MSE. Terms are summed in sorted order, so the
/// value does not depend on slot order.
double surrogate_loss(const ModelGenome& genome, const BlockLibrary& library);

/// Compositional latency table from a measured library.
CompositionalLatencyProvider compositional_provider(const BlockLibrary& library,
                                                    const SearchSpace& space);

}  // namespace blocknas
