#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include "json.hpp"

#include "blocknas/rng.hpp"

namespace blocknas {

enum class LayerType { depthwise_inverted_bottleneck, grouped_inverted_bottleneck };
enum class Activation { relu, swish };

// Scales the expanded (internal) channels of a block. Output channels are
// never scaled.
enum class ChannelScale { half, full };

inline constexpr int numerator(ChannelScale s) { return s == ChannelScale::half ? 1 : 2; }
inline constexpr int denominator(ChannelScale) { return 2; }

const char* to_string(LayerType t);
const char* to_string(Activation a);
double to_double(ChannelScale s);

/// Groups used by grouped_inverted_bottleneck spatial convolutions.
inline constexpr int kGroupedConvGroups = 2;

struct BlockOption {
  LayerType layer_type = LayerType::depthwise_inverted_bottleneck;
  int kernel = 3;
  int expansion = 4;
  int depth = 1;
  Activation activation = Activation::relu;
  ChannelScale channel_scale = ChannelScale::full;
  std::string option_id;

  bool operator==(const BlockOption&) const = default;
};

struct Resolution {
  int height = 1;
  int width = 1;

  bool operator==(const Resolution&) const = default;
};

// One replaceable segment of the mothernet. Every option shares the slot's
// boundary shapes; options[0] is the mothernet's own block.
struct BlockSlot {
  int in_channels = 1;
  int out_channels = 1;
  Resolution in_resolution;
  int stride = 1;
  std::vector<BlockOption> options;

  Resolution out_resolution() const {
    return {in_resolution.height / stride, in_resolution.width / stride};
  }
  std::optional<std::size_t> find_option(std::string_view option_id) const;

  bool operator==(const BlockSlot&) const = default;
};

struct SearchSpace {
  std::string name;
  std::uint64_t stem_cost_macs = 0;
  std::uint64_t head_cost_macs = 0;
  std::vector<BlockSlot> slots;

  std::size_t num_slots() const { return slots.size(); }

  bool operator==(const SearchSpace&) const = default;
};

// One candidate network: an option index per slot. Ordering is
// lexicographic over choices, which is the canonical enumeration order.
struct ModelGenome {
  std::vector<std::uint32_t> choices;

  auto operator<=>(const ModelGenome&) const = default;
  bool operator==(const ModelGenome&) const = default;
};

std::string to_string(const ModelGenome& genome);

struct Violation {
  std::optional<std::size_t> slot;
  std::string rule;
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// Checks every space and slot invariant. An empty report means valid.
std::vector<Violation> validate_space(const SearchSpace& space);

/// True iff the genome has one in-range choice per slot.
bool is_valid_genome(const SearchSpace& space, const ModelGenome& genome);

using BigInt = boost::multiprecision::cpp_int;

/// Exact product of per-slot option counts.
BigInt cardinality(const SearchSpace& space);

/// Largest full materialization allowed by enumerate_genomes.
inline constexpr std::uint64_t kDefaultMaterializationBound = 10'000'000;

// Lazy, single-consumer walk over all genomes in lexicographic order.
class GenomeEnumerator {
 public:
  explicit GenomeEnumerator(const SearchSpace& space);

  std::optional<ModelGenome> next();

 private:
  std::vector<std::uint32_t> radices_;
  ModelGenome current_;
  bool done_ = false;
};

/// Materializes the first `limit` genomes (all of them when no limit is
/// given). Throws BoundExceededError if that count exceeds `bound`.
std::vector<ModelGenome> enumerate_genomes(const SearchSpace& space,
                                           std::optional<std::uint64_t> limit = std::nullopt,
                                           std::uint64_t bound = kDefaultMaterializationBound);

/// Independent uniform draw per slot.
ModelGenome random_genome(const SearchSpace& space, Rng& rng);

/// The genome choosing option 0 everywhere.
ModelGenome mothernet_genome(const SearchSpace& space);

// Keeps, per slot, only the listed option ids (in original order). Used to
// build the reduced view a filtered library validates against.
SearchSpace restrict_space(const SearchSpace& space,
                           const std::vector<std::vector<std::string>>& kept_ids);

/// Maps a genome over `reduced` onto the corresponding genome over `full`
/// by option id.
ModelGenome expand_genome(const SearchSpace& reduced, const SearchSpace& full,
                          const ModelGenome& genome);

// JSON space files. Structural problems, and invariant violations when
// `check_invariants` is set, are reported as SchemaError with a
// path-qualified message.
SearchSpace space_from_json(const nlohmann::json& doc, bool check_invariants = true);
nlohmann::json space_to_json(const SearchSpace& space);
SearchSpace load_space(const std::filesystem::path& path, bool check_invariants = true);

}  // namespace blocknas
