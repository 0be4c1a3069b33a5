#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "blocknas/search_space.hpp"

namespace blocknas {

enum class CostKind { macs, latency };

const char* to_string(CostKind kind);
/// Accepts "macs", "latency" and "latency_us".
CostKind parse_cost_kind(const std::string& text);

struct CostVector {
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
  std::optional<double> latency_us;  // set iff a latency provider was consulted

  bool operator==(const CostVector&) const = default;
};

/// Scalar objective for the given kind. Throws ConfigurationError when
/// latency is requested but absent.
double cost_value(const CostVector& cost, CostKind kind);

// --- Analytic MBConv arithmetic -------------------------------------------
//
// An inverted-bottleneck cell is expand 1x1 -> spatial kxk -> project 1x1.
// The first cell of a block carries the stride and the in->out channel
// change; cells 2..depth run at stride 1 with out_channels on both sides.
// Expanded channels are round(expansion * channel_scale * cell_in_channels),
// halves rounding up.

std::uint64_t expanded_channels(int cell_in_channels, int expansion, ChannelScale scale);

std::uint64_t pointwise_macs(Resolution res, std::uint64_t in_ch, std::uint64_t out_ch);

/// Spatial conv at output resolution: depthwise k*k*c_e per pixel, grouped
/// k*k*c_e*c_e/G per pixel.
std::uint64_t spatial_macs(LayerType type, Resolution out_res, std::uint64_t expanded, int kernel);

std::uint64_t macs_of_block(const BlockSlot& slot, const BlockOption& option);
std::uint64_t params_of_block(const BlockSlot& slot, const BlockOption& option);

/// Stem + blocks + head MACs and block parameters; latency left empty.
CostVector macs_of_model(const ModelGenome& genome, const SearchSpace& space);

// --- Latency providers ----------------------------------------------------

class LatencyProvider {
 public:
  virtual ~LatencyProvider() = default;

  /// Whole-model latency in microseconds. `genome` indexes the provider's
  /// own space.
  virtual double measure(const ModelGenome& genome) = 0;

  /// Order-preserving batch form; providers may overlap requests.
  virtual std::vector<double> measure_batch(std::span<const ModelGenome> genomes);

  virtual const SearchSpace& space() const = 0;
};

// Layer-sum estimate: stem/head latency plus a per-(slot, option) table.
class CompositionalLatencyProvider final : public LatencyProvider {
 public:
  CompositionalLatencyProvider(SearchSpace space, double stem_head_us,
                               std::vector<std::vector<double>> block_us);

  double measure(const ModelGenome& genome) override;
  const SearchSpace& space() const override { return space_; }

 private:
  SearchSpace space_;
  double stem_head_us_;
  std::vector<std::vector<double>> block_us_;
};

/// Convenience wrapper matching the pipeline vocabulary.
inline double measure_latency(const ModelGenome& genome, LatencyProvider& provider) {
  return provider.measure(genome);
}

}  // namespace blocknas
