#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "blocknas/bkd_library.hpp"
#include "blocknas/cost_model.hpp"

namespace blocknas {

struct LatencyClientOptions {
  int window = 8;    // concurrent in-flight requests
  int attempts = 3;  // per request, including the first
  std::chrono::milliseconds initial_backoff{100};
  std::chrono::milliseconds timeout{5000};
};

// Hardware-in-the-loop provider speaking the /v1/measure protocol. Results
// are cached per choices vector for the lifetime of the object, so repeated
// queries for one genome cost a single wire request.
class ServiceLatencyProvider final : public LatencyProvider {
 public:
  ServiceLatencyProvider(std::string endpoint, SearchSpace space, LatencyClientOptions options = {});

  double measure(const ModelGenome& genome) override;
  std::vector<double> measure_batch(std::span<const ModelGenome> genomes) override;
  const SearchSpace& space() const override { return space_; }

  /// Raw query; entries may be kAbsentSlot.
  double measure_choices(const std::vector<std::int64_t>& choices);
  std::vector<double> measure_choices_batch(std::span<const std::vector<std::int64_t>> batch);

  /// GET /v1/health; false on any failure.
  bool healthy() const;

  std::uint64_t wire_requests() const;
  const std::string& endpoint() const { return endpoint_; }

 private:
  std::string endpoint_;
  SearchSpace space_;
  LatencyClientOptions options_;
  mutable std::mutex mutex_;
  std::map<std::vector<std::int64_t>, double> cache_;
  std::uint64_t next_request_ = 0;
  mutable std::atomic<std::uint64_t> wire_requests_{0};
};

// Fills per-block latencies through block-as-model queries: each block is
// measured alone (all other slots absent) and the empty model's latency is
// subtracted. The empty-model latency is stored as the library's base.
// `space` must be the space the library is bound to; queries are expressed
// in the provider's (full) space by option id.
BlockLibrary measure_library(const BlockLibrary& library, const SearchSpace& space,
                             ServiceLatencyProvider& provider);

}  // namespace blocknas
