#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <thread>
#include <utility>

#include "blocknas/search_space.hpp"

namespace httplib {
class Server;
}

namespace blocknas {

/// Every latency the mock reports is a multiple of this (microseconds).
/// Dyadic steps keep sums exact in double arithmetic.
inline constexpr double kLatencyQuantumUs = 1.0 / 1024.0;

double quantize_latency(double us);

struct MockDeviceConfig {
  double base_us = 200.0;             // stem, head and dispatch overhead
  double fusion_us = 0.0;             // discount per adjacent same-layer-type pair
  double us_per_mac = 2e-4;
  double block_overhead_us = 15.0;
  double swish_us_per_cell = 2.0;
  double noise_us = 0.0;              // uniform [0, noise_us); 0 disables noise
  std::uint64_t seed = 0;
};

/// Marks a slot as absent in a request's choices (block-as-model queries).
inline constexpr std::int64_t kAbsentSlot = -1;

// Whole-model latency law of the simulated device:
//
//   base + sum_n lat(block_n) - fusion * #{adjacent present pairs sharing layer_type} + noise
//   lat(block) = us_per_mac * macs + block_overhead + swish_us_per_cell * [swish] * depth
//
// Each term is quantized to kLatencyQuantumUs. Noise is seeded per request
// from (service seed, choices), never from arrival order.
class MockDevice {
 public:
  MockDevice(SearchSpace space, MockDeviceConfig config);

  const SearchSpace& space() const { return space_; }
  const MockDeviceConfig& config() const { return config_; }

  /// Throws ConsistencyError for wrong length or out-of-range choices.
  double latency_us(std::span<const std::int64_t> choices) const;
  double latency_us(const ModelGenome& genome) const;

  double block_latency_us(std::size_t slot, std::size_t option) const;

  /// Number of adjacent present slot pairs whose chosen blocks share a layer type.
  static std::size_t same_type_adjacencies(const SearchSpace& space,
                                           std::span<const std::int64_t> choices);

 private:
  SearchSpace space_;
  MockDeviceConfig config_;
};

// HTTP front end for MockDevice:
//   POST /v1/measure {"request_id", "space_name", "choices"} -> {"request_id", "latency_us", "energy_mj", "cycles"}
//   GET  /v1/health -> {"status": "ok"}
class MockDeviceServer {
 public:
  explicit MockDeviceServer(MockDevice device);
  ~MockDeviceServer();

  MockDeviceServer(const MockDeviceServer&) = delete;
  MockDeviceServer& operator=(const MockDeviceServer&) = delete;

  /// Binds and serves on a background thread. Port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);

  /// Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);

  void stop();

  int port() const { return port_; }
  std::string endpoint() const;
  std::uint64_t requests_served() const;

 private:
  void install_routes();

  MockDevice device_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
  std::string host_ = "127.0.0.1";
  std::shared_ptr<std::atomic<std::uint64_t>> served_;
};

/// Handles one /v1/measure body. Returns HTTP status and response body.
std::pair<int, std::string> handle_measure_request(const MockDevice& device,
                                                   const std::string& body);

}  // namespace blocknas
