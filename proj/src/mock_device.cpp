#include "blocknas/mock_device.hpp"

#include <cmath>

#include "httplib.h"
#include "json.hpp"

#include "blocknas/cost_model.hpp"
#include "blocknas/errors.hpp"
#include "blocknas/rng.hpp"

namespace blocknas {

using nlohmann::json;

double quantize_latency(double us) {
  return std::nearbyint(us / kLatencyQuantumUs) * kLatencyQuantumUs;
}

MockDevice::MockDevice(SearchSpace space, MockDeviceConfig config)
    : space_(std::move(space)), config_(config) {
  if (config_.base_us < 0 || config_.fusion_us < 0 || config_.us_per_mac < 0 ||
      config_.block_overhead_us < 0 || config_.swish_us_per_cell < 0 || config_.noise_us < 0)
    throw ConfigurationError("mock device parameters must be non-negative");
  config_.base_us = quantize_latency(config_.base_us);
  config_.fusion_us = quantize_latency(config_.fusion_us);
}

double MockDevice::block_latency_us(std::size_t slot, std::size_t option) const {
  const BlockSlot& s = space_.slots.at(slot);
  const BlockOption& o = s.options.at(option);
  double us = config_.us_per_mac * static_cast<double>(macs_of_block(s, o)) + config_.block_overhead_us;
  if (o.activation == Activation::swish) us += config_.swish_us_per_cell * o.depth;
  return quantize_latency(us);
}

std::size_t MockDevice::same_type_adjacencies(const SearchSpace& space,
                                              std::span<const std::int64_t> choices) {
  std::size_t count = 0;
  for (std::size_t n = 1; n < choices.size(); ++n) {
    if (choices[n - 1] == kAbsentSlot || choices[n] == kAbsentSlot) continue;
    const auto& a = space.slots[n - 1].options[static_cast<std::size_t>(choices[n - 1])];
    const auto& b = space.slots[n].options[static_cast<std::size_t>(choices[n])];
    if (a.layer_type == b.layer_type) ++count;
  }
  return count;
}

double MockDevice::latency_us(std::span<const std::int64_t> choices) const {
  if (choices.size() != space_.slots.size())
    throw ConsistencyError("expected " + std::to_string(space_.slots.size()) + " choices, got " +
                           std::to_string(choices.size()));
  for (std::size_t n = 0; n < choices.size(); ++n) {
    const auto c = choices[n];
    if (c == kAbsentSlot) continue;
    if (c < 0 || static_cast<std::size_t>(c) >= space_.slots[n].options.size())
      throw ConsistencyError("choice " + std::to_string(c) + " out of range for slot " + std::to_string(n));
  }

  double total = config_.base_us;
  for (std::size_t n = 0; n < choices.size(); ++n) {
    if (choices[n] != kAbsentSlot) total += block_latency_us(n, static_cast<std::size_t>(choices[n]));
  }
  total -= config_.fusion_us * static_cast<double>(same_type_adjacencies(space_, choices));

  if (config_.noise_us > 0) {
    std::uint64_t h = mix64(config_.seed);
    for (auto c : choices) h = mix64(h ^ static_cast<std::uint64_t>(c));
    Rng rng(h);
    total += quantize_latency(rng.uniform01() * config_.noise_us);
  }
  return std::max(total, 0.0);
}

double MockDevice::latency_us(const ModelGenome& genome) const {
  std::vector<std::int64_t> choices(genome.choices.begin(), genome.choices.end());
  return latency_us(choices);
}

std::pair<int, std::string> handle_measure_request(const MockDevice& device, const std::string& body) {
  auto bad = [](const std::string& msg) {
    return std::make_pair(400, json{{"error", msg}}.dump());
  };
  json req;
  try {
    req = json::parse(body);
  } catch (const json::parse_error&) {
    return bad("request body is not valid JSON");
  }
  if (!req.is_object()) return bad("request body must be a JSON object");
  if (!req.contains("request_id") || !req["request_id"].is_string())
    return bad("request_id must be a string");
  if (!req.contains("space_name") || !req["space_name"].is_string())
    return bad("space_name must be a string");
  if (req["space_name"].get<std::string>() != device.space().name)
    return bad("unknown space '" + req["space_name"].get<std::string>() + "'");
  if (!req.contains("choices") || !req["choices"].is_array())
    return bad("choices must be an array of integers");
  std::vector<std::int64_t> choices;
  for (const auto& c : req["choices"]) {
    if (!c.is_number_integer()) return bad("choices must be an array of integers");
    choices.push_back(c.get<std::int64_t>());
  }
  double latency = 0;
  try {
    latency = device.latency_us(choices);
  } catch (const Error& e) {
    return bad(e.what());
  }
  json resp = {{"request_id", req["request_id"]},
               {"latency_us", latency},
               {"energy_mj", nullptr},
               {"cycles", nullptr}};
  return {200, resp.dump()};
}

MockDeviceServer::MockDeviceServer(MockDevice device)
    : device_(std::move(device)),
      server_(std::make_unique<httplib::Server>()),
      served_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  install_routes();
}

MockDeviceServer::~MockDeviceServer() { stop(); }

void MockDeviceServer::install_routes() {
  server_->Post("/v1/measure", [this](const httplib::Request& req, httplib::Response& res) {
    served_->fetch_add(1);
    auto [status, body] = handle_measure_request(device_, req.body);
    res.status = status;
    res.set_content(body, "application/json");
  });
  server_->Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });
}

int MockDeviceServer::start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    if (!server_->bind_to_port(host, port)) port_ = -1;
    else port_ = port;
  }
  if (port_ < 0) throw TransportError("cannot bind mock device to " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void MockDeviceServer::run(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!server_->listen(host, port))
    throw TransportError("cannot listen on " + host + ":" + std::to_string(port));
}

void MockDeviceServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockDeviceServer::endpoint() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

std::uint64_t MockDeviceServer::requests_served() const { return served_->load(); }

}  // namespace blocknas
