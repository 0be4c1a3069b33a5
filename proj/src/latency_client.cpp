#include "blocknas/latency_client.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "blocknas/errors.hpp"
#include "blocknas/io.hpp"
#include "blocknas/mock_device.hpp"

namespace blocknas {

using nlohmann::json;

namespace {

std::unique_ptr<httplib::Client> make_client(const std::string& endpoint,
                                             const LatencyClientOptions& options) {
  auto client = std::make_unique<httplib::Client>(endpoint);
  if (!client->is_valid()) throw ConfigurationError("invalid measurement endpoint '" + endpoint + "'");
  const auto secs = options.timeout.count() / 1000;
  const auto usecs = (options.timeout.count() % 1000) * 1000;
  client->set_connection_timeout(secs, usecs);
  client->set_read_timeout(secs, usecs);
  client->set_write_timeout(secs, usecs);
  client->set_keep_alive(true);
  return client;
}

double parse_response(const std::string& body, const std::string& request_id) {
  json resp;
  try {
    resp = json::parse(body);
  } catch (const json::parse_error&) {
    throw ProtocolError("measurement response is not valid JSON");
  }
  if (!resp.is_object() || !resp.contains("request_id") || !resp["request_id"].is_string())
    throw ProtocolError("measurement response lacks a string request_id");
  if (resp["request_id"].get<std::string>() != request_id)
    throw ProtocolError("response request_id '" + resp["request_id"].get<std::string>() +
                        "' does not match request '" + request_id + "'");
  if (!resp.contains("latency_us") || !resp["latency_us"].is_number())
    throw ProtocolError("measurement response lacks numeric latency_us");
  const double latency = resp["latency_us"].get<double>();
  if (!(latency >= 0) || !std::isfinite(latency))
    throw ProtocolError("measurement response carries invalid latency");
  return latency;
}

}  // namespace

ServiceLatencyProvider::ServiceLatencyProvider(std::string endpoint, SearchSpace space,
                                               LatencyClientOptions options)
    : endpoint_(std::move(endpoint)), space_(std::move(space)), options_(options) {
  if (endpoint_.empty()) throw ConfigurationError("no measurement endpoint configured");
  if (options_.window < 1) options_.window = 1;
  if (options_.attempts < 1) options_.attempts = 1;
  make_client(endpoint_, options_);  // validates the URL early
}

std::uint64_t ServiceLatencyProvider::wire_requests() const { return wire_requests_.load(); }

bool ServiceLatencyProvider::healthy() const {
  try {
    auto client = make_client(endpoint_, options_);
    auto res = client->Get("/v1/health");
    return res && res->status == 200;
  } catch (const std::exception&) {
    return false;
  }
}

double ServiceLatencyProvider::measure(const ModelGenome& genome) {
  return measure_batch(std::span<const ModelGenome>(&genome, 1)).front();
}

std::vector<double> ServiceLatencyProvider::measure_batch(std::span<const ModelGenome> genomes) {
  std::vector<std::vector<std::int64_t>> batch;
  batch.reserve(genomes.size());
  for (const auto& g : genomes) {
    if (!is_valid_genome(space_, g))
      throw ConsistencyError("genome " + to_string(g) + " is not valid for space '" + space_.name + "'");
    batch.emplace_back(g.choices.begin(), g.choices.end());
  }
  return measure_choices_batch(batch);
}

double ServiceLatencyProvider::measure_choices(const std::vector<std::int64_t>& choices) {
  return measure_choices_batch(std::span<const std::vector<std::int64_t>>(&choices, 1)).front();
}

std::vector<double> ServiceLatencyProvider::measure_choices_batch(
    std::span<const std::vector<std::int64_t>> batch) {
  // Unique, uncached keys in first-seen order.
  std::vector<std::vector<std::int64_t>> pending;
  std::vector<std::string> request_ids;
  {
    std::lock_guard lock(mutex_);
    std::map<std::vector<std::int64_t>, bool> seen;
    for (const auto& key : batch) {
      if (cache_.contains(key) || seen.contains(key)) continue;
      seen.emplace(key, true);
      pending.push_back(key);
      request_ids.push_back("req-" + std::to_string(next_request_++));
    }
  }

  std::vector<std::optional<double>> results(pending.size());
  std::vector<std::exception_ptr> errors(pending.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};

  auto worker = [&] {
    std::unique_ptr<httplib::Client> client;
    for (std::size_t i = next.fetch_add(1); i < pending.size(); i = next.fetch_add(1)) {
      if (abort.load()) break;
      try {
        if (!client) client = make_client(endpoint_, options_);
        const json body = {{"request_id", request_ids[i]},
                           {"space_name", space_.name},
                           {"choices", pending[i]}};
        const std::string payload = body.dump();
        std::string last_failure;
        for (int attempt = 0; attempt < options_.attempts; ++attempt) {
          if (attempt > 0) std::this_thread::sleep_for(options_.initial_backoff * (1 << (attempt - 1)));
          wire_requests_.fetch_add(1);
          auto res = client->Post("/v1/measure", payload, "application/json");
          if (!res) {
            last_failure = httplib::to_string(res.error());
            client = make_client(endpoint_, options_);
            continue;
          }
          if (res->status >= 500) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
          }
          if (res->status != 200) {
            std::string detail;
            try {
              detail = json::parse(res->body).value("error", "");
            } catch (const std::exception&) {
            }
            throw ProtocolError("measurement rejected with HTTP " + std::to_string(res->status) +
                                (detail.empty() ? "" : ": " + detail));
          }
          results[i] = parse_response(res->body, request_ids[i]);
          break;
        }
        if (!results[i])
          throw TransportError("measurement endpoint " + endpoint_ + " unreachable after " +
                               std::to_string(options_.attempts) + " attempts (" + last_failure + ")");
      } catch (...) {
        errors[i] = std::current_exception();
        abort.store(true);
      }
    }
  };

  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(options_.window), pending.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::lock_guard lock(mutex_);
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (results[i]) cache_.emplace(pending[i], *results[i]);
  }
  // Deterministic error surfacing: the first failing request in batch order.
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
  std::vector<double> out;
  out.reserve(batch.size());
  for (const auto& key : batch) out.push_back(cache_.at(key));
  return out;
}

BlockLibrary measure_library(const BlockLibrary& library, const SearchSpace& space,
                             ServiceLatencyProvider& provider) {
  const SearchSpace& full = provider.space();
  if (full.name != space.name || full.slots.size() != space.slots.size())
    throw ConsistencyError("measurement space '" + full.name + "' does not match library space '" +
                           space.name + "'");
  const std::vector<std::int64_t> empty(space.slots.size(), kAbsentSlot);
  std::vector<std::vector<std::int64_t>> queries{empty};
  for (std::size_t n = 0; n < space.slots.size(); ++n) {
    for (const auto& option : space.slots[n].options) {
      const auto idx = full.slots[n].find_option(option.option_id);
      if (!idx) throw ConsistencyError("option '" + option.option_id + "' unknown to the device space");
      auto q = empty;
      q[n] = static_cast<std::int64_t>(*idx);
      queries.push_back(std::move(q));
    }
  }
  const auto latencies = provider.measure_choices_batch(queries);

  BlockLibrary out = library;
  out.base_latency_us = latencies[0];
  std::size_t k = 1;
  for (std::size_t n = 0; n < out.slots.size(); ++n) {
    for (auto& record : out.slots[n]) {
      const double block = latencies[k++] - latencies[0];
      if (!(block > 0))
        throw ProtocolError("device reported non-positive block latency for option '" + record.option_id + "'");
      record.cost_latency_us = block;
    }
  }
  out.provenance["tool_version"] = tool_version();
  out.provenance["config"]["latency_measured"] = true;
  return out;
}

}  // namespace blocknas
