#include <atomic>
#include <chrono>
#include <thread>

#include <gtest/gtest.h>

#include "httplib.h"
#include "json.hpp"

#include "blocknas/bkd_library.hpp"
#include "blocknas/errors.hpp"
#include "blocknas/latency_client.hpp"
#include "blocknas/mock_device.hpp"
#include "test_support.hpp"

namespace blocknas {
namespace {

using nlohmann::json;
using testing::option;

// Two 8-channel slots; slot 1 option "g" is grouped, the rest depthwise.
SearchSpace two_slot_space() {
  auto s = testing::chain_space({{"a", "b"}, {"a", "g"}});
  s.slots[1].options[0].activation = Activation::swish;
  s.slots[1].options[1].layer_type = LayerType::grouped_inverted_bottleneck;
  return s;
}

MockDeviceConfig flat_config(double fusion) {
  MockDeviceConfig c;
  c.base_us = 10;
  c.us_per_mac = 0;
  c.block_overhead_us = 10;
  c.swish_us_per_cell = 10;
  c.fusion_us = fusion;
  return c;
}

TEST(MockDevice, FusionBreaksAdditivity) {
  const auto space = two_slot_space();
  CompositionalLatencyProvider table(space, 10.0, {{10.0, 10.0}, {20.0, 10.0}});
  EXPECT_EQ(table.measure(ModelGenome{{0, 0}}), 40.0);
  MockDevice dev(space, flat_config(3.0));
  EXPECT_EQ(dev.latency_us(ModelGenome{{0, 0}}), 37.0);
  EXPECT_LT(dev.latency_us(ModelGenome{{0, 0}}), 40.0);
}

TEST(MockDevice, SameTypeFasterByFusionPerAdjacency) {
  auto space = two_slot_space();
  space.slots[1].options[0].activation = Activation::relu;
  MockDevice dev(space, flat_config(2.5));
  // (0,0) both depthwise; (0,1) mixed; identical block latencies under flat config.
  EXPECT_EQ(dev.block_latency_us(1, 0), dev.block_latency_us(1, 1));
  EXPECT_EQ(dev.latency_us(ModelGenome{{0, 1}}) - dev.latency_us(ModelGenome{{0, 0}}), 2.5);
}

TEST(MockDevice, EmptyModelIsBase) {
  MockDevice dev(testing::medium_space(), {});
  const std::vector<std::int64_t> none(5, kAbsentSlot);
  EXPECT_EQ(dev.latency_us(none), 200.0);
}

TEST(MockDevice, ExactCompositionalGap) {
  const auto space = testing::medium_space();
  MockDeviceConfig cfg;
  cfg.fusion_us = 7.3;
  MockDevice dev(space, cfg);
  MockDevice no_fusion(space, MockDeviceConfig{});
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const auto g = random_genome(space, rng);
    double sum = 200.0;
    for (std::size_t n = 0; n < 5; ++n) sum += dev.block_latency_us(n, g.choices[n]);
    std::vector<std::int64_t> c(g.choices.begin(), g.choices.end());
    const auto k = static_cast<double>(MockDevice::same_type_adjacencies(space, c));
    EXPECT_EQ(sum - dev.latency_us(g), quantize_latency(7.3) * k);
    EXPECT_EQ(no_fusion.latency_us(g), sum);
  }
}

TEST(MockDevice, NoiseIsPerRequestDeterministic) {
  MockDeviceConfig cfg;
  cfg.noise_us = 5.0;
  cfg.seed = 11;
  MockDevice a(testing::medium_space(), cfg), b(testing::medium_space(), cfg);
  const ModelGenome g{{1, 2, 3, 4, 5}};
  EXPECT_EQ(a.latency_us(g), a.latency_us(g));
  EXPECT_EQ(a.latency_us(g), b.latency_us(g));
  cfg.seed = 12;
  MockDevice c(testing::medium_space(), cfg);
  EXPECT_NE(a.latency_us(g), c.latency_us(g));
}

TEST(MockDevice, RejectsBadChoices) {
  MockDevice dev(testing::medium_space(), {});
  EXPECT_THROW(dev.latency_us(std::vector<std::int64_t>{0, 0}), ConsistencyError);
  EXPECT_THROW(dev.latency_us(std::vector<std::int64_t>{0, 0, 0, 0, 8}), ConsistencyError);
  EXPECT_THROW(dev.latency_us(std::vector<std::int64_t>{0, 0, -2, 0, 0}), ConsistencyError);
}

TEST(MockProtocol, RequestResponseShape) {
  MockDevice dev(testing::small_space(), {});
  auto [status, body] =
      handle_measure_request(dev, R"({"request_id":"r1","space_name":"small_2x4","choices":[1,2]})");
  EXPECT_EQ(status, 200);
  const auto resp = json::parse(body);
  EXPECT_EQ(resp["request_id"], "r1");
  EXPECT_EQ(resp["latency_us"].get<double>(), dev.latency_us(ModelGenome{{1, 2}}));
  EXPECT_TRUE(resp["energy_mj"].is_null());
  EXPECT_TRUE(resp["cycles"].is_null());

  EXPECT_EQ(handle_measure_request(dev, "nope").first, 400);
  EXPECT_EQ(handle_measure_request(dev, R"({"request_id":"r","space_name":"other","choices":[0,0]})").first, 400);
  EXPECT_EQ(handle_measure_request(dev, R"({"request_id":"r","space_name":"small_2x4","choices":[0]})").first, 400);
}

class LiveDevice : public ::testing::Test {
 protected:
  void SetUp() override {
    MockDeviceConfig cfg;
    cfg.fusion_us = 4;
    server = std::make_unique<MockDeviceServer>(MockDevice(testing::medium_space(), cfg));
    server->start();
  }
  std::unique_ptr<MockDeviceServer> server;
};

TEST_F(LiveDevice, HealthAndMeasure) {
  ServiceLatencyProvider p(server->endpoint(), testing::medium_space());
  EXPECT_TRUE(p.healthy());
  MockDeviceConfig cfg;
  cfg.fusion_us = 4;
  MockDevice local(testing::medium_space(), cfg);
  const ModelGenome g{{0, 1, 2, 3, 4}};
  EXPECT_EQ(p.measure(g), local.latency_us(g));
}

TEST_F(LiveDevice, RepeatedQueryIsOneWireRequest) {
  ServiceLatencyProvider p(server->endpoint(), testing::medium_space());
  const ModelGenome g{{7, 6, 5, 4, 3}};
  const double first = p.measure(g);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(p.measure(g), first);
  const std::vector<ModelGenome> batch(10, g);
  p.measure_batch(batch);
  EXPECT_EQ(p.wire_requests(), 1u);
  EXPECT_EQ(server->requests_served(), 1u);
}

TEST_F(LiveDevice, BatchPreservesOrder) {
  const auto space = testing::medium_space();
  ServiceLatencyProvider p(server->endpoint(), space);
  MockDeviceConfig cfg;
  cfg.fusion_us = 4;
  MockDevice local(space, cfg);
  Rng rng(4);
  std::vector<ModelGenome> gs;
  for (int i = 0; i < 64; ++i) gs.push_back(random_genome(space, rng));
  const auto lat = p.measure_batch(gs);
  for (std::size_t i = 0; i < gs.size(); ++i) EXPECT_EQ(lat[i], local.latency_us(gs[i]));
}

TEST_F(LiveDevice, MeasureLibraryFillsBlockLatencies) {
  const auto space = testing::medium_space();
  ServiceLatencyProvider p(server->endpoint(), space);
  const auto lib = synth_library(space, {}, 1);
  const auto measured = measure_library(lib, space, p);
  ASSERT_TRUE(measured.base_latency_us.has_value());
  EXPECT_EQ(*measured.base_latency_us, 200.0);
  EXPECT_TRUE(measured.has_latency());
  MockDevice local(space, {});
  for (std::size_t n = 0; n < space.slots.size(); ++n)
    for (std::size_t m = 0; m < space.slots[n].options.size(); ++m)
      EXPECT_EQ(*measured.record(n, m).cost_latency_us, local.block_latency_us(n, m));
  EXPECT_EQ(measured.record(2, 3).mse_loss, lib.record(2, 3).mse_loss);
}

int dead_port() {
  MockDeviceServer s(MockDevice(testing::small_space(), {}));
  const int port = s.start();
  s.stop();
  return port;
}

TEST(LatencyClient, DeadEndpointIsTransportErrorAfterThreeAttempts) {
  const std::string url = "http://127.0.0.1:" + std::to_string(dead_port());
  LatencyClientOptions opt;
  opt.initial_backoff = std::chrono::milliseconds(20);
  ServiceLatencyProvider p(url, testing::small_space(), opt);
  EXPECT_FALSE(p.healthy());
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_THROW(p.measure(ModelGenome{{0, 0}}), TransportError);
  EXPECT_EQ(p.wire_requests(), 3u);
  // Backoff 20 ms then 40 ms.
  EXPECT_GE(std::chrono::steady_clock::now() - t0, std::chrono::milliseconds(60));
}

TEST(LatencyClient, InvalidUrlIsConfigurationError) {
  EXPECT_THROW(ServiceLatencyProvider("", testing::small_space()), ConfigurationError);
}

// A hand-rolled server that misbehaves in a chosen way.
class FakeServer {
 public:
  explicit FakeServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/measure", [this, handler](const httplib::Request& q, httplib::Response& r) {
      ++hits;
      handler(q, r);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  std::atomic<int> hits{0};

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

LatencyClientOptions fast_retry() {
  LatencyClientOptions opt;
  opt.initial_backoff = std::chrono::milliseconds(1);
  return opt;
}

TEST(LatencyClient, ServerErrorsAreRetriedThenTransport) {
  FakeServer fake([](const httplib::Request&, httplib::Response& r) { r.status = 503; });
  ServiceLatencyProvider p(fake.url(), testing::small_space(), fast_retry());
  EXPECT_THROW(p.measure(ModelGenome{{0, 0}}), TransportError);
  EXPECT_EQ(fake.hits.load(), 3);
}

TEST(LatencyClient, TransientFailureRecovers) {
  std::atomic<int> calls{0};
  FakeServer fake([&](const httplib::Request& q, httplib::Response& r) {
    if (calls++ == 0) {
      r.status = 503;
      return;
    }
    const auto req = json::parse(q.body);
    r.set_content(json{{"request_id", req["request_id"]}, {"latency_us", 123.0}}.dump(), "application/json");
  });
  ServiceLatencyProvider p(fake.url(), testing::small_space(), fast_retry());
  EXPECT_EQ(p.measure(ModelGenome{{1, 1}}), 123.0);
  EXPECT_EQ(fake.hits.load(), 2);
}

TEST(LatencyClient, MalformedResponseIsProtocolError) {
  FakeServer fake([](const httplib::Request&, httplib::Response& r) { r.set_content("{not json", "application/json"); });
  ServiceLatencyProvider p(fake.url(), testing::small_space(), fast_retry());
  EXPECT_THROW(p.measure(ModelGenome{{0, 0}}), ProtocolError);
}

TEST(LatencyClient, MismatchedRequestIdIsProtocolError) {
  FakeServer fake([](const httplib::Request&, httplib::Response& r) {
    r.set_content(R"({"request_id":"someone-else","latency_us":1.0})", "application/json");
  });
  ServiceLatencyProvider p(fake.url(), testing::small_space(), fast_retry());
  EXPECT_THROW(p.measure(ModelGenome{{0, 0}}), ProtocolError);
}

TEST(LatencyClient, BadRequestIsProtocolErrorWithoutRetry) {
  FakeServer fake([](const httplib::Request&, httplib::Response& r) {
    r.status = 400;
    r.set_content(R"({"error":"unknown space"})", "application/json");
  });
  ServiceLatencyProvider p(fake.url(), testing::small_space(), fast_retry());
  try {
    p.measure(ModelGenome{{0, 0}});
    FAIL();
  } catch (const ProtocolError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown space"), std::string::npos);
  }
  EXPECT_EQ(fake.hits.load(), 1);
}

}  // namespace
}  // namespace blocknas
