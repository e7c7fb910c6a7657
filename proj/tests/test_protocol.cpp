#include <chrono>
#include <csignal>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "ciphen/protocol.hpp"
#include "test_support.hpp"

#include <httplib.h>

using namespace ciphen;
using namespace std::chrono_literals;

namespace {

const std::string kStub = CIPHEN_STUB;

std::vector<ScoreRequest> batch(std::size_t n, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::vector<ScoreRequest> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text = testing_support::random_text(rng, 8);
    if (i % 7 == 0) text += " dementia";
    if (i % 11 == 0) text += " \"quoted\"\n\tcaf\xC3\xA9 \\ end";
    out.push_back({"seq-" + std::to_string((i * 7919) % 100003), text});
  }
  return out;
}

}  // namespace

TEST(Protocol, RequestRoundTrip) {
  for (const auto& r : batch(200)) {
    const std::string line = serialize_request(r);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    EXPECT_EQ(parse_request(line), r);
  }
  EXPECT_THROW(parse_request("{\"id\":1}"), ProtocolError);
  EXPECT_THROW(parse_request("nope"), ProtocolError);
}

TEST(Protocol, ResponseRoundTrip) {
  const ScoreResponse ok{"a", ClassDistribution{0.2, 0.3, 0.5}, ""};
  EXPECT_EQ(parse_response(serialize_response(ok)), ok);
  const ScoreResponse err{"b", std::nullopt, "model failed"};
  EXPECT_EQ(parse_response(serialize_response(err)), err);
  EXPECT_THROW(parse_response("{\"probs\":[1,0,0]}"), ProtocolError);
  EXPECT_FALSE(parse_response("{\"id\":\"c\",\"probs\":[1,0]}").probs.has_value());
}

TEST(Pairing, MissingDuplicateInvalidAndUnknown) {
  const std::vector<ScoreRequest> reqs{{"a", "x"}, {"b", "y"}, {"c", "z"}, {"d", "w"}};
  const std::string stream =
      "{\"id\":\"b\",\"probs\":[0.1,0.2,0.7]}\n"
      "{\"id\":\"a\",\"probs\":[0.5,0.5,0.5]}\n"
      "{\"id\":\"c\",\"probs\":[1,0,0]}\n"
      "{\"id\":\"c\",\"probs\":[1,0,0]}\n"
      "{\"id\":\"zz\",\"probs\":[1,0,0]}\n"
      "garbage\n";
  const PairingResult r = pair_responses(reqs, stream);
  ASSERT_EQ(r.items.size(), 4u);
  EXPECT_FALSE(r.items[0].ok());
  EXPECT_TRUE(r.items[1].ok());
  EXPECT_EQ(r.items[1].probs->at(2), 0.7);
  EXPECT_EQ(r.items[2].error, "duplicate response");
  EXPECT_EQ(r.items[3].error, "no response");
  EXPECT_EQ(r.unattributed_lines, 2u);
  for (std::size_t i = 0; i < reqs.size(); ++i) EXPECT_EQ(r.items[i].id, reqs[i].id);
}

TEST(Pairing, ProbabilityTolerance) {
  const std::vector<ScoreRequest> reqs{{"a", ""}, {"b", ""}, {"c", ""}};
  const PairingResult r = pair_responses(reqs,
                                         "{\"id\":\"a\",\"probs\":[0.3333,0.3333,0.3333]}\n"
                                         "{\"id\":\"b\",\"probs\":[0.5,0.5,0.002]}\n"
                                         "{\"id\":\"c\",\"probs\":[1.1,-0.1,0]}\n");
  EXPECT_TRUE(r.items[0].ok());
  EXPECT_FALSE(r.items[1].ok());
  EXPECT_FALSE(r.items[2].ok());
}

TEST(StubScorer, LargeBatchKeepsOrderAndIds) {
  const auto reqs = batch(10000);
  const PairingResult r = score_with_external({.command = kStub + " --mode keyword"}, reqs);
  ASSERT_EQ(r.items.size(), reqs.size());
  EXPECT_EQ(r.unattributed_lines, 0u);
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    ASSERT_EQ(r.items[i].id, reqs[i].id);
    ASSERT_TRUE(r.items[i].ok());
    const bool dementia = reqs[i].text.find("dementia") != std::string::npos;
    EXPECT_EQ(r.items[i].probs->at(0), dementia ? 0.8 : 1.0 / 3);
  }
}

TEST(StubScorer, PartialFailuresStayIsolated) {
  const auto reqs = batch(500);
  const std::string omit = reqs[17].id, bad = reqs[300].id;
  const PairingResult r = score_with_external(
      {.command = kStub + " --garbage-line --omit " + omit + " --malformed " + bad}, reqs);
  EXPECT_EQ(r.unattributed_lines, 1u);
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    EXPECT_EQ(r.items[i].ok(), i != 17 && i != 300) << i;
  }
  EXPECT_EQ(r.items[17].error, "no response");
}

TEST(StubScorer, ExitCodeAndTimeoutFailWholeBatch) {
  const auto reqs = batch(10);
  EXPECT_THROW(score_with_external({.command = kStub + " --exit-code 3"}, reqs), BatchError);
  EXPECT_THROW(score_with_external({.command = kStub + " --sleep-ms 5000", .timeout = 300ms}, reqs), BatchError);
  EXPECT_THROW(score_with_external({.command = "/nonexistent/scorer"}, reqs), BatchError);
  EXPECT_THROW(score_with_external({}, reqs), BatchError);
}

TEST(StubScorer, EmptyBatch) {
  const PairingResult r = score_with_external({.command = kStub}, {});
  EXPECT_TRUE(r.items.empty());
}

TEST(StubScorer, HttpMode) {
  const int port = testing_support::free_port();
  ASSERT_GT(port, 0);
  const auto started = testing_support::run(kStub + " --mode keyword --http 127.0.0.1:" + std::to_string(port) +
                                            " >/dev/null 2>&1 & echo $!");
  const int pid = std::stoi(started.out);
  httplib::Client probe("127.0.0.1", port);
  bool up = false;
  for (int i = 0; i < 100 && !up; ++i) {
    std::this_thread::sleep_for(50ms);
    up = static_cast<bool>(probe.Post("/score", "", "application/x-ndjson"));
  }
  ASSERT_TRUE(up);
  const auto reqs = batch(1000, 3);
  const PairingResult r =
      score_with_external({.http_url = "http://127.0.0.1:" + std::to_string(port), .timeout = 10s}, reqs);
  ::kill(pid, SIGTERM);
  ASSERT_EQ(r.items.size(), reqs.size());
  for (std::size_t i = 0; i < reqs.size(); ++i) {
    EXPECT_EQ(r.items[i].id, reqs[i].id);
    EXPECT_TRUE(r.items[i].ok());
  }
  EXPECT_THROW(score_with_external({.http_url = "http://127.0.0.1:1", .timeout = 1s}, reqs), BatchError);
}

TEST(RunProcess, EchoesStdout) {
  EXPECT_EQ(run_process("cat", "hello\n", 5s), "hello\n");
  EXPECT_THROW(run_process("exit 2", "", 5s), BatchError);
}
