#include <chrono>
#include <thread>

#include <gtest/gtest.h>

#include "ciphen/service.hpp"
#include "test_support.hpp"

#include <httplib.h>

using namespace ciphen;
using nlohmann::json;

namespace {

std::vector<Sequence> sequences() {
  std::vector<Sequence> out;
  const std::vector<std::string> texts{"memory grossly intact", "memory loss noted", "recall poor",
                                       "memory grossly intact today"};
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Sequence s;
    s.sequence_id = "S" + std::to_string(i);
    s.patient_id = "P" + std::to_string(i / 2);
    s.note_id = "N" + std::to_string(i);
    s.keyword = "Memory";
    s.match_offset = 10;
    s.match_length = 6;
    s.window_start = 10;
    s.window_end = 10 + texts[i].size();
    s.text = texts[i];
    out.push_back(s);
  }
  return out;
}


}  // namespace

TEST(Service, NextFollowsIdOrderThenEntropy) {
  AnnotationService svc(sequences());
  svc.set_clock(testing_support::counter_clock());
  auto r = svc.handle("GET", "/api/next", "");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["sequence"]["sequence_id"], "S0");
  EXPECT_EQ(r.body["sequence"]["highlight_start"], 0);
  svc.set_probabilities({{"S2", {0.4, 0.3, 0.3}}, {"S3", {0.9, 0.05, 0.05}}});
  EXPECT_EQ(svc.handle("GET", "/api/next", "").body["sequence"]["sequence_id"], "S2");
}

TEST(Service, LabelStatusCodes) {
  AnnotationService svc(sequences());
  svc.set_clock(testing_support::counter_clock());
  auto r = svc.handle("POST", "/api/label", R"({"sequence_id":"S1","label":"Yes","annotator_id":"a"})");
  EXPECT_EQ(r.status, 200);
  EXPECT_EQ(r.body["provenance"], "manual");
  EXPECT_EQ(svc.handle("POST", "/api/label", R"({"sequence_id":"S1","label":"No","annotator_id":"a"})").status, 409);
  EXPECT_EQ(svc.handle("POST", "/api/label", R"({"sequence_id":"S1","label":"No","annotator_id":"a","overwrite":true})").status, 200);
  EXPECT_EQ(svc.handle("POST", "/api/label", R"({"sequence_id":"S9","label":"No","annotator_id":"a"})").status, 404);
  EXPECT_EQ(svc.handle("POST", "/api/label", R"({"sequence_id":"S2","label":"Maybe","annotator_id":"a"})").status, 400);
  EXPECT_EQ(svc.handle("POST", "/api/label", "not json").status, 400);
  EXPECT_EQ(svc.handle("GET", "/api/nothing", "").status, 404);
}

TEST(Service, PatternLifecycle) {
  AnnotationService svc(sequences());
  svc.set_clock(testing_support::counter_clock());
  svc.handle("POST", "/api/label", R"({"sequence_id":"S3","label":"Yes","annotator_id":"a"})");
  auto r = svc.handle("POST", "/api/patterns", R"({"regex":"grossly intact","label":"No","author":"a"})");
  ASSERT_EQ(r.status, 201);
  EXPECT_EQ(r.body["propagation_count"], 1);
  const std::string id = r.body["pattern"]["pattern_id"];

  auto bad = svc.handle("POST", "/api/patterns", R"({"regex":"gross(ly","label":"No","author":"a"})");
  EXPECT_EQ(bad.status, 400);
  EXPECT_EQ(bad.body["position"], 5);
  EXPECT_EQ(svc.handle("POST", "/api/patterns", R"({"regex":"grossly intact","label":"Yes","author":"a"})").status, 409);

  auto list = svc.handle("GET", "/api/patterns", "");
  ASSERT_EQ(list.body["patterns"].size(), 1u);
  EXPECT_EQ(list.body["patterns"][0]["match_count"], 2);

  auto progress = svc.handle("GET", "/api/progress", "");
  EXPECT_EQ(progress.body["counts"]["No"]["always_pattern"], 1);
  EXPECT_EQ(progress.body["counts"]["Yes"]["manual"], 1);
  EXPECT_EQ(progress.body["unlabeled"], 2);

  auto retired = svc.handle("DELETE", "/api/patterns/" + id, "");
  EXPECT_EQ(retired.status, 200);
  EXPECT_EQ(retired.body["reverted"], 1);
  EXPECT_EQ(svc.handle("DELETE", "/api/patterns/" + id, "").status, 409);
  EXPECT_EQ(svc.handle("DELETE", "/api/patterns/p0404", "").status, 404);
}

TEST(Service, LogPersistsAcrossRestarts) {
  testing_support::TempDir tmp("svc");
  const auto log = tmp / "annotations.jsonl";
  std::string first;
  {
    AnnotationService svc(sequences());
    svc.set_clock(testing_support::counter_clock());
    svc.attach_log(log);
    svc.handle("POST", "/api/label", R"({"sequence_id":"S1","label":"Yes","annotator_id":"a"})");
    svc.handle("POST", "/api/patterns", R"({"regex":"intact","label":"No","author":"a"})");
    first = svc.serialize_log();
  }
  EXPECT_EQ(read_file(log), first);
  AnnotationService svc(sequences());
  svc.set_clock(testing_support::counter_clock());
  svc.attach_log(log);
  EXPECT_EQ(svc.serialize_log(), first);
  EXPECT_EQ(svc.handle("GET", "/api/progress", "").body["unlabeled"], 1);
}

TEST(Service, ServesOverHttp) {
  AnnotationService svc(sequences());
  svc.set_clock(testing_support::counter_clock());
  httplib::Server server;
  svc.mount(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto next = client.Get("/api/next");
  ASSERT_TRUE(next);
  EXPECT_EQ(next->status, 200);
  EXPECT_EQ(json::parse(next->body)["sequence"]["sequence_id"], "S0");
  auto label = client.Post("/api/label", R"({"sequence_id":"S0","label":"No","annotator_id":"a"})", "application/json");
  ASSERT_TRUE(label);
  EXPECT_EQ(label->status, 200);
  auto pattern = client.Post("/api/patterns", R"({"regex":"loss","label":"Yes","author":"a"})", "application/json");
  ASSERT_TRUE(pattern);
  EXPECT_EQ(pattern->status, 201);
  auto conflict = client.Post("/api/label", R"({"sequence_id":"S0","label":"Yes","annotator_id":"a"})", "application/json");
  ASSERT_TRUE(conflict);
  EXPECT_EQ(conflict->status, 409);
  auto del = client.Delete("/api/patterns/p0001");
  ASSERT_TRUE(del);
  EXPECT_EQ(del->status, 200);
  auto progress = client.Get("/api/progress");
  ASSERT_TRUE(progress);
  EXPECT_EQ(json::parse(progress->body)["unlabeled"], 3);

  server.stop();
  t.join();
}

TEST(Service, ConcurrentLabelsAreSerialized) {
  std::vector<Sequence> seqs;
  for (int i = 0; i < 400; ++i) {
    Sequence s;
    s.sequence_id = "S" + std::to_string(1000 + i);
    s.patient_id = "P" + std::to_string(i);
    s.text = "memory";
    s.window_end = 6;
    seqs.push_back(s);
  }
  AnnotationService svc(seqs);
  std::vector<std::thread> threads;
  for (int w = 0; w < 4; ++w) {
    threads.emplace_back([&, w] {
      for (int i = w; i < 400; i += 4) {
        svc.handle("POST", "/api/label",
                   json{{"sequence_id", "S" + std::to_string(1000 + i)}, {"label", "Yes"}, {"annotator_id", "a"}}.dump());
        svc.handle("GET", "/api/progress", "");
      }
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(svc.handle("GET", "/api/progress", "").body["counts"]["Yes"]["manual"], 400);
}
