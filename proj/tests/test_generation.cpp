#include <doctest.h>

#include <future>
#include <thread>

#include "fake_server.hpp"
#include "longmab/errors.hpp"
#include "longmab/generation.hpp"
#include "longmab/probing.hpp"

using namespace longmab;
using longmab::testing::FakeServer;

namespace {

std::shared_ptr<HttpJsonClient> client_for(const FakeServer& server, int max_retries = 4,
                                           std::size_t in_flight = 4,
                                           const std::string& suffix = "") {
  HttpClientOptions opts;
  opts.base_url = server.url() + suffix;
  opts.api_key = "sk-test";
  opts.timeout = std::chrono::milliseconds(5000);
  opts.retry.max_retries = max_retries;
  opts.retry.base_delay = std::chrono::milliseconds(1);
  opts.max_in_flight = in_flight;
  return std::make_shared<HttpJsonClient>(opts);
}

GenerationRequest answer_request(std::vector<std::size_t> ids) {
  return {"prompt text", std::move(ids), RequestPurpose::answer};
}

}  // namespace

TEST_CASE("mock oracle success rules") {
  MockOracleSpec spec{{2, 5}, "Lisbon", SuccessRule::all_evidence_required, 0.5, false};
  MockOracle all(spec);
  CHECK(all.generate(answer_request({1, 2, 5, 7})).find("Answer: Lisbon") != std::string::npos);
  CHECK(all.generate(answer_request({1, 2})).find("Answer: unknown") != std::string::npos);
  CHECK(all.generate(answer_request({1, 2, 5, 7})) == all.generate(answer_request({1, 2, 5, 7})));

  spec.success_rule = SuccessRule::any_evidence;
  CHECK(MockOracle(spec).satisfied({1, 2}));
  CHECK_FALSE(MockOracle(spec).satisfied({1, 3}));

  spec.success_rule = SuccessRule::fraction_threshold;
  spec.theta = 0.5;
  CHECK(MockOracle(spec).satisfied({5}));
  spec.theta = 0.75;
  CHECK_FALSE(MockOracle(spec).satisfied({5}));

  spec.evidence_chunk_ids.clear();
  CHECK_FALSE(MockOracle(spec).satisfied({0, 1, 2}));

  CHECK_THROWS(all.generate({"", {0}, RequestPurpose::answer}));
}

TEST_CASE("backoff schedule") {
  RetryPolicy p;
  CHECK(backoff_delay(p, 1, 0.0).count() == 500);
  CHECK(backoff_delay(p, 2, 0.0).count() == 1000);
  CHECK(backoff_delay(p, 3, 1.0).count() == 2400);
  CHECK(backoff_delay(p, 3, -1.0).count() == 1600);
  CHECK(backoff_delay(p, 20, 0.0).count() == 30000);
}

TEST_CASE("chat client retries 5xx then succeeds") {
  FakeServer server;
  server.script({{500, "oops"}, {500, "oops"}, {200, FakeServer::chat_body("Answer: 42")}});
  HttpChatGenerator gen(client_for(server), {"m", 0.0, 16, 7});
  CHECK(gen.generate(answer_request({0})) == "Answer: 42");
  CHECK(server.request_count() == 3);

  const auto body = nlohmann::json::parse(server.bodies().back());
  CHECK(body["model"] == "m");
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == "prompt text");
  CHECK(body["temperature"] == 0.0);
  CHECK(body["max_tokens"] == 16);
  CHECK(body["seed"] == 7);
  CHECK(server.paths().back() == "/v1/chat/completions");
  CHECK(server.auth_headers().back() == "Bearer sk-test");
}

TEST_CASE("chat client gives up after max retries") {
  FakeServer server;
  server.set_fallback([](const httplib::Request&) { return longmab::testing::ScriptedReply{503, ""}; });
  HttpChatGenerator gen(client_for(server, 2), {"m", 0.0, 16, std::nullopt});
  try {
    gen.generate(answer_request({0}));
    FAIL("expected RequestError");
  } catch (const RequestError& e) {
    CHECK(e.attempts() == 3);
    CHECK(e.last_status() == 503);
  }
  CHECK(server.request_count() == 3);
}

TEST_CASE("429 is retried, other 4xx are not") {
  FakeServer server;
  server.script({{429, ""}, {200, FakeServer::chat_body("ok")}});
  HttpChatGenerator gen(client_for(server), {"m", 0.0, 16, std::nullopt});
  CHECK(gen.generate(answer_request({0})) == "ok");
  CHECK(server.request_count() == 2);

  for (int status : {400, 401, 403, 404}) {
    FakeServer s;
    s.set_fallback([status](const httplib::Request&) {
      return longmab::testing::ScriptedReply{status, "{}"};
    });
    HttpChatGenerator g(client_for(s), {"m", 0.0, 16, std::nullopt});
    try {
      g.generate(answer_request({0}));
      FAIL("expected RequestError");
    } catch (const RequestError& e) {
      CHECK(e.attempts() == 1);
      CHECK(e.last_status() == status);
    }
    CHECK(s.request_count() == 1);
  }
}

TEST_CASE("malformed bodies raise ProtocolError") {
  FakeServer server;
  server.script({{200, "not json"}, {200, R"({"choices":[]})"}});
  HttpChatGenerator gen(client_for(server), {"m", 0.0, 16, std::nullopt});
  CHECK_THROWS_AS(gen.generate(answer_request({0})), ProtocolError);
  CHECK_THROWS_AS(gen.generate(answer_request({0})), ProtocolError);
}

TEST_CASE("connection failure is retried and reported with status 0") {
  HttpClientOptions opts;
  opts.base_url = "http://127.0.0.1:1";
  opts.timeout = std::chrono::milliseconds(200);
  opts.retry.max_retries = 1;
  opts.retry.base_delay = std::chrono::milliseconds(1);
  HttpJsonClient client(opts);
  try {
    client.post_json("/v1/chat/completions", {{"x", 1}});
    FAIL("expected RequestError");
  } catch (const RequestError& e) {
    CHECK(e.attempts() == 2);
    CHECK(e.last_status() == 0);
  }
}

TEST_CASE("in-flight limit holds under concurrent callers") {
  FakeServer server;
  server.set_delay(std::chrono::milliseconds(30));
  server.set_fallback(
      [](const httplib::Request&) { return longmab::testing::ScriptedReply{200, FakeServer::chat_body("x")}; });
  auto client = client_for(server, 0, 3);
  HttpChatGenerator gen(client, {"m", 0.0, 16, std::nullopt});
  std::vector<std::future<std::string>> futures;
  for (int i = 0; i < 12; ++i) {
    futures.push_back(std::async(std::launch::async, [&] { return gen.generate(answer_request({0})); }));
  }
  for (auto& f : futures) CHECK(f.get() == "x");
  CHECK(server.high_water_mark() <= 3);
  CHECK(server.high_water_mark() >= 2);
}

TEST_CASE("embeddings client") {
  FakeServer server;
  // Out-of-order indices must be placed by `index`.
  server.script({{200, R"({"data":[{"index":1,"embedding":[0,1]},{"index":0,"embedding":[1,0]}]})"},
                 {200, R"({"data":[{"index":0,"embedding":[1,0]}]})"}});
  HttpEmbedder emb(client_for(server, 0, 4, "/v1"), "emb-model");
  const std::vector<std::string> texts{"a", "b"};
  const auto vecs = emb.embed(texts);
  REQUIRE(vecs.size() == 2);
  CHECK(vecs[0].values == std::vector<double>{1, 0});
  CHECK(vecs[1].values == std::vector<double>{0, 1});
  CHECK(server.paths().front() == "/v1/embeddings");
  const auto body = nlohmann::json::parse(server.bodies().front());
  CHECK(body["model"] == "emb-model");
  CHECK(body["input"] == nlohmann::json::array({"a", "b"}));
  CHECK_THROWS_AS(emb.embed(texts), ProtocolError);  // one vector for two inputs
}
