#include <doctest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <nlohmann/json.hpp>

#include "ikp/gateway.hpp"

using namespace ikp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string chat_body(const std::string& content) {
  return json{{"choices",
               {{{"message", {{"role", "assistant"}, {"content", content}}},
                 {"finish_reason", "stop"}}}},
              {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 3}}}}
      .dump();
}

/// Scripted transport with concurrency instrumentation.
class FlexTransport : public Transport {
public:
  explicit FlexTransport(std::vector<HttpResponse> script) : script_(std::move(script)) {}

  HttpResponse post(const std::string& path, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>&) override {
    last_path = path;
    last_body = body;
    int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    std::size_t i = std::min(calls_++, script_.size() - 1);
    --in_flight_;
    return script_[i];
  }

  std::size_t calls() const { return calls_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }
  std::string last_path, last_body;

private:
  std::vector<HttpResponse> script_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

GatewayConfig test_config(const std::string& tag) {
  GatewayConfig cfg;
  cfg.base_url = "http://fake.invalid/v1";
  cfg.api_key = "key";
  cfg.cache_dir = fs::temp_directory_path() / ("ikp_gw_" + tag);
  cfg.retry.initial_backoff_ms = 1;
  fs::remove_all(cfg.cache_dir);
  return cfg;
}

QuerySpec basic_spec(const std::string& prompt = "What is 2+2?") {
  QuerySpec s;
  s.model = "model-x";
  s.system_prompt = "sys";
  s.user_prompt = prompt;
  s.max_tokens = 64;
  return s;
}

}  // namespace

TEST_CASE("canonical query JSON is sorted and complete") {
  QuerySpec s = basic_spec();
  std::string c = canonical_query_json(s);
  json j = json::parse(c);
  CHECK(j.at("model") == "model-x");
  CHECK(j.at("temperature") == 0.0);
  CHECK(j.at("repeat_index") == 0);
  CHECK(j.at("reasoning_effort").is_null());
  // nlohmann objects serialize keys sorted; canonical form must be stable.
  CHECK(c == canonical_query_json(s));

  QuerySpec s2 = s;
  s2.reasoning_effort = "low";
  CHECK(json::parse(canonical_query_json(s2)).at("reasoning_effort") == "low");
}

TEST_CASE("query_hash separates every field") {
  QuerySpec base = basic_spec();
  std::string h = query_hash(base);
  CHECK(h.size() == 64);
  CHECK(query_hash(base) == h);

  auto differs = [&](QuerySpec changed) { CHECK(query_hash(changed) != h); };
  QuerySpec s = base;
  s.model = "model-y";
  differs(s);
  s = base;
  s.system_prompt = "other";
  differs(s);
  s = base;
  s.user_prompt = "What is 3+3?";
  differs(s);
  s = base;
  s.max_tokens = 65;
  differs(s);
  s = base;
  s.reasoning_effort = "high";
  differs(s);
  s = base;
  s.repeat_index = 1;
  differs(s);
}

TEST_CASE("complete caches on first fetch and reuses it") {
  auto cfg = test_config("cache");
  auto transport = std::make_unique<FlexTransport>(
      std::vector<HttpResponse>{{200, chat_body("Four."), ""}});
  auto* t = transport.get();
  GatewayClient client(cfg, std::move(transport));

  QuerySpec s = basic_spec();
  CHECK_FALSE(client.cached(s));
  TranscriptRecord r1 = client.complete(s);
  CHECK(r1.response_text == "Four.");
  CHECK(r1.finish_reason == "stop");
  CHECK(r1.prompt_tokens == 7);
  CHECK(r1.completion_tokens == 3);
  CHECK(r1.query_hash == query_hash(s));
  CHECK(client.cached(s));
  CHECK(t->calls() == 1);
  CHECK(t->last_path.find("/chat/completions") != std::string::npos);
  json body = json::parse(t->last_body);
  CHECK(body.at("model") == "model-x");
  CHECK(body.at("temperature") == 0.0);
  CHECK(body.at("messages").size() == 2);
  CHECK(body.at("messages")[0].at("role") == "system");

  // Warm path: no further transport traffic, identical record.
  TranscriptRecord r2 = client.complete(s);
  CHECK(t->calls() == 1);
  CHECK(client.network_calls() == 1);
  CHECK(r2.response_text == r1.response_text);
  CHECK(r2.created_at == r1.created_at);

  // Cache layout: cache/<first2>/<hash>.json
  fs::path expect = cfg.cache_dir / r1.query_hash.substr(0, 2) / (r1.query_hash + ".json");
  CHECK(fs::exists(expect));
  // The cached record never marks itself as from-cache.
  CHECK(read_file(expect).find("from_cache") == std::string::npos);
  fs::remove_all(cfg.cache_dir);
}

TEST_CASE("non-zero temperature is rejected as terminal") {
  GatewayClient client(test_config("temp"));
  QuerySpec s = basic_spec();
  s.temperature = 0.7;
  try {
    (void)client.complete(s);
    FAIL("expected rejection");
  } catch (const GatewayError& e) {
    CHECK(e.terminal());
  }
}

TEST_CASE("retry policy: 429 then success") {
  auto cfg = test_config("retry429");
  auto transport = std::make_unique<FlexTransport>(std::vector<HttpResponse>{
      {429, "slow down", ""}, {200, chat_body("ok"), ""}});
  auto* t = transport.get();
  GatewayClient client(cfg, std::move(transport));
  TranscriptRecord r = client.complete(basic_spec());
  CHECK(r.response_text == "ok");
  CHECK(t->calls() == 2);
  CHECK(client.network_calls() == 2);
  fs::remove_all(cfg.cache_dir);
}

TEST_CASE("retry policy: connection failures retry then give up non-terminally") {
  auto cfg = test_config("retrynet");
  cfg.retry.max_attempts = 3;
  auto transport = std::make_unique<FlexTransport>(
      std::vector<HttpResponse>{{0, "", "connect refused"}});
  auto* t = transport.get();
  GatewayClient client(cfg, std::move(transport));
  try {
    (void)client.complete(basic_spec());
    FAIL("expected failure");
  } catch (const GatewayError& e) {
    CHECK_FALSE(e.terminal());
    CHECK(std::string(e.what()).find("3") != std::string::npos);
  }
  CHECK(t->calls() == 3);
  fs::remove_all(cfg.cache_dir);
}

TEST_CASE("4xx other than 429 is terminal on the first try") {
  auto cfg = test_config("term4xx");
  auto transport = std::make_unique<FlexTransport>(
      std::vector<HttpResponse>{{400, "bad request", ""}});
  auto* t = transport.get();
  GatewayClient client(cfg, std::move(transport));
  try {
    (void)client.complete(basic_spec());
    FAIL("expected failure");
  } catch (const GatewayError& e) {
    CHECK(e.terminal());
    CHECK(std::string(e.what()).find("400") != std::string::npos);
  }
  CHECK(t->calls() == 1);
  fs::remove_all(cfg.cache_dir);
}

TEST_CASE("malformed 200 body is terminal") {
  auto cfg = test_config("badbody");
  GatewayClient client(cfg, std::make_unique<FlexTransport>(
                                std::vector<HttpResponse>{{200, "not json", ""}}));
  try {
    (void)client.complete(basic_spec());
    FAIL("expected failure");
  } catch (const GatewayError& e) {
    CHECK(e.terminal());
  }
  fs::remove_all(cfg.cache_dir);
}

TEST_CASE("run_batch bounds concurrency and keeps input order") {
  auto cfg = test_config("batch");
  cfg.concurrency = 3;
  auto transport = std::make_unique<FlexTransport>(
      std::vector<HttpResponse>{{200, chat_body("answer"), ""}});
  auto* t = transport.get();
  GatewayClient client(cfg, std::move(transport));

  std::vector<QuerySpec> specs;
  for (int i = 0; i < 12; ++i) specs.push_back(basic_spec("q" + std::to_string(i)));
  std::vector<std::string> errors;
  auto results = client.run_batch(specs, &errors);
  REQUIRE(results.size() == 12);
  REQUIRE(errors.size() == 12);
  for (int i = 0; i < 12; ++i) {
    REQUIRE(results[i].has_value());
    CHECK(results[i]->spec.user_prompt == "q" + std::to_string(i));
    CHECK(errors[i].empty());
  }
  CHECK(t->max_in_flight() <= 3);
  CHECK(t->calls() == 12);
  fs::remove_all(cfg.cache_dir);
}

TEST_CASE("transcript save/load round-trip") {
  auto cfg = test_config("transcripts");
  GatewayClient client(cfg, std::make_unique<FlexTransport>(
                                std::vector<HttpResponse>{{200, chat_body("hi"), ""}}));
  TranscriptRecord r = client.complete(basic_spec());
  fs::path p = fs::temp_directory_path() / "ikp_transcripts_rt.jsonl";
  save_transcripts({r}, p);
  auto loaded = load_transcripts(p);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].spec.model == r.spec.model);
  CHECK(loaded[0].spec.user_prompt == r.spec.user_prompt);
  CHECK(loaded[0].query_hash == r.query_hash);
  CHECK(loaded[0].response_text == "hi");
  fs::remove(p);
  fs::remove_all(cfg.cache_dir);
}

TEST_CASE("env variables back-fill missing gateway config") {
  setenv("IKP_BASE_URL", "http://env.invalid/v2", 1);
  setenv("IKP_API_KEY", "env-key", 1);
  GatewayConfig cfg;
  cfg.cache_dir = fs::temp_directory_path() / "ikp_gw_env";
  GatewayClient client(cfg);
  CHECK(client.config().base_url == "http://env.invalid/v2");
  CHECK(client.config().api_key == "env-key");
  unsetenv("IKP_BASE_URL");
  unsetenv("IKP_API_KEY");

  // Explicit fields win over the environment.
  setenv("IKP_API_KEY", "env-key-2", 1);
  GatewayConfig cfg2 = cfg;
  cfg2.api_key = "explicit";
  GatewayClient client2(cfg2);
  CHECK(client2.config().api_key == "explicit");
  unsetenv("IKP_API_KEY");
}

TEST_CASE("run_evaluation writes corpus-ordered transcripts and reports failures") {
  Corpus corpus;
  corpus.landmarks = {"l1", "l2", "l3", "l4", "l5", "l6"};
  for (int i = 0; i < 4; ++i) {
    Probe p;
    p.id = "p" + std::to_string(i);
    p.tier = 1 + i;
    p.question = "Q" + std::to_string(i) + "?";
    p.gold_answer = "g";
    p.source = "wikidata";
    corpus.probes.push_back(p);
  }

  auto specs = evaluation_specs(corpus, "model-x", "sys", 64, 1);
  REQUIRE(specs.size() == 4);
  CHECK(specs[0].user_prompt == "Q0?");
  CHECK(specs[3].user_prompt == "Q3?");

  // Repeats multiply the list, probe-major, with distinct repeat indices.
  auto rep = evaluation_specs(corpus, "model-x", "sys", 64, 2);
  REQUIRE(rep.size() == 8);
  CHECK(rep[0].user_prompt == "Q0?");
  CHECK(rep[0].repeat_index == 0);
  CHECK(rep[1].repeat_index == 1);
  CHECK(rep[2].user_prompt == "Q1?");

  auto cfg = test_config("runeval");
  GatewayClient client(cfg, std::make_unique<FlexTransport>(
                                std::vector<HttpResponse>{{200, chat_body("resp"), ""}}));
  fs::path out = fs::temp_directory_path() / "ikp_runeval.jsonl";
  RunOutcome outcome = run_evaluation(client, corpus, "model-x", "sys", 64, 1, out);
  CHECK(outcome.completed == 4);
  CHECK(outcome.failed == 0);
  auto recs = load_transcripts(out);
  REQUIRE(recs.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(recs[i].spec.user_prompt == "Q" + std::to_string(i) + "?");
  fs::remove(out);
  fs::remove_all(cfg.cache_dir);
}

TEST_CASE("warm cache serves a client with no transport and no key") {
  auto cfg = test_config("offline");
  {
    GatewayClient warm(cfg, std::make_unique<FlexTransport>(
                                std::vector<HttpResponse>{{200, chat_body("cached"), ""}}));
    (void)warm.complete(basic_spec());
  }
  // Fresh client: unroutable URL, empty key, default (lazy) transport.
  GatewayConfig cold = cfg;
  cold.base_url = "http://127.0.0.1:1/v1";
  cold.api_key = "";
  GatewayClient client(cold);
  TranscriptRecord r = client.complete(basic_spec());
  CHECK(r.response_text == "cached");
  CHECK(client.network_calls() == 0);
  fs::remove_all(cfg.cache_dir);
}
