#include "ikp/gateway.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <mutex>
#include <sstream>
#include <thread>

namespace ikp {

using nlohmann::json;

const char* const kDefaultSystemPrompt =
    "Answer directly and concisely. If you do not know, say 'I don't know.'";

std::string canonical_query_json(const QuerySpec& spec) {
  json j;  // nlohmann objects sort keys, giving a canonical byte form
  j["model"] = spec.model;
  j["system_prompt"] = spec.system_prompt;
  j["user_prompt"] = spec.user_prompt;
  j["temperature"] = spec.temperature;
  j["max_tokens"] = spec.max_tokens;
  if (spec.reasoning_effort) j["reasoning_effort"] = *spec.reasoning_effort;
  else j["reasoning_effort"] = nullptr;
  j["repeat_index"] = spec.repeat_index;
  return j.dump();
}

std::string query_hash(const QuerySpec& spec) { return sha256_hex(canonical_query_json(spec)); }

namespace {

json spec_to_json(const QuerySpec& spec) {
  json j;
  j["model"] = spec.model;
  j["system_prompt"] = spec.system_prompt;
  j["user_prompt"] = spec.user_prompt;
  j["temperature"] = spec.temperature;
  j["max_tokens"] = spec.max_tokens;
  if (spec.reasoning_effort) j["reasoning_effort"] = *spec.reasoning_effort;
  j["repeat_index"] = spec.repeat_index;
  return j;
}

QuerySpec spec_from_json(const json& j) {
  QuerySpec s;
  s.model = j.at("model").get<std::string>();
  s.system_prompt = j.at("system_prompt").get<std::string>();
  s.user_prompt = j.at("user_prompt").get<std::string>();
  s.temperature = j.at("temperature").get<double>();
  s.max_tokens = j.at("max_tokens").get<int>();
  if (j.contains("reasoning_effort") && !j.at("reasoning_effort").is_null())
    s.reasoning_effort = j.at("reasoning_effort").get<std::string>();
  s.repeat_index = j.value("repeat_index", 0);
  return s;
}

std::string now_utc_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string transcript_to_json(const TranscriptRecord& rec) {
  json j;
  j["spec"] = spec_to_json(rec.spec);
  j["query_hash"] = rec.query_hash;
  j["response_text"] = rec.response_text;
  j["finish_reason"] = rec.finish_reason;
  j["prompt_tokens"] = rec.prompt_tokens;
  j["completion_tokens"] = rec.completion_tokens;
  j["created_at"] = rec.created_at;
  return j.dump();
}

TranscriptRecord transcript_from_json(const std::string& line) {
  json j = json::parse(line);
  TranscriptRecord rec;
  rec.spec = spec_from_json(j.at("spec"));
  rec.query_hash = j.at("query_hash").get<std::string>();
  rec.response_text = j.at("response_text").get<std::string>();
  rec.finish_reason = j.value("finish_reason", std::string());
  rec.prompt_tokens = j.value("prompt_tokens", static_cast<std::int64_t>(-1));
  rec.completion_tokens = j.value("completion_tokens", static_cast<std::int64_t>(-1));
  rec.created_at = j.value("created_at", std::string());
  return rec;
}

std::vector<TranscriptRecord> load_transcripts(const std::filesystem::path& path) {
  std::vector<TranscriptRecord> out;
  for_each_line(path, [&](std::size_t lineno, const std::string& line) {
    try {
      out.push_back(transcript_from_json(line));
    } catch (const json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": bad transcript record: " +
                  e.what());
    }
  });
  return out;
}

void save_transcripts(const std::vector<TranscriptRecord>& recs,
                      const std::filesystem::path& path) {
  std::ostringstream out;
  for (const auto& r : recs) out << transcript_to_json(r) << '\n';
  atomic_write_file(path, out.str());
}

// ====== transport ======

namespace {

// Splits "https://host:port/prefix" into (scheme://host:port, /prefix).
std::pair<std::string, std::string> split_base_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos)
    throw Error("base_url must start with http:// or https://, got '" + base_url + "'");
  auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

class HttplibTransport : public Transport {
public:
  HttplibTransport(std::string host, int timeout_seconds)
      : host_(std::move(host)), timeout_(timeout_seconds) {}

  HttpResponse post(const std::string& path, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>& headers) override {
    // One client per request: httplib clients are not safe for concurrent use.
    httplib::Client cli(host_);
    cli.set_connection_timeout(timeout_, 0);
    cli.set_read_timeout(timeout_, 0);
    cli.set_write_timeout(timeout_, 0);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = cli.Post(path, h, body, "application/json");
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
  }

private:
  std::string host_;
  time_t timeout_;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(const std::string& base_url,
                                               int timeout_seconds) {
  auto [host, prefix] = split_base_url(base_url);
  (void)prefix;  // the client computes the full path from the same base_url
  return std::make_unique<HttplibTransport>(host, timeout_seconds);
}

// ====== client ======

GatewayClient::GatewayClient(GatewayConfig cfg, std::unique_ptr<Transport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {
  if (cfg_.base_url.empty())
    if (const char* v = std::getenv("IKP_BASE_URL")) cfg_.base_url = v;
  if (cfg_.api_key.empty())
    if (const char* v = std::getenv("IKP_API_KEY")) cfg_.api_key = v;
  if (!cfg_.base_url.empty()) api_path_ = split_base_url(cfg_.base_url).second + "/chat/completions";
  else api_path_ = "/chat/completions";
}

std::filesystem::path GatewayClient::cache_path(const std::string& hash) const {
  return cfg_.cache_dir / hash.substr(0, 2) / (hash + ".json");
}

bool GatewayClient::cached(const QuerySpec& spec) const {
  return std::filesystem::exists(cache_path(query_hash(spec)));
}

TranscriptRecord GatewayClient::complete(const QuerySpec& spec) {
  if (spec.temperature != 0.0)
    throw GatewayError("temperature must be 0 for reproducible evaluation (got " +
                           csv_num(spec.temperature) + ")",
                       /*terminal=*/true);
  const std::string hash = query_hash(spec);
  const auto path = cache_path(hash);
  if (std::filesystem::exists(path)) {
    auto rec = transcript_from_json(read_file(path));
    return rec;
  }
  auto rec = fetch(spec, hash);
  atomic_write_file(path, transcript_to_json(rec));
  return rec;
}

TranscriptRecord GatewayClient::fetch(const QuerySpec& spec, const std::string& hash) {
  std::call_once(transport_init_, [&] {
    if (transport_) return;
    if (cfg_.base_url.empty())
      throw GatewayError(
          "cache miss with no endpoint configured: set IKP_BASE_URL (or gateway.base_url)",
          true);
    transport_ = make_http_transport(cfg_.base_url);
  });
  if (!transport_)
    throw GatewayError("cache miss and no usable endpoint (set IKP_BASE_URL)", true);
  if (cfg_.api_key.empty())
    throw GatewayError("cache miss with no API key: set IKP_API_KEY (or gateway.api_key)", true);

  json body;
  body["model"] = spec.model;
  body["messages"] = json::array({json{{"role", "system"}, {"content", spec.system_prompt}},
                                  json{{"role", "user"}, {"content", spec.user_prompt}}});
  body["temperature"] = spec.temperature;
  body["max_tokens"] = spec.max_tokens;
  if (spec.reasoning_effort) body["reasoning_effort"] = *spec.reasoning_effort;
  const std::string payload = body.dump();
  const std::vector<std::pair<std::string, std::string>> headers = {
      {"Authorization", "Bearer " + cfg_.api_key}};

  int backoff_ms = cfg_.retry.initial_backoff_ms;
  std::string last_error;
  for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
    network_calls_.fetch_add(1);
    HttpResponse res = transport_->post(api_path_, payload, headers);
    const bool retryable = res.status == 0 || res.status == 429 || res.status >= 500;
    if (res.status == 200) {
      try {
        json j = json::parse(res.body);
        const auto& choice = j.at("choices").at(0);
        TranscriptRecord rec;
        rec.spec = spec;
        rec.query_hash = hash;
        rec.response_text = choice.at("message").at("content").get<std::string>();
        rec.finish_reason = choice.value("finish_reason", std::string());
        if (j.contains("usage")) {
          rec.prompt_tokens = j["usage"].value("prompt_tokens", static_cast<std::int64_t>(-1));
          rec.completion_tokens =
              j["usage"].value("completion_tokens", static_cast<std::int64_t>(-1));
        }
        rec.created_at = now_utc_iso8601();
        return rec;
      } catch (const json::exception& e) {
        throw GatewayError(std::string("malformed completion response: ") + e.what(), true);
      }
    }
    if (!retryable)
      throw GatewayError("endpoint rejected request (HTTP " + std::to_string(res.status) +
                             "): " + res.body.substr(0, 200),
                         true);
    last_error = res.status == 0 ? ("transport: " + res.error)
                                 : ("HTTP " + std::to_string(res.status));
    if (attempt < cfg_.retry.max_attempts && backoff_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
      backoff_ms = static_cast<int>(backoff_ms * cfg_.retry.multiplier);
    }
  }
  throw GatewayError("request failed after " + std::to_string(cfg_.retry.max_attempts) +
                         " attempts (" + last_error + ")",
                     false);
}

std::vector<std::optional<TranscriptRecord>> GatewayClient::run_batch(
    const std::vector<QuerySpec>& specs, std::vector<std::string>* errors) {
  const std::size_t n = specs.size();
  std::vector<std::optional<TranscriptRecord>> results(n);
  std::vector<std::string> errs(n);
  std::atomic<std::size_t> next{0};
  const int workers = std::max(1, std::min<int>(cfg_.concurrency, static_cast<int>(n)));
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        results[i] = complete(specs[i]);
      } catch (const std::exception& e) {
        errs[i] = e.what();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (errors) *errors = std::move(errs);
  return results;
}

std::vector<QuerySpec> evaluation_specs(const Corpus& corpus, const std::string& model,
                                        const std::string& system_prompt, int max_tokens,
                                        int repeat_count) {
  if (repeat_count < 1) throw Error("repeat_count must be >= 1");
  std::vector<QuerySpec> specs;
  specs.reserve(corpus.probes.size() * static_cast<std::size_t>(repeat_count));
  for (const auto& p : corpus.probes) {
    for (int r = 0; r < repeat_count; ++r) {
      QuerySpec s;
      s.model = model;
      s.system_prompt = system_prompt;
      s.user_prompt = p.question;  // the probe question goes out verbatim
      s.max_tokens = max_tokens;
      s.repeat_index = r;
      specs.push_back(std::move(s));
    }
  }
  return specs;
}

RunOutcome run_evaluation(GatewayClient& client, const Corpus& corpus,
                          const std::string& model, const std::string& system_prompt,
                          int max_tokens, int repeat_count,
                          const std::filesystem::path& out_path) {
  auto specs = evaluation_specs(corpus, model, system_prompt, max_tokens, repeat_count);
  std::vector<std::string> errors;
  auto results = client.run_batch(specs, &errors);

  RunOutcome outcome;
  std::ostringstream out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i]) {
      out << transcript_to_json(*results[i]) << '\n';
      outcome.completed++;
    } else {
      const auto& probe = corpus.probes[i / static_cast<std::size_t>(repeat_count)];
      outcome.failed++;
      outcome.failures.push_back(probe.id + ": " + errors[i]);
    }
  }
  atomic_write_file(out_path, out.str());
  return outcome;
}

}  // namespace ikp
