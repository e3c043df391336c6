#pragma once

/**
 * @file gateway.hpp
 * Chat-completions client with a content-addressed response cache.
 *
 * Every request is a QuerySpec pinned to temperature 0; its canonical JSON
 * hashes to the cache key, so identical queries never touch the network
 * twice. Cache files live at <cache_dir>/<hash[0:2]>/<hash>.json and are
 * written via temp-file + rename. Batch execution fans out across a bounded
 * worker pool and returns results in input order.
 */

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ikp/corpus.hpp"

namespace ikp {

struct QuerySpec {
  std::string model;
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;  // anything else is rejected before any I/O
  int max_tokens = 1024;
  std::optional<std::string> reasoning_effort;
  int repeat_index = 0;  // >0 distinguishes deliberate re-queries in the cache
};

/// Canonical JSON for hashing: object with sorted keys, no whitespace.
std::string canonical_query_json(const QuerySpec& spec);
/// SHA-256 hex of canonical_query_json. Stable across field reordering.
std::string query_hash(const QuerySpec& spec);

struct TranscriptRecord {
  QuerySpec spec;
  std::string query_hash;
  std::string response_text;
  std::string finish_reason;
  std::int64_t prompt_tokens = -1;
  std::int64_t completion_tokens = -1;
  std::string created_at;  // ISO-8601 UTC of the original fetch
};

std::string transcript_to_json(const TranscriptRecord& rec);
TranscriptRecord transcript_from_json(const std::string& line);
std::vector<TranscriptRecord> load_transcripts(const std::filesystem::path& path);
void save_transcripts(const std::vector<TranscriptRecord>& recs,
                      const std::filesystem::path& path);

// ====== transport ======

struct HttpResponse {
  int status = 0;        // 0 means connection-level failure
  std::string body;
  std::string error;     // set when status == 0
};

/// POST-only transport; swap in a scripted fake for tests.
class Transport {
public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& path, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

/// Real HTTP(S) transport for an OpenAI-compatible endpoint. `base_url`
/// like "https://api.example.com/v1"; the path prefix is preserved.
std::unique_ptr<Transport> make_http_transport(const std::string& base_url,
                                               int timeout_seconds = 120);

struct RetryPolicy {
  int max_attempts = 4;
  int initial_backoff_ms = 250;   // doubled per retry
  double multiplier = 2.0;
};

struct GatewayConfig {
  std::string base_url;           // env IKP_BASE_URL when unset
  std::string api_key;            // env IKP_API_KEY when unset
  std::filesystem::path cache_dir = "cache";
  int concurrency = 4;
  RetryPolicy retry;
};

class GatewayError : public Error {
public:
  GatewayError(const std::string& msg, bool terminal) : Error(msg), terminal_(terminal) {}
  bool terminal() const { return terminal_; }

private:
  bool terminal_;
};

class GatewayClient {
public:
  /// `transport` may be null; it is then created lazily from base_url on the
  /// first cache miss, so cache-only runs need no endpoint at all.
  GatewayClient(GatewayConfig cfg, std::unique_ptr<Transport> transport = nullptr);

  /// Cache-aware completion. Rejects temperature != 0. On a miss, POSTs
  /// {base}/chat/completions with retry/backoff on 429, 5xx, and transport
  /// failures; other 4xx are terminal.
  TranscriptRecord complete(const QuerySpec& spec);

  /// Runs all specs with at most `concurrency` in flight; result order
  /// matches input order. Per-spec failures land in `errors` (same index).
  std::vector<std::optional<TranscriptRecord>> run_batch(
      const std::vector<QuerySpec>& specs, std::vector<std::string>* errors = nullptr);

  /// True when the spec's response is already in the cache.
  bool cached(const QuerySpec& spec) const;

  std::size_t network_calls() const { return network_calls_.load(); }
  const GatewayConfig& config() const { return cfg_; }

private:
  TranscriptRecord fetch(const QuerySpec& spec, const std::string& hash);
  std::filesystem::path cache_path(const std::string& hash) const;

  GatewayConfig cfg_;
  std::unique_ptr<Transport> transport_;
  std::string api_path_;
  std::atomic<std::size_t> network_calls_{0};
  std::once_flag transport_init_;
};

/// Default evaluation system prompt.
extern const char* const kDefaultSystemPrompt;

struct RunOutcome {
  int completed = 0;
  int failed = 0;
  std::vector<std::string> failures;  // "probe_id: reason"
};

/// The exact query list cmd-level evaluation issues: corpus order, one spec
/// per (probe, repeat), question text verbatim.
std::vector<QuerySpec> evaluation_specs(const Corpus& corpus, const std::string& model,
                                        const std::string& system_prompt, int max_tokens,
                                        int repeat_count);

/// Queries every probe (question verbatim as the user prompt) and writes
/// transcripts in corpus order. Failed probes are skipped in the output and
/// reported in the outcome.
RunOutcome run_evaluation(GatewayClient& client, const Corpus& corpus,
                          const std::string& model, const std::string& system_prompt,
                          int max_tokens, int repeat_count,
                          const std::filesystem::path& out_path);

}  // namespace ikp
