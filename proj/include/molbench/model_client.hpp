#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "molbench/prompt.hpp"

namespace molbench::client {

struct EndpointConfig {
  std::string base_url;  // e.g. "https://api.example.com/v1"; requests go to <base_url>/chat/completions
  std::string model_name;
  std::string api_key_env;  // name of the env var holding the bearer token; empty for none
  double temperature = 0.0;
  int max_tokens = 512;
  double timeout_s = 60.0;
  int max_retries = 5;
  int concurrency_limit = 4;
  double backoff_base_s = 1.0;
  double backoff_factor = 2.0;
  double backoff_jitter = 0.2;
  double backoff_cap_s = 60.0;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
  /// Keys under [endpoint] (or at top level) named as the fields above.
  static EndpointConfig from_toml(std::string_view text, const std::string& origin = "<string>");
  static EndpointConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

/// Delay before retry number `retry` (1-based): min(cap, base * factor^(retry-1)),
/// scaled by a factor in [1 - jitter, 1 + jitter] drawn from `unit` in [0, 1).
double backoff_delay(const EndpointConfig& cfg, int retry, double unit);

enum class ErrorKind { Timeout, Connection, HttpStatus, RateLimited, MalformedResponse, ImageUnreadable };
std::string_view to_string(ErrorKind kind);
std::optional<ErrorKind> parse_error_kind(std::string_view text);

struct TranscriptError {
  ErrorKind kind = ErrorKind::Connection;
  int http_status = 0;
  std::string message;
  bool operator==(const TranscriptError&) const = default;
};

inline constexpr int kTranscriptSchemaVersion = 1;

/// One terminal outcome per prompt: response xor error.
struct Transcript {
  std::string prompt_id;
  std::string payload_sha256;
  std::optional<std::string> response;
  double latency_ms = 0.0;
  int attempts = 0;
  std::optional<TranscriptError> error;

  bool ok() const { return response.has_value(); }
  nlohmann::json to_json() const;
  static Transcript from_json(const nlohmann::json& j);
  /// SHA-256 over the compact JSON without latency.
  std::string content_hash() const;
};

/// Chat-completions request body, compact JSON. The image, when present, is
/// attached as a base64 PNG data URI after the text part.
std::string build_payload(const prompt::PromptRecord& prompt, const EndpointConfig& cfg, std::string_view image_png);

/// Extracts choices[0].message.content (string or text parts).
std::optional<std::string> parse_completion(std::string_view body);

struct ClientOptions {
  /// Directory image_path is resolved against.
  std::filesystem::path image_root;
  /// Replaced in tests to avoid real waiting.
  std::function<void(double seconds)> sleep;
};

class ChatClient {
 public:
  explicit ChatClient(EndpointConfig cfg, ClientOptions options = {});
  const EndpointConfig& config() const { return cfg_; }

  /// Sends one prompt, retrying transient failures; never throws for
  /// endpoint errors.
  Transcript complete(const prompt::PromptRecord& prompt) const;

 private:
  EndpointConfig cfg_;
  ClientOptions options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

struct BatchOptions {
  /// Append-only transcript JSONL; completed prompt ids found here are not re-sent.
  std::filesystem::path checkpoint;
  /// Re-send prompts whose checkpointed transcript is an error.
  bool retry_errors = false;
  /// Called after each transcript is checkpointed.
  std::function<void(const Transcript&, std::size_t done, std::size_t total)> progress;
};

struct BatchResult {
  std::vector<Transcript> transcripts;  // input order
  std::size_t from_checkpoint = 0;
  std::size_t sent = 0;
};

/// Throws std::invalid_argument for an empty batch or duplicate prompt ids.
BatchResult run_batch(const std::vector<prompt::PromptRecord>& prompts, const ChatClient& client,
                      const BatchOptions& options = {});

/// Reads a checkpoint, ignoring a torn final line.
std::vector<Transcript> read_transcripts(const std::filesystem::path& path);
void write_transcripts(const std::filesystem::path& path, const std::vector<Transcript>& transcripts);

/// Scripted OpenAI-compatible endpoint. Replies are looked up by the SHA-256
/// of the request's text part; each key holds a queue of replies, the last
/// of which repeats.
struct MockReply {
  int status = 200;
  std::string content;
  /// Sent verbatim instead of a completion envelope when set.
  std::optional<std::string> raw_body;
  int delay_ms = 0;
};

struct MockScript {
  std::vector<MockReply> fallback{MockReply{200, "No", std::nullopt, 0}};
  std::map<std::string, std::vector<MockReply>> by_text_sha256;
  int delay_ms = 0;

  /// {"default": [replies], "by_text_sha256": {hex: [replies]}, "delay_ms": n};
  /// a reply is {"status", "content", "raw_body", "delay_ms"}.
  static MockScript from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct MockStats {
  std::size_t requests = 0;
  std::size_t max_in_flight = 0;
};

/// Replies with each prompt's gold answer, keyed by the prompt text. Prompts
/// listed in `flipped` get the opposite label (classification only).
MockScript oracle_script(const std::vector<prompt::PromptRecord>& prompts, const dataset::TaskSpec& task,
                         const std::set<std::string>& flipped = {});

class MockServer {
 public:
  explicit MockServer(MockScript script);
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds 127.0.0.1 (port 0 picks a free one) and serves on a background thread.
  int start(int port = 0);
  void stop();
  int port() const { return port_; }
  std::string base_url() const;
  MockStats stats() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace molbench::client
