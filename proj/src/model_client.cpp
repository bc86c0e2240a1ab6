#include "molbench/model_client.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <set>
#include <thread>

#include "molbench/config.hpp"
#include "molbench/util/base64.hpp"
#include "molbench/util/hash.hpp"
#include "molbench/util/io.hpp"
#include "molbench/util/rng.hpp"

namespace molbench::client {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Attempt {
  std::optional<std::string> response;
  std::optional<TranscriptError> error;
  bool retryable = false;
};

std::optional<std::string> user_text(const json& body) {
  if (!body.is_object() || !body.contains("messages") || !body["messages"].is_array()) return std::nullopt;
  for (auto it = body["messages"].rbegin(); it != body["messages"].rend(); ++it) {
    if (!it->is_object() || it->value("role", "") != "user" || !it->contains("content")) continue;
    const auto& content = (*it)["content"];
    if (content.is_string()) return content.get<std::string>();
    if (!content.is_array()) return std::nullopt;
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text" && part.contains("text") && part["text"].is_string()) {
        return part["text"].get<std::string>();
      }
    }
    return std::nullopt;
  }
  return std::nullopt;
}

// Appends whole lines with one write(2) each so a kill leaves at most a torn tail.
class CheckpointSink {
 public:
  explicit CheckpointSink(const fs::path& path) {
    if (path.empty()) return;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    if (fs::exists(path)) {
      const std::string data = util::read_file(path);
      if (!data.empty() && data.back() != '\n') {
        const auto keep = data.rfind('\n');
        fs::resize_file(path, keep == std::string::npos ? 0 : keep + 1);
      }
    }
    fd_ = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw std::runtime_error("cannot open checkpoint " + path.string());
  }
  ~CheckpointSink() {
    if (fd_ >= 0) ::close(fd_);
  }
  CheckpointSink(const CheckpointSink&) = delete;
  CheckpointSink& operator=(const CheckpointSink&) = delete;

  void append(const Transcript& t) {
    if (fd_ < 0) return;
    const std::string line = util::dump_compact(t.to_json()) + "\n";
    std::size_t off = 0;
    while (off < line.size()) {
      const auto n = ::write(fd_, line.data() + off, line.size() - off);
      if (n < 0) throw std::runtime_error("checkpoint write failed");
      off += static_cast<std::size_t>(n);
    }
  }

 private:
  int fd_ = -1;
};

}  // namespace

void EndpointConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("endpoint: " + what); };
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
    fail("base_url must start with http:// or https://");
  }
  if (!(temperature >= 0.0 && temperature <= 2.0)) fail("temperature must be in [0, 2]");
  if (concurrency_limit < 1) fail("concurrency_limit must be >= 1");
  if (max_tokens < 1) fail("max_tokens must be >= 1");
  if (!(timeout_s > 0.0)) fail("timeout_s must be > 0");
  if (max_retries < 0) fail("max_retries must be >= 0");
  if (!(backoff_base_s >= 0.0)) fail("backoff_base_s must be >= 0");
  if (!(backoff_factor >= 1.0)) fail("backoff_factor must be >= 1");
  if (!(backoff_jitter >= 0.0 && backoff_jitter < 1.0)) fail("backoff_jitter must be in [0, 1)");
  if (!(backoff_cap_s >= backoff_base_s)) fail("backoff_cap_s must be >= backoff_base_s");
}

EndpointConfig EndpointConfig::from_toml(std::string_view text, const std::string& origin) {
  const auto c = Config::parse(text, origin);
  const std::string p = c.has("endpoint") ? "endpoint." : "";
  EndpointConfig e;
  e.base_url = c.require_string(p + "base_url");
  e.model_name = c.get_string(p + "model", "");
  e.api_key_env = c.get_string(p + "api_key_env", "");
  e.temperature = c.get_double(p + "temperature", e.temperature);
  e.max_tokens = static_cast<int>(c.get_int(p + "max_tokens", e.max_tokens));
  e.timeout_s = c.get_double(p + "timeout_s", e.timeout_s);
  e.max_retries = static_cast<int>(c.get_int(p + "max_retries", e.max_retries));
  e.concurrency_limit = static_cast<int>(c.get_int(p + "concurrency_limit", e.concurrency_limit));
  e.backoff_base_s = c.get_double(p + "backoff_base_s", e.backoff_base_s);
  e.backoff_factor = c.get_double(p + "backoff_factor", e.backoff_factor);
  e.backoff_jitter = c.get_double(p + "backoff_jitter", e.backoff_jitter);
  e.backoff_cap_s = c.get_double(p + "backoff_cap_s", e.backoff_cap_s);
  e.validate();
  return e;
}

EndpointConfig EndpointConfig::load(const fs::path& path) {
  return from_toml(util::read_file(path), path.string());
}

json EndpointConfig::to_json() const {
  return {{"base_url", base_url},
          {"model", model_name},
          {"api_key_env", api_key_env},
          {"temperature", temperature},
          {"max_tokens", max_tokens},
          {"timeout_s", timeout_s},
          {"max_retries", max_retries},
          {"concurrency_limit", concurrency_limit},
          {"backoff_base_s", backoff_base_s},
          {"backoff_factor", backoff_factor},
          {"backoff_jitter", backoff_jitter},
          {"backoff_cap_s", backoff_cap_s}};
}

double backoff_delay(const EndpointConfig& cfg, int retry, double unit) {
  const double raw = cfg.backoff_base_s * std::pow(cfg.backoff_factor, std::max(0, retry - 1));
  const double capped = std::min(cfg.backoff_cap_s, raw);
  return capped * (1.0 + cfg.backoff_jitter * (2.0 * unit - 1.0));
}

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Timeout: return "timeout";
    case ErrorKind::Connection: return "connection";
    case ErrorKind::HttpStatus: return "http_status";
    case ErrorKind::RateLimited: return "rate_limited";
    case ErrorKind::MalformedResponse: return "malformed_response";
    case ErrorKind::ImageUnreadable: return "image_unreadable";
  }
  return "connection";
}

std::optional<ErrorKind> parse_error_kind(std::string_view text) {
  for (auto k : {ErrorKind::Timeout, ErrorKind::Connection, ErrorKind::HttpStatus, ErrorKind::RateLimited,
                 ErrorKind::MalformedResponse, ErrorKind::ImageUnreadable}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

json Transcript::to_json() const {
  json j{{"schema_version", kTranscriptSchemaVersion},
         {"prompt_id", prompt_id},
         {"payload_sha256", payload_sha256},
         {"response", response ? json(*response) : json(nullptr)},
         {"latency_ms", latency_ms},
         {"attempts", attempts},
         {"error", nullptr}};
  if (error) {
    j["error"] = {{"kind", std::string(to_string(error->kind))},
                  {"http_status", error->http_status},
                  {"message", error->message}};
  }
  return j;
}

Transcript Transcript::from_json(const json& j) {
  const int version = j.value("schema_version", 0);
  if (version != kTranscriptSchemaVersion) {
    throw std::runtime_error("unsupported transcript schema_version " + std::to_string(version));
  }
  Transcript t;
  t.prompt_id = j.at("prompt_id").get<std::string>();
  t.payload_sha256 = j.value("payload_sha256", std::string());
  if (j.contains("response") && j["response"].is_string()) t.response = j["response"].get<std::string>();
  t.latency_ms = j.value("latency_ms", 0.0);
  t.attempts = j.value("attempts", 0);
  if (j.contains("error") && j["error"].is_object()) {
    const auto& e = j["error"];
    const auto kind = parse_error_kind(e.value("kind", ""));
    if (!kind) throw std::runtime_error("transcript " + t.prompt_id + ": unknown error kind");
    t.error = TranscriptError{*kind, e.value("http_status", 0), e.value("message", std::string())};
  }
  if (t.response.has_value() == t.error.has_value()) {
    throw std::runtime_error("transcript " + t.prompt_id + ": needs exactly one of response and error");
  }
  return t;
}

std::string Transcript::content_hash() const {
  auto j = to_json();
  j.erase("latency_ms");
  return util::sha256_hex(util::dump_compact(j));
}

std::string build_payload(const prompt::PromptRecord& prompt, const EndpointConfig& cfg, std::string_view image_png) {
  json content = json::array();
  content.push_back({{"type", "text"}, {"text", prompt.text}});
  if (!image_png.empty()) {
    content.push_back(
        {{"type", "image_url"}, {"image_url", {{"url", "data:image/png;base64," + util::base64_encode(image_png)}}}});
  }
  const json body{{"model", cfg.model_name},
                  {"temperature", cfg.temperature},
                  {"max_tokens", cfg.max_tokens},
                  {"messages", json::array({{{"role", "user"}, {"content", content}}})}};
  return util::dump_compact(body);
}

std::optional<std::string> parse_completion(std::string_view body) {
  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("choices") || !j["choices"].is_array() ||
      j["choices"].empty()) {
    return std::nullopt;
  }
  const auto& choice = j["choices"][0];
  if (!choice.is_object() || !choice.contains("message") || !choice["message"].is_object()) return std::nullopt;
  const auto& message = choice["message"];
  if (!message.contains("content")) return std::nullopt;
  const auto& content = message["content"];
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content) {
      if (part.is_object() && part.contains("text") && part["text"].is_string()) out += part["text"].get<std::string>();
    }
    return out;
  }
  return std::nullopt;
}

ChatClient::ChatClient(EndpointConfig cfg, ClientOptions options) : cfg_(std::move(cfg)), options_(std::move(options)) {
  cfg_.validate();
  const auto scheme_end = cfg_.base_url.find("://") + 3;
  const auto slash = cfg_.base_url.find('/', scheme_end);
  scheme_host_port_ = cfg_.base_url.substr(0, slash);
  path_prefix_ = slash == std::string::npos ? "" : cfg_.base_url.substr(slash);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (!options_.sleep) {
    options_.sleep = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
  }
}

Transcript ChatClient::complete(const prompt::PromptRecord& prompt) const {
  Transcript t;
  t.prompt_id = prompt.prompt_id;
  const auto start = Clock::now();
  auto finish = [&] {
    t.latency_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    return t;
  };

  std::string image;
  if (!prompt.image_path.empty()) {
    try {
      image = util::read_file(options_.image_root / prompt.image_path);
    } catch (const std::exception& e) {
      t.error = TranscriptError{ErrorKind::ImageUnreadable, 0, e.what()};
      return finish();
    }
  }
  const std::string payload = build_payload(prompt, cfg_, image);
  t.payload_sha256 = util::sha256_hex(payload);

  httplib::Headers headers;
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::duration<double>(cfg_.timeout_s));
  util::Xoshiro256 jitter(util::fnv1a64(prompt.prompt_id));

  for (int attempt = 1;; ++attempt) {
    t.attempts = attempt;
    Attempt a;
    httplib::Client http(scheme_host_port_);
    http.set_connection_timeout(timeout);
    http.set_read_timeout(timeout);
    http.set_write_timeout(timeout);
    const auto res = http.Post(path_prefix_ + "/chat/completions", headers, payload, "application/json");
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::Read || err == httplib::Error::Write ||
                             err == httplib::Error::ConnectionTimeout;
      a.error = TranscriptError{timed_out ? ErrorKind::Timeout : ErrorKind::Connection, 0, httplib::to_string(err)};
      a.retryable = true;
    } else if (res->status == 429) {
      a.error = TranscriptError{ErrorKind::RateLimited, 429, res->body.substr(0, 200)};
      a.retryable = true;
    } else if (res->status != 200) {
      a.error = TranscriptError{ErrorKind::HttpStatus, res->status, res->body.substr(0, 200)};
      a.retryable = res->status >= 500;
    } else if (auto text = parse_completion(res->body)) {
      a.response = std::move(text);
    } else {
      a.error = TranscriptError{ErrorKind::MalformedResponse, 200, res->body.substr(0, 200)};
    }

    if (a.response) {
      t.response = std::move(a.response);
      return finish();
    }
    if (!a.retryable || attempt > cfg_.max_retries) {
      t.error = std::move(a.error);
      return finish();
    }
    options_.sleep(backoff_delay(cfg_, attempt, jitter.unit()));
  }
}

BatchResult run_batch(const std::vector<prompt::PromptRecord>& prompts, const ChatClient& client,
                      const BatchOptions& options) {
  if (prompts.empty()) throw std::invalid_argument("run_batch: no prompts");
  std::set<std::string> ids;
  for (const auto& p : prompts) {
    if (!ids.insert(p.prompt_id).second) throw std::invalid_argument("run_batch: duplicate prompt id " + p.prompt_id);
  }

  std::map<std::string, Transcript> done;
  if (!options.checkpoint.empty() && fs::exists(options.checkpoint)) {
    for (auto& t : read_transcripts(options.checkpoint)) {
      if (ids.count(t.prompt_id) && (t.ok() || !options.retry_errors)) done[t.prompt_id] = std::move(t);
    }
  }

  BatchResult out;
  out.transcripts.resize(prompts.size());
  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (auto it = done.find(prompts[i].prompt_id); it != done.end()) {
      out.transcripts[i] = it->second;
      ++out.from_checkpoint;
    } else {
      todo.push_back(i);
    }
  }

  CheckpointSink sink(options.checkpoint);
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::size_t finished = out.from_checkpoint;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t slot = next.fetch_add(1);
      if (slot >= todo.size()) return;
      const std::size_t i = todo[slot];
      Transcript t = client.complete(prompts[i]);
      std::lock_guard lock(mu);
      try {
        sink.append(t);
      } catch (...) {
        if (!failure) failure = std::current_exception();
      }
      out.transcripts[i] = std::move(t);
      ++finished;
      if (options.progress) options.progress(out.transcripts[i], finished, prompts.size());
    }
  };
  const auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(client.config().concurrency_limit), todo.size());
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  out.sent = todo.size();
  return out;
}

std::vector<Transcript> read_transcripts(const fs::path& path) {
  const std::string data = util::read_file(path);
  std::vector<Transcript> out;
  std::size_t pos = 0;
  while (pos < data.size()) {
    auto end = data.find('\n', pos);
    const bool torn = end == std::string::npos;
    if (torn) end = data.size();
    const std::string_view line(data.data() + pos, end - pos);
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      if (torn) break;
      throw std::runtime_error(path.string() + ": unparsable transcript line");
    }
    out.push_back(Transcript::from_json(j));
  }
  return out;
}

void write_transcripts(const fs::path& path, const std::vector<Transcript>& transcripts) {
  std::vector<json> rows;
  rows.reserve(transcripts.size());
  for (const auto& t : transcripts) rows.push_back(t.to_json());
  util::write_jsonl(path, rows);
}

MockScript MockScript::from_json(const json& j) {
  auto reply = [](const json& r) {
    MockReply m;
    m.status = r.value("status", 200);
    m.content = r.value("content", std::string());
    if (r.contains("raw_body") && r["raw_body"].is_string()) m.raw_body = r["raw_body"].get<std::string>();
    m.delay_ms = r.value("delay_ms", 0);
    return m;
  };
  auto queue = [&](const json& arr) {
    std::vector<MockReply> out;
    if (arr.is_object()) {
      out.push_back(reply(arr));
    } else {
      for (const auto& r : arr) out.push_back(reply(r));
    }
    if (out.empty()) throw std::invalid_argument("mock script: empty reply list");
    return out;
  };
  MockScript s;
  if (j.contains("default")) s.fallback = queue(j["default"]);
  if (j.contains("by_text_sha256")) {
    for (const auto& [key, value] : j["by_text_sha256"].items()) s.by_text_sha256[key] = queue(value);
  }
  s.delay_ms = j.value("delay_ms", 0);
  return s;
}

MockScript oracle_script(const std::vector<prompt::PromptRecord>& prompts, const dataset::TaskSpec& task,
                         const std::set<std::string>& flipped) {
  if (!flipped.empty() && task.kind != dataset::TaskKind::Classification)
    throw std::invalid_argument("flipped answers need a classification task");
  MockScript s;
  for (const auto& p : prompts) {
    auto labels = dataset::labels_from_json(p.gold, task);
    if (flipped.count(p.prompt_id)) labels.values.at(0) = labels.values.at(0) != 0.0 ? 0.0 : 1.0;
    s.by_text_sha256[util::sha256_hex(p.text)] = {MockReply{200, prompt::format_answer(labels, task), std::nullopt, 0}};
  }
  return s;
}

json MockScript::to_json() const {
  auto reply = [](const MockReply& m) {
    json r{{"status", m.status}, {"content", m.content}, {"delay_ms", m.delay_ms}};
    if (m.raw_body) r["raw_body"] = *m.raw_body;
    return r;
  };
  auto queue = [&](const std::vector<MockReply>& q) {
    json a = json::array();
    for (const auto& m : q) a.push_back(reply(m));
    return a;
  };
  json keyed = json::object();
  for (const auto& [k, q] : by_text_sha256) keyed[k] = queue(q);
  return {{"default", queue(fallback)}, {"by_text_sha256", keyed}, {"delay_ms", delay_ms}};
}

struct MockServer::Impl {
  MockScript script;
  httplib::Server server;
  std::thread thread;
  mutable std::mutex mu;
  std::map<std::string, std::size_t> cursor;
  std::size_t requests = 0;
  std::size_t in_flight = 0;
  std::size_t max_in_flight = 0;

  MockReply next_reply(const std::string& key) {
    std::lock_guard lock(mu);
    auto it = script.by_text_sha256.find(key);
    const auto& q = it == script.by_text_sha256.end() ? script.fallback : it->second;
    const std::string cursor_key = it == script.by_text_sha256.end() ? "" : key;
    std::size_t& c = cursor[cursor_key];
    const auto& r = q[std::min(c, q.size() - 1)];
    ++c;
    return r;
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    {
      std::lock_guard lock(mu);
      ++requests;
      max_in_flight = std::max(max_in_flight, ++in_flight);
    }
    struct Leave {
      Impl* self;
      ~Leave() {
        std::lock_guard lock(self->mu);
        --self->in_flight;
      }
    } leave{this};

    const auto body = json::parse(req.body, nullptr, false);
    const auto text = body.is_discarded() ? std::nullopt : user_text(body);
    if (!text) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"no user text"}})", "application/json");
      return;
    }
    const MockReply r = next_reply(util::sha256_hex(*text));
    const int delay = script.delay_ms + r.delay_ms;
    if (delay > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    res.status = r.status;
    if (r.raw_body) {
      res.set_content(*r.raw_body, "application/json");
    } else if (r.status == 200) {
      const json envelope{
          {"id", "mock-" + util::sha256_hex(*text).substr(0, 12)},
          {"object", "chat.completion"},
          {"model", body.value("model", "")},
          {"choices", json::array({{{"index", 0},
                                    {"message", {{"role", "assistant"}, {"content", r.content}}},
                                    {"finish_reason", "stop"}}})}};
      res.set_content(util::dump_compact(envelope), "application/json");
    } else {
      res.set_content(util::dump_compact(json{{"error", {{"message", r.content}}}}), "application/json");
    }
  }
};

MockServer::MockServer(MockScript script) : impl_(std::make_unique<Impl>()) {
  impl_->script = std::move(script);
  impl_->server.new_task_queue = [] { return new httplib::ThreadPool(64); };
  impl_->server.Post(R"(.*/chat/completions)",
                     [this](const httplib::Request& req, httplib::Response& res) { impl_->handle(req, res); });
  impl_->server.Get("/stats", [this](const httplib::Request&, httplib::Response& res) {
    const auto s = stats();
    res.set_content(util::dump_compact(json{{"requests", s.requests}, {"max_in_flight", s.max_in_flight}}),
                    "application/json");
  });
}

MockServer::~MockServer() { stop(); }

int MockServer::start(int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
  } else {
    port_ = impl_->server.bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (port_ < 0) throw std::runtime_error("mock server: cannot bind port " + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void MockServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string MockServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

MockStats MockServer::stats() const {
  std::lock_guard lock(impl_->mu);
  return {impl_->requests, impl_->max_in_flight};
}

}  // namespace molbench::client
