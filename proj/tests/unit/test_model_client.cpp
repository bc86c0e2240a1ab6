#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "catch_amalgamated.hpp"
#include "molbench/config.hpp"
#include "molbench/model_client.hpp"
#include "molbench/util/base64.hpp"
#include "molbench/util/hash.hpp"
#include "molbench/util/io.hpp"
#include "molbench/util/rng.hpp"

using namespace molbench;
using client::ErrorKind;
using client::MockReply;
using client::MockScript;
using client::MockServer;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("molbench_client_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

prompt::PromptRecord make_prompt(std::size_t i) {
  prompt::PromptRecord p;
  p.prompt_id = "toy:icl_k2:smiles:" + std::to_string(i);
  p.dataset = "toy";
  p.text = "Question " + std::to_string(i) + "\nAnswer with Yes or No.";
  p.mode = prompt::PromptMode::icl(2);
  p.target_id = i;
  return p;
}

client::EndpointConfig fast_config(const std::string& base_url) {
  client::EndpointConfig c;
  c.base_url = base_url;
  c.model_name = "mock-vlm";
  c.timeout_s = 5.0;
  c.max_retries = 3;
  c.concurrency_limit = 3;
  return c;
}

// Records requested delays instead of sleeping.
struct SleepLog {
  std::shared_ptr<std::vector<double>> delays = std::make_shared<std::vector<double>>();
  client::ClientOptions options() const {
    client::ClientOptions o;
    auto d = delays;
    o.sleep = [d](double s) { d->push_back(s); };
    return o;
  }
};

MockScript keyed(const std::vector<prompt::PromptRecord>& prompts, const std::vector<std::vector<MockReply>>& replies) {
  MockScript s;
  for (std::size_t i = 0; i < prompts.size(); ++i) s.by_text_sha256[util::sha256_hex(prompts[i].text)] = replies[i];
  return s;
}

}  // namespace

TEST_CASE("backoff schedule", "[client]") {
  client::EndpointConfig c;
  c.base_url = "http://localhost";
  CHECK(client::backoff_delay(c, 1, 0.5) == Catch::Approx(1.0));
  CHECK(client::backoff_delay(c, 2, 0.5) == Catch::Approx(2.0));
  CHECK(client::backoff_delay(c, 4, 0.5) == Catch::Approx(8.0));
  CHECK(client::backoff_delay(c, 7, 0.5) == Catch::Approx(60.0));
  CHECK(client::backoff_delay(c, 30, 0.5) == Catch::Approx(60.0));
  CHECK(client::backoff_delay(c, 1, 0.0) == Catch::Approx(0.8));
  CHECK(client::backoff_delay(c, 7, 0.0) == Catch::Approx(48.0));
  util::Xoshiro256 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const int retry = 1 + static_cast<int>(rng.below(10));
    const double u = rng.unit();
    const double nominal = std::min(60.0, std::ldexp(1.0, retry - 1));
    const double d = client::backoff_delay(c, retry, u);
    CHECK(d >= 0.8 * nominal - 1e-12);
    CHECK(d <= 1.2 * nominal + 1e-12);
  }
}

TEST_CASE("endpoint config parsing and validation", "[client]") {
  const auto c = client::EndpointConfig::from_toml(
      "[endpoint]\nbase_url = \"http://127.0.0.1:9/v1\"\nmodel = \"m\"\ntemperature = 0.7\nmax_tokens = 64\n"
      "concurrency_limit = 2\n");
  CHECK(c.model_name == "m");
  CHECK(c.temperature == 0.7);
  CHECK(c.max_tokens == 64);
  CHECK(c.concurrency_limit == 2);
  CHECK(c.max_retries == 5);
  CHECK_THROWS_AS(client::EndpointConfig::from_toml("base_url = \"http://x\"\ntemperature = 2.5\n"), ConfigError);
  CHECK_THROWS_AS(client::EndpointConfig::from_toml("base_url = \"http://x\"\nconcurrency_limit = 0\n"), ConfigError);
  CHECK_THROWS_AS(client::EndpointConfig::from_toml("base_url = \"ftp://x\"\n"), ConfigError);
  CHECK_THROWS_AS(client::EndpointConfig::from_toml("model = \"m\"\n"), ConfigError);
}

TEST_CASE("request payload", "[client]") {
  auto p = make_prompt(1);
  auto c = fast_config("http://127.0.0.1:1");
  c.temperature = 0.3;
  c.max_tokens = 77;
  const std::string png("\x89PNG\r\n\x1a\nabc", 11);
  const auto a = client::build_payload(p, c, png);
  CHECK(a == client::build_payload(p, c, png));
  const auto j = nlohmann::json::parse(a);
  CHECK(j["temperature"] == 0.3);
  CHECK(j["max_tokens"] == 77);
  CHECK(j["model"] == "mock-vlm");
  REQUIRE(j["messages"].size() == 1);
  const auto& content = j["messages"][0]["content"];
  REQUIRE(content.size() == 2);
  CHECK(content[0]["text"] == p.text);
  const std::string url = content[1]["image_url"]["url"];
  const std::string prefix = "data:image/png;base64,";
  REQUIRE(url.rfind(prefix, 0) == 0);
  CHECK(util::base64_decode(url.substr(prefix.size())) == png);
  CHECK(nlohmann::json::parse(client::build_payload(p, c, ""))["messages"][0]["content"].size() == 1);

  CHECK(client::parse_completion(R"({"choices":[{"message":{"content":"Yes"}}]})") == "Yes");
  CHECK(client::parse_completion(R"({"choices":[{"message":{"content":[{"type":"text","text":"a"},{"type":"text","text":"b"}]}}]})") == "ab");
  CHECK_FALSE(client::parse_completion(R"({"choices":[]})"));
  CHECK_FALSE(client::parse_completion("not json"));
}

TEST_CASE("transcript records", "[client]") {
  client::Transcript t;
  t.prompt_id = "x";
  t.payload_sha256 = "ab";
  t.response = "Yes";
  t.latency_ms = 12.5;
  t.attempts = 2;
  const auto back = client::Transcript::from_json(t.to_json());
  CHECK(back.response == t.response);
  CHECK(back.attempts == 2);
  auto slower = t;
  slower.latency_ms = 999;
  CHECK(slower.content_hash() == t.content_hash());
  slower.attempts = 3;
  CHECK(slower.content_hash() != t.content_hash());

  auto bad = t.to_json();
  bad["error"] = {{"kind", "timeout"}, {"http_status", 0}, {"message", ""}};
  CHECK_THROWS(client::Transcript::from_json(bad));
  bad["response"] = nullptr;
  CHECK(client::Transcript::from_json(bad).error->kind == ErrorKind::Timeout);
}

TEST_CASE("mock endpoint replies and retries", "[client]") {
  const std::vector<prompt::PromptRecord> prompts{make_prompt(0), make_prompt(1), make_prompt(2), make_prompt(3),
                                                  make_prompt(4)};
  MockServer server(keyed(prompts, {
                                       {{200, "Yes, this molecule inhibits BACE-1.", std::nullopt, 0}},
                                       {{429, "slow down", std::nullopt, 0}, {200, "No", std::nullopt, 0}},
                                       {{503, "busy", std::nullopt, 0}},
                                       {{400, "bad request", std::nullopt, 0}},
                                       {{200, "", std::string("{\"choices\": oops"), 0}},
                                   }));
  server.start();
  SleepLog log;
  const client::ChatClient chat(fast_config(server.base_url()), log.options());

  const auto echo = chat.complete(prompts[0]);
  CHECK(echo.response == "Yes, this molecule inhibits BACE-1.");
  CHECK(echo.attempts == 1);
  CHECK_FALSE(echo.error);
  CHECK(echo.payload_sha256 == util::sha256_hex(client::build_payload(prompts[0], chat.config(), "")));

  const auto limited = chat.complete(prompts[1]);
  CHECK(limited.response == "No");
  CHECK(limited.attempts == 2);
  REQUIRE(log.delays->size() == 1);
  CHECK(log.delays->at(0) >= 0.8);
  CHECK(log.delays->at(0) <= 1.2);

  log.delays->clear();
  const auto busy = chat.complete(prompts[2]);
  CHECK_FALSE(busy.response);
  REQUIRE(busy.error);
  CHECK(busy.error->kind == ErrorKind::HttpStatus);
  CHECK(busy.error->http_status == 503);
  CHECK(busy.attempts == 4);
  REQUIRE(log.delays->size() == 3);
  CHECK(log.delays->at(2) >= 3.2);
  CHECK(log.delays->at(2) <= 4.8);

  const auto rejected = chat.complete(prompts[3]);
  CHECK(rejected.error->kind == ErrorKind::HttpStatus);
  CHECK(rejected.attempts == 1);

  const auto malformed = chat.complete(prompts[4]);
  CHECK(malformed.error->kind == ErrorKind::MalformedResponse);
  CHECK(malformed.attempts == 1);

  auto unscripted = make_prompt(99);
  CHECK(chat.complete(unscripted).response == "No");
  server.stop();
}

TEST_CASE("transport failures", "[client]") {
  int dead_port = 0;
  {
    MockServer s(MockScript{});
    dead_port = s.start();
  }
  SleepLog log;
  auto cfg = fast_config("http://127.0.0.1:" + std::to_string(dead_port) + "/v1");
  cfg.max_retries = 2;
  const auto t = client::ChatClient(cfg, log.options()).complete(make_prompt(0));
  CHECK_FALSE(t.response);
  REQUIRE(t.error);
  CHECK(t.error->kind == ErrorKind::Connection);
  CHECK(t.attempts == 3);
  CHECK(log.delays->size() == 2);

  MockScript slow;
  slow.fallback = {{200, "late", std::nullopt, 1500}};
  MockServer server(slow);
  server.start();
  auto tcfg = fast_config(server.base_url());
  tcfg.timeout_s = 0.3;
  tcfg.max_retries = 0;
  const auto timed = client::ChatClient(tcfg, log.options()).complete(make_prompt(0));
  REQUIRE(timed.error);
  CHECK(timed.error->kind == ErrorKind::Timeout);

  auto with_image = make_prompt(1);
  with_image.image_path = "missing/none.png";
  const auto no_image = client::ChatClient(tcfg, log.options()).complete(with_image);
  CHECK(no_image.error->kind == ErrorKind::ImageUnreadable);
  CHECK(no_image.attempts == 0);
  server.stop();
}

TEST_CASE("batch concurrency and order", "[client]") {
  std::vector<prompt::PromptRecord> prompts;
  std::vector<std::vector<MockReply>> replies;
  for (std::size_t i = 0; i < 10; ++i) {
    prompts.push_back(make_prompt(i));
    // later prompts answer faster so completion order differs from input order
    replies.push_back({{200, "answer " + std::to_string(i), std::nullopt, static_cast<int>(150 - 10 * i)}});
  }
  MockServer server(keyed(prompts, replies));
  server.start();
  const client::ChatClient chat(fast_config(server.base_url()));
  const auto out = client::run_batch(prompts, chat);
  REQUIRE(out.transcripts.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(out.transcripts[i].prompt_id == prompts[i].prompt_id);
    CHECK(out.transcripts[i].response == "answer " + std::to_string(i));
  }
  const auto stats = server.stats();
  CHECK(stats.requests == 10);
  CHECK(stats.max_in_flight <= 3);
  CHECK(stats.max_in_flight >= 2);

  const auto single = client::run_batch({prompts[4]}, chat);
  CHECK(single.transcripts.size() == 1);
  CHECK(single.transcripts[0].response == "answer 4");

  CHECK_THROWS_AS(client::run_batch({}, chat), std::invalid_argument);
  CHECK_THROWS_AS(client::run_batch({prompts[0], prompts[0]}, chat), std::invalid_argument);
  server.stop();
}

TEST_CASE("batch resume from checkpoint", "[client]") {
  const auto dir = scratch_dir("resume");
  std::vector<prompt::PromptRecord> prompts;
  std::vector<std::vector<MockReply>> replies;
  for (std::size_t i = 0; i < 10; ++i) {
    prompts.push_back(make_prompt(i));
    replies.push_back({{200, i % 3 ? "Yes" : "No", std::nullopt, 0}});
  }
  MockServer server(keyed(prompts, replies));
  server.start();
  const client::ChatClient chat(fast_config(server.base_url()));

  const auto reference = client::run_batch(prompts, chat);

  // first five land in the checkpoint, then a torn line as left by a kill
  const auto ckpt = dir / "transcripts.jsonl";
  client::BatchOptions opts;
  opts.checkpoint = ckpt;
  client::run_batch({prompts.begin(), prompts.begin() + 5}, chat, opts);
  {
    std::ofstream torn(ckpt, std::ios::app);
    torn << "{\"schema_version\":1,\"prompt_id\":\"toy:icl";
  }
  const auto before = server.stats().requests;
  const auto resumed = client::run_batch(prompts, chat, opts);
  CHECK(resumed.from_checkpoint == 5);
  CHECK(resumed.sent == 5);
  CHECK(server.stats().requests - before == 5);
  REQUIRE(resumed.transcripts.size() == reference.transcripts.size());
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    CHECK(resumed.transcripts[i].content_hash() == reference.transcripts[i].content_hash());
  }
  const auto on_disk = client::read_transcripts(ckpt);
  CHECK(on_disk.size() == 10);
  CHECK(util::read_file(ckpt).back() == '\n');

  const auto again = client::run_batch(prompts, chat, opts);
  CHECK(again.from_checkpoint == 10);
  CHECK(again.sent == 0);
  server.stop();
  fs::remove_all(dir);
}

TEST_CASE("mock script json", "[client]") {
  const auto s = MockScript::from_json(nlohmann::json::parse(
      R"({"default": {"content": "Yes"}, "by_text_sha256": {"ab": [{"status": 429}, {"content": "No"}]}, "delay_ms": 3})"));
  REQUIRE(s.fallback.size() == 1);
  CHECK(s.fallback[0].content == "Yes");
  CHECK(s.by_text_sha256.at("ab")[0].status == 429);
  CHECK(s.delay_ms == 3);
  const auto back = MockScript::from_json(s.to_json());
  CHECK(back.by_text_sha256.at("ab")[1].content == "No");
}

TEST_CASE("oracle script echoes gold answers", "[client]") {
  const auto task = dataset::TaskSpec::bundled("bace");
  std::vector<prompt::PromptRecord> prompts;
  for (std::size_t i = 0; i < 4; ++i) {
    auto p = make_prompt(i);
    p.gold = dataset::labels_to_json({{i % 2 == 0 ? 1.0 : 0.0}, ""}, task);
    prompts.push_back(p);
  }
  const auto s = client::oracle_script(prompts, task, {prompts[1].prompt_id});
  REQUIRE(s.by_text_sha256.size() == 4);
  auto reply = [&](std::size_t i) { return s.by_text_sha256.at(util::sha256_hex(prompts[i].text)).front().content; };
  CHECK(reply(0) == "Yes");
  CHECK(reply(1) == "Yes");  // flipped from No
  CHECK(reply(2) == "Yes");
  CHECK(reply(3) == "No");

  const auto esol = dataset::TaskSpec::bundled("esol");
  auto numeric = make_prompt(9);
  numeric.gold = dataset::labels_to_json({{-3.21}, ""}, esol);
  CHECK(client::oracle_script({numeric}, esol).by_text_sha256.begin()->second.front().content == "-3.21");
  CHECK_THROWS_AS(client::oracle_script({numeric}, esol, {numeric.prompt_id}), std::invalid_argument);
}
