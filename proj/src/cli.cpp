#include "molbench/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "molbench/config.hpp"
#include "molbench/contrastive.hpp"
#include "molbench/dataset.hpp"
#include "molbench/eval.hpp"
#include "molbench/model_client.hpp"
#include "molbench/prompt.hpp"
#include "molbench/report.hpp"
#include "molbench/util/hash.hpp"
#include "molbench/util/io.hpp"
#include "molbench/util/rng.hpp"

namespace molbench::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Failure : std::runtime_error {
  Failure(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

[[noreturn]] void config_fail(const std::string& what) { throw Failure(kExitConfig, what); }

const char* type_name(int code) {
  switch (code) {
    case kExitUsage: return "usage";
    case kExitConfig: return "config";
    default: return "runtime";
  }
}

void require_file(const std::string& flag, const std::string& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) config_fail(flag + ": no such file '" + path + "'");
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) config_fail("--out: cannot create directory '" + dir + "'");
  const auto probe = fs::path(dir) / ".molbench_write_probe";
  {
    std::ofstream f(probe);
    if (!f) config_fail("--out: directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
  return dir;
}

dataset::TaskSpec load_task(const std::string& arg) {
  const fs::path p(arg);
  if (p.extension() == ".toml" || arg.find('/') != std::string::npos) {
    require_file("--task", arg);
    return dataset::TaskSpec::load(p);
  }
  return dataset::TaskSpec::bundled(arg);
}

std::string file_sha256(const std::string& path) { return util::sha256_hex(util::read_file(path)); }

/// Resolved settings and input digests of one invocation. No timestamps, so
/// identical invocations produce identical files.
void write_run_json(const fs::path& out, const std::string& command, const json& config, const json& inputs) {
  const json run{{"command", command}, {"version", MOLBENCH_VERSION}, {"config", config}, {"inputs", inputs}};
  util::write_file(out / "run.json", run.dump(2) + "\n");
}

void write_json(const fs::path& path, const json& j) { util::write_file(path, j.dump(2) + "\n"); }

struct Globals {
  unsigned workers = 0;
  bool json_errors = false;
};

// ---- curate

struct CurateArgs {
  std::string dataset, task, out;
  std::size_t sample = 0;
  int image_size = 384;
  bool no_images = false;
};

int cmd_curate(const CurateArgs& a, const Globals& g) {
  require_file("--dataset", a.dataset);
  const auto task = load_task(a.task);
  if (a.image_size < 16) config_fail("--image-size must be >= 16");
  const auto out = prepare_out(a.out);
  write_run_json(out, "curate",
                 {{"dataset", a.dataset},
                  {"task", task.name},
                  {"sample", a.sample},
                  {"image_size", a.image_size},
                  {"images", !a.no_images},
                  {"workers", g.workers}},
                 {{"dataset", file_sha256(a.dataset)}});

  const auto raw = dataset::ingest_csv(a.dataset, task, {a.sample});
  dataset::CurateOptions opt;
  if (!a.no_images) opt.image_root = out / "images";
  opt.image_size = a.image_size;
  opt.workers = g.workers;
  auto result = dataset::curate(raw.records, task, opt);

  auto report = result.report.to_json();
  report["ingest"] = {{"rows", raw.rows},
                      {"dropped_missing_label", raw.dropped_missing_label},
                      {"dropped_empty_smiles", raw.dropped_empty_smiles},
                      {"dropped_bad_label", raw.dropped_bad_label}};
  dataset::write_manifest(out / "manifest.jsonl", result.records, task);
  write_json(out / "curation_report.json", report);
  std::cout << task.name << ": " << raw.rows << " rows, " << result.records.size() << " curated, "
            << result.report.excluded.size() << " excluded, " << result.report.duplicates.size() << " duplicates\n";
  return 0;
}

// ---- split

struct SplitArgs {
  std::string manifest, task, out;
  double ratio = 0.8;
  std::uint64_t seed = 42;
};

int cmd_split(const SplitArgs& a, const Globals&) {
  require_file("--manifest", a.manifest);
  const auto task = load_task(a.task);
  if (!(a.ratio > 0.0 && a.ratio < 1.0)) config_fail("--ratio must lie in (0, 1)");
  const auto out = prepare_out(a.out);
  write_run_json(out, "split", {{"manifest", a.manifest}, {"task", task.name}, {"ratio", a.ratio}, {"seed", a.seed}},
                 {{"manifest", file_sha256(a.manifest)}});
  const auto records = dataset::read_manifest(a.manifest, task);
  const auto s = dataset::split(records, {a.ratio, a.seed});
  write_json(out / "split.json", s.to_json(task.name));
  std::cout << task.name << ": train " << s.train.size() << ", test " << s.test.size() << "\n";
  return 0;
}

// ---- prompt

struct PromptArgs {
  std::string manifest, split, task, mode = "zero_shot", repr = "smiles", templates, out;
  std::size_t k = 2;
};

int cmd_prompt(const PromptArgs& a, const Globals& g) {
  require_file("--manifest", a.manifest);
  require_file("--split", a.split);
  const auto task = load_task(a.task);
  std::optional<prompt::PromptMode> mode;
  if (a.mode == "zero_shot") mode = prompt::PromptMode::zero_shot();
  else if (a.mode == "icl") mode = prompt::PromptMode::icl(a.k);
  else if (a.mode == "cot") mode = prompt::PromptMode::cot(a.k);
  else mode = prompt::parse_mode(a.mode);
  if (!mode) config_fail("--mode: expected zero_shot, icl or cot, got '" + a.mode + "'");
  if (mode->kind != prompt::PromptMode::Kind::ZeroShot && mode->k == 0) config_fail("--k must be >= 1");
  const auto repr = prompt::parse_representation(a.repr);
  if (!repr) config_fail("--repr: expected smiles or selfies, got '" + a.repr + "'");
  const fs::path templates = a.templates.empty() ? prompt::default_template_dir() : fs::path(a.templates);
  if (!fs::is_directory(templates)) config_fail("--templates: no such directory '" + templates.string() + "'");
  const auto mismatches = prompt::verify_template_manifest(templates);
  if (!mismatches.empty()) {
    std::string list;
    for (const auto& m : mismatches) list += (list.empty() ? "" : ", ") + m;
    config_fail("template files do not match " + (templates / "MANIFEST").string() + ": " + list);
  }
  const auto out = prepare_out(a.out);
  write_run_json(out, "prompt",
                 {{"manifest", a.manifest},
                  {"split", a.split},
                  {"task", task.name},
                  {"mode", prompt::to_string(*mode)},
                  {"representation", std::string(prompt::to_string(*repr))},
                  {"templates", templates.string()},
                  {"workers", g.workers}},
                 {{"manifest", file_sha256(a.manifest)},
                  {"split", file_sha256(a.split)},
                  {"templates", file_sha256((templates / "MANIFEST").string())}});

  const auto records = dataset::read_manifest(a.manifest, task);
  const auto s = dataset::SplitResult::from_json(json::parse(util::read_file(a.split)));
  const auto built = prompt::build_prompts(records, s, task, *mode, *repr, templates, g.workers);
  prompt::write_prompts(out / "prompts.jsonl", built.prompts);
  write_json(out / "prompt_summary.json",
             {{"dataset", task.name}, {"mode", prompt::to_string(*mode)}, {"prompts", built.prompts.size()},
              {"skipped", built.skipped}});
  std::cout << built.prompts.size() << " prompts, " << built.skipped.size() << " skipped\n";
  return 0;
}

// ---- run

struct RunArgs {
  std::string prompts, endpoint, image_root, out;
  bool retry_errors = false;
  // overrides; unset ones keep the endpoint file's value
  std::optional<std::string> base_url, model_name, api_key_env;
  std::optional<double> temperature, timeout_s, backoff_base_s, backoff_factor, backoff_jitter, backoff_cap_s;
  std::optional<int> max_tokens, max_retries, concurrency;
};

int cmd_run(const RunArgs& a, const Globals&) {
  require_file("--prompts", a.prompts);
  client::EndpointConfig cfg;
  if (!a.endpoint.empty()) {
    require_file("--endpoint", a.endpoint);
    cfg = client::EndpointConfig::load(a.endpoint);
  } else if (!a.base_url) {
    config_fail("either --endpoint or --base-url is required");
  }
  if (a.base_url) cfg.base_url = *a.base_url;
  if (a.model_name) cfg.model_name = *a.model_name;
  if (a.api_key_env) cfg.api_key_env = *a.api_key_env;
  if (a.temperature) cfg.temperature = *a.temperature;
  if (a.max_tokens) cfg.max_tokens = *a.max_tokens;
  if (a.timeout_s) cfg.timeout_s = *a.timeout_s;
  if (a.max_retries) cfg.max_retries = *a.max_retries;
  if (a.concurrency) cfg.concurrency_limit = *a.concurrency;
  if (a.backoff_base_s) cfg.backoff_base_s = *a.backoff_base_s;
  if (a.backoff_factor) cfg.backoff_factor = *a.backoff_factor;
  if (a.backoff_jitter) cfg.backoff_jitter = *a.backoff_jitter;
  if (a.backoff_cap_s) cfg.backoff_cap_s = *a.backoff_cap_s;
  cfg.validate();

  const auto prompts = prompt::read_prompts(a.prompts);
  if (prompts.empty()) config_fail("--prompts: '" + a.prompts + "' holds no prompts");
  const fs::path image_root = a.image_root.empty() ? fs::path(a.prompts).parent_path() : fs::path(a.image_root);
  const auto out = prepare_out(a.out);
  json inputs{{"prompts", file_sha256(a.prompts)}};
  if (!a.endpoint.empty()) inputs["endpoint"] = file_sha256(a.endpoint);
  write_run_json(out, "run",
                 {{"prompts", a.prompts},
                  {"endpoint", cfg.to_json()},
                  {"image_root", image_root.string()},
                  {"retry_errors", a.retry_errors}},
                 inputs);

  client::ChatClient chat(cfg, {image_root, {}});
  client::BatchOptions opt;
  opt.checkpoint = out / "checkpoint.jsonl";
  opt.retry_errors = a.retry_errors;
  const auto result = client::run_batch(prompts, chat, opt);
  client::write_transcripts(out / "transcripts.jsonl", result.transcripts);

  std::map<std::string, std::size_t> errors;
  for (const auto& t : result.transcripts)
    if (t.error) ++errors[std::string(client::to_string(t.error->kind))];
  std::size_t failed = 0;
  for (const auto& [k, n] : errors) failed += n;
  write_json(out / "run_summary.json", {{"prompts", prompts.size()},
                                        {"ok", prompts.size() - failed},
                                        {"errors", errors},
                                        {"sent", result.sent},
                                        {"from_checkpoint", result.from_checkpoint}});
  std::cout << prompts.size() - failed << "/" << prompts.size() << " ok, " << result.sent << " sent, "
            << result.from_checkpoint << " from checkpoint\n";
  return 0;
}

// ---- eval

struct EvalArgs {
  std::string prompts, transcripts, task, model, out;
};

int cmd_eval(const EvalArgs& a, const Globals&) {
  require_file("--prompts", a.prompts);
  require_file("--transcripts", a.transcripts);
  const auto task = load_task(a.task);
  if (a.model.empty()) config_fail("--model must not be empty");
  const auto out = prepare_out(a.out);
  write_run_json(out, "eval",
                 {{"prompts", a.prompts}, {"transcripts", a.transcripts}, {"task", task.name}, {"model", a.model}},
                 {{"prompts", file_sha256(a.prompts)}, {"transcripts", file_sha256(a.transcripts)}});
  const auto run = eval::evaluate(prompt::read_prompts(a.prompts), client::read_transcripts(a.transcripts), task, a.model);
  std::vector<json> rows;
  for (const auto& r : run.rows) rows.push_back(eval::row_to_json(r));
  util::write_jsonl(out / "rows.jsonl", rows);
  write_json(out / "metrics.json", run.report.to_json());
  for (const auto& [k, v] : run.report.metrics) std::cout << k << " " << report::format_value(v) << "\n";
  std::cout << "scored " << run.report.n_scored << "/" << run.report.n_total << "\n";
  for (const auto& d : run.report.diagnostics) std::cerr << "note: " << d << "\n";
  return 0;
}

// ---- mine-pairs

struct MineArgs {
  std::string manifest, task, split, strategy = "t-aug", out;
  contrastive::TrainJob job;
};

int cmd_mine(MineArgs a, const Globals& g) {
  require_file("--manifest", a.manifest);
  if (!a.split.empty()) require_file("--split", a.split);
  const auto task = load_task(a.task);
  PairStrategy strategy;
  if (a.strategy == "aug") strategy = PairStrategy::Aug;
  else if (a.strategy == "t-aug") strategy = PairStrategy::TAug;
  else config_fail("--strategy: expected aug or t-aug, got '" + a.strategy + "'");
  const auto out = prepare_out(a.out);

  auto records = dataset::read_manifest(a.manifest, task);
  if (!a.split.empty()) {
    // positives come from training molecules only
    const auto s = dataset::SplitResult::from_json(json::parse(util::read_file(a.split)));
    const std::set<std::size_t> train(s.train.begin(), s.train.end());
    std::erase_if(records, [&](const dataset::MoleculeRecord& r) { return !train.count(r.id); });
  }
  const auto manifest = contrastive::build_pair_manifest(records, strategy, a.job.seed, g.workers);

  auto& job = a.job;
  job.dataset_manifest = a.manifest;
  job.split = a.split;
  job.pair_manifest = job.lambda > 0.0 && !manifest.entries.empty() ? (out / "pairs.jsonl").string() : "";
  job.resolve_frozen();
  try {
    job.validate();
  } catch (const contrastive::ContrastiveError& e) {
    config_fail(e.what());
  }
  json inputs{{"manifest", file_sha256(a.manifest)}};
  if (!a.split.empty()) inputs["split"] = file_sha256(a.split);
  write_run_json(out, "mine-pairs",
                 {{"task", task.name}, {"strategy", molbench::to_string(strategy)}, {"job", job.to_json()},
                  {"workers", g.workers}},
                 inputs);
  contrastive::write_pair_manifest(out / "pairs.jsonl", manifest);
  write_json(out / "train_job.json", job.to_json());
  std::cout << manifest.entries.size() << " pairs, " << manifest.skipped.size() << " anchors without a partner\n";
  return 0;
}

// ---- report

struct ReportArgs {
  std::vector<std::string> metrics;
  std::string long_csv, format = "md", out;
};

std::string safe_name(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  return s;
}

int cmd_report(const ReportArgs& a, const Globals&) {
  if (a.metrics.empty() && a.long_csv.empty()) config_fail("give --metrics files or --long-csv");
  if (a.format != "md" && a.format != "csv" && a.format != "json")
    config_fail("--format: expected md, csv or json, got '" + a.format + "'");
  json inputs = json::object();
  for (const auto& m : a.metrics) {
    require_file("--metrics", m);
    inputs[m] = file_sha256(m);
  }
  if (!a.long_csv.empty()) {
    require_file("--long-csv", a.long_csv);
    inputs[a.long_csv] = file_sha256(a.long_csv);
  }
  const auto out = prepare_out(a.out);
  write_run_json(out, "report", {{"metrics", a.metrics}, {"long_csv", a.long_csv}, {"format", a.format}}, inputs);

  report::ResultsGrid grid;
  if (!a.long_csv.empty()) grid = report::from_long_csv(util::read_file(a.long_csv));
  for (const auto& m : a.metrics) grid.add(eval::MetricReport::from_json(json::parse(util::read_file(m))));
  util::write_file(out / "results_long.csv", report::to_long_csv(grid));

  std::string md;
  json tables = json::array(), ranks = json::array();
  for (auto family : {report::Family::Classification, report::Family::Regression, report::Family::Description}) {
    for (const auto& mode : grid.modes()) {
      if (grid.datasets(family, mode).empty()) continue;
      const auto t = report::render_table(grid, family, mode);
      const std::string title = std::string(report::to_string(family)) + " (" + mode + ")";
      md += "## " + title + "\n\n" + t.markdown();
      for (const auto& w : t.warnings) md += "\n> " + w + "\n";
      tables.push_back({{"family", report::to_string(family)},
                        {"mode", mode},
                        {"header", t.header},
                        {"rows", t.rows},
                        {"warnings", t.warnings}});
      if (a.format == "csv")
        util::write_file(out / ("table_" + std::string(report::to_string(family)) + "_" + safe_name(mode) + ".csv"),
                         t.csv());
      try {
        const auto r = report::rank_models(grid, family, mode);
        ranks.push_back(r.to_json());
        md += "\nAverage rank:";
        for (const auto& [model, avg] : r.average) md += " " + model + " " + report::format_value(avg) + ";";
        md.pop_back();
        md += "\n";
      } catch (const report::ReportError& e) {
        if (e.kind() != report::ReportError::Kind::TooFewModels) throw;
      }
      md += "\n";
    }
  }
  if (a.format == "md") util::write_file(out / "report.md", md);
  if (a.format == "json") write_json(out / "report.json", {{"cells", report::to_json(grid)}, {"tables", tables}, {"ranks", ranks}});
  write_json(out / "ranks.json", ranks);
  std::cout << md;
  return 0;
}

// ---- mock-serve

struct MockArgs {
  std::string script, oracle, task, flipped_out, port_file;
  double flip_fraction = 0.0;
  std::uint64_t flip_seed = 0;
  int port = 0;
};

volatile std::sig_atomic_t g_stop = 0;
extern "C" void on_signal(int) { g_stop = 1; }

/// round(fraction * n) prompt ids, chosen by a seeded shuffle of the sorted ids.
std::set<std::string> pick_flipped(const std::vector<prompt::PromptRecord>& prompts, double fraction, std::uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto& p : prompts) ids.push_back(p.prompt_id);
  std::sort(ids.begin(), ids.end());
  util::Xoshiro256 rng(seed);
  util::shuffle(ids, rng);
  const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size())));
  return {ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n)};
}

int cmd_mock(const MockArgs& a, const Globals&) {
  client::MockScript script;
  if (!a.script.empty() == !a.oracle.empty()) config_fail("give exactly one of --script or --oracle");
  if (!a.script.empty()) {
    require_file("--script", a.script);
    script = client::MockScript::from_json(json::parse(util::read_file(a.script)));
  } else {
    require_file("--oracle", a.oracle);
    if (a.task.empty()) config_fail("--oracle needs --task");
    if (!(a.flip_fraction >= 0.0 && a.flip_fraction <= 1.0)) config_fail("--flip-fraction must lie in [0, 1]");
    const auto task = load_task(a.task);
    const auto prompts = prompt::read_prompts(a.oracle);
    const auto flipped = pick_flipped(prompts, a.flip_fraction, a.flip_seed);
    if (!flipped.empty() && task.kind != dataset::TaskKind::Classification)
      config_fail("--flip-fraction applies to classification tasks only");
    script = client::oracle_script(prompts, task, flipped);
    if (!a.flipped_out.empty()) util::write_file(a.flipped_out, json(std::vector<std::string>(flipped.begin(), flipped.end())).dump() + "\n");
  }
  if (a.port < 0 || a.port > 65535) config_fail("--port must lie in [0, 65535]");

  client::MockServer server(script);
  const int port = server.start(a.port);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (!a.port_file.empty()) util::write_file(a.port_file, std::to_string(port) + "\n");
  std::cout << server.base_url() << std::endl;
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  const auto stats = server.stats();
  server.stop();
  std::cerr << "served " << stats.requests << " requests, peak " << stats.max_in_flight << " in flight\n";
  return 0;
}

void report_error(const Globals& g, int code, const std::string& message) {
  if (g.json_errors) {
    std::cerr << json{{"error", {{"exit_code", code}, {"type", type_name(code)}, {"message", message}}}}.dump() << "\n";
  } else {
    std::cerr << "molbench: " << message << "\n";
  }
}

}  // namespace

int run(int argc, char** argv) {
  Globals g;
  CLI::App app{"Benchmark harness for vision-language models on molecular property tasks", "molbench"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(MOLBENCH_VERSION));
  app.add_flag("--json-errors", g.json_errors, "Print errors as JSON on stderr");
  app.add_option("--workers", g.workers, "Worker threads for batch work (0 = logical cores)");
  app.footer("Exit codes: 0 ok, 1 usage, 2 config, 3 runtime.");

  CurateArgs ca;
  auto* curate = app.add_subcommand("curate", "Parse, deduplicate and render a dataset");
  curate->add_option("--dataset", ca.dataset, "CSV or TSV source")->required();
  curate->add_option("--task", ca.task, "Bundled task name or task .toml")->required();
  curate->add_option("--out", ca.out, "Output directory")->required();
  curate->add_option("--sample", ca.sample, "Keep at most N source rows (0 = all)");
  curate->add_option("--image-size", ca.image_size, "PNG edge length in pixels")->capture_default_str();
  curate->add_flag("--no-images", ca.no_images, "Skip rendering");

  SplitArgs sa;
  auto* split = app.add_subcommand("split", "Seeded train/test split of a manifest");
  split->add_option("--manifest", sa.manifest, "manifest.jsonl from curate")->required();
  split->add_option("--task", sa.task, "Bundled task name or task .toml")->required();
  split->add_option("--out", sa.out, "Output directory")->required();
  split->add_option("--ratio", sa.ratio, "Training share")->capture_default_str();
  split->add_option("--seed", sa.seed, "Shuffle seed")->capture_default_str();

  PromptArgs pa;
  auto* prm = app.add_subcommand("prompt", "Build prompts for the test split");
  prm->add_option("--manifest", pa.manifest, "manifest.jsonl from curate")->required();
  prm->add_option("--split", pa.split, "split.json from split")->required();
  prm->add_option("--task", pa.task, "Bundled task name or task .toml")->required();
  prm->add_option("--out", pa.out, "Output directory")->required();
  prm->add_option("--mode", pa.mode, "zero_shot, icl or cot")->capture_default_str();
  prm->add_option("--k", pa.k, "Examples per prompt for icl and cot")->capture_default_str();
  prm->add_option("--repr", pa.repr, "smiles or selfies")->capture_default_str();
  prm->add_option("--templates", pa.templates, "Template directory (default: bundled)");

  RunArgs ra;
  auto* runc = app.add_subcommand("run", "Send prompts to a chat-completions endpoint");
  runc->add_option("--prompts", ra.prompts, "prompts.jsonl from prompt")->required();
  runc->add_option("--out", ra.out, "Output directory; holds the resumable checkpoint")->required();
  runc->add_option("--endpoint", ra.endpoint, "Endpoint .toml");
  runc->add_option("--image-root", ra.image_root, "Directory image paths resolve against (default: the prompts file's directory)");
  runc->add_flag("--retry-errors", ra.retry_errors, "Re-send prompts whose checkpointed outcome is an error");
  runc->add_option("--base-url", ra.base_url, "Overrides base_url");
  runc->add_option("--model-name", ra.model_name, "Overrides model");
  runc->add_option("--api-key-env", ra.api_key_env, "Overrides api_key_env");
  runc->add_option("--temperature", ra.temperature, "Overrides temperature");
  runc->add_option("--max-tokens", ra.max_tokens, "Overrides max_tokens");
  runc->add_option("--timeout", ra.timeout_s, "Overrides timeout_s");
  runc->add_option("--max-retries", ra.max_retries, "Overrides max_retries");
  runc->add_option("--concurrency", ra.concurrency, "Overrides concurrency_limit");
  runc->add_option("--backoff-base", ra.backoff_base_s, "Overrides backoff_base_s");
  runc->add_option("--backoff-factor", ra.backoff_factor, "Overrides backoff_factor");
  runc->add_option("--backoff-jitter", ra.backoff_jitter, "Overrides backoff_jitter");
  runc->add_option("--backoff-cap", ra.backoff_cap_s, "Overrides backoff_cap_s");

  EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "Score transcripts against gold labels");
  evalc->add_option("--prompts", ea.prompts, "prompts.jsonl")->required();
  evalc->add_option("--transcripts", ea.transcripts, "transcripts.jsonl (or a checkpoint)")->required();
  evalc->add_option("--task", ea.task, "Bundled task name or task .toml")->required();
  evalc->add_option("--model", ea.model, "Model label for the report")->required();
  evalc->add_option("--out", ea.out, "Output directory")->required();

  MineArgs ma;
  auto* mine = app.add_subcommand("mine-pairs", "Build a contrastive pair manifest and training job file");
  mine->add_option("--manifest", ma.manifest, "manifest.jsonl from curate")->required();
  mine->add_option("--task", ma.task, "Bundled task name or task .toml")->required();
  mine->add_option("--out", ma.out, "Output directory")->required();
  mine->add_option("--split", ma.split, "split.json; restricts mining to training molecules");
  mine->add_option("--strategy", ma.strategy, "aug or t-aug")->capture_default_str();
  mine->add_option("--seed", ma.job.seed, "Seed")->capture_default_str();
  mine->add_option("--lambda", ma.job.lambda, "Contrastive weight (0 disables the stage)")->capture_default_str();
  mine->add_option("--tau", ma.job.tau, "Temperature")->capture_default_str();
  mine->add_option("--epochs", ma.job.epochs, "Epochs")->capture_default_str();
  mine->add_option("--fraction", ma.job.fraction, "Share of the training split, in (0, 1]")->capture_default_str();
  mine->add_option("--base-model", ma.job.base_model, "Base model id")->capture_default_str();
  mine->add_option("--lora-rank", ma.job.lora_rank, "LoRA rank")->capture_default_str();
  mine->add_option("--lora-alpha", ma.job.lora_alpha, "LoRA alpha")->capture_default_str();
  mine->add_option("--lora-dropout", ma.job.lora_dropout, "LoRA dropout")->capture_default_str();

  ReportArgs rpa;
  auto* rep = app.add_subcommand("report", "Tables and ranks from metrics files");
  rep->add_option("--metrics", rpa.metrics, "metrics.json files from eval");
  rep->add_option("--long-csv", rpa.long_csv, "Long-format results to start from");
  rep->add_option("--format", rpa.format, "md, csv or json")->capture_default_str();
  rep->add_option("--out", rpa.out, "Output directory")->required();

  MockArgs mk;
  auto* mock = app.add_subcommand("mock-serve", "Scripted chat-completions endpoint on 127.0.0.1");
  mock->add_option("--script", mk.script, "Script JSON");
  mock->add_option("--oracle", mk.oracle, "prompts.jsonl; reply with each prompt's gold answer");
  mock->add_option("--task", mk.task, "Task of the oracle prompts");
  mock->add_option("--flip-fraction", mk.flip_fraction, "Share of oracle answers to invert")->capture_default_str();
  mock->add_option("--flip-seed", mk.flip_seed, "Seed for choosing inverted prompts")->capture_default_str();
  mock->add_option("--flipped-out", mk.flipped_out, "Write the inverted prompt ids here");
  mock->add_option("--port", mk.port, "Port (0 picks a free one)")->capture_default_str();
  mock->add_option("--port-file", mk.port_file, "Write the bound port here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error(g, kExitUsage, e.what());
    if (!g.json_errors) std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (*curate) return cmd_curate(ca, g);
    if (*split) return cmd_split(sa, g);
    if (*prm) return cmd_prompt(pa, g);
    if (*runc) return cmd_run(ra, g);
    if (*evalc) return cmd_eval(ea, g);
    if (*mine) return cmd_mine(ma, g);
    if (*rep) return cmd_report(rpa, g);
    if (*mock) return cmd_mock(mk, g);
    return kExitUsage;
  } catch (const Failure& e) {
    report_error(g, e.code, e.what());
    return e.code;
  } catch (const ConfigError& e) {
    report_error(g, kExitConfig, e.what());
    return kExitConfig;
  } catch (const dataset::DatasetError& e) {
    const bool input = e.kind() == dataset::DatasetError::Kind::MissingColumn;
    report_error(g, input ? kExitConfig : kExitRuntime, e.what());
    return input ? kExitConfig : kExitRuntime;
  } catch (const prompt::PromptError& e) {
    const bool input = e.kind() != prompt::PromptError::Kind::InsufficientExamples &&
                       e.kind() != prompt::PromptError::Kind::MissingRepresentation;
    report_error(g, input ? kExitConfig : kExitRuntime, e.what());
    return input ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    report_error(g, kExitRuntime, e.what());
    return kExitRuntime;
  }
}

}  // namespace molbench::cli
