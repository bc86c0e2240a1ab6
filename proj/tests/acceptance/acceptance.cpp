// Acceptance runner: one criterion per invocation, one PASS/FAIL/SKIP line.
// Exit 0 pass, 1 fail, 77 skip.

#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "fixtures.hpp"
#include "molbench/chem/selfies.hpp"
#include "molbench/chem/smiles.hpp"
#include "molbench/contrastive.hpp"
#include "molbench/dataset.hpp"
#include "molbench/depict.hpp"
#include "molbench/eval.hpp"
#include "molbench/fingerprint.hpp"
#include "molbench/model_client.hpp"
#include "molbench/prompt.hpp"
#include "molbench/util/hash.hpp"
#include "molbench/util/io.hpp"
#include "molbench/util/rng.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace molbench;

namespace {

const std::string kCli = MOLBENCH_CLI_PATH;

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Pass;
  std::string detail;
};

/// Collects failed checks; the first few are reported.
struct Checker {
  std::vector<std::string> failures;
  std::size_t checks = 0;

  void expect(bool ok, const std::string& what) {
    ++checks;
    if (!ok) failures.push_back(what);
  }
  Outcome outcome(const std::string& summary) const {
    if (failures.empty()) return {Status::Pass, summary + ", " + std::to_string(checks) + " checks"};
    std::string d = std::to_string(failures.size()) + "/" + std::to_string(checks) + " checks failed";
    for (std::size_t i = 0; i < std::min<std::size_t>(3, failures.size()); ++i) d += "; " + failures[i];
    return {Status::Fail, d};
  }
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(double v, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("molbench_accept_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const fs::path& log_dir, std::vector<std::string> args) {
  args.insert(args.begin(), kCli);
  return testing::run_process(args, (log_dir / "cli_stdout.txt").string(), (log_dir / "cli_stderr.txt").string());
}

std::string cli_stderr(const fs::path& log_dir) { return testing::slurp((log_dir / "cli_stderr.txt").string()); }

// ---- split arithmetic

Outcome split_arithmetic() {
  const char* src = std::getenv("MOLBENCH_SOURCE_DIR");
  if (!src || !*src)
    return {Status::Skip, "MOLBENCH_SOURCE_DIR is not set; point it at the public source CSVs to run this check"};
  const auto dir = scratch("split");
  Checker c;
  std::string summary;
  for (const char* name : {"bace", "bbbp", "clintox", "tox21", "esol", "ld50"}) {
    const auto task = dataset::TaskSpec::bundled(name);
    const fs::path file = fs::path(src) / task.source_file;
    if (!fs::exists(file)) {
      c.expect(false, std::string(name) + ": missing " + file.string());
      continue;
    }
    const auto t0 = Clock::now();
    const auto out = dir / name;
    const int rc1 = cli(dir, {"curate", "--dataset", file.string(), "--task", name, "--no-images", "--out", (out / "cur").string()});
    const int rc2 = rc1 ? rc1 : cli(dir, {"split", "--manifest", (out / "cur/manifest.jsonl").string(), "--task", name,
                                          "--ratio", "0.8", "--out", (out / "split").string()});
    const double secs = seconds_since(t0);
    if (rc1 || rc2) {
      c.expect(false, std::string(name) + ": cli failed: " + cli_stderr(dir));
      continue;
    }
    const auto s = dataset::SplitResult::from_json(json::parse(util::read_file(out / "split/split.json")));
    c.expect(s.train.size() == task.expected_train.value_or(0),
             std::string(name) + " train " + std::to_string(s.train.size()) + " vs " + std::to_string(task.expected_train.value_or(0)));
    c.expect(s.test.size() == task.expected_test.value_or(0),
             std::string(name) + " test " + std::to_string(s.test.size()) + " vs " + std::to_string(task.expected_test.value_or(0)));
    c.expect(secs < 60.0, std::string(name) + " took " + fmt(secs) + " s");
    summary += std::string(summary.empty() ? "" : ", ") + name + " " + std::to_string(s.train.size()) + "/" +
               std::to_string(s.test.size()) + " in " + fmt(secs, 1) + " s";
  }
  fs::remove_all(dir);
  return c.outcome(summary);
}

// ---- similarity oracle

Outcome similarity_oracle() {
  // 1,000 molecules: 850 generated plus 150 methyl homologs of them, so
  // the 0.85 threshold has work to do.
  auto smiles = testing::generate_molecules(850, 2024);
  std::set<std::string> seen(smiles.begin(), smiles.end());
  for (std::size_t i = 0; smiles.size() < 1000 && i < 850; ++i) {
    try {
      const auto homolog = chem::write_canonical_smiles(chem::parse_smiles("C" + smiles[i]));
      if (seen.insert(homolog).second) smiles.push_back(homolog);
    } catch (const chem::SmilesError&) {
      // prefixing overfilled a saturated first atom
    }
  }
  const auto t0 = Clock::now();
  SimilarityIndex index;
  for (std::size_t i = 0; i < smiles.size(); ++i)
    index.add(morgan_fingerprint(chem::parse_smiles(smiles[i]), 2, 2048, MoleculeId{i}));
  const auto& e = index.entries();
  std::map<std::size_t, std::vector<Neighbor>> got_top;
  for (std::size_t k : {2, 4})
    for (std::size_t q = 0; q < e.size(); ++q) {
      auto r = top_k_similar(e[q], index, k);
      got_top[k * 10000 + q] = std::move(r);
    }
  const auto mined = mine_tanimoto_positives(index, 0.85, 3);
  const double impl_secs = seconds_since(t0);

  // brute force over bit sets
  const std::size_t n = e.size();
  std::vector<std::set<std::size_t>> bits;
  for (const auto& fp : e) bits.push_back(testing::bit_set(fp));
  std::vector<double> sim(n * n, 0.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) sim[a * n + b] = sim[b * n + a] = testing::oracle_tanimoto(bits[a], bits[b]);

  Checker c;
  c.expect(n == 1000, "fixture has " + std::to_string(n) + " molecules");
  auto ranked = [&](std::size_t a, double floor) {
    std::vector<Neighbor> all;
    for (std::size_t b = 0; b < n; ++b)
      if (b != a && sim[a * n + b] > floor) all.push_back({MoleculeId{b}, sim[a * n + b]});
    std::sort(all.begin(), all.end(), [](const Neighbor& x, const Neighbor& y) {
      return x.score != y.score ? x.score > y.score : x.id < y.id;
    });
    return all;
  };
  for (std::size_t q = 0; q < n; ++q) {
    const auto all = ranked(q, -1.0);
    for (std::size_t k : {2, 4}) {
      std::vector<Neighbor> want(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(std::min(k, all.size())));
      c.expect(got_top[k * 10000 + q] == want, "top_k k=" + std::to_string(k) + " query " + std::to_string(q));
    }
  }
  std::vector<PositivePair> want_pairs;
  std::vector<MoleculeId> want_skipped;
  for (std::size_t a = 0; a < n; ++a) {
    const auto hits = ranked(a, 0.85);
    if (hits.empty()) want_skipped.push_back(MoleculeId{a});
    for (std::size_t h = 0; h < std::min<std::size_t>(3, hits.size()); ++h)
      want_pairs.push_back({MoleculeId{a}, hits[h].id, hits[h].score, PairStrategy::TAug});
  }
  c.expect(mined.pairs == want_pairs, "mined pairs differ from enumeration");
  c.expect(mined.skipped == want_skipped, "skipped anchors differ from enumeration");
  c.expect(want_pairs.size() >= 20, "only " + std::to_string(want_pairs.size()) + " pairs above 0.85");
  c.expect(impl_secs < 10.0, "index, queries and mining took " + fmt(impl_secs) + " s");
  return c.outcome("n=1000, k in {2,4}, " + std::to_string(mined.pairs.size()) + " positives, library time " +
                   fmt(impl_secs) + " s");
}

// ---- NT-Xent oracle

Outcome ntxent_oracle() {
  util::Xoshiro256 rng(20240917);
  Checker c;
  auto vec = [&](std::size_t d) {
    std::vector<double> v(d);
    for (auto& x : v) x = rng.unit() * 2.0 - 1.0;
    return v;
  };
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(8), d = 1 + rng.below(16);
    const double tau = 0.05 + rng.unit() * 1.95;
    std::vector<std::vector<double>> a, b;
    for (std::size_t i = 0; i < n; ++i) {
      a.push_back(vec(d));
      b.push_back(vec(d));
    }
    const auto batch = contrastive::EmbeddingBatch::from_pairs(a, b);
    const double got = contrastive::ntxent_loss(batch, tau);
    const double want = testing::oracle_ntxent(batch.vectors, batch.pair_of, tau);
    if (n == 1) {
      c.expect(got == 0.0, "N=1 batch " + std::to_string(t) + " gave " + fmt(got, 17));
    } else {
      worst = std::max(worst, std::fabs(got - want));
      c.expect(std::fabs(got - want) <= 1e-9, "batch " + std::to_string(t) + " off by " + fmt(std::fabs(got - want), 17));
    }
  }
  for (std::size_t d : {1, 3, 16}) {
    const auto one = contrastive::EmbeddingBatch::from_pairs({vec(d)}, {vec(d)});
    c.expect(contrastive::ntxent_loss(one) == 0.0, "N=1 at d=" + std::to_string(d));
  }
  std::ostringstream w;
  w << std::scientific << worst;
  return c.outcome("100 batches, max |diff| " + w.str());
}

// ---- metric fixtures

Outcome metric_fixtures() {
  const auto doc = json::parse(util::read_file(fs::path(MOLBENCH_TEST_DATA_DIR) / "metric_fixtures.json"));
  const double tol = doc.at("tolerance").get<double>();
  Checker c;
  auto close = [&](double got, double want) { return std::fabs(got - want) <= tol * std::max(1.0, std::fabs(want)); };
  for (const auto& f : doc.at("text")) {
    const auto metric = f.at("metric").get<std::string>();
    const auto cand = f.at("candidate").get<std::string>();
    const auto refs = f.at("references").get<std::vector<std::string>>();
    double got = 0.0;
    if (metric == "bleu") got = eval::bleu_n(cand, refs, f.at("n").get<int>());
    else if (metric == "rouge1") got = eval::rouge(cand, refs.at(0), eval::RougeVariant::One);
    else if (metric == "rouge2") got = eval::rouge(cand, refs.at(0), eval::RougeVariant::Two);
    else if (metric == "rougeL") got = eval::rouge(cand, refs.at(0), eval::RougeVariant::L);
    else if (metric == "meteor") got = eval::meteor(cand, refs.at(0));
    else c.expect(false, "unknown metric " + metric);
    c.expect(close(got, f.at("expected").get<double>()), metric + " '" + cand + "' gave " + fmt(got, 17));
  }
  for (const auto& f : doc.at("corpus_bleu")) {
    const double got = eval::corpus_bleu(f.at("candidates").get<std::vector<std::string>>(),
                                         f.at("references").get<std::vector<std::vector<std::string>>>(), f.at("n").get<int>());
    c.expect(close(got, f.at("expected").get<double>()), "corpus BLEU gave " + fmt(got, 17));
  }
  for (const auto& f : doc.at("classification")) {
    std::vector<eval::ParsedAnswer> preds;
    for (const auto& r : f.at("responses")) preds.push_back(eval::parse_binary(r.get<std::string>()));
    const auto s = eval::classification_metrics(preds, f.at("golds").get<std::vector<bool>>());
    c.expect(close(s.accuracy, f.at("accuracy").get<double>()), "accuracy: " + f.at("derivation").get<std::string>());
    c.expect(close(s.f1, f.at("f1").get<double>()), "F1: " + f.at("derivation").get<std::string>());
  }
  for (const auto& f : doc.at("regression")) {
    std::vector<eval::ParsedAnswer> preds;
    for (const auto& r : f.at("responses")) preds.push_back(eval::parse_numeric(r.get<std::string>()));
    const auto s = eval::regression_metrics(preds, f.at("golds").get<std::vector<double>>());
    c.expect(close(s.mae, f.at("mae").get<double>()), "MAE: " + f.at("derivation").get<std::string>());
    c.expect(close(s.rmse, f.at("rmse").get<double>()), "RMSE: " + f.at("derivation").get<std::string>());
    c.expect(s.n_scored == f.at("n_scored").get<std::size_t>(), "n_scored: " + f.at("derivation").get<std::string>());
  }

  // RMSE >= MAE on fuzzed pairs (power-mean inequality)
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> len(1, 50);
  std::normal_distribution<double> val(0.0, 10.0);
  std::uniform_real_distribution<double> scale(-6.0, 6.0);
  std::size_t violations = 0;
  for (int t = 0; t < 10000; ++t) {
    const int m = len(rng);
    const double s = std::pow(10.0, scale(rng));
    std::vector<double> p(m), g(m);
    for (int i = 0; i < m; ++i) {
      p[i] = val(rng) * s;
      g[i] = val(rng) * s;
    }
    const auto r = eval::regression_metrics(p, g);
    if (!(r.rmse >= r.mae * (1.0 - 1e-12))) ++violations;
  }
  c.expect(violations == 0, std::to_string(violations) + " fuzzed cases with RMSE < MAE");
  return c.outcome(std::to_string(doc.at("text").size() + doc.at("corpus_bleu").size() + doc.at("classification").size() +
                                  doc.at("regression").size()) +
                   " fixtures at tolerance 1e-12, 10000 fuzzed regression sets");
}

// ---- parser suite

// Order-free description of a graph: atom labels with degree, and bonds as
// (label, label, order) triples.
std::pair<std::multiset<std::string>, std::multiset<std::string>> graph_signature(const chem::MolecularGraph& g) {
  std::vector<int> degree(g.atom_count(), 0);
  for (const auto& b : g.bonds()) {
    ++degree[b.begin];
    ++degree[b.end];
  }
  auto label = [&](std::size_t i) {
    const auto& a = g.atom(i);
    return std::to_string(a.atomic_number) + "/" + std::to_string(a.formal_charge) + "/" + std::to_string(a.hydrogen_count()) +
           "/" + (a.aromatic ? "a" : "") + "/" + std::to_string(degree[i]);
  };
  std::multiset<std::string> atoms, bonds;
  for (std::size_t i = 0; i < g.atom_count(); ++i) atoms.insert(label(i));
  for (const auto& b : g.bonds()) {
    auto x = label(b.begin), y = label(b.end);
    if (y < x) std::swap(x, y);
    bonds.insert(x + "|" + y + "|" + std::to_string(static_cast<int>(b.order)));
  }
  return {atoms, bonds};
}

bool valence_ok(const chem::MolecularGraph& g) {
  const auto& model = chem::ValenceModel::standard();
  std::vector<int> sum(g.atom_count(), 0);
  for (const auto& b : g.bonds()) {
    sum[b.begin] += chem::bond_valence(b.order);
    sum[b.end] += chem::bond_valence(b.order);
  }
  for (std::size_t i = 0; i < g.atom_count(); ++i) {
    const auto& a = g.atom(i);
    if (sum[i] + a.hydrogen_count() > model.max_valence(a.atomic_number, a.formal_charge)) return false;
  }
  return true;
}

Outcome parser_suite() {
  Checker c;
  const auto corpus = testing::load_corpus();
  c.expect(corpus.size() >= 100, "corpus has " + std::to_string(corpus.size()) + " entries");
  std::mt19937_64 rng(50);
  std::size_t round_trips = 0;
  for (const auto& e : corpus) {
    const auto g = chem::parse_smiles(e.smiles);
    const auto canon = chem::write_canonical_smiles(g);
    const auto back = chem::parse_smiles(canon);
    const bool same = back.atom_count() == g.atom_count() && back.bond_count() == g.bond_count() &&
                      graph_signature(back) == graph_signature(g) && chem::write_canonical_smiles(back) == canon;
    c.expect(same, "round trip " + e.name);
    round_trips += same;
    std::vector<std::size_t> order(g.atom_count());
    std::iota(order.begin(), order.end(), 0);
    bool invariant = true;
    for (int t = 0; t < 50 && invariant; ++t) {
      std::shuffle(order.begin(), order.end(), rng);
      invariant = chem::write_canonical_smiles(g.permuted(order)) == canon;
    }
    c.expect(invariant, "permutation invariance " + e.name);
  }

  const std::vector<std::string> alphabet = {
      "[C]",     "[=C]",      "[#C]",       "[N]",        "[=N]",      "[#N]",      "[O]",       "[=O]",    "[F]",
      "[S]",     "[=S]",      "[P]",        "[=P]",       "[Cl]",      "[Br]",      "[I]",       "[B]",     "[NH1+1]",
      "[N+1]",   "[O-1]",     "[C-1]",      "[S+1]",      "[NH3+1]",   "[Na]",      "[Ring1]",   "[=Ring1]", "[#Ring1]",
      "[Ring2]", "[Branch1]", "[=Branch1]", "[#Branch1]", "[Branch2]", "[=Branch2]", "[#Branch2]", "[Branch3]", "[Ring3]",
      "[nop]",   "[13C]",     "[2H]",       "[H]",        "[=O+1]",    "[#N+1]",    "[Si]",      "[Se]",    "."};
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::uniform_int_distribution<int> len(1, 40);
  std::size_t violations = 0, errors = 0;
  for (int t = 0; t < 100000; ++t) {
    std::string s;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) s += alphabet[pick(rng)];
    try {
      if (!valence_ok(chem::decode_selfies(s))) ++violations;
    } catch (const std::exception&) {
      ++errors;
    }
  }
  c.expect(violations == 0, std::to_string(violations) + " decoded strings break valence");
  c.expect(errors == 0, std::to_string(errors) + " fuzzed strings failed to decode");
  return c.outcome(std::to_string(round_trips) + "/" + std::to_string(corpus.size()) +
                   " round trips, 50 relabelings each, 100000 SELFIES strings");
}

// ---- hermetic end to end

struct Mock {
  pid_t pid = -1;
  int port = 0;
};

Mock start_mock(const fs::path& dir, std::vector<std::string> args) {
  const auto port_file = dir / "port.txt";
  fs::remove(port_file);
  args.insert(args.begin(), {kCli, "mock-serve", "--port-file", port_file.string()});
  Mock m;
  m.pid = testing::spawn(args, (dir / "mock_stdout.txt").string(), (dir / "mock_stderr.txt").string());
  for (int i = 0; i < 500 && m.port == 0; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
    const auto text = testing::slurp(port_file.string());
    if (!text.empty() && text.back() == '\n') m.port = std::stoi(text);
  }
  return m;
}

void stop_mock(const Mock& m) {
  if (m.pid > 0) {
    ::kill(m.pid, SIGTERM);
    testing::wait_exit(m.pid);
  }
}

Outcome hermetic_e2e() {
  const auto t0 = Clock::now();
  const auto dir = scratch("e2e");
  const std::string toy = std::string(MOLBENCH_DATA_DIR) + "/samples/bace_toy50.csv";
  Checker c;
  auto step = [&](const std::string& what, std::vector<std::string> args) {
    const int rc = cli(dir, std::move(args));
    c.expect(rc == 0, what + " exited " + std::to_string(rc) + ": " + cli_stderr(dir));
    return rc == 0;
  };
  const auto p = [&](const std::string& rel) { return (dir / rel).string(); };

  bool ok = step("curate", {"curate", "--dataset", toy, "--task", "bace", "--image-size", "128", "--out", p("cur")}) &&
            step("split", {"split", "--manifest", p("cur/manifest.jsonl"), "--task", "bace", "--out", p("split")}) &&
            step("prompt", {"prompt", "--manifest", p("cur/manifest.jsonl"), "--split", p("split/split.json"), "--task",
                            "bace", "--mode", "icl", "--k", "2", "--out", p("prompt")});
  if (!ok) return c.outcome("");
  const auto prompts = prompt::read_prompts(p("prompt/prompts.jsonl"));
  c.expect(prompts.size() == 10, "expected 10 test prompts, got " + std::to_string(prompts.size()));
  for (const auto& pr : prompts) {
    c.expect(pr.example_ids.size() == 2, pr.prompt_id + " has " + std::to_string(pr.example_ids.size()) + " examples");
    c.expect(!pr.image_path.empty(), pr.prompt_id + " has no image");
  }

  std::map<std::string, double> accuracy;
  std::set<std::string> flipped;
  for (const auto& [label, fraction] : std::vector<std::pair<std::string, std::string>>{{"oracle", "0"}, {"flip20", "0.2"}}) {
    const auto mock = start_mock(dir, {"--oracle", p("prompt/prompts.jsonl"), "--task", "bace", "--flip-fraction", fraction,
                                       "--flip-seed", "11", "--flipped-out", p(label + "_flipped.json")});
    c.expect(mock.port > 0, label + ": mock-serve did not report a port");
    if (mock.port > 0) {
      const std::string url = "http://127.0.0.1:" + std::to_string(mock.port) + "/v1";
      step(label + " run", {"run", "--prompts", p("prompt/prompts.jsonl"), "--base-url", url, "--model-name", label,
                            "--image-root", p("cur/images"), "--out", p(label + "/run")});
    }
    stop_mock(mock);
    if (!step(label + " eval", {"eval", "--prompts", p("prompt/prompts.jsonl"), "--transcripts",
                                p(label + "/run/transcripts.jsonl"), "--task", "bace", "--model", label, "--out",
                                p(label + "/eval")}))
      continue;
    const auto summary = json::parse(util::read_file(p(label + "/run/run_summary.json")));
    c.expect(summary.at("ok") == 10, label + ": not every prompt succeeded");
    const auto metrics = json::parse(util::read_file(p(label + "/eval/metrics.json")));
    accuracy[label] = metrics.at("metrics").at("accuracy").get<double>();
    if (label == "flip20") {
      const auto ids = json::parse(util::read_file(p("flip20_flipped.json"))).get<std::vector<std::string>>();
      flipped.insert(ids.begin(), ids.end());
      // the wrong rows are exactly the flipped prompts
      for (const auto& row : util::read_jsonl(p("flip20/eval/rows.jsonl"))) {
        const bool said_yes = row.at("parsed").at("value") == "Yes";
        const bool gold_yes = row.at("gold").at("Class") == 1;
        const auto id = row.at("prompt_id").get<std::string>();
        c.expect((said_yes != gold_yes) == (flipped.count(id) > 0), "row " + id + " disagrees with the flip list");
      }
    }
  }
  c.expect(accuracy["oracle"] == 1.0, "gold echo accuracy " + fmt(accuracy["oracle"], 17));
  c.expect(flipped.size() == 2, "flip list has " + std::to_string(flipped.size()) + " ids");
  c.expect(accuracy["flip20"] == 0.8, "flipped accuracy " + fmt(accuracy["flip20"], 17));

  if (step("report", {"report", "--metrics", p("oracle/eval/metrics.json"), p("flip20/eval/metrics.json"), "--format", "md",
                      "--out", p("report")})) {
    const auto md = util::read_file(p("report/report.md"));
    c.expect(md.find("| oracle | 1.00(") != std::string::npos, "report lacks the oracle row");
    c.expect(md.find("| flip20 | 0.80(") != std::string::npos, "report lacks the flipped row");
  }
  const double secs = seconds_since(t0);
  c.expect(secs < 30.0, "pipeline took " + fmt(secs) + " s");
  fs::remove_all(dir);
  return c.outcome("accuracy " + fmt(accuracy["oracle"], 2) + " (echo) and " + fmt(accuracy["flip20"], 2) +
                   " (2 of 10 flipped) in " + fmt(secs, 2) + " s");
}

// ---- resume correctness

Outcome resume_correctness() {
  const auto dir = scratch("resume");
  const auto task = dataset::TaskSpec::bundled("esol");
  std::vector<prompt::PromptRecord> prompts;
  for (std::size_t i = 0; i < 100; ++i) {
    prompt::PromptRecord p;
    p.prompt_id = "esol:zero_shot:smiles:" + std::to_string(i);
    p.dataset = "esol";
    p.text = "Question " + std::to_string(i) + ": estimate log solubility.";
    p.target_id = i;
    p.expected_format = prompt::ExpectedFormat::for_task(task);
    p.gold = dataset::labels_to_json({{-0.25 * static_cast<double>(i)}, ""}, task);
    prompts.push_back(p);
  }
  prompt::write_prompts(dir / "prompts.jsonl", prompts);
  auto script = client::oracle_script(prompts, task);
  script.delay_ms = 10;
  client::MockServer server(script);
  const int port = server.start();
  const std::string url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
  const auto run_args = [&](const fs::path& out) {
    return std::vector<std::string>{kCli,   "run",           "--prompts", (dir / "prompts.jsonl").string(), "--base-url",
                                    url,    "--concurrency", "4",         "--out",
                                    out.string()};
  };
  auto hashes = [](const fs::path& file) {
    std::vector<std::string> h;
    for (const auto& t : client::read_transcripts(file)) h.push_back(t.prompt_id + "/" + t.content_hash());
    return h;
  };

  Checker c;
  const auto t0 = Clock::now();
  c.expect(testing::run_process(run_args(dir / "ref"), "/dev/null", "/dev/null") == 0, "uninterrupted run failed");
  const double ref_secs = seconds_since(t0);
  const auto reference = hashes(dir / "ref/transcripts.jsonl");
  c.expect(reference.size() == 100, "reference has " + std::to_string(reference.size()) + " transcripts");

  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> when(0.0, 0.8 * ref_secs);
  std::bernoulli_distribution second_kill(0.5);
  int interrupted = 0, trials_interrupted = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto out = dir / ("trial" + std::to_string(trial));
    const int kills = second_kill(rng) ? 2 : 1;
    bool landed = false;
    for (int k = 0; k < kills; ++k) {
      const pid_t pid = testing::spawn(run_args(out), "/dev/null", "/dev/null");
      std::this_thread::sleep_for(std::chrono::duration<double>(when(rng)));
      ::kill(pid, SIGKILL);
      if (testing::wait_exit(pid) == 128 + SIGKILL) {
        ++interrupted;
        landed = true;
      }
    }
    trials_interrupted += landed;
    c.expect(testing::run_process(run_args(out), "/dev/null", "/dev/null") == 0, "resume failed in trial " + std::to_string(trial));
    c.expect(hashes(out / "transcripts.jsonl") == reference, "trial " + std::to_string(trial) + " differs from the reference");
    std::set<std::string> ids;
    std::size_t lines = 0;
    for (const auto& t : client::read_transcripts(out / "checkpoint.jsonl")) {
      ids.insert(t.prompt_id);
      ++lines;
    }
    c.expect(ids.size() == 100 && lines == 100, "trial " + std::to_string(trial) + " checkpoint holds " +
                                                    std::to_string(lines) + " records for " + std::to_string(ids.size()) + " ids");
  }
  c.expect(trials_interrupted == 20, std::to_string(20 - trials_interrupted) + " trials finished before any kill");
  server.stop();
  fs::remove_all(dir);
  return c.outcome("20 trials, " + std::to_string(interrupted) + " mid-run SIGKILLs, reference run " + fmt(ref_secs, 2) + " s");
}

// ---- transform algebra

Outcome transform_algebra() {
  using depict::Transform;
  using depict::TransformKind;
  using depict::apply_transform;
  const Transform r90{TransformKind::Rotate90, 0}, r180{TransformKind::Rotate180, 0}, r270{TransformKind::Rotate270, 0};
  const Transform fh{TransformKind::FlipH, 0}, fv{TransformKind::FlipV, 0};
  const Transform post = Transform::posterize(depict::kDefaultPosterizeBits);
  auto then = [](const depict::RasterImage& img, std::initializer_list<Transform> ts) {
    auto out = img;
    for (const auto& t : ts) out = apply_transform(out, t);
    return out;
  };
  Checker c;
  const auto corpus = testing::load_corpus();
  std::size_t drawn = 0;
  for (std::size_t i = 0; i < corpus.size() && drawn < 20; i += 7, ++drawn) {
    const auto img = depict::depict(chem::parse_smiles(corpus[i].smiles));
    const auto& name = corpus[i].name;
    c.expect(img.width == img.height && img.ink_pixels() > 0, name + ": blank or non-square drawing");
    c.expect(then(img, {r180, r180}) == img, name + ": Rotate180 twice");
    c.expect(then(img, {fh, fh}) == img, name + ": FlipH twice");
    c.expect(then(img, {fv, fv}) == img, name + ": FlipV twice");
    c.expect(then(img, {r90, r90}) == apply_transform(img, r180), name + ": Rotate90 twice");
    c.expect(then(img, {r90, r270}) == img, name + ": Rotate90 then Rotate270");
    c.expect(then(img, {r270, r90}) == img, name + ": Rotate270 then Rotate90");
    c.expect(then(img, {r90, r90, r90, r90}) == img, name + ": Rotate90 four times");
    c.expect(then(img, {r90, r180}) == apply_transform(img, r270), name + ": Rotate90 then Rotate180");
    c.expect(then(img, {fh, fv}) == apply_transform(img, r180), name + ": FlipH then FlipV");
    c.expect(then(img, {fh, r90}) == then(img, {r90, fv}), name + ": FlipH then Rotate90");
    c.expect(then(img, {post, post}) == apply_transform(img, post), name + ": Posterize twice");
  }
  c.expect(drawn == 20, "drew " + std::to_string(drawn) + " molecules");
  return c.outcome(std::to_string(drawn) + " molecules, 11 identities each");
}

const std::map<std::string, std::function<Outcome()>>& criteria() {
  static const std::map<std::string, std::function<Outcome()>> table = {
      {"split_arithmetic", split_arithmetic},   {"similarity_oracle", similarity_oracle},
      {"ntxent_oracle", ntxent_oracle},         {"metric_fixtures", metric_fixtures},
      {"parser_suite", parser_suite},           {"hermetic_e2e", hermetic_e2e},
      {"resume_correctness", resume_correctness}, {"transform_algebra", transform_algebra}};
  return table;
}

int report(const std::string& name, const Outcome& o, double secs) {
  const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Fail ? "FAIL" : "SKIP";
  std::cout << tag << " " << name << ": " << o.detail << " [" << fmt(secs, 2) << " s]" << std::endl;
  return o.status == Status::Pass ? 0 : o.status == Status::Fail ? 1 : 77;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> names;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) names.push_back(argv[++i]);
    else if (a == "--all") for (const auto& [n, f] : criteria()) names.push_back(n);
    else {
      std::cerr << "usage: acceptance --criterion NAME | --all\n";
      return 2;
    }
  }
  if (names.empty()) {
    std::cerr << "usage: acceptance --criterion NAME | --all\n";
    return 2;
  }
  bool failed = false, skipped = false;
  for (const auto& n : names) {
    const auto it = criteria().find(n);
    if (it == criteria().end()) {
      std::cerr << "unknown criterion " << n << "\n";
      return 2;
    }
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const int rc = report(n, o, seconds_since(t0));
    failed |= rc == 1;
    skipped |= rc == 77;
  }
  const int worst = failed ? 1 : (skipped && names.size() == 1) ? 77 : 0;
  return worst;
}
