#include "molbench/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>

namespace molbench::eval {

namespace {

using nlohmann::json;
using prompt::ExpectedFormat;

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// Offset just past the last "<word>" + optional blanks + ':' in text, if any.
std::optional<std::size_t> after_last_marker(std::string_view text, std::string_view word) {
  const std::string low = ascii_lower(text);
  std::optional<std::size_t> best;
  std::size_t pos = 0;
  while ((pos = low.find(word, pos)) != std::string::npos) {
    std::size_t j = pos + word.size();
    while (j < low.size() && (low[j] == ' ' || low[j] == '\t')) ++j;
    if (j < low.size() && low[j] == ':') best = j + 1;
    pos += word.size();
  }
  return best;
}

bool is_letter(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool glued(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '^'; }

constexpr std::string_view kUnicodeMinus = "\xE2\x88\x92";

// Tries to read a literal starting at i; returns its end offset.
std::optional<std::size_t> read_literal(std::string_view t, std::size_t i, std::string& out) {
  if (i > 0 && glued(t[i - 1])) return std::nullopt;
  std::size_t j = i;
  out.clear();
  if (t[j] == '+' || t[j] == '-') {
    if (t[j] == '-') out += '-';
    ++j;
  } else if (t.substr(j, kUnicodeMinus.size()) == kUnicodeMinus) {
    out += '-';
    j += kUnicodeMinus.size();
  }
  std::size_t digits = 0;
  while (j < t.size() && is_digit(t[j])) {
    out += t[j++];
    ++digits;
  }
  if (j < t.size() && t[j] == '.') {
    std::size_t k = j + 1;
    std::string frac;
    while (k < t.size() && is_digit(t[k])) frac += t[k++];
    if (digits > 0 || !frac.empty()) {
      out += '.';
      out += frac;
      digits += frac.size();
      j = k;
    }
  }
  if (digits == 0) return std::nullopt;
  if (j < t.size() && (t[j] == 'e' || t[j] == 'E')) {
    std::size_t k = j + 1;
    std::string exp = "e";
    if (k < t.size() && (t[k] == '+' || t[k] == '-')) exp += t[k++];
    std::size_t exp_digits = 0;
    while (k < t.size() && is_digit(t[k])) {
      exp += t[k++];
      ++exp_digits;
    }
    if (exp_digits > 0) {
      out += exp;
      j = k;
    }
  }
  return j;
}

std::optional<bool> first_decision(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_letter(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_letter(text[j])) ++j;
    const std::string word = ascii_lower(text.substr(i, j - i));
    if (word == "yes" || word == "true") return true;
    if (word == "no" || word == "false") return false;
    i = j;
  }
  return std::nullopt;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

// Byte length of a Unicode whitespace sequence at i, or 0.
std::size_t unicode_space(std::string_view t, std::size_t i) {
  const auto c = static_cast<unsigned char>(t[i]);
  if (c == ' ' || (c >= 0x09 && c <= 0x0D)) return 1;
  auto at = [&](std::size_t k) { return i + k < t.size() ? static_cast<unsigned char>(t[i + k]) : 0u; };
  if (c == 0xC2 && (at(1) == 0x85 || at(1) == 0xA0)) return 2;
  if (c == 0xE1 && at(1) == 0x9A && at(2) == 0x80) return 3;  // U+1680
  if (c == 0xE2 && at(1) == 0x80) {
    const auto d = at(2);
    if ((d >= 0x80 && d <= 0x8A) || d == 0xA8 || d == 0xA9 || d == 0xAF) return 3;  // U+2000..200A, 2028, 2029, 202F
  }
  if (c == 0xE2 && at(1) == 0x81 && at(2) == 0x9F) return 3;  // U+205F
  if (c == 0xE3 && at(1) == 0x80 && at(2) == 0x80) return 3;  // U+3000
  return 0;
}

using Ngrams = std::map<std::vector<std::string>, std::size_t>;

Ngrams ngrams(const std::vector<std::string>& toks, std::size_t n) {
  Ngrams out;
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++out[{toks.begin() + i, toks.begin() + i + n}];
  return out;
}

std::size_t total(const Ngrams& g) {
  std::size_t s = 0;
  for (const auto& [k, v] : g) s += v;
  return s;
}

struct BleuCounts {
  std::vector<std::size_t> clipped, totals;
  std::size_t cand_len = 0, ref_len = 0;
};

void accumulate_bleu(const std::vector<std::string>& cand, const std::vector<std::vector<std::string>>& refs, int n,
                     BleuCounts& acc) {
  for (int k = 1; k <= n; ++k) {
    const auto c = ngrams(cand, static_cast<std::size_t>(k));
    std::map<std::vector<std::string>, std::size_t> max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, cnt] : ngrams(r, static_cast<std::size_t>(k))) max_ref[g] = std::max(max_ref[g], cnt);
    }
    std::size_t clipped = 0;
    for (const auto& [g, cnt] : c) {
      auto it = max_ref.find(g);
      if (it != max_ref.end()) clipped += std::min(cnt, it->second);
    }
    acc.clipped[static_cast<std::size_t>(k - 1)] += clipped;
    acc.totals[static_cast<std::size_t>(k - 1)] += total(c);
  }
  acc.cand_len += cand.size();
  // closest reference length, ties to the shorter one
  std::size_t best = 0;
  bool have = false;
  for (const auto& r : refs) {
    const auto d = [&](std::size_t len) { return len > cand.size() ? len - cand.size() : cand.size() - len; };
    if (!have || d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) {
      best = r.size();
      have = true;
    }
  }
  acc.ref_len += best;
}

double bleu_from(const BleuCounts& acc) {
  if (acc.cand_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t k = 0; k < acc.clipped.size(); ++k) {
    if (acc.totals[k] == 0 || acc.clipped[k] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(acc.clipped[k]) / static_cast<double>(acc.totals[k]));
  }
  const double c = static_cast<double>(acc.cand_len);
  const double r = static_cast<double>(acc.ref_len);
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum / static_cast<double>(acc.clipped.size()));
}

void check_n(int n) {
  if (n < 1) throw std::invalid_argument("bleu: n must be >= 1");
}

double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

bool gold_yes(const json& gold, const dataset::TaskSpec& task) {
  return dataset::labels_from_json(gold, task).values.at(0) >= 0.5;
}

}  // namespace

ParsedAnswer parse_binary(std::string_view text) {
  ParsedAnswer a = ParsedAnswer::unparsed({ExpectedFormat::Kind::YesNo, 0});
  std::optional<bool> d;
  if (auto at = after_last_marker(text, "answer")) d = first_decision(text.substr(*at));
  if (!d) d = first_decision(text);
  if (d) {
    a.status = ParsedAnswer::Status::Ok;
    a.yes = *d;
  }
  return a;
}

std::vector<double> extract_numbers(std::string_view text) {
  std::vector<double> out;
  std::string lit;
  std::size_t i = 0;
  while (i < text.size()) {
    if (auto end = read_literal(text, i, lit)) {
      out.push_back(std::strtod(lit.c_str(), nullptr));
      i = *end;
    } else {
      ++i;
    }
  }
  return out;
}

ParsedAnswer parse_numeric(std::string_view text) {
  ParsedAnswer a = ParsedAnswer::unparsed({ExpectedFormat::Kind::Number, 0});
  std::vector<double> nums;
  if (auto at = after_last_marker(text, "answer")) nums = extract_numbers(text.substr(*at));
  if (nums.empty()) nums = extract_numbers(text);
  if (!nums.empty() && std::isfinite(nums.front())) {
    a.status = ParsedAnswer::Status::Ok;
    a.number = nums.front();
  }
  return a;
}

ParsedAnswer parse_vector(std::string_view text, std::size_t n) {
  ParsedAnswer a = ParsedAnswer::unparsed({ExpectedFormat::Kind::NumberVector, n});
  std::vector<double> nums;
  if (auto at = after_last_marker(text, "answer")) nums = extract_numbers(text.substr(*at));
  if (nums.size() < n) nums = extract_numbers(text);
  if (n > 0 && nums.size() >= n) {
    nums.resize(n);
    if (std::all_of(nums.begin(), nums.end(), [](double v) { return std::isfinite(v); })) {
      a.status = ParsedAnswer::Status::Ok;
      a.vector = std::move(nums);
    }
  }
  return a;
}

ParsedAnswer parse_text(std::string_view text) {
  ParsedAnswer a = ParsedAnswer::unparsed({ExpectedFormat::Kind::FreeText, 0});
  std::string_view body = text;
  if (auto at = after_last_marker(text, "description")) body = text.substr(*at);
  a.text = trim(body);
  if (!a.text.empty()) a.status = ParsedAnswer::Status::Ok;
  return a;
}

ParsedAnswer parse_answer(std::string_view text, const ExpectedFormat& format) {
  switch (format.kind) {
    case ExpectedFormat::Kind::YesNo: return parse_binary(text);
    case ExpectedFormat::Kind::Number: return parse_numeric(text);
    case ExpectedFormat::Kind::NumberVector: return parse_vector(text, format.length);
    case ExpectedFormat::Kind::FreeText: return parse_text(text);
  }
  return ParsedAnswer::unparsed(format);
}

ClassificationScores classification_metrics(const std::vector<ParsedAnswer>& preds, const std::vector<bool>& golds) {
  if (preds.size() != golds.size()) throw EvalError(EvalError::Kind::LengthMismatch, "classification: length mismatch");
  if (preds.empty()) throw EvalError(EvalError::Kind::EmptyScoredSet, "classification: nothing to score");
  ClassificationScores s;
  s.n_total = preds.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool parsed = preds[i].ok();
    if (!parsed) ++s.n_unparsed;
    const bool yes = parsed && preds[i].yes;
    if (parsed && yes == golds[i]) ++correct;
    if (yes && golds[i]) ++s.tp;
    if (yes && !golds[i]) ++s.fp;
    if (!yes && golds[i]) ++s.fn;
    if (!yes && !golds[i]) ++s.tn;
  }
  s.accuracy = static_cast<double>(correct) / static_cast<double>(s.n_total);
  if (s.tp + s.fp == 0) s.diagnostics.push_back("precision undefined: no positive predictions; F1 set to 0");
  if (s.tp + s.fn == 0) s.diagnostics.push_back("recall undefined: no positive gold labels; F1 set to 0");
  if (s.tp + s.fp > 0 && s.tp + s.fn > 0) {
    const double p = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp);
    const double r = static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn);
    s.f1 = f1_of(p, r);
  }
  return s;
}

RegressionScores regression_metrics(const std::vector<ParsedAnswer>& preds, const std::vector<double>& golds) {
  if (preds.size() != golds.size()) throw EvalError(EvalError::Kind::LengthMismatch, "regression: length mismatch");
  RegressionScores s;
  s.n_total = preds.size();
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!preds[i].ok()) {
      ++s.n_unparsed;
      continue;
    }
    const double e = preds[i].number - golds[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    ++s.n_scored;
  }
  if (s.n_scored == 0) throw EvalError(EvalError::Kind::EmptyScoredSet, "regression: no parsed predictions");
  s.mae = abs_sum / static_cast<double>(s.n_scored);
  s.rmse = std::sqrt(sq_sum / static_cast<double>(s.n_scored));
  return s;
}

RegressionScores regression_metrics(const std::vector<double>& preds, const std::vector<double>& golds) {
  std::vector<ParsedAnswer> parsed;
  parsed.reserve(preds.size());
  for (double v : preds) {
    ParsedAnswer a = ParsedAnswer::unparsed({ExpectedFormat::Kind::Number, 0});
    a.status = ParsedAnswer::Status::Ok;
    a.number = v;
    parsed.push_back(a);
  }
  return regression_metrics(parsed, golds);
}

VectorRegressionScores vector_regression_metrics(const std::vector<ParsedAnswer>& preds,
                                                 const std::vector<std::vector<double>>& golds) {
  if (preds.size() != golds.size()) throw EvalError(EvalError::Kind::LengthMismatch, "regression: length mismatch");
  VectorRegressionScores s;
  s.n_total = preds.size();
  const std::size_t width = golds.empty() ? 0 : golds.front().size();
  std::vector<std::vector<ParsedAnswer>> cols(width);
  std::vector<std::vector<double>> gcols(width);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (golds[i].size() != width) throw EvalError(EvalError::Kind::LengthMismatch, "regression: ragged gold vectors");
    const bool ok = preds[i].ok() && preds[i].vector.size() == width;
    if (ok) {
      ++s.n_scored;
    } else {
      ++s.n_unparsed;
    }
    for (std::size_t k = 0; k < width; ++k) {
      ParsedAnswer a = ParsedAnswer::unparsed({ExpectedFormat::Kind::Number, 0});
      if (ok) {
        a.status = ParsedAnswer::Status::Ok;
        a.number = preds[i].vector[k];
      }
      cols[k].push_back(a);
      gcols[k].push_back(golds[i][k]);
    }
  }
  if (s.n_scored == 0 || width == 0) throw EvalError(EvalError::Kind::EmptyScoredSet, "regression: no parsed vectors");
  for (std::size_t k = 0; k < width; ++k) {
    s.per_target.push_back(regression_metrics(cols[k], gcols[k]));
    s.mae += s.per_target.back().mae;
    s.rmse += s.per_target.back().rmse;
  }
  s.mae /= static_cast<double>(width);
  s.rmse /= static_cast<double>(width);
  return s;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && std::ispunct(static_cast<unsigned char>(cur.back()))) cur.pop_back();
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  std::size_t i = 0;
  while (i < text.size()) {
    if (const auto n = unicode_space(text, i)) {
      flush();
      i += n;
      continue;
    }
    cur += static_cast<char>(std::tolower(static_cast<unsigned char>(text[i])));
    ++i;
  }
  flush();
  return out;
}

double bleu_n(std::string_view candidate, const std::vector<std::string>& references, int n) {
  check_n(n);
  BleuCounts acc;
  acc.clipped.assign(static_cast<std::size_t>(n), 0);
  acc.totals.assign(static_cast<std::size_t>(n), 0);
  std::vector<std::vector<std::string>> refs;
  for (const auto& r : references) refs.push_back(tokenize(r));
  if (refs.empty()) return 0.0;
  accumulate_bleu(tokenize(candidate), refs, n, acc);
  return bleu_from(acc);
}

double corpus_bleu(const std::vector<std::string>& candidates, const std::vector<std::vector<std::string>>& references,
                   int n) {
  check_n(n);
  if (candidates.size() != references.size()) {
    throw EvalError(EvalError::Kind::LengthMismatch, "corpus_bleu: length mismatch");
  }
  BleuCounts acc;
  acc.clipped.assign(static_cast<std::size_t>(n), 0);
  acc.totals.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references[i]) refs.push_back(tokenize(r));
    if (refs.empty()) refs.emplace_back();
    accumulate_bleu(tokenize(candidates[i]), refs, n, acc);
  }
  return bleu_from(acc);
}

double rouge(std::string_view candidate, std::string_view reference, RougeVariant variant) {
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  if (variant == RougeVariant::L) {
    if (c.empty() || r.empty()) return 0.0;
    const double lcs = static_cast<double>(lcs_length(c, r));
    return f1_of(lcs / static_cast<double>(c.size()), lcs / static_cast<double>(r.size()));
  }
  const std::size_t n = variant == RougeVariant::One ? 1 : 2;
  const auto cg = ngrams(c, n);
  const auto rg = ngrams(r, n);
  const auto ct = total(cg), rt = total(rg);
  if (ct == 0 || rt == 0) return 0.0;
  std::size_t overlap = 0;
  for (const auto& [g, cnt] : cg) {
    auto it = rg.find(g);
    if (it != rg.end()) overlap += std::min(cnt, it->second);
  }
  return f1_of(static_cast<double>(overlap) / static_cast<double>(ct), static_cast<double>(overlap) / static_cast<double>(rt));
}

MeteorDetail meteor_detail(std::string_view candidate, std::string_view reference) {
  const auto c = tokenize(candidate);
  const auto r = tokenize(reference);
  MeteorDetail d;
  std::vector<bool> used(r.size(), false);
  std::vector<long> align(c.size(), -1);
  for (std::size_t i = 0; i < c.size(); ++i) {
    long pick = -1;
    if (i > 0 && align[i - 1] >= 0) {
      const auto next = static_cast<std::size_t>(align[i - 1] + 1);
      if (next < r.size() && !used[next] && r[next] == c[i]) pick = static_cast<long>(next);
    }
    if (pick < 0) {
      for (std::size_t j = 0; j < r.size(); ++j) {
        if (!used[j] && r[j] == c[i]) {
          pick = static_cast<long>(j);
          break;
        }
      }
    }
    if (pick >= 0) {
      used[static_cast<std::size_t>(pick)] = true;
      align[i] = pick;
      ++d.matches;
    }
  }
  if (d.matches == 0) return d;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (align[i] < 0) continue;
    const bool continues = i > 0 && align[i - 1] >= 0 && align[i] == align[i - 1] + 1;
    if (!continues) ++d.chunks;
  }
  const double m = static_cast<double>(d.matches);
  d.precision = m / static_cast<double>(c.size());
  d.recall = m / static_cast<double>(r.size());
  d.fmean = 10.0 * d.precision * d.recall / (d.recall + 9.0 * d.precision);
  const double frag = static_cast<double>(d.chunks) / m;
  d.penalty = 0.5 * frag * frag * frag;
  d.score = d.fmean * (1.0 - d.penalty);
  return d;
}

double meteor(std::string_view candidate, std::string_view reference) { return meteor_detail(candidate, reference).score; }

json MetricReport::to_json() const {
  json j{{"dataset", dataset},
         {"model", model},
         {"mode", mode},
         {"kind", std::string(dataset::to_string(kind))},
         {"n_total", n_total},
         {"n_scored", n_scored},
         {"n_unparsed", n_unparsed},
         {"parse_failure_rate", parse_failure_rate},
         {"metrics", metrics},
         {"diagnostics", diagnostics}};
  if (!per_target.empty()) j["per_target"] = per_target;
  if (kind == dataset::TaskKind::Description) {
    json scaled = json::object();
    for (const auto& [k, v] : metrics) scaled[k] = v * 100.0;
    j["metrics_x100"] = scaled;
  }
  return j;
}

MetricReport MetricReport::from_json(const json& j) {
  MetricReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.model = j.value("model", std::string());
  r.mode = j.value("mode", std::string());
  const auto kind = dataset::parse_task_kind(j.at("kind").get<std::string>());
  if (!kind) throw std::invalid_argument("metric report: unknown kind");
  r.kind = *kind;
  r.n_total = j.value("n_total", std::size_t{0});
  r.n_scored = j.value("n_scored", std::size_t{0});
  r.n_unparsed = j.value("n_unparsed", std::size_t{0});
  r.parse_failure_rate = j.value("parse_failure_rate", 0.0);
  r.metrics = j.value("metrics", std::map<std::string, double>{});
  if (j.contains("per_target")) r.per_target = j["per_target"].get<std::map<std::string, std::map<std::string, double>>>();
  r.diagnostics = j.value("diagnostics", std::vector<std::string>{});
  return r;
}

json row_to_json(const EvalRow& row) {
  json parsed{{"status", row.parsed.ok() ? "ok" : "unparsed"}};
  if (row.parsed.ok()) {
    switch (row.parsed.format.kind) {
      case ExpectedFormat::Kind::YesNo: parsed["value"] = row.parsed.yes ? "Yes" : "No"; break;
      case ExpectedFormat::Kind::Number: parsed["value"] = row.parsed.number; break;
      case ExpectedFormat::Kind::NumberVector: parsed["value"] = row.parsed.vector; break;
      case ExpectedFormat::Kind::FreeText: parsed["value"] = row.parsed.text; break;
    }
  }
  return {{"prompt_id", row.prompt_id},
          {"target_id", row.target_id},
          {"response", row.response ? json(*row.response) : json(nullptr)},
          {"parsed", parsed},
          {"gold", row.gold}};
}

EvalRun evaluate(const std::vector<prompt::PromptRecord>& prompts, const std::vector<client::Transcript>& transcripts,
                 const dataset::TaskSpec& task, const std::string& model) {
  std::map<std::string, const client::Transcript*> by_id;
  std::set<std::string> prompt_ids;
  for (const auto& p : prompts) prompt_ids.insert(p.prompt_id);
  for (const auto& t : transcripts) {
    if (!prompt_ids.count(t.prompt_id)) {
      throw EvalError(EvalError::Kind::UnknownPrompt, "transcript for unknown prompt " + t.prompt_id);
    }
    by_id[t.prompt_id] = &t;
  }

  EvalRun run;
  auto& rep = run.report;
  rep.dataset = task.name;
  rep.model = model;
  rep.mode = prompts.empty() ? "" : prompt::to_string(prompts.front().mode);
  rep.kind = task.kind;
  const auto format = prompt::ExpectedFormat::for_task(task);
  for (const auto& p : prompts) {
    EvalRow row;
    row.prompt_id = p.prompt_id;
    row.target_id = p.target_id;
    row.gold = p.gold;
    if (auto it = by_id.find(p.prompt_id); it != by_id.end() && it->second->ok()) row.response = it->second->response;
    row.parsed = row.response ? parse_answer(*row.response, format) : ParsedAnswer::unparsed(format);
    run.rows.push_back(std::move(row));
  }

  rep.n_total = run.rows.size();
  for (const auto& r : run.rows) {
    if (r.parsed.ok()) {
      ++rep.n_scored;
    } else {
      ++rep.n_unparsed;
    }
  }
  rep.parse_failure_rate = rep.n_total ? static_cast<double>(rep.n_unparsed) / static_cast<double>(rep.n_total) : 0.0;

  std::vector<ParsedAnswer> preds;
  for (const auto& r : run.rows) preds.push_back(r.parsed);
  try {
    switch (task.kind) {
      case dataset::TaskKind::Classification: {
        std::vector<bool> golds;
        for (const auto& r : run.rows) golds.push_back(gold_yes(r.gold, task));
        const auto s = classification_metrics(preds, golds);
        rep.metrics = {{"accuracy", s.accuracy}, {"f1", s.f1}};
        rep.diagnostics = s.diagnostics;
        break;
      }
      case dataset::TaskKind::Regression: {
        std::vector<double> golds;
        for (const auto& r : run.rows) golds.push_back(dataset::labels_from_json(r.gold, task).values.at(0));
        const auto s = regression_metrics(preds, golds);
        rep.metrics = {{"mae", s.mae}, {"rmse", s.rmse}};
        break;
      }
      case dataset::TaskKind::MultiRegression: {
        std::vector<std::vector<double>> golds;
        for (const auto& r : run.rows) golds.push_back(dataset::labels_from_json(r.gold, task).values);
        const auto s = vector_regression_metrics(preds, golds);
        rep.metrics = {{"mae", s.mae}, {"rmse", s.rmse}};
        for (std::size_t k = 0; k < s.per_target.size(); ++k) {
          rep.per_target[task.label_columns.at(k)] = {{"mae", s.per_target[k].mae}, {"rmse", s.per_target[k].rmse}};
        }
        break;
      }
      case dataset::TaskKind::Description: {
        if (run.rows.empty()) throw EvalError(EvalError::Kind::EmptyScoredSet, "description: nothing to score");
        std::vector<std::string> cands;
        std::vector<std::vector<std::string>> refs;
        double r1 = 0, r2 = 0, rl = 0, met = 0;
        for (const auto& r : run.rows) {
          const std::string cand = r.parsed.ok() ? r.parsed.text : std::string();
          const std::string ref = dataset::labels_from_json(r.gold, task).text;
          cands.push_back(cand);
          refs.push_back({ref});
          r1 += rouge(cand, ref, RougeVariant::One);
          r2 += rouge(cand, ref, RougeVariant::Two);
          rl += rouge(cand, ref, RougeVariant::L);
          met += meteor(cand, ref);
        }
        const double n = static_cast<double>(run.rows.size());
        rep.metrics = {{"bleu2", corpus_bleu(cands, refs, 2)},
                       {"bleu4", corpus_bleu(cands, refs, 4)},
                       {"rouge1", r1 / n},
                       {"rouge2", r2 / n},
                       {"rougeL", rl / n},
                       {"meteor", met / n}};
        break;
      }
    }
  } catch (const EvalError& e) {
    if (e.kind() != EvalError::Kind::EmptyScoredSet) throw;
    rep.diagnostics.push_back(e.what());
  }
  return run;
}

}  // namespace molbench::eval
