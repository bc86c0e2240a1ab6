#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "molbench/dataset.hpp"
#include "molbench/model_client.hpp"
#include "molbench/prompt.hpp"

namespace molbench::eval {

class EvalError : public std::runtime_error {
 public:
  enum class Kind { EmptyScoredSet, LengthMismatch, UnknownPrompt };
  EvalError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct ParsedAnswer {
  enum class Status { Ok, Unparsed };
  Status status = Status::Unparsed;
  prompt::ExpectedFormat format;
  bool yes = false;
  double number = 0.0;
  std::vector<double> vector;
  std::string text;

  bool ok() const { return status == Status::Ok; }
  static ParsedAnswer unparsed(prompt::ExpectedFormat format) { return {Status::Unparsed, format, false, 0.0, {}, {}}; }
};

/// Answers after the last "answer:" marker take precedence; otherwise the
/// whole reply is scanned. Yes/true and no/false are the decisive words and
/// the first one found wins.
ParsedAnswer parse_binary(std::string_view text);
/// First decimal or scientific literal. Digits glued to letters, '.', '_'
/// or '^' (as in "u0", "a0^3") are not literals.
ParsedAnswer parse_numeric(std::string_view text);
/// The first n literals, in order; unparsed when fewer than n.
ParsedAnswer parse_vector(std::string_view text, std::size_t n);
/// Text after the last "description:" marker, or the whole reply; trimmed.
ParsedAnswer parse_text(std::string_view text);
ParsedAnswer parse_answer(std::string_view text, const prompt::ExpectedFormat& format);

/// Literals in reading order, as parse_numeric finds them.
std::vector<double> extract_numbers(std::string_view text);

struct ClassificationScores {
  double accuracy = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t n_total = 0;
  std::size_t n_unparsed = 0;
  std::vector<std::string> diagnostics;
};

/// Unparsed predictions count as wrong for accuracy and as "No" for F1.
ClassificationScores classification_metrics(const std::vector<ParsedAnswer>& preds, const std::vector<bool>& golds);

struct RegressionScores {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t n_total = 0;
  std::size_t n_scored = 0;
  std::size_t n_unparsed = 0;
};

/// Unparsed predictions are left out. Throws EmptyScoredSet when none remain.
RegressionScores regression_metrics(const std::vector<ParsedAnswer>& preds, const std::vector<double>& golds);
RegressionScores regression_metrics(const std::vector<double>& preds, const std::vector<double>& golds);

struct VectorRegressionScores {
  std::vector<RegressionScores> per_target;
  double mae = 0.0;   // mean of per-target MAE
  double rmse = 0.0;  // mean of per-target RMSE
  std::size_t n_total = 0;
  std::size_t n_scored = 0;
  std::size_t n_unparsed = 0;
};

VectorRegressionScores vector_regression_metrics(const std::vector<ParsedAnswer>& preds,
                                                 const std::vector<std::vector<double>>& golds);

/// Lowercased (ASCII), split on Unicode whitespace, trailing ASCII
/// punctuation stripped, empty tokens dropped.
std::vector<std::string> tokenize(std::string_view text);

/// Sentence BLEU: geometric mean of clipped 1..n-gram precisions times the
/// brevity penalty against the closest reference length. No smoothing.
double bleu_n(std::string_view candidate, const std::vector<std::string>& references, int n);
/// Corpus BLEU: clipped counts and lengths summed over all pairs first.
double corpus_bleu(const std::vector<std::string>& candidates, const std::vector<std::vector<std::string>>& references,
                   int n);

enum class RougeVariant { One, Two, L };
/// F1 of n-gram overlap (One, Two) or of the longest common subsequence (L).
double rouge(std::string_view candidate, std::string_view reference, RougeVariant variant);

struct MeteorDetail {
  std::size_t matches = 0;
  std::size_t chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

/// Exact unigram matching only. Each candidate token takes the reference
/// position right after its predecessor's match when that fits, otherwise
/// the earliest unused equal token.
MeteorDetail meteor_detail(std::string_view candidate, std::string_view reference);
double meteor(std::string_view candidate, std::string_view reference);

struct MetricReport {
  std::string dataset;
  std::string model;
  std::string mode;
  dataset::TaskKind kind = dataset::TaskKind::Classification;
  std::size_t n_total = 0;
  std::size_t n_scored = 0;
  std::size_t n_unparsed = 0;
  double parse_failure_rate = 0.0;
  /// Only the block for `kind` is filled.
  std::map<std::string, double> metrics;
  std::map<std::string, std::map<std::string, double>> per_target;
  std::vector<std::string> diagnostics;

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
};

struct EvalRow {
  std::string prompt_id;
  std::size_t target_id = 0;
  std::optional<std::string> response;
  ParsedAnswer parsed;
  nlohmann::json gold;
};

struct EvalRun {
  std::vector<EvalRow> rows;
  MetricReport report;
};

/// Joins prompts and transcripts on prompt_id. A prompt without a successful
/// transcript is scored as unparsed; a transcript for an unknown prompt is
/// an error.
EvalRun evaluate(const std::vector<prompt::PromptRecord>& prompts, const std::vector<client::Transcript>& transcripts,
                 const dataset::TaskSpec& task, const std::string& model);

nlohmann::json row_to_json(const EvalRow& row);

}  // namespace molbench::eval
