#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "molbench/dataset.hpp"
#include "molbench/fingerprint.hpp"

namespace molbench::prompt {

class PromptError : public std::runtime_error {
 public:
  enum class Kind { UnknownPlaceholder, MissingTemplate, MalformedTemplate, InsufficientExamples, MissingRepresentation };
  PromptError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct PromptMode {
  enum class Kind { ZeroShot, ICL, CoT };
  Kind kind = Kind::ZeroShot;
  std::size_t k = 0;

  static PromptMode zero_shot() { return {Kind::ZeroShot, 0}; }
  static PromptMode icl(std::size_t k) { return {Kind::ICL, k}; }
  static PromptMode cot(std::size_t k) { return {Kind::CoT, k}; }

  bool operator==(const PromptMode&) const = default;
};

/// "zero_shot", "icl_k2", "cot_k2".
std::string to_string(const PromptMode& mode);
std::optional<PromptMode> parse_mode(std::string_view text);
/// Template file stem for a mode: "zero_shot", "icl" or "cot".
std::string_view template_stem(PromptMode::Kind kind);

enum class Representation { SMILES, SELFIES };
std::string_view to_string(Representation repr);
std::optional<Representation> parse_representation(std::string_view text);

/// Answer format the question asks for; number_vector carries its length.
struct ExpectedFormat {
  enum class Kind { YesNo, Number, NumberVector, FreeText };
  Kind kind = Kind::YesNo;
  std::size_t length = 0;

  static ExpectedFormat for_task(const dataset::TaskSpec& task);
  bool operator==(const ExpectedFormat&) const = default;
};

/// "yes_no", "number", "number_vector(12)", "free_text".
std::string to_string(const ExpectedFormat& format);
std::optional<ExpectedFormat> parse_expected_format(std::string_view text);

/// Decimal string with three significant digits: 0.770, -3.21, 1230.
std::string format_sig3(double value);
/// Gold answer as an example line shows it ("Yes"/"No", sig3 numbers joined
/// by ", ", or the description text).
std::string format_answer(const dataset::Labels& labels, const dataset::TaskSpec& task);

/// Section bodies of one template after task-level interpolation. The
/// example and question sections keep {molecule} (and the example {answer})
/// for per-record filling.
struct TemplateSections {
  std::string outline;
  std::string instruction;  // empty for zero-shot
  std::string example;
  std::string question;
  std::string cot;
};

std::filesystem::path default_template_dir();

/// Loads <dir>/<task.name>/<stem>.txt. Placeholders: {title} {representation}
/// {property} {units} {targets} {k} {molecule}, {smiles} or {selfies} matching
/// repr, and {answer} inside [example]. Anything else is UnknownPlaceholder.
TemplateSections render_template(const dataset::TaskSpec& task, const PromptMode& mode, Representation repr,
                                 const std::filesystem::path& dir = default_template_dir());

struct ManifestEntry {
  std::string path;  // relative to the template dir, '/' separated
  std::string sha256;
};

/// Every template file under dir with its SHA-256, sorted by path.
std::vector<ManifestEntry> compute_template_manifest(const std::filesystem::path& dir);
std::string format_template_manifest(const std::vector<ManifestEntry>& entries);
/// Paths whose digest differs from <dir>/MANIFEST, or which are missing on
/// either side. Empty when the directory matches its manifest.
std::vector<std::string> verify_template_manifest(const std::filesystem::path& dir);

/// Train split records and their fingerprints, keyed by molecule id.
class TrainIndex {
 public:
  /// Records without a string for repr are left out.
  TrainIndex(const std::vector<dataset::MoleculeRecord>& records, const std::vector<std::size_t>& train_ids,
             Representation repr);

  const SimilarityIndex& index() const { return index_; }
  const dataset::MoleculeRecord& record(std::size_t id) const;
  bool contains(std::size_t id) const { return by_id_.count(id) != 0; }
  std::size_t size() const { return index_.size(); }

 private:
  SimilarityIndex index_;
  std::map<std::size_t, dataset::MoleculeRecord> by_id_;
};

Fingerprint record_fingerprint(const dataset::MoleculeRecord& record);

/// top_k_similar over the train index; throws InsufficientExamples when
/// fewer than k candidates exist.
std::vector<std::size_t> select_icl_examples(const dataset::MoleculeRecord& target, const TrainIndex& train,
                                             std::size_t k);

struct PromptRecord {
  std::string prompt_id;
  std::string dataset;
  std::string text;
  std::string image_path;
  PromptMode mode;
  Representation representation = Representation::SMILES;
  std::vector<std::size_t> example_ids;
  std::size_t target_id = 0;
  ExpectedFormat expected_format;
  /// Gold labels of the target in manifest form, carried for scoring.
  nlohmann::json gold;

  nlohmann::json to_json() const;
  static PromptRecord from_json(const nlohmann::json& j);
  bool operator==(const PromptRecord&) const = default;
};

inline constexpr std::string_view kOutlineHeading = "General outline:";
inline constexpr std::string_view kInstructionHeading = "Task instruction:";
inline constexpr std::string_view kExamplesHeading = "Examples:";
inline constexpr std::string_view kQuestionHeading = "Question:";
inline constexpr std::string_view kReasoningHeading = "Reasoning:";

std::string molecule_string(const dataset::MoleculeRecord& record, Representation repr);

/// Sections joined by blank lines, each under its heading.
PromptRecord build_prompt(const dataset::MoleculeRecord& record, const dataset::TaskSpec& task,
                          const PromptMode& mode, Representation repr, const TrainIndex& train,
                          const std::filesystem::path& template_dir = default_template_dir());

struct BuildResult {
  std::vector<PromptRecord> prompts;  // ascending target id
  std::vector<std::size_t> skipped;   // targets without a string for repr
};

/// One prompt per target id, built in parallel.
BuildResult build_prompts(const std::vector<dataset::MoleculeRecord>& records, const dataset::SplitResult& split,
                          const dataset::TaskSpec& task, const PromptMode& mode, Representation repr,
                          const std::filesystem::path& template_dir = default_template_dir(), unsigned workers = 0);

void write_prompts(const std::filesystem::path& path, const std::vector<PromptRecord>& prompts);
std::vector<PromptRecord> read_prompts(const std::filesystem::path& path);

}  // namespace molbench::prompt
