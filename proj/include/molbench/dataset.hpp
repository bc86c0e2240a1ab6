#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace molbench::dataset {

enum class TaskKind { Classification, Regression, Description, MultiRegression };

std::string_view to_string(TaskKind kind);
std::optional<TaskKind> parse_task_kind(std::string_view text);

/// Per-dataset metadata, loaded from assets/tasks/<name>.toml.
struct TaskSpec {
  std::string name;   // dataset id, e.g. "bace"
  std::string title;  // display name, e.g. "BACE-V"
  TaskKind kind = TaskKind::Classification;
  std::string smiles_column;
  std::vector<std::string> label_columns;
  std::string units;
  std::string positive_label_meaning;
  /// Source file name of the public release, relative to a source directory.
  std::string source_file;
  /// Train/test counts published for the benchmark, when exact.
  std::optional<std::size_t> expected_train;
  std::optional<std::size_t> expected_test;

  /// Throws ConfigError when required keys are missing or inconsistent.
  static TaskSpec from_toml(std::string_view text, const std::string& origin = "<string>");
  static TaskSpec load(const std::filesystem::path& path);
  /// The bundled spec for a dataset id ("bace", "qm9", ...).
  static TaskSpec bundled(std::string_view name);

  bool numeric() const { return kind != TaskKind::Description; }
};

/// Ids of the ten bundled tasks, in table order.
const std::vector<std::string>& bundled_task_names();

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { MissingColumn, EmptyFile, TooFewRecords, Io };
  DatasetError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Numeric labels (one per label column; classification uses 0/1) or a text
/// label for description tasks.
struct Labels {
  std::vector<double> values;
  std::string text;

  bool operator==(const Labels&) const = default;
};

struct RawRecord {
  std::size_t row = 0;  // 1-based data row in the source file
  std::string smiles;
  Labels labels;
  /// Carried through re-curation so conflicting duplicates stay out of test.
  bool conflict = false;
};

struct IngestResult {
  std::vector<RawRecord> records;
  std::size_t rows = 0;
  std::size_t dropped_missing_label = 0;
  std::size_t dropped_empty_smiles = 0;
  std::size_t dropped_bad_label = 0;
};

struct IngestOptions {
  /// Keep at most this many rows (0 = all), counted before any drop.
  std::size_t sample = 0;
};

/// Reads CSV (RFC 4180 quoting) or TSV; the delimiter is taken from the
/// header line. Throws MissingColumn / EmptyFile.
IngestResult ingest_text(std::string_view text, const TaskSpec& task, const IngestOptions& options = {});
IngestResult ingest_csv(const std::filesystem::path& path, const TaskSpec& task, const IngestOptions& options = {});

struct MoleculeRecord {
  std::size_t id = 0;
  std::size_t source_row = 0;
  std::string smiles;
  std::string canonical;
  std::string selfies;
  Labels labels;
  std::string image_path;
  bool conflict = false;

  bool operator==(const MoleculeRecord&) const = default;
};

struct Exclusion {
  std::size_t row = 0;
  std::string smiles;
  std::string reason;
};

struct Duplicate {
  std::size_t row = 0;
  std::size_t kept_id = 0;
  std::string canonical;
  bool label_conflict = false;
};

struct CurationReport {
  std::string dataset;
  std::size_t input_records = 0;
  std::size_t curated = 0;
  std::vector<Exclusion> excluded;
  std::vector<Duplicate> duplicates;
  std::vector<std::size_t> conflicting_ids;
  std::vector<std::size_t> selfies_failures;
  std::vector<std::size_t> image_failures;
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

struct CurateOptions {
  /// Root directory for rendered PNGs; images are skipped when empty.
  std::filesystem::path image_root;
  int image_size = 384;
  /// Worker threads for parsing and rendering (0 = hardware concurrency).
  unsigned workers = 0;
};

struct CurationResult {
  std::vector<MoleculeRecord> records;
  CurationReport report;
};

/// Parses, canonicalizes and deduplicates (first occurrence wins), attaching
/// SELFIES and image paths. Output ids are 0..n-1 in input order.
CurationResult curate(const std::vector<RawRecord>& records, const TaskSpec& task, const CurateOptions& options = {});

/// Curated records viewed as ingest output, for re-curation.
std::vector<RawRecord> to_raw(const std::vector<MoleculeRecord>& records);

struct SplitConfig {
  double ratio = 0.8;
  std::uint64_t seed = 42;
};

/// Round half up of ratio * n, clamped to [1, n - 1].
std::size_t train_count(std::size_t n, double ratio);

struct SplitResult {
  std::vector<std::size_t> train;  // record ids, shuffled order
  std::vector<std::size_t> test;
  SplitConfig config;

  nlohmann::json to_json(const std::string& dataset) const;
  static SplitResult from_json(const nlohmann::json& j);
};

/// Sorts by id, shuffles with xoshiro256** (Fisher-Yates from the top) seeded
/// by cfg.seed, and takes the first train_count ids for training. Records
/// flagged as conflicting are moved to the front so they always train.
/// Throws TooFewRecords for fewer than two records.
SplitResult split(const std::vector<MoleculeRecord>& records, const SplitConfig& cfg = {});

inline constexpr int kManifestSchemaVersion = 1;

nlohmann::json labels_to_json(const Labels& labels, const TaskSpec& task);
Labels labels_from_json(const nlohmann::json& j, const TaskSpec& task);

nlohmann::json record_to_json(const MoleculeRecord& record, const TaskSpec& task);
MoleculeRecord record_from_json(const nlohmann::json& j, const TaskSpec& task);

void write_manifest(const std::filesystem::path& path, const std::vector<MoleculeRecord>& records, const TaskSpec& task);
std::vector<MoleculeRecord> read_manifest(const std::filesystem::path& path, const TaskSpec& task);

}  // namespace molbench::dataset
