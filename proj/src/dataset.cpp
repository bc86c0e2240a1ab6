#include "molbench/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numeric>

#include "molbench/chem/selfies.hpp"
#include "molbench/chem/smiles.hpp"
#include "molbench/config.hpp"
#include "molbench/depict.hpp"
#include "molbench/util/io.hpp"
#include "molbench/util/parallel.hpp"
#include "molbench/util/rng.hpp"

namespace molbench::dataset {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

bool is_missing(const std::string& cell) {
  const auto v = lower(trim(cell));
  return v.empty() || v == "nan" || v == "na" || v == "n/a" || v == "null" || v == "none";
}

std::optional<double> parse_number(const std::string& cell) {
  const auto v = trim(cell);
  if (v.empty()) return std::nullopt;
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size() || !std::isfinite(d)) return std::nullopt;
  return d;
}

std::optional<double> parse_binary(const std::string& cell) {
  const auto v = lower(trim(cell));
  if (v == "true" || v == "yes") return 1.0;
  if (v == "false" || v == "no") return 0.0;
  const auto d = parse_number(v);
  if (d && (*d == 0.0 || *d == 1.0)) return d;
  return std::nullopt;
}

// Splits delimited text into rows of fields; double quotes escape delimiters,
// newlines and "" pairs.
std::vector<std::vector<std::string>> parse_delimited(std::string_view text, char delim) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      any = true;
    } else if (c == delim) {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::Classification: return "classification";
    case TaskKind::Regression: return "regression";
    case TaskKind::Description: return "description";
    case TaskKind::MultiRegression: return "multi_regression";
  }
  return "classification";
}

std::optional<TaskKind> parse_task_kind(std::string_view text) {
  for (auto k : {TaskKind::Classification, TaskKind::Regression, TaskKind::Description, TaskKind::MultiRegression}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

TaskSpec TaskSpec::from_toml(std::string_view text, const std::string& origin) {
  const auto cfg = Config::parse(text, origin);
  TaskSpec t;
  t.name = cfg.require_string("name");
  t.title = cfg.get_string("title", t.name);
  const auto kind = cfg.require_string("kind");
  const auto parsed = parse_task_kind(kind);
  if (!parsed) throw ConfigError(origin + ": unknown task kind '" + kind + "'");
  t.kind = *parsed;
  t.smiles_column = cfg.require_string("smiles_column");
  t.label_columns = cfg.get_strings("label_columns");
  t.units = cfg.get_string("units", "");
  t.positive_label_meaning = cfg.get_string("positive_label_meaning", "");
  t.source_file = cfg.get_string("source_file", t.name + ".csv");
  if (cfg.has("expected_train")) t.expected_train = static_cast<std::size_t>(cfg.get_int("expected_train", 0));
  if (cfg.has("expected_test")) t.expected_test = static_cast<std::size_t>(cfg.get_int("expected_test", 0));
  if (t.label_columns.empty()) throw ConfigError(origin + ": label_columns is empty");
  if (t.kind == TaskKind::MultiRegression) {
    if (t.label_columns.size() < 2) throw ConfigError(origin + ": multi_regression needs several label columns");
  } else if (t.label_columns.size() != 1) {
    throw ConfigError(origin + ": " + kind + " takes exactly one label column");
  }
  return t;
}

TaskSpec TaskSpec::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("task file not found: " + path.string());
  return from_toml(util::read_file(path), path.string());
}

TaskSpec TaskSpec::bundled(std::string_view name) {
  return load(std::filesystem::path(MOLBENCH_ASSET_DIR) / "tasks" / (std::string(name) + ".toml"));
}

const std::vector<std::string>& bundled_task_names() {
  static const std::vector<std::string> names = {"bace", "bbbp", "hiv",  "clintox",  "tox21",
                                                 "esol", "ld50", "qm9", "pcqm4mv2", "chebi20"};
  return names;
}

IngestResult ingest_text(std::string_view text, const TaskSpec& task, const IngestOptions& options) {
  const auto newline = text.find('\n');
  const auto header_line = text.substr(0, newline);
  const char delim = header_line.find('\t') != std::string_view::npos ? '\t' : ',';
  auto rows = parse_delimited(text, delim);
  if (rows.empty()) throw DatasetError(DatasetError::Kind::EmptyFile, "no header row");
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < rows[0].size(); ++i) col.emplace(trim(rows[0][i]), i);
  auto column = [&](const std::string& name) {
    const auto it = col.find(name);
    if (it == col.end()) throw DatasetError(DatasetError::Kind::MissingColumn, "missing column '" + name + "'");
    return it->second;
  };
  const std::size_t smiles_col = column(task.smiles_column);
  std::vector<std::size_t> label_cols;
  for (const auto& c : task.label_columns) label_cols.push_back(column(c));
  if (rows.size() == 1) throw DatasetError(DatasetError::Kind::EmptyFile, "header only, no data rows");

  IngestResult out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (options.sample && out.rows >= options.sample) break;
    ++out.rows;
    const auto& row = rows[r];
    auto cell = [&](std::size_t c) { return c < row.size() ? row[c] : std::string(); };
    RawRecord rec;
    rec.row = r;
    rec.smiles = trim(cell(smiles_col));
    if (rec.smiles.empty()) {
      ++out.dropped_empty_smiles;
      continue;
    }
    bool missing = false, bad = false;
    if (task.kind == TaskKind::Description) {
      rec.labels.text = trim(cell(label_cols[0]));
      missing = rec.labels.text.empty();
    } else {
      for (auto c : label_cols) {
        const auto v = cell(c);
        if (is_missing(v)) {
          missing = true;
          break;
        }
        const auto d = task.kind == TaskKind::Classification ? parse_binary(v) : parse_number(v);
        if (!d) {
          bad = true;
          break;
        }
        rec.labels.values.push_back(*d);
      }
    }
    if (missing) {
      ++out.dropped_missing_label;
    } else if (bad) {
      ++out.dropped_bad_label;
    } else {
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

IngestResult ingest_csv(const std::filesystem::path& path, const TaskSpec& task, const IngestOptions& options) {
  if (!std::filesystem::exists(path)) throw DatasetError(DatasetError::Kind::Io, "no such file: " + path.string());
  const auto text = util::read_file(path);
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw DatasetError(DatasetError::Kind::EmptyFile, path.string() + " is empty");
  }
  return ingest_text(text, task, options);
}

nlohmann::json CurationReport::to_json() const {
  json j;
  j["dataset"] = dataset;
  j["input_records"] = input_records;
  j["curated"] = curated;
  j["excluded"] = json::array();
  for (const auto& e : excluded) j["excluded"].push_back({{"row", e.row}, {"smiles", e.smiles}, {"reason", e.reason}});
  j["duplicates"] = json::array();
  for (const auto& d : duplicates) {
    j["duplicates"].push_back(
        {{"row", d.row}, {"kept_id", d.kept_id}, {"canonical", d.canonical}, {"label_conflict", d.label_conflict}});
  }
  j["conflicting_ids"] = conflicting_ids;
  j["selfies_failures"] = selfies_failures;
  j["image_failures"] = image_failures;
  j["notes"] = notes;
  return j;
}

CurationResult curate(const std::vector<RawRecord>& records, const TaskSpec& task, const CurateOptions& options) {
  struct Parsed {
    bool ok = false;
    std::string canonical;
    std::string selfies;
    bool selfies_ok = false;
    std::string error;
  };
  std::vector<Parsed> parsed(records.size());
  util::parallel_for(records.size(), options.workers, [&](std::size_t i) {
    auto& p = parsed[i];
    try {
      const auto g = chem::parse_smiles(records[i].smiles);
      if (g.empty()) {
        p.error = "empty molecule";
        return;
      }
      p.canonical = chem::write_canonical_smiles(g);
      p.ok = true;
      try {
        p.selfies = chem::encode_selfies(g);
        p.selfies_ok = true;
      } catch (const chem::SelfiesError&) {
      }
    } catch (const std::exception& e) {
      p.error = e.what();
    }
  });

  CurationResult out;
  auto& report = out.report;
  report.dataset = task.name;
  report.input_records = records.size();
  std::map<std::string, std::size_t> by_canonical;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& raw = records[i];
    const auto& p = parsed[i];
    if (!p.ok) {
      report.excluded.push_back({raw.row, raw.smiles, p.error});
      continue;
    }
    if (const auto it = by_canonical.find(p.canonical); it != by_canonical.end()) {
      auto& kept = out.records[it->second];
      const bool conflict = kept.labels != raw.labels;
      report.duplicates.push_back({raw.row, kept.id, p.canonical, conflict});
      if (conflict || raw.conflict) kept.conflict = true;
      continue;
    }
    MoleculeRecord rec;
    rec.id = out.records.size();
    rec.source_row = raw.row;
    rec.smiles = raw.smiles;
    rec.canonical = p.canonical;
    rec.selfies = p.selfies;
    rec.labels = raw.labels;
    rec.conflict = raw.conflict;
    if (!p.selfies_ok) report.selfies_failures.push_back(rec.id);
    by_canonical.emplace(p.canonical, rec.id);
    out.records.push_back(std::move(rec));
  }
  for (const auto& r : out.records) {
    if (r.conflict) report.conflicting_ids.push_back(r.id);
  }

  if (!options.image_root.empty()) {
    std::vector<char> image_ok(out.records.size(), 0);
    util::parallel_for(out.records.size(), options.workers, [&](std::size_t i) {
      auto& rec = out.records[i];
      const auto rel = depict::image_relpath(task.name, rec.canonical);
      try {
        const auto img = depict::depict(chem::parse_smiles(rec.canonical), options.image_size, options.image_size);
        util::write_file(options.image_root / rel, depict::encode_png(img));
        rec.image_path = rel;
        image_ok[i] = 1;
      } catch (const std::exception&) {
      }
    });
    for (std::size_t i = 0; i < image_ok.size(); ++i) {
      if (!image_ok[i]) report.image_failures.push_back(out.records[i].id);
    }
  }

  report.curated = out.records.size();
  if (task.expected_train && task.expected_test) {
    const auto expected = *task.expected_train + *task.expected_test;
    if (report.input_records != expected) {
      report.notes.push_back("source count " + std::to_string(report.input_records) + " differs from published total " +
                             std::to_string(expected));
    }
    if (report.curated != expected) {
      report.notes.push_back("curated count " + std::to_string(report.curated) + " differs from published total " +
                             std::to_string(expected));
    }
  }
  return out;
}

std::vector<RawRecord> to_raw(const std::vector<MoleculeRecord>& records) {
  std::vector<RawRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({r.source_row, r.smiles, r.labels, r.conflict});
  return out;
}

std::size_t train_count(std::size_t n, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must lie in (0, 1)");
  if (n < 2) throw DatasetError(DatasetError::Kind::TooFewRecords, "need at least 2 records, got " + std::to_string(n));
  // The nudge keeps products such as 0.8 * 2050 = 1639.9999... at their exact value.
  const auto k = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n) + 0.5 + 1e-9));
  return std::clamp<std::size_t>(k, 1, n - 1);
}

SplitResult split(const std::vector<MoleculeRecord>& records, const SplitConfig& cfg) {
  const std::size_t k = train_count(records.size(), cfg.ratio);
  std::vector<const MoleculeRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](auto a, auto b) { return a->id < b->id; });
  std::vector<std::size_t> order(sorted.size());
  std::iota(order.begin(), order.end(), 0);
  util::Xoshiro256 rng(cfg.seed);
  util::shuffle(order, rng);
  std::stable_partition(order.begin(), order.end(), [&](std::size_t i) { return sorted[i]->conflict; });
  SplitResult out;
  out.config = cfg;
  for (std::size_t i = 0; i < order.size(); ++i) (i < k ? out.train : out.test).push_back(sorted[order[i]]->id);
  return out;
}

nlohmann::json SplitResult::to_json(const std::string& dataset) const {
  return {{"schema_version", kManifestSchemaVersion},
          {"dataset", dataset},
          {"seed", config.seed},
          {"ratio", config.ratio},
          {"algorithm", "xoshiro256** seeded by splitmix64; Fisher-Yates from the last index; round-half-up train count"},
          {"train_count", train.size()},
          {"test_count", test.size()},
          {"train", train},
          {"test", test}};
}

SplitResult SplitResult::from_json(const nlohmann::json& j) {
  SplitResult s;
  s.config.seed = j.at("seed").get<std::uint64_t>();
  s.config.ratio = j.at("ratio").get<double>();
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.test = j.at("test").get<std::vector<std::size_t>>();
  return s;
}

nlohmann::json labels_to_json(const Labels& labels, const TaskSpec& task) {
  json j = json::object();
  if (task.kind == TaskKind::Description) {
    j[task.label_columns.at(0)] = labels.text;
    return j;
  }
  for (std::size_t i = 0; i < task.label_columns.size() && i < labels.values.size(); ++i) {
    if (task.kind == TaskKind::Classification) {
      j[task.label_columns[i]] = static_cast<int>(labels.values[i]);
    } else {
      j[task.label_columns[i]] = labels.values[i];
    }
  }
  return j;
}

Labels labels_from_json(const nlohmann::json& j, const TaskSpec& task) {
  Labels l;
  if (task.kind == TaskKind::Description) {
    l.text = j.at(task.label_columns.at(0)).get<std::string>();
    return l;
  }
  for (const auto& c : task.label_columns) l.values.push_back(j.at(c).get<double>());
  return l;
}

nlohmann::json record_to_json(const MoleculeRecord& r, const TaskSpec& task) {
  return {{"schema_version", kManifestSchemaVersion},
          {"id", r.id},
          {"source_row", r.source_row},
          {"smiles", r.smiles},
          {"canonical", r.canonical},
          {"selfies", r.selfies},
          {"labels", labels_to_json(r.labels, task)},
          {"image_path", r.image_path},
          {"conflict", r.conflict}};
}

MoleculeRecord record_from_json(const nlohmann::json& j, const TaskSpec& task) {
  const int version = j.value("schema_version", 0);
  if (version != kManifestSchemaVersion) {
    throw DatasetError(DatasetError::Kind::Io, "unsupported manifest schema_version " + std::to_string(version));
  }
  MoleculeRecord r;
  r.id = j.at("id").get<std::size_t>();
  r.source_row = j.value("source_row", std::size_t{0});
  r.smiles = j.at("smiles").get<std::string>();
  r.canonical = j.at("canonical").get<std::string>();
  r.selfies = j.value("selfies", "");
  r.labels = labels_from_json(j.at("labels"), task);
  r.image_path = j.value("image_path", "");
  r.conflict = j.value("conflict", false);
  return r;
}

void write_manifest(const std::filesystem::path& path, const std::vector<MoleculeRecord>& records, const TaskSpec& task) {
  std::vector<json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(record_to_json(r, task));
  util::write_jsonl(path, rows);
}

std::vector<MoleculeRecord> read_manifest(const std::filesystem::path& path, const TaskSpec& task) {
  std::vector<MoleculeRecord> out;
  for (const auto& j : util::read_jsonl(path)) out.push_back(record_from_json(j, task));
  return out;
}

}  // namespace molbench::dataset
