#include "molbench/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <set>
#include <sstream>

#include "molbench/chem/smiles.hpp"
#include "molbench/util/hash.hpp"
#include "molbench/util/io.hpp"
#include "molbench/util/parallel.hpp"

namespace molbench::prompt {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_name_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Replaces {name} for names in vars; names in keep are left verbatim; any
// other {name} is an error. Braces not enclosing a name are literal.
std::string interpolate(std::string_view text, const std::map<std::string, std::string>& vars,
                        const std::set<std::string>& keep, const std::string& where) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '{') {
      out += text[i++];
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && is_name_char(text[j])) ++j;
    if (j == i + 1 || j >= text.size() || text[j] != '}') {
      out += text[i++];
      continue;
    }
    const std::string name(text.substr(i + 1, j - i - 1));
    if (auto it = vars.find(name); it != vars.end()) {
      out += it->second;
    } else if (keep.count(name)) {
      out.append(text.substr(i, j - i + 1));
    } else {
      throw PromptError(PromptError::Kind::UnknownPlaceholder, where + ": unknown placeholder {" + name + "}");
    }
    i = j + 1;
  }
  return out;
}

std::string strip_blank_edges(const std::vector<std::string>& lines) {
  std::size_t a = 0, b = lines.size();
  auto blank = [](const std::string& l) {
    return std::all_of(l.begin(), l.end(), [](unsigned char c) { return std::isspace(c); });
  };
  while (a < b && blank(lines[a])) ++a;
  while (b > a && blank(lines[b - 1])) --b;
  std::string out;
  for (std::size_t i = a; i < b; ++i) {
    if (i > a) out += '\n';
    out += lines[i];
  }
  return out;
}

std::map<std::string, std::string> parse_sections(const std::string& text, const std::string& origin) {
  std::map<std::string, std::vector<std::string>> raw;
  std::string current;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() > 2 && line.front() == '[' && line.back() == ']' &&
        std::all_of(line.begin() + 1, line.end() - 1, is_name_char)) {
      current = line.substr(1, line.size() - 2);
      static const std::set<std::string> known{"outline", "instruction", "example", "question", "cot"};
      if (!known.count(current)) {
        throw PromptError(PromptError::Kind::MalformedTemplate, origin + ": unknown section [" + current + "]");
      }
      if (raw.count(current)) {
        throw PromptError(PromptError::Kind::MalformedTemplate, origin + ": repeated section [" + current + "]");
      }
      raw[current];
      continue;
    }
    if (current.empty()) {
      if (!line.empty() && line[0] != '#' &&
          !std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
        throw PromptError(PromptError::Kind::MalformedTemplate, origin + ": text before the first section");
      }
      continue;
    }
    raw[current].push_back(line);
  }
  std::map<std::string, std::string> out;
  for (const auto& [name, lines] : raw) out[name] = strip_blank_edges(lines);
  return out;
}

std::string join_ids(const std::vector<std::string>& v, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

std::string fill_record(const std::string& text, const std::string& molecule, const std::string* answer,
                        const std::string& where) {
  std::map<std::string, std::string> vars{{"molecule", molecule}};
  if (answer) vars["answer"] = *answer;
  return interpolate(text, vars, {}, where);
}

std::string prompt_id(const std::string& dataset, const PromptMode& mode, Representation repr, std::size_t target) {
  return dataset + ":" + to_string(mode) + ":" + lower(to_string(repr)) + ":" + std::to_string(target);
}

PromptRecord assemble(const dataset::MoleculeRecord& record, const dataset::TaskSpec& task, const PromptMode& mode,
                      Representation repr, const TrainIndex& train, const TemplateSections& sections) {
  const std::string target = molecule_string(record, repr);
  if (target.empty()) {
    throw PromptError(PromptError::Kind::MissingRepresentation,
                      "molecule " + std::to_string(record.id) + " has no " + std::string(to_string(repr)) + " string");
  }
  PromptRecord p;
  p.dataset = task.name;
  p.mode = mode;
  p.representation = repr;
  p.target_id = record.id;
  p.image_path = record.image_path;
  p.expected_format = ExpectedFormat::for_task(task);
  p.gold = dataset::labels_to_json(record.labels, task);
  p.prompt_id = prompt_id(task.name, mode, repr, record.id);
  if (mode.kind != PromptMode::Kind::ZeroShot) p.example_ids = select_icl_examples(record, train, mode.k);

  std::string text;
  text += kOutlineHeading;
  text += '\n' + sections.outline + "\n\n";
  if (mode.kind != PromptMode::Kind::ZeroShot) {
    text += kInstructionHeading;
    text += '\n' + sections.instruction + "\n\n";
  }
  if (!p.example_ids.empty()) {
    text += kExamplesHeading;
    text += '\n';
    for (std::size_t id : p.example_ids) {
      const auto& ex = train.record(id);
      const std::string answer = format_answer(ex.labels, task);
      text += fill_record(sections.example, molecule_string(ex, repr), &answer, task.name + " [example]");
      text += "\n\n";
    }
  }
  text += kQuestionHeading;
  text += '\n' + fill_record(sections.question, target, nullptr, task.name + " [question]");
  if (mode.kind == PromptMode::Kind::CoT) {
    text += "\n\n";
    text += kReasoningHeading;
    text += '\n' + sections.cot;
  }
  text += '\n';
  p.text = std::move(text);
  return p;
}

}  // namespace

std::string to_string(const PromptMode& mode) {
  switch (mode.kind) {
    case PromptMode::Kind::ZeroShot: return "zero_shot";
    case PromptMode::Kind::ICL: return "icl_k" + std::to_string(mode.k);
    case PromptMode::Kind::CoT: return "cot_k" + std::to_string(mode.k);
  }
  return "zero_shot";
}

std::optional<PromptMode> parse_mode(std::string_view text) {
  const std::string t = lower(text);
  if (t == "zero_shot" || t == "zero-shot" || t == "zeroshot") return PromptMode::zero_shot();
  auto with_k = [&](std::string_view prefix, PromptMode::Kind kind) -> std::optional<PromptMode> {
    if (t.rfind(prefix, 0) != 0) return std::nullopt;
    const std::string digits = t.substr(prefix.size());
    if (digits.empty() || digits.size() > 6 ||
        !std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) {
      return std::nullopt;
    }
    return PromptMode{kind, static_cast<std::size_t>(std::stoul(digits))};
  };
  if (auto m = with_k("icl_k", PromptMode::Kind::ICL)) return m;
  if (auto m = with_k("cot_k", PromptMode::Kind::CoT)) return m;
  return std::nullopt;
}

std::string_view template_stem(PromptMode::Kind kind) {
  switch (kind) {
    case PromptMode::Kind::ZeroShot: return "zero_shot";
    case PromptMode::Kind::ICL: return "icl";
    case PromptMode::Kind::CoT: return "cot";
  }
  return "zero_shot";
}

std::string_view to_string(Representation repr) { return repr == Representation::SMILES ? "SMILES" : "SELFIES"; }

std::optional<Representation> parse_representation(std::string_view text) {
  const std::string t = lower(text);
  if (t == "smiles") return Representation::SMILES;
  if (t == "selfies") return Representation::SELFIES;
  return std::nullopt;
}

ExpectedFormat ExpectedFormat::for_task(const dataset::TaskSpec& task) {
  switch (task.kind) {
    case dataset::TaskKind::Classification: return {Kind::YesNo, 0};
    case dataset::TaskKind::Regression: return {Kind::Number, 0};
    case dataset::TaskKind::MultiRegression: return {Kind::NumberVector, task.label_columns.size()};
    case dataset::TaskKind::Description: return {Kind::FreeText, 0};
  }
  return {};
}

std::string to_string(const ExpectedFormat& f) {
  switch (f.kind) {
    case ExpectedFormat::Kind::YesNo: return "yes_no";
    case ExpectedFormat::Kind::Number: return "number";
    case ExpectedFormat::Kind::NumberVector: return "number_vector(" + std::to_string(f.length) + ")";
    case ExpectedFormat::Kind::FreeText: return "free_text";
  }
  return "yes_no";
}

std::optional<ExpectedFormat> parse_expected_format(std::string_view text) {
  if (text == "yes_no") return ExpectedFormat{ExpectedFormat::Kind::YesNo, 0};
  if (text == "number") return ExpectedFormat{ExpectedFormat::Kind::Number, 0};
  if (text == "free_text") return ExpectedFormat{ExpectedFormat::Kind::FreeText, 0};
  constexpr std::string_view prefix = "number_vector(";
  if (text.size() > prefix.size() + 1 && text.substr(0, prefix.size()) == prefix && text.back() == ')') {
    const auto digits = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    if (digits.size() <= 6 && std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); })) {
      const auto n = static_cast<std::size_t>(std::stoul(std::string(digits)));
      if (n > 0) return ExpectedFormat{ExpectedFormat::Kind::NumberVector, n};
    }
  }
  return std::nullopt;
}

std::string format_sig3(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("format_sig3: non-finite value");
  if (value == 0.0) return "0.00";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", value);
  const double rounded = std::strtod(buf, nullptr);
  const int exponent = std::atoi(std::strchr(buf, 'e') + 1);
  const int decimals = std::max(0, 2 - exponent);
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded);
  return buf;
}

std::string format_answer(const dataset::Labels& labels, const dataset::TaskSpec& task) {
  switch (task.kind) {
    case dataset::TaskKind::Classification: return labels.values.at(0) >= 0.5 ? "Yes" : "No";
    case dataset::TaskKind::Regression: return format_sig3(labels.values.at(0));
    case dataset::TaskKind::MultiRegression: {
      std::vector<std::string> parts;
      for (double v : labels.values) parts.push_back(format_sig3(v));
      return join_ids(parts, ", ");
    }
    case dataset::TaskKind::Description: return labels.text;
  }
  return {};
}

fs::path default_template_dir() { return fs::path(MOLBENCH_ASSET_DIR) / "templates"; }

TemplateSections render_template(const dataset::TaskSpec& task, const PromptMode& mode, Representation repr,
                                 const fs::path& dir) {
  const fs::path file = dir / task.name / (std::string(template_stem(mode.kind)) + ".txt");
  if (!fs::is_regular_file(file)) {
    throw PromptError(PromptError::Kind::MissingTemplate, "no template " + file.string());
  }
  const std::string origin = task.name + "/" + file.filename().string();
  auto raw = parse_sections(util::read_file(file), origin);

  auto require = [&](const char* name) {
    if (!raw.count(name) || raw[name].empty()) {
      throw PromptError(PromptError::Kind::MalformedTemplate, origin + ": missing section [" + name + "]");
    }
  };
  auto forbid = [&](const char* name) {
    if (raw.count(name)) {
      throw PromptError(PromptError::Kind::MalformedTemplate, origin + ": section [" + name + "] not allowed here");
    }
  };
  require("outline");
  require("question");
  switch (mode.kind) {
    case PromptMode::Kind::ZeroShot:
      forbid("instruction");
      forbid("example");
      forbid("cot");
      break;
    case PromptMode::Kind::ICL:
      require("instruction");
      require("example");
      forbid("cot");
      break;
    case PromptMode::Kind::CoT:
      require("instruction");
      require("example");
      require("cot");
      break;
  }

  const std::map<std::string, std::string> vars{
      {"title", task.title},
      {"representation", std::string(to_string(repr))},
      {"property", task.positive_label_meaning},
      {"units", task.units},
      {"targets", join_ids(task.label_columns, ", ")},
      {"k", std::to_string(mode.k)},
  };
  auto render = [&](const char* name, const std::set<std::string>& keep) {
    if (!raw.count(name)) return std::string();
    auto section_vars = vars;
    if (keep.count("molecule")) section_vars[repr == Representation::SMILES ? "smiles" : "selfies"] = "{molecule}";
    return interpolate(raw[name], section_vars, keep, origin + " [" + name + "]");
  };
  TemplateSections s;
  s.outline = render("outline", {});
  s.instruction = render("instruction", {});
  s.example = render("example", {"molecule", "answer"});
  s.question = render("question", {"molecule"});
  s.cot = render("cot", {});
  return s;
}

std::vector<ManifestEntry> compute_template_manifest(const fs::path& dir) {
  std::vector<ManifestEntry> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == "MANIFEST") continue;
    out.push_back({rel, util::sha256_hex(util::read_file(entry.path()))});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.path < b.path; });
  return out;
}

std::string format_template_manifest(const std::vector<ManifestEntry>& entries) {
  std::string out;
  for (const auto& e : entries) out += e.sha256 + "  " + e.path + "\n";
  return out;
}

std::vector<std::string> verify_template_manifest(const fs::path& dir) {
  std::map<std::string, std::string> listed;
  if (fs::is_regular_file(dir / "MANIFEST")) {
    std::istringstream in(util::read_file(dir / "MANIFEST"));
    std::string line;
    while (std::getline(in, line)) {
      const auto sep = line.find("  ");
      if (sep == std::string::npos) continue;
      listed[line.substr(sep + 2)] = line.substr(0, sep);
    }
  }
  std::vector<std::string> bad;
  for (const auto& e : compute_template_manifest(dir)) {
    auto it = listed.find(e.path);
    if (it == listed.end() || it->second != e.sha256) bad.push_back(e.path);
    if (it != listed.end()) listed.erase(it);
  }
  for (const auto& [path, digest] : listed) bad.push_back(path);
  std::sort(bad.begin(), bad.end());
  return bad;
}

Fingerprint record_fingerprint(const dataset::MoleculeRecord& record) {
  return morgan_fingerprint(chem::parse_smiles(record.canonical), kDefaultFingerprintRadius,
                            kDefaultFingerprintWidth, MoleculeId{record.id});
}

TrainIndex::TrainIndex(const std::vector<dataset::MoleculeRecord>& records, const std::vector<std::size_t>& train_ids,
                       Representation repr) {
  std::map<std::size_t, const dataset::MoleculeRecord*> all;
  for (const auto& r : records) all[r.id] = &r;
  std::vector<std::size_t> ids = train_ids;
  std::sort(ids.begin(), ids.end());
  std::vector<const dataset::MoleculeRecord*> chosen;
  for (std::size_t id : ids) {
    auto it = all.find(id);
    if (it == all.end()) throw std::invalid_argument("train id " + std::to_string(id) + " not among records");
    if (molecule_string(*it->second, repr).empty()) continue;
    chosen.push_back(it->second);
  }
  std::vector<Fingerprint> fps(chosen.size());
  util::parallel_for(chosen.size(), 0, [&](std::size_t i) { fps[i] = record_fingerprint(*chosen[i]); });
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    index_.add(fps[i]);
    by_id_.emplace(chosen[i]->id, *chosen[i]);
  }
}

const dataset::MoleculeRecord& TrainIndex::record(std::size_t id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw std::out_of_range("molecule " + std::to_string(id) + " is not in the train index");
  return it->second;
}

std::vector<std::size_t> select_icl_examples(const dataset::MoleculeRecord& target, const TrainIndex& train,
                                             std::size_t k) {
  if (k == 0) return {};
  const std::size_t available = train.size() - (train.contains(target.id) ? 1 : 0);
  if (available < k) {
    throw PromptError(PromptError::Kind::InsufficientExamples, "need " + std::to_string(k) + " examples, train has " +
                                                                   std::to_string(available));
  }
  std::vector<std::size_t> ids;
  for (const auto& n : top_k_similar(record_fingerprint(target), train.index(), k)) {
    ids.push_back(static_cast<std::size_t>(n.id.value));
  }
  return ids;
}

std::string molecule_string(const dataset::MoleculeRecord& record, Representation repr) {
  return repr == Representation::SMILES ? record.smiles : record.selfies;
}

PromptRecord build_prompt(const dataset::MoleculeRecord& record, const dataset::TaskSpec& task, const PromptMode& mode,
                          Representation repr, const TrainIndex& train, const fs::path& template_dir) {
  return assemble(record, task, mode, repr, train, render_template(task, mode, repr, template_dir));
}

BuildResult build_prompts(const std::vector<dataset::MoleculeRecord>& records, const dataset::SplitResult& split,
                          const dataset::TaskSpec& task, const PromptMode& mode, Representation repr,
                          const fs::path& template_dir, unsigned workers) {
  const auto sections = render_template(task, mode, repr, template_dir);
  const TrainIndex train(records, split.train, repr);
  std::map<std::size_t, const dataset::MoleculeRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;

  std::vector<std::size_t> targets = split.test;
  std::sort(targets.begin(), targets.end());
  BuildResult out;
  std::vector<const dataset::MoleculeRecord*> todo;
  for (std::size_t id : targets) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw std::invalid_argument("test id " + std::to_string(id) + " not among records");
    if (molecule_string(*it->second, repr).empty()) {
      out.skipped.push_back(id);
    } else {
      todo.push_back(it->second);
    }
  }
  out.prompts.resize(todo.size());
  util::parallel_for(todo.size(), workers,
                     [&](std::size_t i) { out.prompts[i] = assemble(*todo[i], task, mode, repr, train, sections); });
  return out;
}

json PromptRecord::to_json() const {
  return {{"prompt_id", prompt_id},
          {"dataset", dataset},
          {"text", text},
          {"image_path", image_path},
          {"mode", to_string(mode)},
          {"representation", std::string(prompt::to_string(representation))},
          {"example_ids", example_ids},
          {"target_id", target_id},
          {"expected_format", to_string(expected_format)},
          {"gold", gold}};
}

PromptRecord PromptRecord::from_json(const json& j) {
  PromptRecord p;
  p.prompt_id = j.at("prompt_id").get<std::string>();
  p.dataset = j.at("dataset").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.image_path = j.value("image_path", std::string());
  const auto mode = parse_mode(j.at("mode").get<std::string>());
  const auto repr = parse_representation(j.at("representation").get<std::string>());
  const auto format = parse_expected_format(j.at("expected_format").get<std::string>());
  if (!mode || !repr || !format) throw std::invalid_argument("prompt record " + p.prompt_id + ": bad mode, representation or format");
  p.mode = *mode;
  p.representation = *repr;
  p.expected_format = *format;
  p.example_ids = j.at("example_ids").get<std::vector<std::size_t>>();
  p.target_id = j.at("target_id").get<std::size_t>();
  p.gold = j.value("gold", json::object());
  return p;
}

void write_prompts(const fs::path& path, const std::vector<PromptRecord>& prompts) {
  std::vector<json> rows;
  rows.reserve(prompts.size());
  for (const auto& p : prompts) rows.push_back(p.to_json());
  util::write_jsonl(path, rows);
}

std::vector<PromptRecord> read_prompts(const fs::path& path) {
  std::vector<PromptRecord> out;
  for (const auto& j : util::read_jsonl(path)) out.push_back(PromptRecord::from_json(j));
  return out;
}

}  // namespace molbench::prompt
