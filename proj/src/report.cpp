#include "molbench/report.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <sstream>

namespace molbench::report {

using Kind = ReportError::Kind;
using dataset::TaskKind;
using nlohmann::json;

namespace {

const std::vector<std::pair<std::string, std::string>> kTextMetrics = {
    {"bleu2", "BLEU-2"}, {"bleu4", "BLEU-4"}, {"rouge1", "ROUGE-1"},
    {"rouge2", "ROUGE-2"}, {"rougeL", "ROUGE-L"}, {"meteor", "METEOR"}};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::optional<double> metric(const Cell& c, const std::string& name) {
  auto it = c.metrics.find(name);
  if (it == c.metrics.end()) return std::nullopt;
  return it->second;
}

std::optional<double> primary_or_none(const std::string& dataset, const Cell& cell) {
  switch (family_of(cell.kind)) {
    case Family::Classification: return metric(cell, "accuracy");
    case Family::Regression: return metric(cell, dataset == "esol" ? "rmse" : "mae");
    case Family::Description: {
      double sum = 0.0;
      for (const auto& [key, label] : kTextMetrics) {
        auto v = metric(cell, key);
        if (!v) return std::nullopt;
        sum += *v;
      }
      return sum / static_cast<double>(kTextMetrics.size());
    }
  }
  return std::nullopt;
}

std::string display_name(const std::string& dataset) {
  for (const auto& name : dataset::bundled_task_names())
    if (name == dataset) return dataset::TaskSpec::bundled(name).title;
  return dataset;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string csv_line(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) line += ',';
    line += csv_field(fields[i]);
  }
  return line + "\n";
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
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
  if (quoted) throw ReportError(Kind::BadCsv, "unterminated quoted field");
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::size_t parse_count(const std::string& s) {
  char* end = nullptr;
  const auto v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || *end != '\0') throw ReportError(Kind::BadCsv, "bad count '" + s + "'");
  return static_cast<std::size_t>(v);
}

double parse_value(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw ReportError(Kind::BadCsv, "bad value '" + s + "'");
  return v;
}

}  // namespace

std::string_view to_string(Family f) {
  switch (f) {
    case Family::Classification: return "classification";
    case Family::Regression: return "regression";
    case Family::Description: return "description";
  }
  return "";
}

std::optional<Family> parse_family(std::string_view text) {
  for (auto f : {Family::Classification, Family::Regression, Family::Description})
    if (to_string(f) == text) return f;
  return std::nullopt;
}

Family family_of(TaskKind kind) {
  switch (kind) {
    case TaskKind::Classification: return Family::Classification;
    case TaskKind::Regression:
    case TaskKind::MultiRegression: return Family::Regression;
    case TaskKind::Description: return Family::Description;
  }
  return Family::Classification;
}

Cell Cell::from_report(const eval::MetricReport& r) {
  return {r.kind, r.n_total, r.n_scored, r.n_unparsed, r.metrics, r.per_target};
}

void ResultsGrid::add(const CellKey& key, const Cell& cell) {
  if (!cells_.emplace(key, cell).second)
    throw ReportError(Kind::DuplicateCell, "duplicate cell " + key.model + " / " + key.dataset + " / " + key.mode);
  if (std::find(models_.begin(), models_.end(), key.model) == models_.end()) models_.push_back(key.model);
}

const Cell* ResultsGrid::find(const CellKey& key) const {
  auto it = cells_.find(key);
  return it == cells_.end() ? nullptr : &it->second;
}

std::vector<std::string> ResultsGrid::datasets(Family family, const std::string& mode) const {
  std::set<std::string> present;
  for (const auto& [key, cell] : cells_)
    if (key.mode == mode && family_of(cell.kind) == family) present.insert(key.dataset);
  std::vector<std::string> out;
  for (const auto& name : dataset::bundled_task_names())
    if (present.erase(name)) out.push_back(name);
  out.insert(out.end(), present.begin(), present.end());
  return out;
}

std::vector<std::string> ResultsGrid::modes() const {
  std::set<std::string> m;
  for (const auto& [key, cell] : cells_) m.insert(key.mode);
  return {m.begin(), m.end()};
}

double primary_metric(const std::string& dataset, const Cell& cell) {
  auto v = primary_or_none(dataset, cell);
  if (!v) throw std::out_of_range("cell for " + dataset + " has no primary metric");
  return *v;
}

bool higher_is_better(Family family) { return family != Family::Regression; }

std::string format_value(double v) { return fmt("%.2f", v); }

std::string format_cell(const std::string& dataset, const Cell& cell) {
  if (family_of(cell.kind) == Family::Classification) {
    auto acc = metric(cell, "accuracy");
    auto f1 = metric(cell, "f1");
    if (!acc || !f1) return kMissing;
    return format_value(*acc) + "(" + format_value(*f1) + ")";
  }
  auto v = primary_or_none(dataset, cell);
  if (!v) return kMissing;
  return format_value(family_of(cell.kind) == Family::Description ? *v * 100.0 : *v);
}

std::string Table::markdown() const {
  std::string out = "|";
  for (const auto& h : header) out += " " + h + " |";
  out += "\n|";
  for (std::size_t i = 0; i < header.size(); ++i) out += i == 0 ? " --- |" : " ---: |";
  out += "\n";
  for (const auto& row : rows) {
    out += "|";
    for (const auto& c : row) out += " " + c + " |";
    out += "\n";
  }
  for (const auto& w : warnings) out += "\n> " + w + "\n";
  return out;
}

std::string Table::csv() const {
  std::string out = csv_line(header);
  for (const auto& row : rows) out += csv_line(row);
  return out;
}

Table render_table(const ResultsGrid& grid, Family family, const std::string& mode) {
  Table t;
  const auto datasets = grid.datasets(family, mode);
  std::vector<std::string> models;
  for (const auto& m : grid.models())
    for (const auto& d : datasets)
      if (grid.find({m, d, mode})) {
        models.push_back(m);
        break;
      }

  if (family == Family::Description) {
    t.header = {"Model"};
    for (const auto& [key, label] : kTextMetrics) t.header.push_back(label);
    t.header.push_back("Average");
    for (const auto& m : models) {
      for (const auto& d : datasets) {
        const Cell* c = grid.find({m, d, mode});
        if (!c) continue;
        std::vector<std::string> row{datasets.size() > 1 ? m + " / " + display_name(d) : m};
        double sum = 0.0;
        bool complete = true;
        for (const auto& [key, label] : kTextMetrics) {
          auto v = metric(*c, key);
          row.push_back(v ? format_value(*v * 100.0) : kMissing);
          if (v) sum += *v;
          complete = complete && v.has_value();
        }
        row.push_back(complete ? format_value(sum / static_cast<double>(kTextMetrics.size()) * 100.0) : kMissing);
        if (!complete) t.warnings.push_back("incomplete: " + m + " on " + d + " lacks text metrics");
        t.rows.push_back(std::move(row));
      }
    }
    return t;
  }

  t.header = {"Model"};
  for (const auto& d : datasets) {
    std::string h = display_name(d);
    if (family == Family::Regression) h += d == "esol" ? " (RMSE)" : " (MAE)";
    t.header.push_back(h);
  }
  t.header.push_back("Average");
  for (const auto& m : models) {
    std::vector<std::string> row{m};
    double acc_sum = 0.0, f1_sum = 0.0;
    bool complete = true;
    for (const auto& d : datasets) {
      const Cell* c = grid.find({m, d, mode});
      const std::string text = c ? format_cell(d, *c) : kMissing;
      row.push_back(text);
      if (text == kMissing) {
        complete = false;
        t.warnings.push_back("missing cell: " + m + " on " + d);
        continue;
      }
      if (family == Family::Classification) {
        acc_sum += *metric(*c, "accuracy");
        f1_sum += *metric(*c, "f1");
      } else {
        acc_sum += primary_metric(d, *c);
      }
    }
    const double n = static_cast<double>(datasets.size());
    if (!complete)
      row.push_back(kMissing);
    else if (family == Family::Classification)
      row.push_back(format_value(acc_sum / n) + "(" + format_value(f1_sum / n) + ")");
    else
      row.push_back(format_value(acc_sum / n));
    t.rows.push_back(std::move(row));
  }
  if (family == Family::Regression && datasets.size() > 1)
    t.warnings.push_back("Average mixes errors in different units");
  return t;
}

json RankTable::to_json() const {
  return {{"family", to_string(family)}, {"mode", mode}, {"datasets", datasets}, {"ranks", ranks}, {"average", average}};
}

RankTable rank_models(const ResultsGrid& grid, Family family, const std::string& mode) {
  RankTable t;
  t.family = family;
  t.mode = mode;
  t.datasets = grid.datasets(family, mode);
  std::set<std::string> ranked_models;
  for (const auto& d : t.datasets) {
    std::vector<std::pair<std::string, double>> scores;
    for (const auto& m : grid.models()) {
      const Cell* c = grid.find({m, d, mode});
      if (!c) continue;
      if (auto v = primary_or_none(d, *c)) scores.emplace_back(m, *v);
    }
    for (const auto& [m, v] : scores) {
      int better = 0;
      for (const auto& [o, w] : scores)
        if (higher_is_better(family) ? w > v : w < v) ++better;
      t.ranks[m][d] = better + 1;
      ranked_models.insert(m);
    }
  }
  if (ranked_models.size() < 2)
    throw ReportError(Kind::TooFewModels, "ranking " + std::string(to_string(family)) + " / " + mode + " needs two models");
  for (const auto& [m, per] : t.ranks) {
    double sum = 0.0;
    for (const auto& [d, r] : per) sum += r;
    t.average[m] = sum / static_cast<double>(per.size());
  }
  return t;
}

std::string to_long_csv(const ResultsGrid& grid) {
  std::string out =
      csv_line({"model", "dataset", "mode", "kind", "n_total", "n_scored", "n_unparsed", "target", "metric", "value"});
  for (const auto& [key, c] : grid.cells()) {
    const std::vector<std::string> head{key.model,
                                        key.dataset,
                                        key.mode,
                                        std::string(dataset::to_string(c.kind)),
                                        std::to_string(c.n_total),
                                        std::to_string(c.n_scored),
                                        std::to_string(c.n_unparsed)};
    auto emit = [&](const std::string& target, const std::string& name, const std::string& value) {
      auto fields = head;
      fields.insert(fields.end(), {target, name, value});
      out += csv_line(fields);
    };
    if (c.metrics.empty() && c.per_target.empty()) emit("", "", "");
    for (const auto& [name, v] : c.metrics) emit("", name, fmt("%.17g", v));
    for (const auto& [target, m] : c.per_target)
      for (const auto& [name, v] : m) emit(target, name, fmt("%.17g", v));
  }
  return out;
}

ResultsGrid from_long_csv(std::string_view text) {
  const auto rows = parse_csv(text);
  if (rows.empty() || rows[0].size() != 10 || rows[0][0] != "model")
    throw ReportError(Kind::BadCsv, "missing or unexpected header");
  std::map<CellKey, Cell> cells;
  std::vector<std::string> order;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != 10) throw ReportError(Kind::BadCsv, "row " + std::to_string(i + 1) + " has " + std::to_string(r.size()) + " fields");
    const CellKey key{r[0], r[1], r[2]};
    const auto kind = dataset::parse_task_kind(r[3]);
    if (!kind) throw ReportError(Kind::BadCsv, "unknown kind '" + r[3] + "'");
    Cell head{*kind, parse_count(r[4]), parse_count(r[5]), parse_count(r[6]), {}, {}};
    auto [it, fresh] = cells.emplace(key, head);
    Cell& c = it->second;
    if (fresh) {
      if (std::find(order.begin(), order.end(), key.model) == order.end()) order.push_back(key.model);
    } else if (c.kind != head.kind || c.n_total != head.n_total || c.n_scored != head.n_scored ||
               c.n_unparsed != head.n_unparsed) {
      throw ReportError(Kind::BadCsv, "row " + std::to_string(i + 1) + " disagrees with earlier rows of its cell");
    }
    if (r[8].empty()) continue;
    const double v = parse_value(r[9]);
    if (r[7].empty())
      c.metrics[r[8]] = v;
    else
      c.per_target[r[7]][r[8]] = v;
  }
  ResultsGrid grid;
  for (const auto& m : order)
    for (const auto& [key, c] : cells)
      if (key.model == m) grid.add(key, c);
  return grid;
}

json to_json(const ResultsGrid& grid) {
  json cells = json::array();
  for (const auto& [key, c] : grid.cells()) {
    cells.push_back({{"model", key.model},
                     {"dataset", key.dataset},
                     {"mode", key.mode},
                     {"kind", dataset::to_string(c.kind)},
                     {"n_total", c.n_total},
                     {"n_scored", c.n_scored},
                     {"n_unparsed", c.n_unparsed},
                     {"metrics", c.metrics},
                     {"per_target", c.per_target}});
  }
  return {{"models", grid.models()}, {"cells", cells}};
}

}  // namespace molbench::report
