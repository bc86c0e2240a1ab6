#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "molbench/dataset.hpp"
#include "molbench/eval.hpp"

namespace molbench::report {

class ReportError : public std::runtime_error {
 public:
  enum class Kind { DuplicateCell, TooFewModels, BadCsv, UnknownFamily };
  ReportError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

enum class Family { Classification, Regression, Description };
std::string_view to_string(Family f);
std::optional<Family> parse_family(std::string_view text);
Family family_of(dataset::TaskKind kind);

/// The scored part of a MetricReport.
struct Cell {
  dataset::TaskKind kind = dataset::TaskKind::Classification;
  std::size_t n_total = 0;
  std::size_t n_scored = 0;
  std::size_t n_unparsed = 0;
  std::map<std::string, double> metrics;
  std::map<std::string, std::map<std::string, double>> per_target;

  static Cell from_report(const eval::MetricReport& r);
  bool operator==(const Cell&) const = default;
};

struct CellKey {
  std::string model;
  std::string dataset;
  std::string mode;
  auto operator<=>(const CellKey&) const = default;
};

class ResultsGrid {
 public:
  /// Throws DuplicateCell.
  void add(const CellKey& key, const Cell& cell);
  void add(const eval::MetricReport& r) { add({r.model, r.dataset, r.mode}, Cell::from_report(r)); }

  const std::map<CellKey, Cell>& cells() const { return cells_; }
  const Cell* find(const CellKey& key) const;
  /// Models in first-insertion order.
  const std::vector<std::string>& models() const { return models_; }
  /// Datasets of a family present under `mode`, bundled datasets first in
  /// table order, then others by name.
  std::vector<std::string> datasets(Family family, const std::string& mode) const;
  std::vector<std::string> modes() const;

  bool operator==(const ResultsGrid& o) const { return cells_ == o.cells_; }

 private:
  std::map<CellKey, Cell> cells_;
  std::vector<std::string> models_;
};

/// Accuracy for classification, RMSE for ESOL and MAE for other regression,
/// mean of the six text metrics for description.
double primary_metric(const std::string& dataset, const Cell& cell);
bool higher_is_better(Family family);

/// "%.2f"; description values are scaled by 100 first.
std::string format_value(double v);
/// "0.78(0.71)" for classification, one value otherwise.
std::string format_cell(const std::string& dataset, const Cell& cell);

inline constexpr const char* kMissing = "\xE2\x80\x94";  // em dash

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> warnings;

  std::string markdown() const;
  std::string csv() const;
};

/// One row per model, one column per dataset (or per text metric for
/// description), and a trailing Average. A row with a missing cell gets a
/// missing Average and a warning.
Table render_table(const ResultsGrid& grid, Family family, const std::string& mode);

struct RankTable {
  Family family = Family::Classification;
  std::string mode;
  std::vector<std::string> datasets;
  /// rank per (model, dataset); competition ranking, ties share the lower rank
  std::map<std::string, std::map<std::string, int>> ranks;
  std::map<std::string, double> average;

  nlohmann::json to_json() const;
};

/// Throws TooFewModels when fewer than two models have cells for the family.
RankTable rank_models(const ResultsGrid& grid, Family family, const std::string& mode);

/// Long format, one row per metric:
///   model,dataset,mode,kind,n_total,n_scored,n_unparsed,target,metric,value
/// with an empty target for top-level metrics; values use 17 significant digits.
std::string to_long_csv(const ResultsGrid& grid);
ResultsGrid from_long_csv(std::string_view text);

nlohmann::json to_json(const ResultsGrid& grid);

}  // namespace molbench::report
