#pragma once

// Metric Consistency (MC): agreement between the method ranking a metric
// produces and the ranking of a reference model.
//
//   dR_i = |R_i^M - R_i^Ref|
//   W_i  = (alpha^{R_i^M} + beta^{R_i^Ref}) / 2
//   MC   = exp(-s * sum_i W_i * dR_i)
//
// Ranks are 1-based; rank 1 is the best method.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace fusemetrics::mc {

struct ConsistencyParams {
  double alpha = 0.9;
  double beta = 0.9;
  double s = 0.0125;
};

void validate(const ConsistencyParams& p);

struct Ranking {
  std::vector<int> ranks;  // ranks[i] belongs to method i
  bool had_ties = false;
};

/// Best score gets rank 1. Equal scores are ordered by ascending method id.
/// Throws TooFewMethods for fewer than two methods, NonFiniteScore for NaN
/// or infinite scores.
Ranking rank(std::span<const double> scores, std::span<const std::string> method_ids,
             bool higher_is_better);

struct MethodBreakdown {
  int rank_metric = 0;
  int rank_reference = 0;
  double delta_rank = 0.0;
  double weight = 0.0;
};

struct McResult {
  double mc = 1.0;
  std::vector<MethodBreakdown> breakdown;
};

/// Throws LengthMismatch or NotAPermutation.
McResult mc(std::span<const int> ranks_metric, std::span<const int> ranks_reference,
            const ConsistencyParams& p);

enum class ColumnKind { Metric, Reference };

struct ColumnInfo {
  ColumnKind kind = ColumnKind::Metric;
  bool higher_is_better = true;
};

struct ScoreTable {
  std::vector<std::string> methods;
  std::vector<std::string> column_order;
  std::map<std::string, std::vector<double>> scores;  // column -> per-method score
  std::map<std::string, ColumnInfo> info;

  void add_column(const std::string& name, std::vector<double> values, ColumnInfo column_info);
  /// Throws UnknownColumn.
  const std::vector<double>& column(const std::string& name) const;
  const ColumnInfo& column_info(const std::string& name) const;
  std::vector<std::string> columns_of(ColumnKind kind) const;
};

struct McCell {
  std::string metric;
  std::string reference;
  McResult result;
};

struct McReport {
  std::vector<std::string> methods;
  std::vector<std::string> metric_columns;
  std::vector<std::string> reference_columns;
  ConsistencyParams params;
  std::vector<McCell> cells;  // metric-major

  const McCell& cell(const std::string& metric, const std::string& reference) const;
};

McReport mc_report(const ScoreTable& table, std::span<const std::string> metric_columns,
                   std::span<const std::string> reference_columns, const ConsistencyParams& p);

// --- file formats ------------------------------------------------------------

/// CSV `method,<col1>,<col2>,...` plus a sidecar JSON
/// {"columns": {"<col>": {"kind": "metric"|"reference", "higher_is_better": bool}}}.
/// Columns absent from the sidecar default to metric / higher-is-better.
/// Throws ParseError with the offending line number.
ScoreTable read_score_table(const std::filesystem::path& csv_path,
                            const std::filesystem::path& sidecar_path);
void write_score_table(const ScoreTable& table, const std::filesystem::path& csv_path,
                       const std::filesystem::path& sidecar_path);

/// MC matrix: header `metric,<ref1>,<ref2>,...`, values printed with 17
/// significant digits.
std::string format_matrix_csv(const McReport& report);
/// One row per (metric, reference, method) with ranks, dR, W and the
/// parameters; enough to rebuild the matrix exactly.
std::string format_breakdown_csv(const McReport& report);
McReport parse_breakdown_csv(const std::string& text);
std::string format_pretty(const McReport& report);

}  // namespace fusemetrics::mc
