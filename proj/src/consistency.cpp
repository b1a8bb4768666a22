#include "fusemetrics/consistency.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "fusemetrics/csv.hpp"
#include "fusemetrics/error.hpp"

namespace fusemetrics::mc {

void validate(const ConsistencyParams& p) {
  if (!(p.alpha > 0.0 && p.alpha < 1.0) || !(p.beta > 0.0 && p.beta < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "alpha and beta must lie strictly inside (0, 1)");
  }
  if (!(p.s > 0.0) || !std::isfinite(p.s)) {
    throw Error(ErrorCode::InvalidArgument, "scaling factor s must be positive");
  }
}

Ranking rank(std::span<const double> scores, std::span<const std::string> method_ids,
             bool higher_is_better) {
  if (scores.size() != method_ids.size()) {
    throw Error(ErrorCode::LengthMismatch, "rank: scores and method ids differ in length");
  }
  if (scores.size() < 2) throw Error(ErrorCode::TooFewMethods, "rank: need at least two methods");
  for (double v : scores) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteScore, "rank: non-finite score");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) {
      return higher_is_better ? scores[a] > scores[b] : scores[a] < scores[b];
    }
    return method_ids[a] < method_ids[b];
  });
  Ranking r;
  r.ranks.resize(scores.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    r.ranks[order[pos]] = static_cast<int>(pos) + 1;
    if (pos > 0 && scores[order[pos]] == scores[order[pos - 1]]) r.had_ties = true;
  }
  return r;
}

namespace {

void require_permutation(std::span<const int> ranks, const char* which) {
  std::vector<char> seen(ranks.size() + 1, 0);
  for (int r : ranks) {
    if (r < 1 || r > static_cast<int>(ranks.size()) || seen[r]) {
      throw Error(ErrorCode::NotAPermutation,
                  std::string("mc: ") + which + " ranks are not a permutation of 1..L");
    }
    seen[r] = 1;
  }
}

}  // namespace

McResult mc(std::span<const int> ranks_metric, std::span<const int> ranks_reference,
            const ConsistencyParams& p) {
  validate(p);
  if (ranks_metric.size() != ranks_reference.size()) {
    throw Error(ErrorCode::LengthMismatch, "mc: rankings differ in length");
  }
  if (ranks_metric.size() < 2) throw Error(ErrorCode::TooFewMethods, "mc: need at least two methods");
  require_permutation(ranks_metric, "metric");
  require_permutation(ranks_reference, "reference");
  McResult out;
  // Summed in ascending order so neither row order nor argument order changes the result.
  std::vector<double> terms(ranks_metric.size());
  for (std::size_t i = 0; i < ranks_metric.size(); ++i) {
    MethodBreakdown b;
    b.rank_metric = ranks_metric[i];
    b.rank_reference = ranks_reference[i];
    b.delta_rank = std::abs(b.rank_metric - b.rank_reference);
    b.weight = 0.5 * (std::pow(p.alpha, b.rank_metric) + std::pow(p.beta, b.rank_reference));
    terms[i] = b.weight * b.delta_rank;
    out.breakdown.push_back(b);
  }
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  out.mc = std::exp(-p.s * total);
  return out;
}

// --- tables -------------------------------------------------------------------

void ScoreTable::add_column(const std::string& name, std::vector<double> values,
                            ColumnInfo column_info) {
  if (values.size() != methods.size()) {
    throw Error(ErrorCode::LengthMismatch, "column '" + name + "' has " +
                                               std::to_string(values.size()) + " entries, expected " +
                                               std::to_string(methods.size()));
  }
  if (!scores.count(name)) column_order.push_back(name);
  scores[name] = std::move(values);
  info[name] = column_info;
}

const std::vector<double>& ScoreTable::column(const std::string& name) const {
  auto it = scores.find(name);
  if (it == scores.end()) throw Error(ErrorCode::UnknownColumn, "unknown column '" + name + "'");
  return it->second;
}

const ColumnInfo& ScoreTable::column_info(const std::string& name) const {
  auto it = info.find(name);
  if (it == info.end()) throw Error(ErrorCode::UnknownColumn, "unknown column '" + name + "'");
  return it->second;
}

std::vector<std::string> ScoreTable::columns_of(ColumnKind kind) const {
  std::vector<std::string> out;
  for (const auto& name : column_order) {
    if (info.at(name).kind == kind) out.push_back(name);
  }
  return out;
}

const McCell& McReport::cell(const std::string& metric, const std::string& reference) const {
  for (const McCell& c : cells) {
    if (c.metric == metric && c.reference == reference) return c;
  }
  throw Error(ErrorCode::UnknownColumn, "no MC cell for (" + metric + ", " + reference + ")");
}

McReport mc_report(const ScoreTable& table, std::span<const std::string> metric_columns,
                   std::span<const std::string> reference_columns, const ConsistencyParams& p) {
  validate(p);
  McReport report;
  report.methods = table.methods;
  report.metric_columns.assign(metric_columns.begin(), metric_columns.end());
  report.reference_columns.assign(reference_columns.begin(), reference_columns.end());
  report.params = p;
  std::map<std::string, Ranking> ranked;
  auto ranking_of = [&](const std::string& col) -> const Ranking& {
    auto it = ranked.find(col);
    if (it == ranked.end()) {
      it = ranked
               .emplace(col, rank(table.column(col), table.methods,
                                  table.column_info(col).higher_is_better))
               .first;
    }
    return it->second;
  };
  for (const auto& m : metric_columns) {
    for (const auto& r : reference_columns) {
      report.cells.push_back({m, r, mc(ranking_of(m).ranks, ranking_of(r).ranks, p)});
    }
  }
  return report;
}

// --- score table I/O -------------------------------------------------------------

ScoreTable read_score_table(const std::filesystem::path& csv_path,
                            const std::filesystem::path& sidecar_path) {
  const auto rows = csv::parse(csv::read_file(csv_path.string()));
  if (rows.empty()) throw Error(ErrorCode::ParseError, csv_path.string() + ": empty score table");
  const auto& header = rows.front().fields;
  if (header.empty() || header.front() != "method") {
    throw Error(ErrorCode::ParseError,
                csv_path.string() + ": line 1: header must start with 'method'");
  }
  const std::vector<std::string> columns(header.begin() + 1, header.end());
  std::set<std::string> unique_cols(columns.begin(), columns.end());
  if (columns.empty() || unique_cols.size() != columns.size()) {
    throw Error(ErrorCode::ParseError,
                csv_path.string() + ": line 1: expected distinct score columns");
  }

  ScoreTable table;
  std::vector<std::vector<double>> values(columns.size());
  std::set<std::string> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != header.size()) {
      throw Error(ErrorCode::ParseError, csv_path.string() + ": line " + std::to_string(row.line) +
                                             ": expected " + std::to_string(header.size()) +
                                             " fields, got " + std::to_string(row.fields.size()));
    }
    if (!seen.insert(row.fields[0]).second) {
      throw Error(ErrorCode::ParseError, csv_path.string() + ": line " + std::to_string(row.line) +
                                             ": duplicate method '" + row.fields[0] + "'");
    }
    table.methods.push_back(row.fields[0]);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      try {
        const double v = csv::parse_number(row.fields[c + 1], row.line);
        if (!std::isfinite(v)) {
          throw Error(ErrorCode::ParseError,
                      "line " + std::to_string(row.line) + ": non-finite score");
        }
        values[c].push_back(v);
      } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, csv_path.string() + ": " + e.what());
      }
    }
  }

  nlohmann::json sidecar = nlohmann::json::object();
  if (!sidecar_path.empty()) {
    std::ifstream in(sidecar_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + sidecar_path.string());
    try {
      in >> sidecar;
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::ParseError, sidecar_path.string() + ": " + e.what());
    }
  }
  const nlohmann::json cols = sidecar.value("columns", nlohmann::json::object());
  for (auto it = cols.begin(); it != cols.end(); ++it) {
    if (!unique_cols.count(it.key())) {
      throw Error(ErrorCode::UnknownColumn, sidecar_path.string() + ": column '" + it.key() +
                                                "' is not in the score table");
    }
  }
  for (std::size_t c = 0; c < columns.size(); ++c) {
    ColumnInfo ci;
    if (cols.contains(columns[c])) {
      const auto& spec = cols.at(columns[c]);
      try {
        const std::string kind = spec.value("kind", std::string("metric"));
        if (kind == "metric") {
          ci.kind = ColumnKind::Metric;
        } else if (kind == "reference") {
          ci.kind = ColumnKind::Reference;
        } else {
          throw Error(ErrorCode::ParseError, "column '" + columns[c] + "': unknown kind '" + kind + "'");
        }
        ci.higher_is_better = spec.value("higher_is_better", true);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, sidecar_path.string() + ": " + e.what());
      }
    }
    table.add_column(columns[c], std::move(values[c]), ci);
  }
  return table;
}

void write_score_table(const ScoreTable& table, const std::filesystem::path& csv_path,
                       const std::filesystem::path& sidecar_path) {
  std::ofstream out(csv_path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + csv_path.string());
  std::vector<std::string> header{"method"};
  header.insert(header.end(), table.column_order.begin(), table.column_order.end());
  out << csv::join_row(header);
  for (std::size_t m = 0; m < table.methods.size(); ++m) {
    std::vector<std::string> row{table.methods[m]};
    for (const auto& col : table.column_order) {
      row.push_back(csv::format_number(table.scores.at(col)[m], 17));
    }
    out << csv::join_row(row);
  }
  nlohmann::json cols = nlohmann::json::object();
  for (const auto& col : table.column_order) {
    const ColumnInfo& ci = table.info.at(col);
    cols[col] = {{"kind", ci.kind == ColumnKind::Metric ? "metric" : "reference"},
                 {"higher_is_better", ci.higher_is_better}};
  }
  std::ofstream side(sidecar_path);
  if (!side) throw Error(ErrorCode::IoError, "cannot write " + sidecar_path.string());
  side << nlohmann::json{{"columns", cols}}.dump(2) << "\n";
}

// --- report formats ----------------------------------------------------------------

std::string format_matrix_csv(const McReport& report) {
  std::string out;
  std::vector<std::string> header{"metric"};
  header.insert(header.end(), report.reference_columns.begin(), report.reference_columns.end());
  out += csv::join_row(header);
  for (const auto& m : report.metric_columns) {
    std::vector<std::string> row{m};
    for (const auto& r : report.reference_columns) {
      row.push_back(csv::format_number(report.cell(m, r).result.mc, 17));
    }
    out += csv::join_row(row);
  }
  return out;
}

std::string format_breakdown_csv(const McReport& report) {
  std::string out = csv::join_row(std::vector<std::string>{
      "metric", "reference", "method", "rank_metric", "rank_reference", "delta_rank", "weight",
      "alpha", "beta", "s"});
  const std::string a = csv::format_number(report.params.alpha, 17);
  const std::string b = csv::format_number(report.params.beta, 17);
  const std::string s = csv::format_number(report.params.s, 17);
  for (const McCell& cell : report.cells) {
    for (std::size_t i = 0; i < cell.result.breakdown.size(); ++i) {
      const MethodBreakdown& d = cell.result.breakdown[i];
      out += csv::join_row(std::vector<std::string>{
          cell.metric, cell.reference, report.methods[i], std::to_string(d.rank_metric),
          std::to_string(d.rank_reference), csv::format_number(d.delta_rank, 17),
          csv::format_number(d.weight, 17), a, b, s});
    }
  }
  return out;
}

McReport parse_breakdown_csv(const std::string& text) {
  const auto rows = csv::parse(text);
  if (rows.empty() || rows.front().fields.size() != 10 || rows.front().fields[0] != "metric") {
    throw Error(ErrorCode::ParseError, "line 1: not an MC breakdown file");
  }
  McReport report;
  struct Pending {
    std::vector<int> rm, rr;
  };
  std::map<std::pair<std::string, std::string>, Pending> pending;
  std::vector<std::pair<std::string, std::string>> cell_order;
  auto remember = [](std::vector<std::string>& list, const std::string& v) {
    if (std::find(list.begin(), list.end(), v) == list.end()) list.push_back(v);
  };
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i].fields;
    const std::size_t line = rows[i].line;
    if (f.size() != 10) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": expected 10 fields");
    }
    remember(report.metric_columns, f[0]);
    remember(report.reference_columns, f[1]);
    remember(report.methods, f[2]);
    const auto key = std::make_pair(f[0], f[1]);
    if (!pending.count(key)) cell_order.push_back(key);
    pending[key].rm.push_back(static_cast<int>(csv::parse_number(f[3], line)));
    pending[key].rr.push_back(static_cast<int>(csv::parse_number(f[4], line)));
    report.params = {csv::parse_number(f[7], line), csv::parse_number(f[8], line),
                     csv::parse_number(f[9], line)};
  }
  for (const auto& key : cell_order) {
    const Pending& p = pending.at(key);
    report.cells.push_back({key.first, key.second, mc(p.rm, p.rr, report.params)});
  }
  return report;
}

std::string format_pretty(const McReport& report) {
  std::size_t first = 6;
  for (const auto& m : report.metric_columns) first = std::max(first, m.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(first) + 2) << "metric";
  for (const auto& r : report.reference_columns) {
    out << std::right << std::setw(static_cast<int>(std::max<std::size_t>(r.size(), 8)) + 2) << r;
  }
  out << "\n";
  for (const auto& m : report.metric_columns) {
    out << std::left << std::setw(static_cast<int>(first) + 2) << m;
    for (const auto& r : report.reference_columns) {
      out << std::right << std::setw(static_cast<int>(std::max<std::size_t>(r.size(), 8)) + 2)
          << std::fixed << std::setprecision(4) << report.cell(m, r).result.mc;
    }
    out << "\n";
  }
  out << "alpha=" << report.params.alpha << " beta=" << report.params.beta
      << " s=" << report.params.s << " L=" << report.methods.size() << "\n";
  return out.str();
}

}  // namespace fusemetrics::mc
