#pragma once

// The meta-analytic dataset: effect sizes, sampling variances and the study
// moderators, plus z-standardization of the moderators.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "bnpmeta/csv.hpp"
#include "bnpmeta/design.hpp"

namespace bnpmeta {

enum class ModeratorKind { binary, proportion, continuous };

struct ModeratorSpec {
  std::string name;
  ModeratorKind kind = ModeratorKind::continuous;
  std::string description;
};

class ModeratorSchema {
 public:
  explicit ModeratorSchema(std::vector<ModeratorSpec> entries) : entries_(std::move(entries)) {
    std::unordered_set<std::string> seen;
    for (const auto& e : entries_) {
      if (e.name.empty()) throw std::invalid_argument("moderator names must be non-empty");
      if (!seen.insert(e.name).second)
        throw std::invalid_argument("duplicate moderator name: " + e.name);
    }
  }

  /// The 29 study-level moderators of the antisocial-behavior heritability
  /// data set, in their canonical reporting order.
  static ModeratorSchema canonical() {
    using K = ModeratorKind;
    return ModeratorSchema({
        {"SE", K::continuous, "square root of Var(h2)"},
        {"PY", K::continuous, "publication year"},
        {"h2_Ave", K::binary, "1 if h2 is a Var(h2)-weighted mean over informants"},
        {"female", K::proportion, "female siblings (proportion for model-based estimates)"},
        {"male", K::proportion, "male siblings (proportion for model-based estimates)"},
        {"genmodel", K::binary, "1 if h2 controls for gender via a genetic model"},
        {"adoptee", K::binary, "1 if h2 estimate from adoptees"},
        {"mom", K::proportion, "mother ratings (proportion if h2_Ave = 1)"},
        {"dad", K::proportion, "father ratings (proportion if h2_Ave = 1)"},
        {"teacher", K::proportion, "teacher ratings (proportion if h2_Ave = 1)"},
        {"self", K::proportion, "self ratings (proportion if h2_Ave = 1)"},
        {"observer", K::proportion, "observer ratings (proportion if h2_Ave = 1)"},
        {"CD", K::proportion, "conduct disorder ratings (proportion if h2_Ave = 1)"},
        {"agg", K::proportion, "aggression ratings (proportion if h2_Ave = 1)"},
        {"delinq", K::proportion, "delinquency ratings (proportion if h2_Ave = 1)"},
        {"ext", K::proportion, "externalizing ratings (proportion if h2_Ave = 1)"},
        {"Achenb", K::binary, "1 if Achenbach questionnaire"},
        {"interview", K::binary, "1 if interview"},
        {"age", K::continuous, "mean age of subjects in months"},
        {"white60", K::binary, "1 if at least 60% whites in study"},
        {"zygquest", K::binary, "1 if zygosity obtained by questionnaire"},
        {"zygdna", K::binary, "1 if zygosity obtained by DNA samples"},
        {"sesmiss", K::binary, "1 if missing SES information"},
        {"seslow", K::binary, "1 if sample contains low SES subjects"},
        {"sesmidhi", K::binary, "1 if sample contains mid or high SES subjects"},
        {"repsample", K::binary, "1 if representative sample"},
        {"longsampl", K::binary, "1 if longitudinal sample"},
        {"latitude", K::continuous, "latitude of study"},
        {"longitude", K::continuous, "longitude of study"},
    });
  }

  const std::vector<ModeratorSpec>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const ModeratorSpec& operator[](std::size_t k) const { return entries_[k]; }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t k = 0; k < entries_.size(); ++k)
      if (entries_[k].name == name) return k;
    return std::nullopt;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& e : entries_) out.push_back(e.name);
    return out;
  }

 private:
  std::vector<ModeratorSpec> entries_;
};

struct EffectSizeRecord {
  std::string study_id;
  double y = 0.0;    // h2
  double var = 0.0;  // sampling variance of y
  std::vector<double> x;  // moderators in schema order
};

struct RowDiagnostic {
  std::size_t line = 0;  // 0 for file-level problems
  std::string column;
  std::string message;
};

class DatasetError : public std::runtime_error {
 public:
  explicit DatasetError(std::vector<RowDiagnostic> diagnostics)
      : std::runtime_error(render(diagnostics)), diagnostics_(std::move(diagnostics)) {}

  const std::vector<RowDiagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string render(const std::vector<RowDiagnostic>& diags) {
    std::string out;
    for (const auto& d : diags) {
      if (!out.empty()) out += '\n';
      if (d.line > 0) out += "line " + std::to_string(d.line) + ", ";
      if (!d.column.empty()) out += "column " + d.column + ": ";
      out += d.message;
    }
    return out;
  }

  std::vector<RowDiagnostic> diagnostics_;
};

/// Tolerance for a stored SE column against sqrt(var).
inline constexpr double kSeTolerance = 1e-6;

/// Parses and validates a dataset. Required columns: study_id, h2, var and
/// every schema moderator (any order). SE, when in the schema, is recomputed
/// as sqrt(var). All row problems are collected before throwing.
inline std::vector<EffectSizeRecord> parse_dataset(std::istream& in, const ModeratorSchema& schema) {
  const csv::Table table = csv::read(in);
  std::vector<RowDiagnostic> diags;

  auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t c = 0; c < table.header.size(); ++c)
      if (table.header[c] == name) return c;
    return std::nullopt;
  };

  const auto id_col = column_of("study_id");
  const auto y_col = column_of("h2");
  const auto var_col = column_of("var");
  std::vector<std::size_t> mod_cols(schema.size());
  if (!id_col) diags.push_back({1, "study_id", "missing required column"});
  if (!y_col) diags.push_back({1, "h2", "missing required column"});
  if (!var_col) diags.push_back({1, "var", "missing required column"});
  for (std::size_t k = 0; k < schema.size(); ++k) {
    const auto c = column_of(schema[k].name);
    if (!c)
      diags.push_back({1, schema[k].name, "missing required column"});
    else
      mod_cols[k] = *c;
  }
  {
    std::unordered_set<std::string> seen;
    for (const auto& h : table.header) {
      if (!seen.insert(h).second) diags.push_back({1, h, "duplicate column"});
      const bool known = h == "study_id" || h == "h2" || h == "var" || schema.index_of(h);
      if (!known) diags.push_back({1, h, "unknown column"});
    }
  }
  if (!diags.empty()) throw DatasetError(std::move(diags));
  if (table.rows.empty()) throw DatasetError({{0, "", "no records"}});

  const auto se_index = schema.index_of("SE");
  std::vector<EffectSizeRecord> records;
  for (const auto& row : table.rows) {
    const std::size_t before = diags.size();
    if (row.cells.size() != table.header.size()) {
      diags.push_back({row.line, "", "expected " + std::to_string(table.header.size()) + " cells, found " +
                                         std::to_string(row.cells.size())});
      continue;
    }
    EffectSizeRecord rec;
    rec.study_id = row.cells[*id_col];
    if (rec.study_id.empty()) diags.push_back({row.line, "study_id", "missing value"});

    const auto y = csv::parse_double(row.cells[*y_col]);
    if (!y || !std::isfinite(*y))
      diags.push_back({row.line, "h2", "missing or non-numeric value"});
    else
      rec.y = *y;

    const auto v = csv::parse_double(row.cells[*var_col]);
    if (!v || !std::isfinite(*v))
      diags.push_back({row.line, "var", "missing or non-numeric value"});
    else if (!(*v > 0.0))
      diags.push_back({row.line, "var", "sampling variance must be > 0 (weight undefined)"});
    else
      rec.var = *v;

    rec.x.resize(schema.size());
    for (std::size_t k = 0; k < schema.size(); ++k) {
      const auto& spec = schema[k];
      const auto value = csv::parse_double(row.cells[mod_cols[k]]);
      if (!value || !std::isfinite(*value)) {
        diags.push_back({row.line, spec.name, "missing or non-numeric value"});
        continue;
      }
      rec.x[k] = *value;
      if (spec.kind == ModeratorKind::binary && *value != 0.0 && *value != 1.0)
        diags.push_back({row.line, spec.name, "binary moderator must be 0 or 1"});
      if (spec.kind == ModeratorKind::proportion && (*value < 0.0 || *value > 1.0))
        diags.push_back({row.line, spec.name, "proportion moderator must lie in [0, 1]"});
    }
    if (diags.size() != before) continue;

    if (se_index) {
      const double se = std::sqrt(rec.var);
      if (std::abs(rec.x[*se_index] - se) > kSeTolerance) {
        diags.push_back({row.line, "SE", "stored SE disagrees with sqrt(var)"});
        continue;
      }
      rec.x[*se_index] = se;
    }
    records.push_back(std::move(rec));
  }
  if (!diags.empty()) throw DatasetError(std::move(diags));
  return records;
}

inline std::vector<EffectSizeRecord> load_dataset(const std::filesystem::path& path,
                                                  const ModeratorSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DatasetError({{0, "", "cannot open " + path.string()}});
  return parse_dataset(in, schema);
}

/// Writes records in the loader's input format (moderators in schema order).
inline void write_dataset(std::ostream& out, std::span<const EffectSizeRecord> records,
                          const ModeratorSchema& schema) {
  std::vector<std::string> header{"study_id", "h2", "var"};
  for (const auto& e : schema.entries()) header.push_back(e.name);
  csv::write_row(out, header);
  for (const auto& r : records) {
    std::vector<std::string> cells{r.study_id, csv::format_double(r.y), csv::format_double(r.var)};
    for (double v : r.x) cells.push_back(csv::format_double(v));
    csv::write_row(out, cells);
  }
}

/// Per-column centering and scaling used to z-standardize moderators.
/// Constant columns keep scale 1 and are flagged.
struct Standardization {
  std::vector<std::string> names;
  std::vector<double> centers;
  std::vector<double> scales;
  std::vector<bool> constant;
  std::vector<double> minimums;  // observed range on the original scale
  std::vector<double> maximums;

  std::size_t size() const { return names.size(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return k;
    return std::nullopt;
  }

  double standardize(std::size_t k, double value) const { return (value - centers[k]) / scales[k]; }
  double destandardize(std::size_t k, double z) const { return centers[k] + scales[k] * z; }

  /// Design row (leading 1) for moderators on the original scale; a missing
  /// entry means "standardized value zero".
  Eigen::VectorXd design_row(std::span<const std::optional<double>> original) const {
    if (original.size() != size()) throw std::invalid_argument("design_row: wrong moderator count");
    Eigen::VectorXd row = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(size()) + 1);
    row[0] = 1.0;
    for (std::size_t k = 0; k < size(); ++k)
      if (original[k]) row[static_cast<Eigen::Index>(k) + 1] = standardize(k, *original[k]);
    return row;
  }

  bool matches(const Standardization& other, double tol = 1e-9) const {
    if (names != other.names) return false;
    for (std::size_t k = 0; k < size(); ++k) {
      const double s = std::max(1.0, std::abs(centers[k]));
      if (std::abs(centers[k] - other.centers[k]) > tol * s) return false;
      if (std::abs(scales[k] - other.scales[k]) > tol * std::max(1.0, scales[k])) return false;
    }
    return true;
  }
};

struct StandardizedDataset {
  std::vector<EffectSizeRecord> records;  // moderators on the standardized scale
  Standardization standardization;

  Design design() const {
    const auto n = static_cast<Eigen::Index>(records.size());
    const auto p = static_cast<Eigen::Index>(standardization.size());
    Design d;
    d.y.resize(n);
    d.var.resize(n);
    d.x.resize(n, p + 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& r = records[static_cast<std::size_t>(i)];
      d.y[i] = r.y;
      d.var[i] = r.var;
      d.x(i, 0) = 1.0;
      for (Eigen::Index k = 0; k < p; ++k) d.x(i, k + 1) = r.x[static_cast<std::size_t>(k)];
    }
    return d;
  }

  std::vector<EffectSizeRecord> destandardize() const {
    std::vector<EffectSizeRecord> out = records;
    for (auto& r : out)
      for (std::size_t k = 0; k < r.x.size(); ++k) r.x[k] = standardization.destandardize(k, r.x[k]);
    return out;
  }

  std::vector<std::size_t> constant_columns() const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < standardization.size(); ++k)
      if (standardization.constant[k]) out.push_back(k);
    return out;
  }
};

namespace detail {

// Sample mean and standard deviation (n - 1 denominator; 0 when n == 1).
inline std::pair<double, double> mean_sd(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace detail

/// Z-scores every moderator column with its sample mean and n-1 standard
/// deviation. Constant columns are centered, given scale 1, flagged, and a
/// warning is written to `warnings` (if given).
inline StandardizedDataset standardize(std::span<const EffectSizeRecord> records,
                                       const std::vector<std::string>& names,
                                       std::ostream* warnings = &std::clog) {
  if (records.size() < 2) throw std::invalid_argument("standardize: need at least 2 records");
  const std::size_t p = names.size();
  StandardizedDataset out;
  out.records.assign(records.begin(), records.end());
  auto& st = out.standardization;
  st.names = names;
  st.centers.assign(p, 0.0);
  st.scales.assign(p, 1.0);
  st.constant.assign(p, false);
  st.minimums.assign(p, 0.0);
  st.maximums.assign(p, 0.0);

  std::vector<double> column(records.size());
  for (std::size_t k = 0; k < p; ++k) {
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (records[i].x.size() != p) throw std::invalid_argument("standardize: record width mismatch");
      column[i] = records[i].x[k];
    }
    const auto [mean, sd] = detail::mean_sd(column);
    const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
    st.centers[k] = mean;
    st.minimums[k] = *lo;
    st.maximums[k] = *hi;
    if (*lo == *hi || !(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      st.constant[k] = true;
      st.scales[k] = 1.0;
      if (warnings)
        *warnings << "warning: moderator '" << names[k]
                  << "' is constant; its slope is not identified by the data\n";
    } else {
      st.scales[k] = sd;
    }
    for (auto& r : out.records) r.x[k] = st.standardize(k, r.x[k]);
  }
  return out;
}

inline StandardizedDataset standardize(std::span<const EffectSizeRecord> records,
                                       const ModeratorSchema& schema,
                                       std::ostream* warnings = &std::clog) {
  return standardize(records, schema.names(), warnings);
}

struct ColumnSummary {
  std::string variable;
  double mean = 0.0;
  double sd = 0.0;
  bool sd_degenerate = false;  // single record: SD reported as 0
};

/// Means and SDs of h2, var and every moderator, in reporting order.
inline std::vector<ColumnSummary> describe(std::span<const EffectSizeRecord> records,
                                           const std::vector<std::string>& names) {
  if (records.empty()) throw std::invalid_argument("describe: no records");
  const bool degenerate = records.size() < 2;
  std::vector<double> column(records.size());
  std::vector<ColumnSummary> out;
  auto add = [&](const std::string& name, auto&& get) {
    for (std::size_t i = 0; i < records.size(); ++i) column[i] = get(records[i]);
    const auto [m, s] = detail::mean_sd(column);
    out.push_back({name, m, s, degenerate});
  };
  add("h2", [](const EffectSizeRecord& r) { return r.y; });
  add("var", [](const EffectSizeRecord& r) { return r.var; });
  for (std::size_t k = 0; k < names.size(); ++k)
    add(names[k], [k](const EffectSizeRecord& r) { return r.x.at(k); });
  return out;
}

inline std::vector<ColumnSummary> describe(std::span<const EffectSizeRecord> records,
                                           const ModeratorSchema& schema) {
  return describe(records, schema.names());
}

inline void write_description_csv(std::ostream& out, std::span<const ColumnSummary> rows) {
  csv::write_row(out, {"variable", "mean", "SD"});
  for (const auto& r : rows) csv::write_row(out, {r.variable, csv::format_double(r.mean), csv::format_double(r.sd)});
}

}  // namespace bnpmeta
