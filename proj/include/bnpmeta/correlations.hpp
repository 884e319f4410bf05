#pragma once

// Per-informant twin correlation files -> per-study heritability rows.
//
// Input columns:  study_id, informant, rho_mz, rho_dz, n_mz, n_dz
// Output columns: study_id, h2, var, pooled

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "bnpmeta/csv.hpp"
#include "bnpmeta/dataset.hpp"
#include "bnpmeta/effect_size.hpp"

namespace bnpmeta {

struct CorrelationRow {
  std::size_t line = 0;
  std::string study_id;
  std::string informant;
  TwinCorrelations correlations;
};

struct StudyEffect {
  std::string study_id;
  HeritabilityEstimate estimate;
};

inline std::vector<CorrelationRow> parse_correlations(std::istream& in) {
  const auto table = csv::read(in);
  const std::vector<std::string> required{"study_id", "informant", "rho_mz", "rho_dz", "n_mz", "n_dz"};
  std::vector<RowDiagnostic> diags;
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < table.header.size(); ++c)
    if (!col.emplace(table.header[c], c).second) diags.push_back({1, table.header[c], "duplicate column"});
  for (const auto& name : required)
    if (!col.count(name)) diags.push_back({1, name, "missing required column"});
  for (const auto& [name, c] : col)
    if (std::find(required.begin(), required.end(), name) == required.end())
      diags.push_back({1, name, "unknown column"});
  if (!diags.empty()) throw DatasetError(std::move(diags));
  if (table.rows.empty()) throw DatasetError({{0, "", "no records"}});

  std::vector<CorrelationRow> out;
  for (const auto& row : table.rows) {
    if (row.cells.size() != table.header.size()) {
      diags.push_back({row.line, "", "wrong number of cells"});
      continue;
    }
    const std::size_t before = diags.size();
    CorrelationRow r;
    r.line = row.line;
    r.study_id = row.cells[col["study_id"]];
    r.informant = row.cells[col["informant"]];
    if (r.study_id.empty()) diags.push_back({row.line, "study_id", "missing value"});
    auto rho = [&](const char* name, double& dst) {
      const auto v = csv::parse_double(row.cells[col[name]]);
      if (!v || !std::isfinite(*v))
        diags.push_back({row.line, name, "missing or non-numeric value"});
      else if (*v < -1.0 || *v > 1.0)
        diags.push_back({row.line, name, "correlation " + row.cells[col[name]] + " outside [-1, 1]"});
      else
        dst = *v;
    };
    auto count = [&](const char* name, long& dst) {
      const auto v = csv::parse_integer(row.cells[col[name]]);
      if (!v)
        diags.push_back({row.line, name, "missing or non-integer value"});
      else if (*v < 2)
        diags.push_back({row.line, name, "pair count must be at least 2"});
      else
        dst = *v;
    };
    rho("rho_mz", r.correlations.rho_mz);
    rho("rho_dz", r.correlations.rho_dz);
    count("n_mz", r.correlations.n_mz);
    count("n_dz", r.correlations.n_dz);
    if (diags.size() == before) out.push_back(std::move(r));
  }
  if (!diags.empty()) throw DatasetError(std::move(diags));
  return out;
}

/// One Falconer estimate per row, or (with `pool`) one inverse-variance
/// average per study_id in order of first appearance. Studies with a single
/// informant keep pooled = false.
inline std::vector<StudyEffect> compute_effect_sizes(const std::vector<CorrelationRow>& rows, bool pool) {
  std::vector<StudyEffect> out;
  if (!pool) {
    for (const auto& r : rows) out.push_back({r.study_id, falconer_estimate(r.correlations)});
    return out;
  }
  std::vector<std::string> order;
  std::map<std::string, std::vector<const CorrelationRow*>> groups;
  for (const auto& r : rows) {
    auto& g = groups[r.study_id];
    if (g.empty()) order.push_back(r.study_id);
    g.push_back(&r);
  }
  std::vector<RowDiagnostic> diags;
  for (const auto& id : order) {
    const auto& g = groups[id];
    std::vector<HeritabilityEstimate> estimates;
    for (const auto* r : g) {
      estimates.push_back(falconer_estimate(r->correlations));
      if (g.size() > 1 && !(estimates.back().var > 0.0))
        diags.push_back({r->line, "rho_mz", "zero sampling variance; cannot be weighted"});
    }
    if (g.size() == 1)
      out.push_back({id, estimates.front()});
    else if (diags.empty())
      out.push_back({id, pool_within_study(estimates)});
  }
  if (!diags.empty()) throw DatasetError(std::move(diags));
  return out;
}

inline void write_effect_sizes(std::ostream& out, const std::vector<StudyEffect>& rows) {
  csv::write_row(out, {"study_id", "h2", "var", "pooled"});
  for (const auto& r : rows)
    csv::write_row(out, {r.study_id, csv::format_double(r.estimate.h2), csv::format_double(r.estimate.var),
                         r.estimate.pooled ? "1" : "0"});
}

}  // namespace bnpmeta
