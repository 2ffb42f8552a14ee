#pragma once

// Wide panel CSV: one row per subject. Columns follow the naming scheme
//   id            optional subject identifier
//   z<t>, a<t>    instrument and treatment at period t (1-based)
//   l<t>          the single unnamed confounder at period t
//   l<t>_<name>   confounder <name> at period t
//   bl_<name>     baseline covariate
//   y             outcome
// Unrecognized columns are ignored. A schema may rename CSV columns onto
// these canonical names before parsing.

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tviv/csv.hpp"
#include "tviv/panel.hpp"

namespace tviv {

struct CsvSchema {
  /// CSV column name -> canonical column name.
  std::map<std::string, std::string> rename;
};

namespace detail {

struct ColumnRole {
  enum Kind { id, z, a, l, baseline, y } kind;
  Index period = 0;
  std::string name;
};

inline std::optional<ColumnRole> classify(const std::string& col) {
  if (col == "id") return ColumnRole{ColumnRole::id, 0, {}};
  if (col == "y") return ColumnRole{ColumnRole::y, 0, {}};
  if (col.rfind("bl_", 0) == 0 && col.size() > 3) return ColumnRole{ColumnRole::baseline, 0, col.substr(3)};
  if (col.size() < 2) return std::nullopt;
  const char lead = col[0];
  if (lead != 'z' && lead != 'a' && lead != 'l') return std::nullopt;
  std::size_t i = 1;
  while (i < col.size() && std::isdigit(static_cast<unsigned char>(col[i]))) ++i;
  if (i == 1) return std::nullopt;
  const Index period = std::stol(col.substr(1, i - 1));
  if (period < 1) return std::nullopt;
  if (i == col.size()) {
    if (lead == 'z') return ColumnRole{ColumnRole::z, period, {}};
    if (lead == 'a') return ColumnRole{ColumnRole::a, period, {}};
    return ColumnRole{ColumnRole::l, period, {}};
  }
  if (lead == 'l' && col[i] == '_' && i + 1 < col.size())
    return ColumnRole{ColumnRole::l, period, col.substr(i + 1)};
  return std::nullopt;
}

inline std::string confounder_column(Index t, const std::string& name) {
  return "l" + std::to_string(t) + (name.empty() ? std::string{} : "_" + name);
}

}  // namespace detail

/// Canonical CSV column name for confounder `name` at period `t`.
inline std::string confounder_column(Index t, const std::string& name) {
  return detail::confounder_column(t, name);
}

inline PanelDataset parse_panel(const csv::Table& raw, const CsvSchema& schema = {}) {
  std::vector<std::string> header = raw.header;
  for (auto& h : header)
    if (auto it = schema.rename.find(h); it != schema.rename.end()) h = it->second;
  csv::Table table{header, {}};

  long id_col = -1, y_col = -1;
  std::map<Index, std::size_t> z_cols, a_cols;
  std::vector<std::string> l_names;
  std::map<std::pair<std::string, Index>, std::size_t> l_cols;
  std::vector<std::pair<std::string, std::size_t>> bl_cols;
  Index t_count = 0;
  for (std::size_t c = 0; c < header.size(); ++c) {
    auto role = detail::classify(header[c]);
    if (!role) continue;
    switch (role->kind) {
      case detail::ColumnRole::id: id_col = static_cast<long>(c); break;
      case detail::ColumnRole::y: y_col = static_cast<long>(c); break;
      case detail::ColumnRole::baseline: bl_cols.emplace_back(role->name, c); break;
      case detail::ColumnRole::z: z_cols[role->period] = c; t_count = std::max(t_count, role->period); break;
      case detail::ColumnRole::a: a_cols[role->period] = c; t_count = std::max(t_count, role->period); break;
      case detail::ColumnRole::l:
        if (std::find(l_names.begin(), l_names.end(), role->name) == l_names.end()) l_names.push_back(role->name);
        l_cols[{role->name, role->period}] = c;
        t_count = std::max(t_count, role->period);
        break;
    }
  }
  if (y_col < 0) throw MissingColumn("y");
  if (t_count == 0) throw MissingColumn("z1");
  for (Index t = 1; t <= t_count; ++t) {
    if (!z_cols.count(t)) throw MissingColumn("z" + std::to_string(t));
    if (!a_cols.count(t)) throw MissingColumn("a" + std::to_string(t));
    for (const auto& name : l_names)
      if (!l_cols.count({name, t})) throw MissingColumn(detail::confounder_column(t, name));
  }

  const auto n = static_cast<Index>(raw.rows.size());
  PanelDataset d;
  d.z.resize(n, t_count);
  d.a.resize(n, t_count);
  d.y.resize(n);
  d.confounder_names = l_names;
  d.confounders.assign(l_names.size(), MatrixXd(n, t_count));
  d.baseline.resize(n, static_cast<Index>(bl_cols.size()));
  for (const auto& [name, c] : bl_cols) d.baseline_names.push_back(name);

  for (Index i = 0; i < n; ++i) {
    const auto& row = raw.rows[static_cast<std::size_t>(i)];
    const std::size_t rn = static_cast<std::size_t>(i) + 1;
    auto num = [&](std::size_t c) { return csv::to_double(row[c], rn, header[c]); };
    for (Index t = 1; t <= t_count; ++t) {
      d.z(i, t - 1) = num(z_cols[t]);
      d.a(i, t - 1) = num(a_cols[t]);
      for (std::size_t k = 0; k < l_names.size(); ++k) d.confounders[k](i, t - 1) = num(l_cols[{l_names[k], t}]);
    }
    for (std::size_t k = 0; k < bl_cols.size(); ++k) d.baseline(i, static_cast<Index>(k)) = num(bl_cols[k].second);
    d.y(i) = num(static_cast<std::size_t>(y_col));
    if (id_col >= 0) d.ids.push_back(row[static_cast<std::size_t>(id_col)]);
  }
  require_valid(d);
  return d;
}

/// Reads and validates a wide panel CSV; row order is preserved.
inline PanelDataset read_csv(const std::string& path, const CsvSchema& schema = {}) {
  return parse_panel(csv::read_file(path), schema);
}

inline std::string to_csv(const PanelDataset& d) {
  const Index t_count = d.periods();
  std::vector<std::string> header;
  const bool with_ids = !d.ids.empty();
  if (with_ids) header.emplace_back("id");
  for (Index t = 1; t <= t_count; ++t) header.push_back("z" + std::to_string(t));
  for (Index t = 1; t <= t_count; ++t) header.push_back("a" + std::to_string(t));
  for (const auto& name : d.confounder_names)
    for (Index t = 1; t <= t_count; ++t) header.push_back(detail::confounder_column(t, name));
  for (const auto& name : d.baseline_names) header.push_back("bl_" + name);
  header.emplace_back("y");

  std::string out = csv::join(header) + "\n";
  std::vector<std::string> row;
  for (Index i = 0; i < d.subjects(); ++i) {
    row.clear();
    if (with_ids) row.push_back(d.ids[static_cast<std::size_t>(i)]);
    for (Index t = 0; t < t_count; ++t) row.push_back(csv::format_exact(d.z(i, t)));
    for (Index t = 0; t < t_count; ++t) row.push_back(csv::format_exact(d.a(i, t)));
    for (const auto& l : d.confounders)
      for (Index t = 0; t < t_count; ++t) row.push_back(csv::format_exact(l(i, t)));
    for (Index k = 0; k < d.baseline.cols(); ++k) row.push_back(csv::format_exact(d.baseline(i, k)));
    row.push_back(csv::format_exact(d.y(i)));
    out += csv::join(row) + "\n";
  }
  return out;
}

/// Values of the canonical column `name` (z<t>, a<t>, l<t>[_name], bl_<name>, y).
inline VectorXd panel_column(const PanelDataset& d, const std::string& name) {
  const auto role = detail::classify(name);
  if (!role || role->kind == detail::ColumnRole::id) throw MissingColumn(name);
  const Index t = role->period;
  if (role->kind != detail::ColumnRole::y && role->kind != detail::ColumnRole::baseline && t > d.periods())
    throw MissingColumn(name);
  switch (role->kind) {
    case detail::ColumnRole::y: return d.y;
    case detail::ColumnRole::z: return d.z.col(t - 1);
    case detail::ColumnRole::a: return d.a.col(t - 1);
    case detail::ColumnRole::l:
      for (std::size_t k = 0; k < d.confounder_names.size(); ++k)
        if (d.confounder_names[k] == role->name) return d.confounder(k, t);
      break;
    case detail::ColumnRole::baseline:
      for (std::size_t k = 0; k < d.baseline_names.size(); ++k)
        if (d.baseline_names[k] == role->name) return d.baseline.col(static_cast<Index>(k));
      break;
    default: break;
  }
  throw MissingColumn(name);
}

inline void write_csv(const PanelDataset& d, const std::string& path) { csv::write_file(path, to_csv(d)); }

}  // namespace tviv
