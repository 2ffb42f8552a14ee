#pragma once

// Output formats: truth sidecars, estimate and study CSVs, aligned text tables and
// forest-plot SVG.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tviv/bootstrap.hpp"
#include "tviv/csv.hpp"
#include "tviv/diagnostics.hpp"
#include "tviv/error.hpp"
#include "tviv/estimators.hpp"
#include "tviv/simulator.hpp"
#include "tviv/study.hpp"

namespace tviv {

// ---- truth sidecar (key=value lines) ---------------------------------------

inline std::string truth_text(const SimConfig& config, const SimTruth& truth) {
  std::vector<std::string> beta;
  for (Index t = 0; t < truth.true_beta.size(); ++t) beta.push_back(csv::format_exact(truth.true_beta(t)));
  std::ostringstream out;
  out << "regime=" << to_string(config.regime) << "\n"
      << "n=" << config.n << "\n"
      << "periods=" << config.periods << "\n"
      << "alpha=" << csv::format_exact(config.alpha) << "\n"
      << "sigma_z=" << config.sigma_z << "\n"
      << "sigma_a=" << config.sigma_a << "\n"
      << "sigma_y=" << config.sigma_y << "\n"
      << "seed=" << config.seed << "\n"
      << "true_beta=" << csv::join(beta) << "\n"
      << "true_ate=" << csv::format_exact(truth.true_ate) << "\n";
  return out.str();
}

inline std::map<std::string, std::string> read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto body = csv::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(row, "*", "expected key=value");
    kv[std::string(csv::trim(body.substr(0, eq)))] = std::string(csv::trim(body.substr(eq + 1)));
  }
  return kv;
}

// ---- aligned text ------------------------------------------------------------

/// Columns padded to their widest cell; first column left-aligned, the rest right-aligned.
inline std::string render_table(const std::vector<std::string>& header,
                                 const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t j = 0; j < header.size(); ++j) width[j] = header[j].size();
  for (const auto& r : rows)
    for (std::size_t j = 0; j < r.size() && j < width.size(); ++j) width[j] = std::max(width[j], r[j].size());
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t j = 0; j < width.size(); ++j) {
      const std::string& c = j < cells.size() ? cells[j] : std::string();
      const std::string pad(width[j] - c.size(), ' ');
      if (j) s += "  ";
      s += j == 0 ? c + pad : pad + c;
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string out = line(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

// ---- estimate results ----------------------------------------------------------

/// One row per target (beta_1..beta_T, ATE) of an estimate, with optional bootstrap CI.
struct ResultRow {
  std::string method;
  std::string target;
  double estimate = 0.0;
  std::optional<double> ci_lower;
  std::optional<double> ci_upper;
};

inline std::vector<ResultRow> result_rows(const EstimateResult& est, const BootstrapResult* boot = nullptr) {
  std::vector<ResultRow> rows;
  const Index t_count = est.beta.size();
  for (Index j = 0; j <= t_count; ++j) {
    ResultRow r;
    r.method = to_string(est.method);
    r.target = target_name(j, t_count);
    r.estimate = j == t_count ? est.ate : est.beta(j);
    if (boot) {
      r.ci_lower = boot->ci_lower(j);
      r.ci_upper = boot->ci_upper(j);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

inline const std::vector<std::string>& result_header() {
  static const std::vector<std::string> h{"method", "target", "estimate", "ci_lower", "ci_upper"};
  return h;
}

inline std::string results_csv(const std::vector<ResultRow>& rows) {
  std::string out = csv::join(result_header()) + "\n";
  auto opt = [](const std::optional<double>& v) { return v ? csv::format_exact(*v) : std::string("NA"); };
  for (const auto& r : rows)
    out += csv::join({r.method, r.target, csv::format_exact(r.estimate), opt(r.ci_lower), opt(r.ci_upper)}) + "\n";
  return out;
}

inline std::string results_text(const std::vector<ResultRow>& rows, double level) {
  const std::string pct = csv::format(100.0 * level, 4) + "% CI";
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    std::string ci = r.ci_lower ? "[" + csv::format(*r.ci_lower, 5) + ", " + csv::format(*r.ci_upper, 5) + "]" : "-";
    cells.push_back({r.method, r.target, csv::format(r.estimate, 6), ci});
  }
  return render_table({"method", "target", "estimate", pct}, cells);
}

/// Reads a results CSV; rows must carry finite estimate and CI bounds with lower <= upper.
inline std::vector<ResultRow> parse_results(const csv::Table& table) {
  std::vector<std::size_t> cols;
  for (const char* name : {"method", "estimate", "ci_lower", "ci_upper"}) {
    const long c = table.find(name);
    if (c < 0) throw MalformedResults(std::string("missing column ") + name);
    cols.push_back(static_cast<std::size_t>(c));
  }
  const long target_col = table.find("target");
  if (table.rows.empty()) throw MalformedResults("no rows");
  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& raw = table.rows[i];
    auto num = [&](std::size_t c, const char* name) {
      try {
        const double v = csv::to_double(raw[c], i + 1, name);
        if (!std::isfinite(v)) throw MalformedResults("non-finite " + std::string(name) + " in row " + std::to_string(i + 1));
        return v;
      } catch (const ParseError& e) {
        throw MalformedResults(e.what());
      }
    };
    ResultRow r;
    r.method = raw[cols[0]];
    r.target = target_col >= 0 ? raw[static_cast<std::size_t>(target_col)] : std::string("ATE");
    r.estimate = num(cols[1], "estimate");
    r.ci_lower = num(cols[2], "ci_lower");
    r.ci_upper = num(cols[3], "ci_upper");
    if (*r.ci_lower > *r.ci_upper) throw MalformedResults("ci_lower > ci_upper in row " + std::to_string(i + 1));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline std::vector<ResultRow> read_results(const std::string& path) { return parse_results(csv::read_file(path)); }

// ---- forest plot ---------------------------------------------------------------------

/// Static SVG: one row per result with a CI whisker, a point marker and a zero line.
inline std::string forest_plot_svg(const std::vector<ResultRow>& rows, const std::string& title = "") {
  if (rows.empty()) throw MalformedResults("nothing to plot");
  constexpr double width = 720, label_width = 200, right_pad = 40, top = 50, row_height = 32, bottom = 50;
  const double height = top + row_height * static_cast<double>(rows.size()) + bottom;
  double lo = 0.0, hi = 0.0;
  for (const auto& r : rows) {
    lo = std::min({lo, r.estimate, r.ci_lower.value_or(r.estimate)});
    hi = std::max({hi, r.estimate, r.ci_upper.value_or(r.estimate)});
  }
  if (hi - lo <= 0.0) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
  const double x0 = label_width, x1 = width - right_pad;
  auto x = [&](double v) { return x0 + (v - lo) / (hi - lo) * (x1 - x0); };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  auto escape = [](const std::string& s) {
    std::string o;
    for (char c : s) {
      if (c == '&') o += "&amp;";
      else if (c == '<') o += "&lt;";
      else if (c == '>') o += "&gt;";
      else if (c == '"') o += "&quot;";
      else o += c;
    }
    return o;
  };

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
       "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!title.empty())
    s += "<text x=\"" + num(width / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) + "</text>\n";
  const double plot_bottom = top + row_height * static_cast<double>(rows.size());
  s += "<line class=\"reference\" x1=\"" + num(x(0.0)) + "\" y1=\"" + num(top - 10) + "\" x2=\"" + num(x(0.0)) +
       "\" y2=\"" + num(plot_bottom) + "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double y = top + row_height * (static_cast<double>(i) + 0.5);
    const std::string label = r.target == "ATE" || r.target.empty() ? r.method : r.method + " " + r.target;
    s += "<text x=\"" + num(label_width - 12) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\">" + escape(label) +
         "</text>\n";
    if (r.ci_lower && r.ci_upper)
      s += "<line class=\"whisker\" x1=\"" + num(x(*r.ci_lower)) + "\" y1=\"" + num(y) + "\" x2=\"" +
           num(x(*r.ci_upper)) + "\" y2=\"" + num(y) + "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
    s += "<circle class=\"point\" cx=\"" + num(x(r.estimate)) + "\" cy=\"" + num(y) +
         "\" r=\"4.5\" fill=\"black\"/>\n";
  }
  s += "<line class=\"axis\" x1=\"" + num(x0) + "\" y1=\"" + num(plot_bottom + 8) + "\" x2=\"" + num(x1) + "\" y2=\"" +
       num(plot_bottom + 8) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    s += "<text x=\"" + num(x(v)) + "\" y=\"" + num(plot_bottom + 26) + "\" text-anchor=\"middle\">" +
         csv::format(v, 3) + "</text>\n";
  }
  s += "</svg>\n";
  return s;
}

// ---- study grids -------------------------------------------------------------------

inline const std::vector<std::string>& study_header() {
  static const std::vector<std::string> h{"scenario", "method", "target", "regime", "sigma_z", "sigma_a",
                                          "sigma_y",  "n",      "alpha",  "bias",   "rmse",    "mce",
                                          "coverage", "mean_abs_error", "n_successful", "status"};
  return h;
}

inline std::string study_csv(const std::vector<GridRow>& rows) {
  std::string out = csv::join(study_header()) + "\n";
  auto g = [](double v) { return csv::format(v, 10); };
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out += csv::join({r.scenario, m.method, m.target, to_string(r.regime), std::to_string(r.sigma_z),
                      std::to_string(r.sigma_a), std::to_string(r.sigma_y), std::to_string(r.n), g(r.alpha),
                      g(m.abs_bias), g(m.rmse), g(m.mce), m.coverage ? g(*m.coverage) : "NA", g(m.mean_abs_error),
                      std::to_string(m.n_successful), r.status}) +
           "\n";
  }
  return out;
}

/// Column order n, alpha, Bias, RMSE, MCE, Coverage, preceded by method/target and the
/// sigma knobs.
inline std::string study_text(const std::vector<GridRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    auto fixed = [](double v, int digits) {
      if (std::isnan(v)) return std::string("NA");
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.*f", digits, v);
      return std::string(buf);
    };
    cells.push_back({m.method, m.target, to_string(r.regime),
                     std::to_string(r.sigma_z) + "/" + std::to_string(r.sigma_a) + "/" + std::to_string(r.sigma_y),
                     std::to_string(r.n), csv::format(r.alpha, 3), fixed(m.abs_bias, 3), fixed(m.rmse, 3),
                     fixed(m.mce, 4), m.coverage ? fixed(*m.coverage, 1) : "NA",
                     r.status});
  }
  return render_table({"method", "target", "regime", "sZ/sA/sY", "n", "alpha", "Bias", "RMSE", "MCE", "Coverage", "status"},
                      cells);
}

// ---- diagnostics ---------------------------------------------------------------------

inline std::string diagnostics_csv(const FirstStageDiagnostics& d) {
  std::string out = "statistic,label,value\n";
  for (Index t = 0; t < d.f_stat.size(); ++t)
    out += "f_stat,a" + std::to_string(t + 1) + "," + csv::format_exact(d.f_stat(t)) + "\n";
  for (Index t = 0; t < d.conditional_f.size(); ++t)
    out += "conditional_f,a" + std::to_string(t + 1) + "," + csv::format_exact(d.conditional_f(t)) + "\n";
  for (Index j = 0; j < d.vif.size(); ++j)
    out += "vif," + d.vif_labels[static_cast<std::size_t>(j)] + "," + csv::format_exact(d.vif(j)) + "\n";
  for (Index i = 0; i < d.z_correlations.rows(); ++i)
    for (Index j = 0; j < d.z_correlations.cols(); ++j)
      out += "z_correlation,z" + std::to_string(i + 1) + ":z" + std::to_string(j + 1) + "," +
             csv::format_exact(d.z_correlations(i, j)) + "\n";
  return out;
}

inline std::string diagnostics_text(const FirstStageDiagnostics& d) {
  std::vector<std::vector<std::string>> cells;
  for (Index t = 0; t < d.f_stat.size(); ++t)
    cells.push_back({"a" + std::to_string(t + 1), csv::format(d.f_stat(t), 5),
                     d.conditional_f.size() ? csv::format(d.conditional_f(t), 5) : "-"});
  std::string out = render_table({"treatment", "F", "conditional F"}, cells);
  cells.clear();
  for (Index j = 0; j < d.vif.size(); ++j)
    cells.push_back({d.vif_labels[static_cast<std::size_t>(j)], csv::format(d.vif(j), 5)});
  out += "\n" + render_table({"regressor", "VIF"}, cells);
  cells.clear();
  std::vector<std::string> header{""};
  for (Index j = 0; j < d.z_correlations.cols(); ++j) header.push_back("z" + std::to_string(j + 1));
  for (Index i = 0; i < d.z_correlations.rows(); ++i) {
    std::vector<std::string> row{"z" + std::to_string(i + 1)};
    for (Index j = 0; j < d.z_correlations.cols(); ++j) row.push_back(csv::format(d.z_correlations(i, j), 4));
    cells.push_back(row);
  }
  out += "\n" + render_table(header, cells);
  return out;
}

inline std::string balance_csv(const std::vector<BalanceRow>& rows) {
  std::string out = "covariate,correlation,flagged\n";
  for (const auto& r : rows) out += r.covariate + "," + csv::format_exact(r.correlation) + "," + (r.flagged ? "1" : "0") + "\n";
  return out;
}

}  // namespace tviv
