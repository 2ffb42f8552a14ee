#pragma once

// Preference-based instruments from long-format prescription records.
//
//   calendar   value(i, t) = treated share of cluster(i) in the calendar period of (i, t)
//   follow_up  value(i, t) = treated share of cluster(i) among records at follow-up time t
//
// With leave_one_out the subject's own record is removed from its cell.

#include <Eigen/Dense>

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tviv/csv.hpp"
#include "tviv/error.hpp"
#include "tviv/panel.hpp"

namespace tviv {

struct PrescriptionRecord {
  std::string subject_id;
  std::string cluster_id;
  long calendar_period = 0;
  long follow_up_time = 1;
  int treatment = 0;
};

enum class PreferenceVariant { calendar, follow_up };

inline std::string to_string(PreferenceVariant v) { return v == PreferenceVariant::calendar ? "calendar" : "follow_up"; }

inline PreferenceVariant parse_preference_variant(const std::string& s) {
  if (s == "calendar" || s == "pp_cal") return PreferenceVariant::calendar;
  if (s == "follow_up" || s == "pp_t") return PreferenceVariant::follow_up;
  throw InvalidConfig("variant", "expected calendar or follow_up, got '" + s + "'");
}

struct PreferenceSeries {
  PreferenceVariant variant = PreferenceVariant::calendar;
  bool leave_one_out = false;
  std::vector<std::string> subjects;  // order of first appearance
  MatrixXd values;                    // subjects x T
  std::map<std::string, std::size_t> cluster_sizes;  // records per cluster
};

inline std::vector<PrescriptionRecord> parse_records(const csv::Table& table) {
  const auto sid = table.require("subject_id");
  const auto cid = table.require("cluster_id");
  const auto cal = table.require("calendar_period");
  const auto fut = table.require("follow_up_time");
  const auto trt = table.require("treatment");
  std::vector<PrescriptionRecord> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    PrescriptionRecord r;
    r.subject_id = row[sid];
    r.cluster_id = row[cid];
    r.calendar_period = csv::to_long(row[cal], i + 1, "calendar_period");
    r.follow_up_time = csv::to_long(row[fut], i + 1, "follow_up_time");
    const long t = csv::to_long(row[trt], i + 1, "treatment");
    if (r.follow_up_time < 1) throw ParseError(i + 1, "follow_up_time", "must be >= 1");
    if (t != 0 && t != 1) throw ParseError(i + 1, "treatment", "must be 0 or 1");
    r.treatment = static_cast<int>(t);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<PrescriptionRecord> read_records(const std::string& path) {
  return parse_records(csv::read_file(path));
}

/// Preference instrument for every (subject, follow-up time). Every subject needs exactly
/// one record at each follow-up time 1..T, where T is the largest time in the records.
inline PreferenceSeries build_preference(const std::vector<PrescriptionRecord>& records, PreferenceVariant variant,
                                         bool leave_one_out = false) {
  if (records.empty()) throw InvalidConfig("records", "no prescription records");
  struct Cell {
    double treated = 0;
    double count = 0;
  };
  auto period_of = [variant](const PrescriptionRecord& r) {
    return variant == PreferenceVariant::calendar ? r.calendar_period : r.follow_up_time;
  };

  PreferenceSeries out;
  out.variant = variant;
  out.leave_one_out = leave_one_out;
  std::map<std::pair<std::string, long>, Cell> cells;
  std::unordered_map<std::string, std::size_t> subject_index;
  long t_count = 0;
  for (const auto& r : records) {
    auto& cell = cells[{r.cluster_id, period_of(r)}];
    cell.treated += r.treatment;
    cell.count += 1;
    ++out.cluster_sizes[r.cluster_id];
    if (subject_index.emplace(r.subject_id, out.subjects.size()).second) out.subjects.push_back(r.subject_id);
    t_count = std::max(t_count, r.follow_up_time);
  }

  const auto n = static_cast<Index>(out.subjects.size());
  out.values = MatrixXd::Constant(n, t_count, -1.0);
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& r = records[k];
    const Index i = static_cast<Index>(subject_index.at(r.subject_id));
    const Index t = r.follow_up_time - 1;
    if (out.values(i, t) >= 0.0)
      throw ParseError(k + 1, "follow_up_time", "duplicate record for subject " + r.subject_id);
    const auto& cell = cells.at({r.cluster_id, period_of(r)});
    double treated = cell.treated, count = cell.count;
    if (leave_one_out) {
      treated -= r.treatment;
      count -= 1;
    }
    if (count <= 0) throw EmptyCell(r.cluster_id, period_of(r));
    out.values(i, t) = treated / count;
  }
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < t_count; ++t)
      if (out.values(i, t) < 0.0) throw IncompleteSeries(out.subjects[static_cast<std::size_t>(i)], t + 1);
  return out;
}

inline PreferenceSeries build_pp_cal(const std::vector<PrescriptionRecord>& records, bool leave_one_out = false) {
  return build_preference(records, PreferenceVariant::calendar, leave_one_out);
}

inline PreferenceSeries build_pp_t(const std::vector<PrescriptionRecord>& records, bool leave_one_out = false) {
  return build_preference(records, PreferenceVariant::follow_up, leave_one_out);
}

/// id, z1..zT
inline std::string to_csv(const PreferenceSeries& s) {
  std::vector<std::string> header{"id"};
  for (Index t = 1; t <= s.values.cols(); ++t) header.push_back("z" + std::to_string(t));
  std::string out = csv::join(header) + "\n";
  for (Index i = 0; i < s.values.rows(); ++i) {
    std::vector<std::string> row{s.subjects[static_cast<std::size_t>(i)]};
    for (Index t = 0; t < s.values.cols(); ++t) row.push_back(csv::format_exact(s.values(i, t)));
    out += csv::join(row) + "\n";
  }
  return out;
}

/// Replaces the panel's instruments with the series, matching rows on subject id.
inline PanelDataset merge_instrument(PanelDataset panel, const PreferenceSeries& s) {
  if (panel.ids.empty()) throw MissingColumn("id");
  if (s.values.cols() != panel.periods())
    throw InvalidConfig("periods", "instrument has " + std::to_string(s.values.cols()) + " periods, panel has " +
                                       std::to_string(panel.periods()));
  std::unordered_map<std::string, Index> row_of;
  for (std::size_t i = 0; i < s.subjects.size(); ++i) row_of.emplace(s.subjects[i], static_cast<Index>(i));
  for (Index i = 0; i < panel.subjects(); ++i) {
    const auto& id = panel.ids[static_cast<std::size_t>(i)];
    const auto it = row_of.find(id);
    if (it == row_of.end()) throw IncompleteSeries(id, 1);
    panel.z.row(i) = s.values.row(it->second);
  }
  require_valid(panel);
  return panel;
}

}  // namespace tviv
