#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "support.hpp"
#include "tviv/panel.hpp"
#include "tviv/panel_csv.hpp"
#include "tviv/simulator.hpp"

using namespace tviv;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "tviv_test_panel";
  std::filesystem::create_directories(dir);
  return dir / name;
}

PanelDataset small_panel() {
  SimConfig cfg;
  cfg.regime = Regime::complex;
  cfg.n = 5;
  cfg.seed = 3;
  return simulate(cfg).data;
}

csv::Table table_from(const std::string& text) {
  std::istringstream in(text);
  return csv::parse(in);
}

}  // namespace

TEST(Validate, SimulatedDatasetsAreClean) {
  for (auto regime : {Regime::simple, Regime::complex})
    for (double alpha : {0.1, 0.3, 0.5, 0.9})
      for (int s = 0; s < 8; ++s) {
        SimConfig cfg;
        cfg.regime = regime;
        cfg.n = 200;
        cfg.alpha = alpha;
        cfg.sigma_z = s & 1;
        cfg.sigma_a = (s >> 1) & 1;
        cfg.sigma_y = (s >> 2) & 1;
        cfg.seed = static_cast<std::uint64_t>(s) + 11;
        EXPECT_TRUE(validate(simulate(cfg).data).empty());
      }
}

TEST(Validate, NonBinaryTreatmentNamesCell) {
  auto d = small_panel();
  d.a(3, 1) = 0.5;
  const auto v = validate(d);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].block, "A");
  EXPECT_EQ(v[0].subject, 3);
  EXPECT_EQ(v[0].period, 2);
  EXPECT_EQ(v[0].reason, "non-binary");
}

TEST(Validate, NaNOutcomeNamesY) {
  auto d = small_panel();
  d.y(2) = std::numeric_limits<double>::quiet_NaN();
  const auto v = validate(d);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].block, "Y");
  EXPECT_EQ(v[0].subject, 2);
  EXPECT_THROW(require_valid(d), ValidationFailed);
}

TEST(Validate, ShapeMismatch) {
  auto d = small_panel();
  d.a.conservativeResize(4, Eigen::NoChange);
  const auto v = validate(d);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].block, "A");
}

TEST(PanelCsv, ReadsFiveRowWideFile) {
  const auto t = table_from(
      "z1,z2,z3,a1,a2,a3,l1,l2,l3,y\n"
      "1,0,1,1,0,1,0.1,0.2,0.3,4.5\n"
      "0,0,1,0,0,1,-1,2,3,1\n"
      "1,1,1,1,1,1,0,0,0,6\n"
      "0,1,0,0,1,0,5,5,5,-2\n"
      "1,0,0,1,0,0,1e-3,2,3,0\n");
  const auto d = parse_panel(t);
  EXPECT_EQ(d.subjects(), 5);
  EXPECT_EQ(d.periods(), 3);
  EXPECT_EQ(d.confounder_count(), 1u);
  EXPECT_EQ(d.a(2, 1), 1.0);
  EXPECT_EQ(d.confounder(0, 1)(4), 1e-3);
  EXPECT_EQ(d.y(3), -2.0);
}

TEST(PanelCsv, MissingTreatmentColumn) {
  const auto t = table_from("z1,z2,z3,a1,a3,y\n1,0,1,1,1,4\n");
  try {
    parse_panel(t);
    FAIL();
  } catch (const MissingColumn& e) {
    EXPECT_EQ(e.column(), "a2");
  }
}

TEST(PanelCsv, MissingOutcome) { EXPECT_THROW(parse_panel(table_from("z1,a1\n1,1\n")), MissingColumn); }

TEST(PanelCsv, ParseErrorReportsRowAndColumn) {
  const auto t = table_from("z1,a1,y\n1,1,2\n0,0,abc\n");
  try {
    parse_panel(t);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.row(), 2u);
    EXPECT_EQ(e.column(), "y");
  }
}

TEST(PanelCsv, InvalidValuesFailValidation) {
  EXPECT_THROW(parse_panel(table_from("z1,a1,y\n1,2,2\n")), ValidationFailed);
}

TEST(PanelCsv, RaggedRow) { EXPECT_THROW(table_from("z1,a1,y\n1,1\n"), ParseError); }

TEST(PanelCsv, SchemaRenamesColumns) {
  CsvSchema schema;
  schema.rename = {{"instrument1", "z1"}, {"treated1", "a1"}, {"outcome", "y"}};
  const auto d = parse_panel(table_from("instrument1,treated1,outcome,extra\n0.3,1,2.5,foo\n"), schema);
  EXPECT_EQ(d.z(0, 0), 0.3);
  EXPECT_EQ(d.y(0), 2.5);
}

TEST(PanelCsv, RoundTripIsExact) {
  SimConfig cfg;
  cfg.regime = Regime::complex;
  cfg.n = 1000;
  cfg.sigma_y = 1;
  auto d = simulate(cfg).data;
  d.baseline = tviv::testing::random_normal(1000, 2, 5) * 1e-7;
  d.baseline_names = {"age", "bmi"};
  const auto path = temp_file("roundtrip.csv");
  write_csv(d, path.string());
  const auto back = read_csv(path.string());
  EXPECT_EQ(back.z, d.z);
  EXPECT_EQ(back.a, d.a);
  EXPECT_EQ(back.y, d.y);
  ASSERT_EQ(back.confounders.size(), 1u);
  EXPECT_EQ(back.confounders[0], d.confounders[0]);
  EXPECT_EQ(back.baseline, d.baseline);
  EXPECT_EQ(back.baseline_names, d.baseline_names);

  std::ifstream in(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 1001u);
}

TEST(PanelCsv, NamedConfoundersAndIdsRoundTrip) {
  auto d = small_panel();
  d.confounders.push_back(d.confounders[0] * 2.0);
  d.confounder_names = {"hba1c", "bmi"};
  d.ids = {"s1", "s2", "s3", "s4", "s5"};
  const auto back = parse_panel(table_from(to_csv(d)));
  EXPECT_EQ(back.confounder_names, d.confounder_names);
  EXPECT_EQ(back.confounders[1], d.confounders[1]);
  EXPECT_EQ(back.ids, d.ids);
  EXPECT_EQ(to_csv(back), to_csv(d));
}

TEST(PanelCsv, EmptyDatasetWritesHeaderOnly) {
  PanelDataset d;
  d.z.resize(0, 2);
  d.a.resize(0, 2);
  d.y.resize(0);
  d.baseline.resize(0, 0);
  EXPECT_TRUE(validate(d).empty());
  EXPECT_EQ(to_csv(d), "z1,z2,a1,a2,y\n");
}

TEST(PanelCsv, MissingFileIsIoError) { EXPECT_THROW(read_csv("/nonexistent/panel.csv"), IoError); }

TEST(PanelColumn, LooksUpCanonicalNames) {
  auto d = small_panel();
  EXPECT_EQ(panel_column(d, "z2"), d.z.col(1));
  EXPECT_EQ(panel_column(d, "l3"), d.confounder(0, 3));
  EXPECT_EQ(panel_column(d, "y"), d.y);
  EXPECT_THROW(panel_column(d, "a9"), MissingColumn);
  EXPECT_THROW(panel_column(d, "bl_age"), MissingColumn);
}

TEST(ConditioningSet, PeriodOneMayNotUseLags) {
  const auto d = small_panel();
  auto c = ConditioningSet::complex(3);
  EXPECT_NO_THROW(c.check(d));
  c.periods[0].lag_instrument = true;
  EXPECT_THROW(c.check(d), InvalidConfig);
  EXPECT_THROW(ConditioningSet::complex(3, {4}).check(d), InvalidConfig);
  EXPECT_THROW(ConditioningSet::simple(2).check(d), InvalidConfig);
}

TEST(CounterfactualTarget, AlwaysVersusNeverIsSum) {
  VectorXd beta(3);
  beta << 3, 2, 1;
  EXPECT_EQ(CounterfactualTarget::always_vs_never(3).contrast(beta), 6.0);
  EXPECT_THROW(CounterfactualTarget::always_vs_never(2).contrast(beta), InvalidConfig);
}

TEST(SelectRows, KeepsSubjectsTogether) {
  auto d = small_panel();
  d.ids = {"a", "b", "c", "d", "e"};
  const auto s = d.select_rows({4, 4, 0});
  EXPECT_EQ(s.subjects(), 3);
  EXPECT_EQ(s.z.row(0), d.z.row(4));
  EXPECT_EQ(s.a.row(1), d.a.row(4));
  EXPECT_EQ(s.confounders[0].row(2), d.confounders[0].row(0));
  EXPECT_EQ(s.y(2), d.y(0));
  EXPECT_EQ(s.ids[0], "e");
}
