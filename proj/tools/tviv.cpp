// tviv: command-line front end for the time-varying IV library.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tviv/tviv.hpp"

namespace {

using namespace tviv;

enum Exit { kOk = 0, kConfig = 2, kData = 3, kNumerical = 4 };

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return kConfig;
    case ErrorCategory::data: return kData;
    case ErrorCategory::numerical: return kNumerical;
  }
  return 1;
}

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::numerical: return "numerical";
  }
  return "unknown";
}

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") std::cout << content;
  else csv::write_file(path, content);
}

// Shared method options for commands that estimate on a CSV panel.
struct MethodOptions {
  std::string conditioning = "complex";
  std::string instrument_model = "automatic";
  std::vector<std::string> controls;
  double ridge_tolerance = 0.01;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--conditioning", conditioning, "Instrument conditioning set: simple or complex")
        ->check(CLI::IsMember({"simple", "complex"}));
    cmd->add_option("--instrument-model", instrument_model, "automatic, logistic or linear")
        ->check(CLI::IsMember({"automatic", "logistic", "linear"}));
    cmd->add_option("--controls", controls, "Control columns (l<t>[_name] or bl_<name>) for both stages")
        ->delimiter(',');
    cmd->add_option("--ridge-tolerance", ridge_tolerance, "Stability tolerance for the ridge penalty search");
  }

  MethodSpec build(Method method, const PanelDataset& data) const {
    MethodSpec spec;
    spec.method = method;
    const Index t_count = data.periods();
    if (conditioning == "simple") {
      spec.conditioning = ConditioningSet::simple(t_count);
    } else {
      std::vector<std::size_t> all(data.confounder_count());
      for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
      spec.conditioning = ConditioningSet::complex(t_count, all);
    }
    if (instrument_model == "logistic") spec.instrument_model = InstrumentModel::logistic;
    else if (instrument_model == "linear") spec.instrument_model = InstrumentModel::linear;
    for (const auto& name : controls) add_control(spec.controls, data, name);
    if (method == Method::ridge_r2sls) {
      spec.ridge = RidgeOptions::defaults();
      spec.ridge->tolerance = ridge_tolerance;
    }
    return spec;
  }

  static void add_control(StageControls& c, const PanelDataset& data, const std::string& name) {
    for (std::size_t k = 0; k < data.baseline_names.size(); ++k)
      if ("bl_" + data.baseline_names[k] == name) {
        c.baseline.push_back(k);
        return;
      }
    for (std::size_t k = 0; k < data.confounder_count(); ++k)
      for (Index t = 1; t <= data.periods(); ++t)
        if (confounder_column(t, data.confounder_names[k]) == name) {
          c.confounders.emplace_back(k, t);
          return;
        }
    throw InvalidConfig("controls", "unknown control column '" + name + "'");
  }
};

// ---- simulate --------------------------------------------------------------------

struct SimulateCmd {
  std::string regime = "simple";
  long n = 1000;
  long periods = 3;
  double alpha = 0.5;
  int sigma_z = 0, sigma_a = 0, sigma_y = 0;
  std::uint64_t seed = 1;
  std::vector<double> true_beta;
  double rho = 0.8;
  std::string out;
  std::string truth;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("simulate", "Simulate a panel dataset and its truth sidecar");
    c->add_option("--regime", regime, "simple or complex");
    c->add_option("--n", n, "Number of subjects");
    c->add_option("--periods", periods, "Number of periods T");
    c->add_option("--alpha", alpha, "Instrument strength in (0, 1)");
    c->add_option("--sigma-z", sigma_z, "Quadratic L term in the instrument model (0/1)");
    c->add_option("--sigma-a", sigma_a, "Quadratic L term in the treatment model (0/1)");
    c->add_option("--sigma-y", sigma_y, "Quadratic L term in the outcome model (0/1)");
    c->add_option("--seed", seed, "Random seed");
    c->add_option("--true-beta", true_beta, "Per-period effects (default T..1)")->delimiter(',');
    c->add_option("--confounder-autocorrelation", rho, "AR(1) coefficient of L");
    c->add_option("--out", out, "Panel CSV path")->required();
    c->add_option("--truth", truth, "Truth sidecar path (default <out>.truth)");
    c->callback([this] { run(); });
  }

  SimConfig config() const {
    SimConfig cfg;
    cfg.regime = parse_regime(regime);
    cfg.n = n;
    cfg.periods = periods;
    cfg.alpha = alpha;
    cfg.sigma_z = sigma_z;
    cfg.sigma_a = sigma_a;
    cfg.sigma_y = sigma_y;
    cfg.seed = seed;
    cfg.confounder_autocorrelation = rho;
    if (!true_beta.empty()) cfg.true_beta = Eigen::Map<const VectorXd>(true_beta.data(), static_cast<Index>(true_beta.size()));
    return cfg;
  }

  void run() const {
    const auto cfg = config();
    const auto sim = simulate(cfg);
    write_csv(sim.data, out);
    csv::write_file(truth.empty() ? out + ".truth" : truth, truth_text(cfg, sim.truth));
  }
};

// ---- estimate --------------------------------------------------------------------

struct EstimateCmd {
  std::string input;
  std::vector<std::string> methods{"r2sls"};
  MethodOptions options;
  std::size_t bootstrap = 0;
  double level = 0.95;
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out;
  std::string text = "-";
  bool diagnostics = true;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("estimate", "Estimate per-period effects and the ATE from a panel CSV");
    c->add_option("--input", input, "Panel CSV")->required();
    c->add_option("--method", methods, "Method(s): standard_2sls, r2sls, gest_closed_form, ridge_r2sls, "
                                       "r2sls_probit, r2sls_probit_trick")
        ->delimiter(',');
    options.add_to(c);
    c->add_option("--bootstrap", bootstrap, "Bootstrap resamples for percentile CIs (0 = none)");
    c->add_option("--level", level, "Confidence level");
    c->add_option("--seed", seed, "Bootstrap seed");
    c->add_option("--threads", threads, "Worker cap (default: $TVIV_THREADS or all cores)");
    c->add_option("--out", out, "Results CSV path");
    c->add_option("--text", text, "Text report path ('-' for stdout)");
    c->add_flag("!--no-diagnostics", diagnostics, "Omit first-stage diagnostics from the text report");
    c->callback([this] { run(); });
  }

  void run() const {
    const auto data = read_csv(input);
    std::vector<ResultRow> rows;
    std::string report;
    for (const auto& name : methods) {
      const auto spec = options.build(parse_method(name), data);
      if (bootstrap > 0) {
        const auto boot = percentile_bootstrap(data, spec, bootstrap, level, seed, threads);
        for (auto& r : result_rows(boot.point, &boot)) rows.push_back(std::move(r));
        if (boot.failures > 0)
          report += name + ": " + std::to_string(boot.failures) + " of " + std::to_string(boot.b) +
                    " resamples failed\n";
        if (boot.point.ridge_lambda) report += name + ": selected lambda " + csv::format(*boot.point.ridge_lambda) + "\n";
      } else {
        const auto est = estimate(data, spec);
        for (auto& r : result_rows(est)) rows.push_back(std::move(r));
        if (est.ridge_lambda) report += name + ": selected lambda " + csv::format(*est.ridge_lambda) + "\n";
      }
    }
    if (!out.empty()) csv::write_file(out, results_csv(rows));
    if (text.empty()) return;
    std::string body = results_text(rows, level) + report;
    if (diagnostics) {
      const auto spec = options.build(parse_method(methods.front()), data);
      try {
        body += "\nFirst-stage diagnostics (" + methods.front() + " instruments)\n" + diagnostics_text(diagnose(data, spec));
      } catch (const Error& e) {
        body += std::string("\nFirst-stage diagnostics unavailable: ") + e.what() + "\n";
      }
    }
    emit(text, body);
  }
};

// ---- study -----------------------------------------------------------------------

struct StudyCmd {
  std::vector<std::string> regimes{"simple", "complex"};
  std::vector<long> sizes{1000, 5000};
  std::vector<double> alphas{0.1, 0.3, 0.5};
  std::vector<std::string> sigmas{"0/0/0"};
  std::vector<std::string> methods{"standard_2sls", "r2sls"};
  long periods = 3;
  std::size_t reps = 200;
  std::size_t boot = 200;
  double level = 0.95;
  std::uint64_t seed = 1;
  double rho = 0.8;
  unsigned threads = 0;
  std::string out;
  std::string text = "-";

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("study", "Run a Monte Carlo scenario grid");
    c->add_option("--regime", regimes, "Regimes")->delimiter(',');
    c->add_option("--n", sizes, "Sample sizes")->delimiter(',');
    c->add_option("--alpha", alphas, "Instrument strengths")->delimiter(',');
    c->add_option("--sigma", sigmas, "Misspecification knobs as sZ/sA/sY, e.g. 0/0/1")->delimiter(',');
    c->add_option("--method", methods, "Methods")->delimiter(',');
    c->add_option("--periods", periods, "Number of periods T");
    c->add_option("--reps", reps, "Replications per scenario");
    c->add_option("--boot", boot, "Bootstrap resamples per replication (0 = no coverage)");
    c->add_option("--level", level, "Confidence level");
    c->add_option("--seed", seed, "Base seed");
    c->add_option("--confounder-autocorrelation", rho, "AR(1) coefficient of L");
    c->add_option("--threads", threads, "Worker cap (default: $TVIV_THREADS or all cores)");
    c->add_option("--out", out, "Metrics CSV path");
    c->add_option("--text", text, "Text table path ('-' for stdout)");
    c->callback([this] { run(); });
  }

  static std::array<int, 3> parse_sigma(const std::string& s) {
    std::array<int, 3> v{};
    const auto parts = csv::split(s, '/');
    if (parts.size() != 3) throw InvalidConfig("sigma", "expected sZ/sA/sY, got '" + s + "'");
    for (std::size_t i = 0; i < 3; ++i) {
      if (parts[i] != "0" && parts[i] != "1") throw InvalidConfig("sigma", "knobs must be 0 or 1, got '" + s + "'");
      v[i] = parts[i] == "1";
    }
    return v;
  }

  std::vector<LabelledScenario> grid() const {
    std::vector<LabelledScenario> out;
    for (const auto& regime_name : regimes) {
      const Regime regime = parse_regime(regime_name);
      for (const auto& sigma : sigmas) {
        const auto s = parse_sigma(sigma);
        for (long n : sizes)
          for (double alpha : alphas) {
            Scenario sc;
            sc.sim.regime = regime;
            sc.sim.n = n;
            sc.sim.periods = periods;
            sc.sim.alpha = alpha;
            sc.sim.sigma_z = s[0];
            sc.sim.sigma_a = s[1];
            sc.sim.sigma_y = s[2];
            sc.sim.confounder_autocorrelation = rho;
            for (const auto& m : methods) sc.methods.push_back(StudyMethod::of(study_method_spec(parse_method(m), regime, periods)));
            sc.n_reps = reps;
            sc.b_boot = boot;
            sc.level = level;
            sc.base_seed = seed;
            std::ostringstream label;
            label << regime_name << "_s" << s[0] << s[1] << s[2] << "_n" << n << "_a" << alpha;
            out.push_back({label.str(), std::move(sc)});
          }
      }
    }
    return out;
  }

  void run() const {
    const auto scenarios = grid();
    for (const auto& s : scenarios) s.scenario.check();
    const auto rows = run_grid(scenarios, threads);
    if (!out.empty()) csv::write_file(out, study_csv(rows));
    if (!text.empty()) emit(text, study_text(rows));
  }
};

// ---- diagnose --------------------------------------------------------------------

struct DiagnoseCmd {
  std::string input;
  std::string method = "standard_2sls";
  MethodOptions options;
  std::string out;
  std::string text = "-";
  std::string balance_instrument;
  std::vector<std::string> balance_covariates;
  std::string balance_out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("diagnose", "First-stage F, conditional F, VIF and instrument correlations");
    c->add_option("--input", input, "Panel CSV")->required();
    c->add_option("--method", method, "Method whose instruments are diagnosed");
    options.add_to(c);
    c->add_option("--out", out, "Diagnostics CSV path");
    c->add_option("--text", text, "Text report path ('-' for stdout)");
    c->add_option("--balance-instrument", balance_instrument, "Instrument column for a balance table, e.g. z1");
    c->add_option("--balance-covariates", balance_covariates, "Covariate columns for the balance table")
        ->delimiter(',');
    c->add_option("--balance-out", balance_out, "Balance table CSV path");
    c->callback([this] { run(); });
  }

  void run() const {
    const auto data = read_csv(input);
    const auto d = diagnose(data, options.build(parse_method(method), data));
    if (!out.empty()) csv::write_file(out, diagnostics_csv(d));
    std::string body = diagnostics_text(d);
    if (!balance_instrument.empty()) {
      if (balance_covariates.empty()) throw InvalidConfig("balance-covariates", "required with --balance-instrument");
      std::vector<std::pair<std::string, VectorXd>> covs;
      for (const auto& name : balance_covariates) covs.emplace_back(name, panel_column(data, name));
      const auto rows = balance_table(panel_column(data, balance_instrument), covs, balance_instrument);
      if (!balance_out.empty()) csv::write_file(balance_out, balance_csv(rows));
      std::vector<std::vector<std::string>> cells;
      for (const auto& r : rows) cells.push_back({r.covariate, csv::format(r.correlation, 4), r.flagged ? "*" : ""});
      body += "\nBalance against " + balance_instrument + " (* |corr| > 0.08)\n" +
              render_table({"covariate", "corr", "flag"}, cells);
    }
    if (!text.empty()) emit(text, body);
  }
};

// ---- build-instrument ------------------------------------------------------------

struct BuildInstrumentCmd {
  std::string records;
  std::string variant = "calendar";
  bool leave_one_out = false;
  std::string panel;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("build-instrument", "Build preference instruments from prescription records");
    c->add_option("--records", records, "Long-format records CSV")->required();
    c->add_option("--variant", variant, "calendar (PP^Cal) or follow_up (PP^t)");
    c->add_flag("--leave-one-out", leave_one_out, "Exclude each subject's own record from its cell");
    c->add_option("--panel", panel, "Panel CSV with an id column; its z columns are replaced");
    c->add_option("--out", out, "Output CSV path")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    const auto series = build_preference(read_records(records), parse_preference_variant(variant), leave_one_out);
    if (panel.empty()) csv::write_file(out, to_csv(series));
    else write_csv(merge_instrument(read_csv(panel), series), out);
  }
};

// ---- forest-plot -----------------------------------------------------------------

struct ForestPlotCmd {
  std::string input;
  std::string out;
  std::string target = "ATE";
  std::string title;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("forest-plot", "Render a results CSV as a forest-plot SVG");
    c->add_option("--input", input, "Results CSV (method, estimate, ci_lower, ci_upper)")->required();
    c->add_option("--out", out, "SVG path")->required();
    c->add_option("--target", target, "Target to plot, or 'all'");
    c->add_option("--title", title, "Plot title");
    c->callback([this] { run(); });
  }

  void run() const {
    auto rows = read_results(input);
    if (target != "all") {
      std::erase_if(rows, [&](const ResultRow& r) { return r.target != target; });
      if (rows.empty()) throw MalformedResults("no rows with target " + target);
    }
    csv::write_file(out, forest_plot_svg(rows, title));
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-varying instrumental-variable estimation"};
  app.require_subcommand(1);
  app.set_config("--config", "", "INI config file; [command] sections hold that command's options");
  app.fallthrough();

  SimulateCmd simulate_cmd;
  EstimateCmd estimate_cmd;
  StudyCmd study_cmd;
  DiagnoseCmd diagnose_cmd;
  BuildInstrumentCmd build_cmd;
  ForestPlotCmd forest_cmd;
  simulate_cmd.add(app);
  estimate_cmd.add(app);
  study_cmd.add(app);
  diagnose_cmd.add(app);
  build_cmd.add(app);
  forest_cmd.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  } catch (const tviv::Error& e) {
    std::cerr << "tviv: error [" << category_name(e.category()) << "] " << e.what() << "\n";
    if (auto* ic = dynamic_cast<const tviv::InvalidConfig*>(&e)) std::cerr << "field: " << ic->field() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "tviv: error " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
