// Command-line front end: seeded experiment runs, parameter sweeps,
// verification suites, step-size suggestions, and trace post-processing.
//
// Exit codes: 0 success, 1 validation error, 2 runtime divergence,
// 3 verification failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "gsmgrad/harness.hpp"
#include "gsmgrad/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitVerification = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int report_runs(const std::vector<gsmgrad::RunSummary>& summaries,
                const std::filesystem::path& out_dir) {
  bool any_diverged = false;
  for (const gsmgrad::RunSummary& s : summaries) {
    std::cout << "seed " << s.seed << ": "
              << (s.diverged ? "DIVERGED" : "ok")
              << "  iterations=" << s.iterations
              << "  final_stationarity=" << s.final_stationarity
              << "  avg_ca=" << s.avg_ca << "  max_ca=" << s.max_ca << "\n";
    if (s.diverged) {
      std::cout << "  " << s.error << "\n";
      any_diverged = true;
    }
  }
  std::cout << "wrote " << summaries.size() << " trace(s) + summary.json to "
            << out_dir.string() << "\n";
  return any_diverged ? kExitDivergence : kExitOk;
}

struct GridAxis {
  std::string key;
  std::vector<std::string> values;
};

GridAxis parse_grid_axis(const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 >= spec.size())
    throw std::invalid_argument("--grid expects key=v1,v2,..., got '" + spec +
                                "'");
  GridAxis axis;
  axis.key = spec.substr(0, eq);
  for (const std::string& v :
       gsmgrad::detail::split(spec.substr(eq + 1), ','))
    axis.values.push_back(gsmgrad::detail::trim(v));
  if (axis.values.empty())
    throw std::invalid_argument("--grid axis '" + axis.key + "' has no values");
  return axis;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conflict-avoidant multi-objective gradient methods under "
               "generalized smoothness"};
  app.require_subcommand(1);

  std::string config_path;
  int jobs = 1;

  auto* cmd_run = app.add_subcommand("run", "run one experiment config");
  cmd_run->add_option("config", config_path, "key=value config file")
      ->required();
  cmd_run->add_option("--jobs", jobs, "concurrent seeds (default 1)");

  auto* cmd_sweep =
      app.add_subcommand("sweep", "run a cartesian grid of overrides");
  std::vector<std::string> grid_specs;
  cmd_sweep->add_option("config", config_path, "key=value config file")
      ->required();
  cmd_sweep->add_option("--grid", grid_specs, "axis as key=v1,v2,...")
      ->required();
  cmd_sweep->add_option("--jobs", jobs, "concurrent seeds per run");

  auto* cmd_verify = app.add_subcommand("verify", "run a verification suite");
  std::string suite;
  bool verify_json = false;
  cmd_verify
      ->add_option("suite", suite,
                   "simplex | subproblem | lemmas | optimizers | all")
      ->required();
  cmd_verify->add_flag("--json", verify_json, "emit the report as JSON");

  auto* cmd_suggest =
      app.add_subcommand("suggest", "step sizes for a target accuracy");
  double epsilon = 0.0;
  std::string regime;
  double alpha_hint = 0.1, beta_hint = 0.1;
  cmd_suggest->add_option("--epsilon", epsilon, "target accuracy")->required();
  cmd_suggest
      ->add_option("--regime", regime,
                   "det-average | det-iterwise | stoch-average | "
                   "stoch-iterwise")
      ->required();
  cmd_suggest->add_option("--alpha", alpha_hint,
                          "alpha hint (det-average only)");
  cmd_suggest->add_option("--beta", beta_hint, "beta hint (det-average only)");

  auto* cmd_scan = app.add_subcommand(
      "smoothness-scan", "local smoothness vs gradient norm along a trace");
  std::string trace_path, scan_out;
  cmd_scan->add_option("trace", trace_path, "trace CSV produced by `run`")
      ->required();
  cmd_scan
      ->add_option("--config", config_path,
                   "config the trace was produced with (problem oracle)")
      ->required();
  cmd_scan->add_option("--out", scan_out,
                       "write per-sample CSV here (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cmd_run) {
      const gsmgrad::ExperimentConfig cfg =
          gsmgrad::parse_config(read_file(config_path));
      const auto summaries = gsmgrad::run_experiment(cfg, jobs);
      return report_runs(summaries,
                         gsmgrad::resolve_output_dir(cfg.output_dir));
    }

    if (*cmd_sweep) {
      const std::string base = read_file(config_path);
      std::vector<GridAxis> axes;
      for (const std::string& spec : grid_specs)
        axes.push_back(parse_grid_axis(spec));
      const gsmgrad::ExperimentConfig base_cfg = gsmgrad::parse_config(base);

      std::vector<std::size_t> index(axes.size(), 0);
      int exit_code = kExitOk;
      for (;;) {
        std::ostringstream overrides, slug;
        for (std::size_t a = 0; a < axes.size(); ++a) {
          overrides << "\n" << axes[a].key << " = " << axes[a].values[index[a]];
          if (a) slug << "_";
          slug << axes[a].key << "=" << axes[a].values[index[a]];
        }
        overrides << "\noutput_dir = " << base_cfg.output_dir << "/"
                  << slug.str();
        const gsmgrad::ExperimentConfig cfg =
            gsmgrad::parse_config(base + overrides.str());
        std::cout << "[sweep] " << slug.str() << "\n";
        const auto summaries = gsmgrad::run_experiment(cfg, jobs);
        exit_code = std::max(
            exit_code, report_runs(summaries, gsmgrad::resolve_output_dir(
                                                  cfg.output_dir)));
        std::size_t a = 0;
        for (; a < axes.size(); ++a) {
          if (++index[a] < axes[a].values.size()) break;
          index[a] = 0;
        }
        if (a == axes.size()) break;
      }
      return exit_code;
    }

    if (*cmd_verify) {
      const gsmgrad::VerifyReport rep = gsmgrad::verify(suite);
      if (verify_json) {
        nlohmann::json j;
        j["suite"] = rep.suite;
        j["pass"] = rep.pass;
        j["seconds"] = rep.seconds;
        j["checks"] = nlohmann::json::array();
        for (const gsmgrad::VerifyCheck& c : rep.checks)
          j["checks"].push_back(
              {{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
        std::cout << j.dump(2) << "\n";
      } else {
        for (const gsmgrad::VerifyCheck& c : rep.checks) {
          std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.name;
          if (!c.detail.empty()) std::cout << "  (" << c.detail << ")";
          std::cout << "\n";
        }
        std::cout << "suite " << rep.suite << ": "
                  << (rep.pass ? "PASS" : "FAIL") << " (" << rep.checks.size()
                  << " checks, " << rep.seconds << " s)\n";
      }
      return rep.pass ? kExitOk : kExitVerification;
    }

    if (*cmd_suggest) {
      const gsmgrad::HyperparamSuggestion s =
          gsmgrad::suggest_hyperparams(epsilon, regime, alpha_hint, beta_hint);
      std::cout << gsmgrad::suggestion_to_json(s).dump(2) << "\n";
      return kExitOk;
    }

    if (*cmd_scan) {
      const gsmgrad::ExperimentConfig cfg =
          gsmgrad::parse_config(read_file(config_path));
      const gsmgrad::ObjectiveProblem problem =
          gsmgrad::builtin_problem(cfg.problem, cfg.m, cfg.problem_params);
      const auto records =
          gsmgrad::read_trace_csv(trace_path, problem.m, problem.K);
      const gsmgrad::ScanResult scan =
          gsmgrad::local_smoothness_scan(problem, records);

      std::ostringstream csv;
      csv << "task,t,grad_norm,local_L\n";
      for (const gsmgrad::SmoothnessSample& s : scan.samples)
        csv << s.task << "," << s.t << ","
            << gsmgrad::detail::format17(s.grad_norm) << ","
            << gsmgrad::detail::format17(s.local_L) << "\n";
      if (scan_out.empty()) {
        std::cout << csv.str();
      } else {
        gsmgrad::write_file_atomic(scan_out, csv.str());
        std::cout << "wrote " << scan.samples.size() << " samples to "
                  << scan_out << "\n";
      }
      std::cout << "# skipped pairs (negligible movement): " << scan.skipped
                << "\n";
      for (int k = 0; k < problem.K; ++k) {
        const gsmgrad::RegressionSummary r = gsmgrad::regress_scan(scan, k);
        std::cout << "# task " << k << ": n=" << r.n << " slope=" << r.slope
                  << " intercept=" << r.intercept << " pearson=" << r.pearson
                  << "\n";
      }
      return kExitOk;
    }
  } catch (const gsmgrad::NumericOverflowError& e) {
    std::cerr << "runtime divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return kExitValidation;
  } catch (const gsmgrad::UnsupportedError& e) {
    std::cerr << "unsupported request: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitOk;
}
