// Command-line front end: run, sweep, export, list-problems.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vbllbo/benchmarks.hpp"
#include "vbllbo/harness.hpp"

namespace fs = std::filesystem;
using namespace vbllbo;

namespace {

struct Overrides {
  std::vector<std::uint64_t> seeds;
  std::string out;
  int jobs = 1;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seeds, "Seed(s) to run, replacing the config's list");
  cmd->add_option("--out", o.out, "Output directory (default: config value under $VBLLBO_OUT)");
  cmd->add_option("--jobs", o.jobs, "Seeds run concurrently")->check(CLI::PositiveNumber);
}

ExperimentConfig apply_overrides(ExperimentConfig cfg, const Overrides& o) {
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (!o.out.empty()) {
    cfg.output_dir = o.out;
  } else if (const char* root = std::getenv("VBLLBO_OUT"); root && *root && fs::path(cfg.output_dir).is_relative()) {
    cfg.output_dir = (fs::path(root) / cfg.output_dir).string();
  }
  return cfg;
}

int report(const std::vector<RunRecord>& records, const std::string& dir) {
  int failed = 0;
  for (const auto& r : records) {
    if (r.failed) {
      ++failed;
      std::cerr << "seed " << r.seed << " failed: " << r.error << "\n";
    } else if (!r.rows.empty()) {
      std::cout << "seed " << r.seed << ": " << r.metric_name << " = " << r.rows.back().metric << "\n";
    }
  }
  std::cout << "results in " << dir << "\n";
  return failed > 0 ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"VBLL surrogate Bayesian optimization harness"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides run_o;
  auto* run = app.add_subcommand("run", "Run every seed of an experiment config");
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  add_overrides(run, run_o);

  std::string axis;
  std::vector<double> values;
  Overrides sweep_o;
  auto* sw = app.add_subcommand("sweep", "Run a config across values of one hyperparameter");
  sw->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  sw->add_option("--axis", axis, "Hyperparameter to vary")->required()->check(CLI::IsMember(sweep_axes()));
  sw->add_option("--values", values, "Values of the axis")->required();
  add_overrides(sw, sweep_o);

  std::string export_dir;
  std::string metric = "best";
  std::optional<double> max_hv;
  std::string export_out;
  auto* ex = app.add_subcommand("export", "Aggregate per-seed records into mean and 10/90 percentile curves");
  ex->add_option("dir", export_dir, "Directory holding seed_*.csv")->required()->check(CLI::ExistingDirectory);
  ex->add_option("--metric", metric, "best | hv | logdiff_hv")
      ->check(CLI::IsMember({"best", "hv", "logdiff_hv"}));
  ex->add_option("--max-hv", max_hv, "Maximum attainable hypervolume (logdiff_hv)");
  ex->add_option("--out", export_out, "Output file (default: <dir>/curves_<metric>.csv)");

  auto* list = app.add_subcommand("list-problems", "Print registered benchmark problems");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      const ExperimentConfig cfg = apply_overrides(load_config(config_path), run_o);
      return report(run_experiment(cfg, run_o.jobs), cfg.output_dir);
    }
    if (sw->parsed()) {
      const ExperimentConfig cfg = apply_overrides(load_config(config_path), sweep_o);
      int code = 0;
      for (const auto& result : sweep(cfg, axis, values, sweep_o.jobs)) {
        std::cout << axis << " = " << result.value << "\n";
        code = std::max(code, report(result.records, result.output_dir));
      }
      return code;
    }
    if (ex->parsed()) {
      const CurveMetric m = metric == "best" ? CurveMetric::kBest
                            : metric == "hv" ? CurveMetric::kHv
                                             : CurveMetric::kLogDiffHv;
      const auto curve = export_curves(load_records(export_dir), m, max_hv);
      const std::string path =
          export_out.empty() ? (fs::path(export_dir) / ("curves_" + metric + ".csv")).string() : export_out;
      std::ofstream out(path);
      if (!out) throw std::runtime_error("cannot write " + path);
      out << curves_csv(curve, metric);
      std::cout << path << "\n";
      return 0;
    }
    if (list->parsed()) {
      for (const auto& name : problem_names()) {
        const Problem p = make_problem(name);
        std::cout << name << "\tD=" << p.dim << "\tK=" << p.objectives << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
