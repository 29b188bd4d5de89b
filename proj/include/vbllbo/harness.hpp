#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "vbllbo/acquisition.hpp"
#include "vbllbo/benchmarks.hpp"
#include "vbllbo/surrogate.hpp"

namespace vbllbo {

enum class AcquisitionKind { kLogEi, kThompson, kMultiObjectiveThompson };

struct ExperimentConfig {
  std::string name = "experiment";
  std::string problem = "branin";
  ProblemOptions problem_options;
  int horizon = 100;
  std::vector<std::uint64_t> seeds = {0};

  int width = 128;
  int depth = 3;
  std::optional<int> feature_dim;  // defaults to width
  TrainConfig train;

  ReinitPolicy reinit;
  AcquisitionKind acquisition = AcquisitionKind::kThompson;
  AcquisitionOptions acquisition_options;
  NsgaConfig nsga;
  std::string output_dir = "results";

  /// Backbone hidden widths implied by width / depth / feature_dim.
  std::vector<int> hidden_layers() const;
  TrainConfig resolved_train_config() const;
  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
/// Fully resolved config including every default.
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);
std::uint64_t config_hash(const ExperimentConfig& cfg);

std::string acquisition_name(AcquisitionKind kind);
AcquisitionKind parse_acquisition(const std::string& name);
std::string policy_name(ReinitPolicy::Kind kind);

struct RunRow {
  int t = 0;  // negative for the initial design, 0..T-1 for BO iterations
  Vector x;
  Vector y;
  double metric = 0.0;  // best_so_far or hv_so_far
  double fit_seconds = 0.0;
  double acq_seconds = 0.0;
  int reinit = 0;
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::string metric_name = "best_so_far";
  std::vector<RunRow> rows;
  bool failed = false;
  std::string error;
};

/// Runs every seed of the experiment (up to `jobs` concurrently), writing
/// seed_<s>.csv per seed and metadata.json into cfg.output_dir. Records are
/// returned in seed order.
std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, int jobs = 1, bool write_files = true);

/// One seed of the loop, without file output.
RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// Axes recognized by apply_sweep_value / sweep.
std::vector<std::string> sweep_axes();
ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, const std::string& axis, double value);

struct SweepResult {
  std::string axis;
  double value;
  std::string output_dir;
  std::vector<RunRecord> records;
};

/// Expands the template along `axis`; each value runs into
/// <output_dir>/<axis>_<value>/.
std::vector<SweepResult> sweep(const ExperimentConfig& base, const std::string& axis,
                               const std::vector<double>& values, int jobs = 1, bool write_files = true);

std::string record_csv(const RunRecord& record);
RunRecord parse_record_csv(const std::string& text);
std::vector<RunRecord> load_records(const std::string& dir);

/// Digest over every column except the wall-clock ones.
std::uint64_t record_fingerprint(const RunRecord& record);

enum class CurveMetric { kBest, kHv, kLogDiffHv };

class MissingMaxHv : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CurvePoint {
  int t = 0;
  double mean = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
  int count = 0;
};

/// Linear-interpolated percentile (q in [0, 1]) of unsorted values.
double percentile(std::vector<double> values, double q);

std::vector<CurvePoint> export_curves(const std::vector<RunRecord>& records, CurveMetric metric,
                                      std::optional<double> max_hv = std::nullopt);
std::string curves_csv(const std::vector<CurvePoint>& curve, const std::string& metric_name);

}  // namespace vbllbo
