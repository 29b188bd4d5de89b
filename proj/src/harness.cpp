#include "vbllbo/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "vbllbo/checkpoint.hpp"
#include "vbllbo/pareto.hpp"

#ifndef VBLLBO_GIT_DESCRIBE
#define VBLLBO_GIT_DESCRIBE "unknown"
#endif

namespace vbllbo {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<int> ExperimentConfig::hidden_layers() const {
  std::vector<int> hidden(static_cast<std::size_t>(depth), width);
  if (feature_dim && !hidden.empty()) hidden.back() = *feature_dim;
  return hidden;
}

TrainConfig ExperimentConfig::resolved_train_config() const {
  TrainConfig t = train;
  t.hidden = hidden_layers();
  return t;
}

void ExperimentConfig::validate() const {
  if (horizon < 1) throw std::invalid_argument("config: horizon must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
  if (width < 1 || depth < 1) throw std::invalid_argument("config: width and depth must be >= 1");
  const Problem p = make_problem(problem, problem_options);
  const bool multi = p.objectives > 1;
  if (multi != (acquisition == AcquisitionKind::kMultiObjectiveThompson)) {
    throw std::invalid_argument("config: acquisition " + acquisition_name(acquisition) +
                                " is incompatible with a " + std::to_string(p.objectives) +
                                "-objective problem");
  }
  if (reinit.kind == ReinitPolicy::Kind::kPeriodic && reinit.period < 1) {
    throw std::invalid_argument("config: reinit period must be >= 1");
  }
  if (reinit.kind == ReinitPolicy::Kind::kSigmoid &&
      !(reinit.window_ratio > 0.0 && reinit.window_ratio <= 1.0)) {
    throw std::invalid_argument("config: window_ratio must be in (0, 1]");
  }
}

std::string acquisition_name(AcquisitionKind kind) {
  switch (kind) {
    case AcquisitionKind::kLogEi: return "logei";
    case AcquisitionKind::kThompson: return "ts";
    case AcquisitionKind::kMultiObjectiveThompson: return "mo-ts";
  }
  return "ts";
}

AcquisitionKind parse_acquisition(const std::string& name) {
  if (name == "logei") return AcquisitionKind::kLogEi;
  if (name == "ts") return AcquisitionKind::kThompson;
  if (name == "mo-ts") return AcquisitionKind::kMultiObjectiveThompson;
  throw std::invalid_argument("unknown acquisition '" + name + "'");
}

std::string policy_name(ReinitPolicy::Kind kind) {
  switch (kind) {
    case ReinitPolicy::Kind::kAlways: return "always";
    case ReinitPolicy::Kind::kPeriodic: return "periodic";
    case ReinitPolicy::Kind::kSigmoid: return "sigmoid";
    case ReinitPolicy::Kind::kEvent: return "event";
  }
  return "always";
}

namespace {

ReinitPolicy::Kind parse_policy(const std::string& name) {
  if (name == "always") return ReinitPolicy::Kind::kAlways;
  if (name == "periodic") return ReinitPolicy::Kind::kPeriodic;
  if (name == "sigmoid") return ReinitPolicy::Kind::kSigmoid;
  if (name == "event") return ReinitPolicy::Kind::kEvent;
  throw std::invalid_argument("unknown reinit policy '" + name + "'");
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  read_if(j, "name", cfg.name);
  read_if(j, "horizon", cfg.horizon);
  read_if(j, "seeds", cfg.seeds);
  read_if(j, "output_dir", cfg.output_dir);

  if (j.contains("problem")) {
    const auto& p = j.at("problem");
    if (p.is_string()) {
      cfg.problem = p.get<std::string>();
    } else {
      read_if(p, "name", cfg.problem);
      if (p.contains("dim") && !p.at("dim").is_null()) cfg.problem_options.dim = p.at("dim").get<int>();
      read_if(p, "noise_std", cfg.problem_options.noise_std);
      read_if(p, "seed", cfg.problem_options.seed);
      if (p.contains("reference_point") && !p.at("reference_point").is_null()) {
        const auto r = p.at("reference_point").get<std::vector<double>>();
        cfg.problem_options.reference_point = Eigen::Map<const Vector>(r.data(), static_cast<Eigen::Index>(r.size()));
      }
    }
  }

  if (j.contains("surrogate")) {
    const auto& s = j.at("surrogate");
    read_if(s, "width", cfg.width);
    read_if(s, "depth", cfg.depth);
    if (s.contains("feature_dim") && !s.at("feature_dim").is_null()) cfg.feature_dim = s.at("feature_dim").get<int>();
    read_if(s, "learning_rate", cfg.train.learning_rate);
    read_if(s, "weight_decay", cfg.train.weight_decay);
    read_if(s, "clip_norm", cfg.train.clip_norm);
    read_if(s, "batch_size", cfg.train.batch_size);
    read_if(s, "max_epochs", cfg.train.max_epochs);
    read_if(s, "patience", cfg.train.patience);
    read_if(s, "prior_scale", cfg.train.prior_scale);
    read_if(s, "wishart_scale", cfg.train.wishart_scale);
    read_if(s, "noise_dof", cfg.train.noise_dof);
    read_if(s, "initial_log_sigma2", cfg.train.initial_log_sigma2);
  }

  if (j.contains("reinit")) {
    const auto& r = j.at("reinit");
    std::string policy = "always";
    read_if(r, "policy", policy);
    cfg.reinit.kind = parse_policy(policy);
    read_if(r, "period", cfg.reinit.period);
    if (r.contains("center") && !r.at("center").is_null()) cfg.reinit.center = r.at("center").get<double>();
    read_if(r, "window_ratio", cfg.reinit.window_ratio);
    read_if(r, "threshold", cfg.reinit.threshold);
  }

  if (j.contains("acquisition")) {
    const auto& a = j.at("acquisition");
    if (a.is_string()) {
      cfg.acquisition = parse_acquisition(a.get<std::string>());
    } else {
      std::string name = "ts";
      read_if(a, "name", name);
      cfg.acquisition = parse_acquisition(name);
      read_if(a, "restarts", cfg.acquisition_options.restarts);
      read_if(a, "raw_samples", cfg.acquisition_options.raw_samples);
      read_if(a, "population", cfg.nsga.population);
      read_if(a, "generations", cfg.nsga.generations);
      read_if(a, "crossover_probability", cfg.nsga.crossover_probability);
      read_if(a, "crossover_eta", cfg.nsga.crossover_eta);
      read_if(a, "mutation_eta", cfg.nsga.mutation_eta);
      if (a.contains("mutation_probability") && !a.at("mutation_probability").is_null()) {
        cfg.nsga.mutation_probability = a.at("mutation_probability").get<double>();
      }
    }
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  const Problem p = make_problem(cfg.problem, cfg.problem_options);
  json problem = {{"name", cfg.problem},
                  {"dim", p.dim},
                  {"noise_std", cfg.problem_options.noise_std},
                  {"seed", cfg.problem_options.seed},
                  {"reference_point", nullptr}};
  if (p.reference_point) {
    problem["reference_point"] = std::vector<double>(p.reference_point->data(),
                                                     p.reference_point->data() + p.reference_point->size());
  }
  json reinit = {{"policy", policy_name(cfg.reinit.kind)},
                 {"period", cfg.reinit.period},
                 {"center", cfg.reinit.center ? json(*cfg.reinit.center) : json(nullptr)},
                 {"window_ratio", cfg.reinit.window_ratio},
                 {"threshold", cfg.reinit.threshold}};
  json acquisition = {{"name", acquisition_name(cfg.acquisition)},
                      {"restarts", cfg.acquisition_options.restarts},
                      {"raw_samples", cfg.acquisition_options.raw_samples},
                      {"population", cfg.nsga.population},
                      {"generations", cfg.nsga.generations},
                      {"crossover_probability", cfg.nsga.crossover_probability},
                      {"crossover_eta", cfg.nsga.crossover_eta},
                      {"mutation_probability", cfg.nsga.mutation_probability ? json(*cfg.nsga.mutation_probability) : json(nullptr)},
                      {"mutation_eta", cfg.nsga.mutation_eta}};
  json surrogate = {{"width", cfg.width},
                    {"depth", cfg.depth},
                    {"feature_dim", cfg.feature_dim.value_or(cfg.width)},
                    {"learning_rate", cfg.train.learning_rate},
                    {"weight_decay", cfg.train.weight_decay},
                    {"clip_norm", cfg.train.clip_norm},
                    {"batch_size", cfg.train.batch_size},
                    {"max_epochs", cfg.train.max_epochs},
                    {"patience", cfg.train.patience},
                    {"prior_scale", cfg.train.prior_scale},
                    {"wishart_scale", cfg.train.wishart_scale},
                    {"noise_dof", cfg.train.noise_dof},
                    {"initial_log_sigma2", cfg.train.initial_log_sigma2}};
  return {{"name", cfg.name},         {"problem", problem},   {"horizon", cfg.horizon},
          {"seeds", cfg.seeds},       {"surrogate", surrogate}, {"reinit", reinit},
          {"acquisition", acquisition}, {"output_dir", cfg.output_dir}};
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return config_from_json(json::parse(in));
}

std::uint64_t config_hash(const ExperimentConfig& cfg) {
  json j = config_to_json(cfg);
  // Where results go and which seeds run do not change what a seed computes.
  j.erase("output_dir");
  j.erase("seeds");
  return fnv1a(j.dump());
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double observed_metric(const Problem& problem, const Dataset& data) {
  if (problem.objectives == 1) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& y : data.y) best = std::max(best, y(0));
    return best;
  }
  return hypervolume(data.y, *problem.reference_point);
}

Vector select_next(const ExperimentConfig& cfg, const Problem& problem, const SurrogateModel& model,
                   const Dataset& data, Rng& rng) {
  const Eigen::Index dim = problem.dim;
  const Vector lower = Vector::Zero(dim);
  const Vector upper = Vector::Ones(dim);
  switch (cfg.acquisition) {
    case AcquisitionKind::kLogEi: {
      double best = -std::numeric_limits<double>::infinity();
      for (const auto& y : data.y) best = std::max(best, model.standardizer.apply(y)(0));
      return optimize_acqf_ei(model, best, rng, cfg.acquisition_options);
    }
    case AcquisitionKind::kThompson: {
      const GlmSample sample = thompson_sample(model, rng);
      return optimize_ts_single(sample, lower, upper, rng, cfg.acquisition_options);
    }
    case AcquisitionKind::kMultiObjectiveThompson: {
      const GlmSample sample = thompson_sample(model, rng);
      const ParetoSet front = nsga2_optimize(sample, lower, upper, cfg.nsga, rng);
      ParetoArchive archive(*problem.reference_point);
      for (const auto& y : data.y) archive.insert(y);
      std::vector<Vector> predicted;
      predicted.reserve(front.y.size());
      for (const auto& y : front.y) predicted.push_back(model.standardizer.invert(y));
      const HviSelection sel = select_hvi_candidate(archive, predicted, rng);
      return front.x[static_cast<std::size_t>(sel.index)];
    }
  }
  throw std::logic_error("select_next: unhandled acquisition");
}

void check_monotone(const RunRecord& record) {
  if (record.rows.size() < 2) return;
  const auto& prev = record.rows[record.rows.size() - 2];
  const auto& cur = record.rows.back();
  if (!(cur.t > prev.t)) throw std::logic_error("run record: t not strictly increasing");
  if (cur.metric < prev.metric) throw std::logic_error("run record: " + record.metric_name + " decreased");
}

}  // namespace

RunRecord run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  RunRecord record;
  record.seed = seed;
  try {
    const Problem problem = make_problem(cfg.problem, cfg.problem_options);
    record.metric_name = problem.objectives == 1 ? "best_so_far" : "hv_so_far";
    const TrainConfig train = [&] {
      TrainConfig t = cfg.resolved_train_config();
      t.seed = seed;
      return t;
    }();
    Rng rng(seed);
    Dataset data = initial_design(problem, rng);
    {
      Dataset prefix;
      prefix.bounds = data.bounds;
      const int n = static_cast<int>(data.size());
      for (int i = 0; i < n; ++i) {
        prefix.add(data.x[static_cast<std::size_t>(i)], data.y[static_cast<std::size_t>(i)]);
        record.rows.push_back({i - n, data.x[static_cast<std::size_t>(i)], data.y[static_cast<std::size_t>(i)],
                               observed_metric(problem, prefix), 0.0, 0.0, 0});
        check_monotone(record);
      }
    }

    std::optional<SurrogateModel> model;
    double acq_seconds = 0.0;
    for (int t = 0; t < cfg.horizon; ++t) {
      BoStepResult step = bo_step(model ? &*model : nullptr, cfg.reinit, data, train, t, cfg.horizon, rng);
      model = std::move(step.model);

      const auto acq_start = Clock::now();
      const Vector unit = select_next(cfg, problem, *model, data, rng);
      acq_seconds += elapsed(acq_start);

      const Vector x = problem.bounds.from_unit(unit).cwiseMax(problem.bounds.lower).cwiseMin(problem.bounds.upper);
      const Vector y = evaluate_noisy(problem, x, rng);
      data.add(x, y);
      record.rows.push_back({t, x, y, observed_metric(problem, data), model->fit_seconds, acq_seconds,
                             step.reinit ? 1 : 0});
      check_monotone(record);
    }
  } catch (const std::exception& e) {
    record.failed = true;
    record.error = e.what();
  }
  return record;
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string record_csv(const RunRecord& record) {
  std::ostringstream os;
  const Eigen::Index dx = record.rows.empty() ? 0 : record.rows.front().x.size();
  const Eigen::Index dy = record.rows.empty() ? 0 : record.rows.front().y.size();
  os << "seed,t";
  for (Eigen::Index i = 0; i < dx; ++i) os << ",x" << i;
  for (Eigen::Index i = 0; i < dy; ++i) os << ",y" << i;
  os << "," << record.metric_name << ",cumulative_fit_seconds,cumulative_acq_seconds,reinit_flag\n";
  for (const auto& row : record.rows) {
    os << record.seed << "," << row.t;
    for (Eigen::Index i = 0; i < row.x.size(); ++i) os << "," << format_double(row.x(i));
    for (Eigen::Index i = 0; i < row.y.size(); ++i) os << "," << format_double(row.y(i));
    os << "," << format_double(row.metric) << "," << format_double(row.fit_seconds) << ","
       << format_double(row.acq_seconds) << "," << row.reinit << "\n";
  }
  return os.str();
}

RunRecord parse_record_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("record csv: empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 6 || header[0] != "seed" || header[1] != "t") {
    throw std::runtime_error("record csv: unexpected header");
  }
  int dx = 0;
  int dy = 0;
  for (const auto& h : header) {
    if (h.size() > 1 && h[0] == 'x' && std::isdigit(static_cast<unsigned char>(h[1]))) ++dx;
    if (h.size() > 1 && h[0] == 'y' && std::isdigit(static_cast<unsigned char>(h[1]))) ++dy;
  }
  RunRecord record;
  record.metric_name = header[static_cast<std::size_t>(2 + dx + dy)];
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size()) throw std::runtime_error("record csv: ragged row");
    RunRow row;
    record.seed = std::stoull(cells[0]);
    row.t = std::stoi(cells[1]);
    row.x.resize(dx);
    row.y.resize(dy);
    for (int i = 0; i < dx; ++i) row.x(i) = std::stod(cells[static_cast<std::size_t>(2 + i)]);
    for (int i = 0; i < dy; ++i) row.y(i) = std::stod(cells[static_cast<std::size_t>(2 + dx + i)]);
    std::size_t c = static_cast<std::size_t>(2 + dx + dy);
    row.metric = std::stod(cells[c++]);
    row.fit_seconds = std::stod(cells[c++]);
    row.acq_seconds = std::stod(cells[c++]);
    row.reinit = std::stoi(cells[c]);
    record.rows.push_back(std::move(row));
  }
  return record;
}

std::vector<RunRecord> load_records(const std::string& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("seed_", 0) == 0 && entry.path().extension() == ".csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<RunRecord> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream buf;
    buf << in.rdbuf();
    out.push_back(parse_record_csv(buf.str()));
  }
  std::sort(out.begin(), out.end(), [](const RunRecord& a, const RunRecord& b) { return a.seed < b.seed; });
  return out;
}

std::uint64_t record_fingerprint(const RunRecord& record) {
  RunRecord copy = record;
  for (auto& row : copy.rows) {
    row.fit_seconds = 0.0;
    row.acq_seconds = 0.0;
  }
  return fnv1a(record_csv(copy));
}

std::vector<RunRecord> run_experiment(const ExperimentConfig& cfg, int jobs, bool write_files) {
  cfg.validate();
  const std::size_t n = cfg.seeds.size();
  std::vector<RunRecord> records(n);
  const fs::path out_dir(cfg.output_dir);
  if (write_files) fs::create_directories(out_dir);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      records[i] = run_seed(cfg, cfg.seeds[i]);
      if (write_files) {
        write_text(out_dir / ("seed_" + std::to_string(cfg.seeds[i]) + ".csv"), record_csv(records[i]));
      }
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
  }

  if (write_files) {
    json status = json::array();
    for (const auto& r : records) {
      status.push_back({{"seed", r.seed}, {"failed", r.failed}, {"error", r.error}, {"rows", r.rows.size()}});
    }
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << config_hash(cfg);
    const json meta = {{"config", config_to_json(cfg)},
                       {"config_hash", hash.str()},
                       {"git_describe", VBLLBO_GIT_DESCRIBE},
                       {"runs", status}};
    write_text(out_dir / "metadata.json", meta.dump(2) + "\n");
  }
  return records;
}

std::vector<std::string> sweep_axes() {
  return {"wishart_scale", "prior_scale", "width", "depth", "feature_dim", "learning_rate",
          "patience", "reinit_period", "window_ratio", "threshold", "noise_std", "horizon"};
}

ExperimentConfig apply_sweep_value(const ExperimentConfig& cfg, const std::string& axis, double value) {
  ExperimentConfig out = cfg;
  const auto as_int = [&]() {
    if (value != std::round(value)) throw std::invalid_argument("sweep: axis " + axis + " needs integer values");
    return static_cast<int>(value);
  };
  if (axis == "wishart_scale") out.train.wishart_scale = value;
  else if (axis == "prior_scale") out.train.prior_scale = value;
  else if (axis == "width") out.width = as_int();
  else if (axis == "depth") out.depth = as_int();
  else if (axis == "feature_dim") out.feature_dim = as_int();
  else if (axis == "learning_rate") out.train.learning_rate = value;
  else if (axis == "patience") out.train.patience = as_int();
  else if (axis == "reinit_period") {
    out.reinit.kind = ReinitPolicy::Kind::kPeriodic;
    out.reinit.period = as_int();
  } else if (axis == "window_ratio") {
    out.reinit.kind = ReinitPolicy::Kind::kSigmoid;
    out.reinit.window_ratio = value;
  } else if (axis == "threshold") {
    out.reinit.kind = ReinitPolicy::Kind::kEvent;
    out.reinit.threshold = value;
  } else if (axis == "noise_std") out.problem_options.noise_std = value;
  else if (axis == "horizon") out.horizon = as_int();
  else throw std::invalid_argument("sweep: unknown axis '" + axis + "'");
  out.validate();
  return out;
}

std::vector<SweepResult> sweep(const ExperimentConfig& base, const std::string& axis,
                               const std::vector<double>& values, int jobs, bool write_files) {
  std::vector<SweepResult> results;
  for (double v : values) {
    ExperimentConfig cfg = apply_sweep_value(base, axis, v);
    std::ostringstream dir;
    dir << axis << "_" << v;
    cfg.output_dir = (fs::path(base.output_dir) / dir.str()).string();
    cfg.name = base.name + "/" + dir.str();
    results.push_back({axis, v, cfg.output_dir, run_experiment(cfg, jobs, write_files)});
  }
  return results;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile: no values");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<CurvePoint> export_curves(const std::vector<RunRecord>& records, CurveMetric metric,
                                      std::optional<double> max_hv) {
  if (metric == CurveMetric::kLogDiffHv && !max_hv) {
    throw MissingMaxHv("export_curves: logdiff_hv requires max_hv");
  }
  std::map<int, std::vector<double>> by_t;
  for (const auto& r : records) {
    for (const auto& row : r.rows) {
      double v = row.metric;
      if (metric == CurveMetric::kLogDiffHv) v = std::log(std::max(*max_hv - row.metric, 1e-12));
      by_t[row.t].push_back(v);
    }
  }
  std::vector<CurvePoint> curve;
  for (const auto& [t, values] : by_t) {
    CurvePoint p;
    p.t = t;
    p.count = static_cast<int>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    p.mean = sum / static_cast<double>(values.size());
    p.p10 = percentile(values, 0.1);
    p.p90 = percentile(values, 0.9);
    curve.push_back(p);
  }
  return curve;
}

std::string curves_csv(const std::vector<CurvePoint>& curve, const std::string& metric_name) {
  std::ostringstream os;
  os << "t," << metric_name << "_mean," << metric_name << "_p10," << metric_name << "_p90,count\n";
  for (const auto& p : curve) {
    os << p.t << "," << format_double(p.mean) << "," << format_double(p.p10) << "," << format_double(p.p90)
       << "," << p.count << "\n";
  }
  return os.str();
}

}  // namespace vbllbo
