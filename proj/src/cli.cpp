// Copyright 2026 The dpgrad-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dpgrad/cli.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dpgrad/clipping.hpp"
#include "dpgrad/config.hpp"
#include "dpgrad/denoise.hpp"
#include "dpgrad/error_analysis.hpp"
#include "dpgrad/errors.hpp"
#include "dpgrad/harness.hpp"
#include "dpgrad/report.hpp"

namespace dpgrad::cli {
namespace {

constexpr std::uint64_t kDefaultSeed = 42;
constexpr const char* kSeedEnvVar = "DPGRAD_LAB_SEED";

std::string config_key_help() {
  std::ostringstream out;
  out << "Recognized config keys (key = value, '#' comments):\n";
  for (const ConfigKeyInfo& info : config_key_registry()) {
    out << "  " << info.key << " (" << info.type << "): " << info.help << "\n";
  }
  return out.str();
}

std::uint64_t resolve_seed(const CLI::Option* seed_opt, std::uint64_t seed) {
  if (seed_opt->count() > 0) return seed;
  if (const char* env = std::getenv(kSeedEnvVar)) {
    try {
      std::size_t consumed = 0;
      std::uint64_t v = std::stoull(env, &consumed);
      if (consumed != std::string(env).size()) throw std::invalid_argument(env);
      return v;
    } catch (const std::exception&) {
      throw InvalidParameter(std::string(kSeedEnvVar) +
                             " must be an unsigned integer, got '" + env + "'");
    }
  }
  return kDefaultSeed;
}

void apply_jobs(int jobs) {
#ifdef _OPENMP
  if (jobs > 0) omp_set_num_threads(jobs);
#else
  (void)jobs;
#endif
}

// Built-in fixture used when a subcommand runs without --config.
const char* kDefaultAnalysisConfig = R"(
oracle.dim = 256
oracle.batch = 16
oracle.spikes = 16
oracle.spike_mag = 2.5
oracle.noise = 1.0
privacy.sigma = 0.8
privacy.clip = median
compress.kind = topk
compress.rate = 16
analysis.n = 100
)";

ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return ExperimentConfig::parse_string(kDefaultAnalysisConfig);
  return ExperimentConfig::parse_file(path);
}

struct OracleFixture {
  OracleSpec spec;
  double median_norm = 0.0;  // of a probe batch
};

OracleFixture build_oracle_fixture(const ExperimentConfig& config,
                                   std::uint64_t seed) {
  const std::size_t dim =
      static_cast<std::size_t>(config.get_int_or("oracle.dim", 256));
  const std::size_t spikes =
      static_cast<std::size_t>(config.get_int_or("oracle.spikes", 16));
  const double magnitude = config.get_double_or("oracle.spike_mag", 2.5);
  OracleFixture fixture{
      OracleSpec{make_spike_gradient(dim, spikes, magnitude),
                 config.get_double_or("oracle.noise", 1.0),
                 static_cast<std::size_t>(config.get_int_or("oracle.batch", 16))},
      0.0};
  RngStream probe = RngStream::labeled(seed, "oracle/probe");
  fixture.median_norm = median_row_norm(oracle_batch(fixture.spec, probe));
  return fixture;
}

double resolve_clip_radius(const ExperimentConfig& config,
                           double median_norm) {
  const std::string clip = config.get_string_or("privacy.clip", "median");
  if (clip == "median") return median_norm;
  if (clip == "none") {
    throw InvalidParameter("this analysis requires a clipping radius");
  }
  try {
    std::size_t consumed = 0;
    double v = std::stod(clip, &consumed);
    if (consumed != clip.size() || !(v > 0.0)) throw std::invalid_argument(clip);
    return v;
  } catch (const std::exception&) {
    throw InvalidParameter("privacy.clip must be none, median or a positive "
                           "radius, got '" + clip + "'");
  }
}

std::unique_ptr<Compressor> compressor_from_config(
    const ExperimentConfig& config) {
  const std::string kind = config.get_string_or("compress.kind", "none");
  if (kind == "none") return nullptr;
  if (kind == "topk") {
    return make_topk_compressor(
        config.get_double_or("compress.rate", 16.0),
        payload_bits_from_int(static_cast<int>(
            config.get_int_or("compress.payload_bits", 16))));
  }
  if (kind == "low-rank") {
    return make_low_rank_compressor(
        static_cast<std::uint32_t>(config.get_int_or("compress.rank", 1)),
        static_cast<int>(config.get_int_or("compress.iterations", 1)));
  }
  throw InvalidParameter("compress.kind must be none, topk or low-rank");
}

std::ostream& open_or_stdout(std::ofstream& file, const std::string& path,
                             std::ostream& out) {
  if (path.empty()) return out;
  file.open(path, std::ios::binary);
  if (!file) throw IoError("cannot open output file: " + path);
  return file;
}

// ---------------------------------------------------------------------------
// account

int run_account(double sigma, std::uint64_t steps, double delta,
                const std::vector<double>& orders, std::ostream& out) {
  EpsilonAtOrder eps = rdp_epsilon_argmin(sigma, steps, delta, orders);
  char line[96];
  if (std::isinf(eps.epsilon)) {
    std::snprintf(line, sizeof line, "epsilon=inf alpha=none");
  } else {
    std::snprintf(line, sizeof line, "epsilon=%.2f alpha=%g", eps.epsilon,
                  eps.order);
  }
  out << line << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// error-breakdown

int run_error_breakdown(const std::string& config_path, int n_override,
                        double sigma_override, const std::string& out_path,
                        std::uint64_t seed, std::ostream& out) {
  ExperimentConfig config = load_config(config_path);
  OracleFixture fixture = build_oracle_fixture(config, seed);

  PrivacyParams privacy;
  privacy.clip_radius = resolve_clip_radius(config, fixture.median_norm);
  privacy.noise_multiplier =
      sigma_override >= 0.0 ? sigma_override
                            : config.get_double_or("privacy.sigma", 0.8);
  const int n = n_override > 0
                    ? n_override
                    : static_cast<int>(config.get_int_or("analysis.n", 100));

  std::unique_ptr<Compressor> compressor = compressor_from_config(config);
  if (!compressor) {
    throw InvalidParameter("error-breakdown needs compress.kind != none");
  }

  RngStream batch_rng = RngStream::labeled(seed, "error-breakdown/batch");
  SampleBatchGradients batch = oracle_batch(fixture.spec, batch_rng);
  StageBreakdown breakdown =
      stage_breakdown(privacy, *compressor, batch, n,
                      RngStream::labeled(seed, "error-breakdown/trials"));

  ReportTable table;
  table.header = {"stage", "mse", "bias_sq", "variance", "n"};
  for (const StageReport& stage : breakdown.stages) {
    table.rows.push_back({std::string(stage_label(stage.stage)),
                          stage.report.mse, stage.report.bias_sq,
                          stage.report.variance,
                          static_cast<std::int64_t>(stage.report.n)});
  }
  std::ofstream file;
  emit_report(table, ReportFormat::csv, open_or_stdout(file, out_path, out));
  return 0;
}

// ---------------------------------------------------------------------------
// sweep-clipping

std::vector<double> parse_grid_spec(const std::string& spec) {
  double lo = 0.0, hi = 0.0;
  unsigned long points = 0;
  char extra = 0;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%lu%c", &lo, &hi, &points, &extra) != 3) {
    throw InvalidParameter("--grid expects lo:hi:points, got '" + spec + "'");
  }
  return geometric_grid(lo, hi, points);
}

int run_sweep_clipping(double sigma, const std::string& grid_spec,
                       const std::string& estimator_name,
                       const std::string& config_path, int n_override,
                       bool with_compressor, const std::string& out_path,
                       std::uint64_t seed, std::ostream& out) {
  ExperimentConfig config = load_config(config_path);
  OracleFixture fixture = build_oracle_fixture(config, seed);
  RngStream batch_rng = RngStream::labeled(seed, "sweep/batch");
  SampleBatchGradients batch = oracle_batch(fixture.spec, batch_rng);

  const NormEstimator estimator = estimator_name == "mean-norm"
                                      ? NormEstimator::mean_gradient_norm
                                      : NormEstimator::median_row_norm;
  const int n = n_override > 0
                    ? n_override
                    : static_cast<int>(config.get_int_or("analysis.n", 100));
  std::unique_ptr<Compressor> compressor;
  if (with_compressor) {
    compressor = compressor_from_config(config);
    if (!compressor) {
      throw InvalidParameter("--compressed needs compress.kind != none");
    }
  }

  SweepResult sweep = sweep_empirical(
      batch, sigma, compressor.get(), parse_grid_spec(grid_spec), n,
      RngStream::labeled(seed, "sweep/trials"), estimator);

  ReportTable table;
  table.header = {"C", "empirical_mse", "model_error"};
  for (const SweepPoint& point : sweep.points) {
    table.rows.push_back(
        {point.clip_radius, point.report.mse, point.model_error});
  }
  std::ofstream file;
  emit_report(table, ReportFormat::csv, open_or_stdout(file, out_path, out));
  out << "c_star=" << format_double(sweep.c_star) << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// denoise-run

int run_denoise(const std::string& config_path, int steps,
                const std::string& out_path, std::uint64_t seed,
                std::ostream& out) {
  ExperimentConfig config = load_config(config_path);
  OracleFixture fixture = build_oracle_fixture(config, seed);

  DenoiseConfig cfg;
  cfg.beta = config.get_double_or("denoise.beta", 0.9);
  cfg.gamma = config.get_double_or("denoise.gamma", 0.9);
  cfg.tie_break =
      config.get_string_or("denoise.tie_break", "velocity") == "acceleration"
          ? DenoiseTieBreak::acceleration
          : DenoiseTieBreak::velocity;
  cfg.privacy.clip_radius = resolve_clip_radius(config, fixture.median_norm);
  cfg.privacy.noise_multiplier = config.get_double_or("privacy.sigma", 0.8);

  std::unique_ptr<Compressor> compressor = compressor_from_config(config);
  if (!compressor) {
    throw InvalidParameter("denoise-run needs compress.kind != none");
  }

  const GradientVector& truth = fixture.spec.true_gradient;
  DenoiseState state = DenoiseState::zeros(truth.layout_ptr());
  const RngStream stream_base = RngStream::labeled(seed, "denoise/stream");
  const RngStream step_base = RngStream::labeled(seed, "denoise/step");

  ReportTable table;
  table.header = {"step", "flag", "residual_norm_v", "residual_norm_a",
                  "mse_receiver"};
  for (int t = 0; t < steps; ++t) {
    RngStream batch_rng = stream_base.fork(static_cast<std::uint64_t>(t));
    SampleBatchGradients batch = oracle_batch(fixture.spec, batch_rng);
    RngStream step_rng = step_base.fork(static_cast<std::uint64_t>(t));
    DenoiseStepResult result =
        denoise_step(batch, cfg, state, *compressor, step_rng);
    state = std::move(result.state);
    table.rows.push_back(
        {static_cast<std::int64_t>(t),
         std::string(result.message.flag == DenoiseFlag::velocity
                         ? "velocity"
                         : "acceleration"),
         result.residual_norm_velocity, result.residual_norm_acceleration,
         squared_distance(state.v_receiver, truth)});
  }
  std::ofstream file;
  emit_report(table, ReportFormat::csv, open_or_stdout(file, out_path, out));
  return 0;
}

// ---------------------------------------------------------------------------
// oracle

int run_oracle(std::size_t dim, std::size_t batch, std::size_t spikes,
               double spike_mag, double noise, const std::string& out_path,
               std::uint64_t seed, std::ostream& out) {
  OracleSpec spec{make_spike_gradient(dim, spikes, spike_mag), noise, batch};
  RngStream rng = RngStream::labeled(seed, "oracle/batch");
  SampleBatchGradients rows = oracle_batch(spec, rng);

  if (out_path.empty()) {
    write_gradient_dump(out, rows);
    return 0;
  }
  std::ofstream file(out_path, std::ios::binary);
  if (!file) throw IoError("cannot open output file: " + out_path);
  write_gradient_dump(file, rows);
  if (!file) throw IoError("write failed: " + out_path);
  out << "g_norm=" << format_double(l2_norm(spec.true_gradient))
      << " median_row_norm=" << format_double(median_row_norm(rows))
      << " mean_gradient_norm=" << format_double(l2_norm(mean_gradient(rows)))
      << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// run (experiment grid)

struct GridCell {
  ExperimentConfig config;
  double sigma = 0.0;
  double rate = 1.0;
  bool denoise = false;
};

TaskSpec task_from_config(const ExperimentConfig& config) {
  TaskSpec task;
  const std::string kind = config.get_string_or("task.kind", "gaussian-blobs");
  if (kind == "gaussian-blobs") {
    task.kind = TaskKind::gaussian_blobs;
  } else if (kind == "two-rings") {
    task.kind = TaskKind::two_rings;
  } else if (kind == "oracle") {
    task.kind = TaskKind::synthetic_gradient_oracle;
  } else {
    throw InvalidParameter("task.kind must be gaussian-blobs, two-rings or "
                           "oracle, got '" + kind + "'");
  }
  task.classes = static_cast<int>(config.get_int_or("task.classes", 2));
  task.dim = static_cast<int>(config.get_int_or("task.dim", 16));
  task.train_size = static_cast<int>(config.get_int_or("task.train", 2000));
  task.test_size = static_cast<int>(config.get_int_or("task.test", 500));
  task.seed = static_cast<std::uint64_t>(config.get_int_or("task.seed", 1));
  task.separation = config.get_double_or("task.separation", 4.0);
  task.noise = config.get_double_or("task.noise", 0.1);
  return task;
}

ModelSpec model_from_config(const ExperimentConfig& config,
                            const TaskSpec& task) {
  ModelSpec model;
  const std::string kind = config.get_string_or("model.kind", "logreg");
  if (kind == "logreg") {
    model.kind = ModelKind::logistic_regression;
  } else if (kind == "mlp") {
    model.kind = ModelKind::mlp_1_hidden;
  } else {
    throw InvalidParameter("model.kind must be logreg or mlp, got '" + kind +
                           "'");
  }
  model.input_dim = task.dim;
  model.classes = task.classes;
  model.hidden = static_cast<int>(config.get_int_or("model.hidden", 16));
  return model;
}

PipelineConfig pipeline_from_config(const ExperimentConfig& config) {
  PipelineConfig pipeline;
  pipeline.sigma = config.get_double_or("privacy.sigma", 0.0);
  const std::string clip = config.get_string_or("privacy.clip", "median");
  if (clip == "none") {
    pipeline.clip_mode = ClipMode::disabled;
  } else if (clip == "median") {
    pipeline.clip_mode = ClipMode::median;
  } else {
    pipeline.clip_mode = ClipMode::fixed;
    try {
      std::size_t consumed = 0;
      pipeline.clip_radius = std::stod(clip, &consumed);
      if (consumed != clip.size()) throw std::invalid_argument(clip);
    } catch (const std::exception&) {
      throw InvalidParameter("privacy.clip must be none, median or a radius");
    }
  }
  const std::string delta = config.get_string_or("privacy.delta", "auto");
  if (delta != "auto") {
    try {
      std::size_t consumed = 0;
      pipeline.delta = std::stod(delta, &consumed);
      if (consumed != delta.size()) throw std::invalid_argument(delta);
    } catch (const std::exception&) {
      throw InvalidParameter("privacy.delta must be auto or a value in (0,1)");
    }
  }
  const std::string placement =
      config.get_string_or("privacy.placement", "per-sample");
  if (placement == "per-sample") {
    pipeline.placement = NoisePlacement::per_sample;
  } else if (placement == "on-sum") {
    pipeline.placement = NoisePlacement::on_sum;
  } else {
    throw InvalidParameter("privacy.placement must be per-sample or on-sum");
  }

  const std::string kind = config.get_string_or("compress.kind", "none");
  if (kind == "none") {
    pipeline.compress = CompressKind::none;
  } else if (kind == "topk") {
    pipeline.compress = CompressKind::topk;
  } else if (kind == "low-rank") {
    pipeline.compress = CompressKind::low_rank;
  } else {
    throw InvalidParameter("compress.kind must be none, topk or low-rank");
  }
  pipeline.rate = config.get_double_or("compress.rate", 16.0);
  pipeline.rank =
      static_cast<std::uint32_t>(config.get_int_or("compress.rank", 1));
  pipeline.payload_bits = payload_bits_from_int(
      static_cast<int>(config.get_int_or("compress.payload_bits", 16)));
  pipeline.power_iterations =
      static_cast<int>(config.get_int_or("compress.iterations", 1));
  pipeline.error_feedback = config.get_bool_or("compress.error_feedback", true);

  pipeline.denoise = config.get_bool_or("denoise.enabled", false);
  pipeline.beta = config.get_double_or("denoise.beta", 0.9);
  pipeline.gamma = config.get_double_or("denoise.gamma", 0.9);
  pipeline.tie_break =
      config.get_string_or("denoise.tie_break", "velocity") == "acceleration"
          ? DenoiseTieBreak::acceleration
          : DenoiseTieBreak::velocity;
  return pipeline;
}

std::string trim_number(double v) {
  std::string s = format_double(v);
  return s;
}

std::vector<GridCell> expand_grid(const ExperimentConfig& base) {
  std::vector<double> sigmas = base.has("grid.sigma")
                                   ? base.get_double_list("grid.sigma")
                                   : std::vector<double>{
                                         base.get_double_or("privacy.sigma", 0.0)};
  std::vector<double> rates =
      base.has("grid.rate") ? base.get_double_list("grid.rate")
                            : std::vector<double>{
                                  base.get_double_or("compress.rate", 16.0)};
  std::vector<bool> denoises =
      base.has("grid.denoise")
          ? base.get_bool_list("grid.denoise")
          : std::vector<bool>{base.get_bool_or("denoise.enabled", false)};

  std::vector<GridCell> cells;
  for (double sigma : sigmas) {
    for (double rate : rates) {
      for (bool denoise : denoises) {
        ExperimentConfig cell = base.with_override("privacy.sigma",
                                                   trim_number(sigma));
        cell = cell.with_override("compress.rate", trim_number(rate));
        cell = cell.with_override("denoise.enabled",
                                  denoise ? "true" : "false");
        cells.push_back(GridCell{std::move(cell), sigma, rate, denoise});
      }
    }
  }
  return cells;
}

int run_experiment(const std::string& config_path, const std::string& out_dir,
                   std::uint64_t seed, std::ostream& out) {
  if (config_path.empty()) {
    throw InvalidParameter("run requires --config");
  }
  ExperimentConfig base = ExperimentConfig::parse_file(config_path);
  std::vector<GridCell> cells = expand_grid(base);

  const int seed_count =
      static_cast<int>(base.get_int_or("run.seed_count", 3));
  if (seed_count < 1) {
    throw InvalidParameter("run.seed_count must be >= 1");
  }
  const int epochs = static_cast<int>(base.get_int_or("train.epochs", 20));
  const double lr = base.get_double_or("train.lr", 0.5);
  const int batch = static_cast<int>(base.get_int_or("train.batch", 64));

  std::filesystem::create_directories(out_dir);

  struct RunItem {
    std::size_t cell = 0;
    int seed_index = 0;
    RunRecord record;
  };
  std::vector<RunItem> items;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (int s = 0; s < seed_count; ++s) {
      items.push_back(RunItem{c, s, {}});
    }
  }

  // Cells x seeds are independent; the merge below is order-deterministic
  // regardless of the thread count.
  std::atomic<bool> failed{false};
  std::exception_ptr failure;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic)
#endif
  for (long idx = 0; idx < static_cast<long>(items.size()); ++idx) {
    if (failed.load(std::memory_order_relaxed)) continue;
    try {
      RunItem& item = items[static_cast<std::size_t>(idx)];
      const GridCell& cell = cells[item.cell];
      TaskSpec task = task_from_config(cell.config);
      ModelSpec model = model_from_config(cell.config, task);
      PipelineConfig pipeline = pipeline_from_config(cell.config);
      const std::uint64_t run_seed =
          seed ^ fnv1a64(cell.config.hash_hex() + ":" +
                         std::to_string(item.seed_index));
      item.record = run_training(task, model, pipeline, epochs, lr, batch,
                                 run_seed);
    } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
      {
        if (!failed.load(std::memory_order_relaxed)) {
          failure = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
        }
      }
    }
  }
  if (failed.load()) std::rethrow_exception(failure);

  ReportTable csv;
  csv.header = {"config_hash", "sigma",  "rate",     "denoise", "seed",
                "epoch",       "accuracy", "cumulative_bytes", "epsilon"};
  for (const RunItem& item : items) {
    const GridCell& cell = cells[item.cell];
    for (std::size_t epoch = 0; epoch < item.record.epochs.size(); ++epoch) {
      const EpochStat& stat = item.record.epochs[epoch];
      csv.rows.push_back({cell.config.hash_hex(), cell.sigma, cell.rate,
                          cell.denoise,
                          static_cast<std::int64_t>(item.seed_index),
                          static_cast<std::int64_t>(epoch), stat.accuracy,
                          static_cast<std::int64_t>(stat.cumulative_bytes),
                          stat.epsilon});
    }
  }
  emit_report_file(csv, ReportFormat::csv, out_dir + "/results.csv");

  for (std::size_t c = 0; c < cells.size(); ++c) {
    const GridCell& cell = cells[c];
    double acc = 0.0;
    double epsilon = 0.0;
    std::uint64_t bytes = 0;
    double clip = 0.0;
    int counted = 0;
    for (const RunItem& item : items) {
      if (item.cell != c) continue;
      acc += item.record.final_accuracy;
      epsilon = item.record.spend.epsilon;
      bytes = item.record.total_bytes;
      clip = item.record.resolved_clip;
      ++counted;
    }
    acc /= std::max(counted, 1);

    nlohmann::ordered_json summary;
    summary["final_accuracy"] = acc;
    if (std::isfinite(epsilon)) {
      summary["epsilon"] = epsilon;
    } else {
      summary["epsilon"] = "inf";
    }
    summary["bytes"] = bytes;
    summary["config_hash"] = cell.config.hash_hex();
    summary["sigma"] = cell.sigma;
    summary["rate"] = cell.rate;
    summary["denoise"] = cell.denoise;
    summary["seed_count"] = seed_count;
    summary["resolved_clip"] = clip;

    const std::string path = out_dir + "/cell-" + cell.config.hash_hex() + ".json";
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot open summary file: " + path);
    file << summary.dump(2) << '\n';
    out << "cell " << cell.config.hash_hex() << " sigma=" << cell.sigma
        << " rate=" << cell.rate << " denoise=" << (cell.denoise ? "true" : "false")
        << " final_accuracy=" << format_double(acc) << "\n";
  }
  return 0;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  CLI::App app{"differentially private gradient pipeline simulator"};
  app.require_subcommand(1);
  const std::string key_help = config_key_help();
  app.footer(key_help);

  std::uint64_t seed = kDefaultSeed;
  int jobs = 0;
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "root seed (env " +
                                         std::string(kSeedEnvVar) +
                                         " when absent)");
  app.add_option("--jobs", jobs, "worker threads for parallel sections")
      ->check(CLI::NonNegativeNumber);

  // account
  auto* account = app.add_subcommand(
      "account", "convert accumulated Gaussian-mechanism steps to epsilon");
  double acc_sigma = 1.0, acc_delta = 1e-5;
  std::uint64_t acc_steps = 1;
  std::vector<double> acc_orders;
  account->add_option("--sigma", acc_sigma, "noise multiplier")
      ->required()
      ->check(CLI::NonNegativeNumber);
  account->add_option("--steps", acc_steps, "composed steps")->required();
  account->add_option("--delta", acc_delta, "target delta")->required();
  account->add_option("--orders", acc_orders,
                      "comma-separated Renyi order grid (denser grids give "
                      "tighter epsilon)")
      ->delimiter(',');
  account->footer(
      "The accountant composes the full-batch Gaussian mechanism and ignores\n"
      "subsampling amplification, so the reported epsilon is an upper bound\n"
      "relative to subsampled accountants.\n\n" +
      key_help);

  // error-breakdown
  auto* breakdown = app.add_subcommand(
      "error-breakdown",
      "bias/variance decomposition of the gradient error per pipeline stage");
  std::string eb_config, eb_out;
  int eb_n = 0;
  double eb_sigma = -1.0;
  breakdown->add_option("--config", eb_config, "experiment config file");
  breakdown->add_option("--n", eb_n, "Monte-Carlo trials");
  breakdown->add_option("--sigma", eb_sigma, "override privacy.sigma");
  breakdown->add_option("--out", eb_out, "CSV destination (default stdout)");

  // sweep-clipping
  auto* sweep = app.add_subcommand(
      "sweep-clipping", "empirical and model gradient error across clip radii");
  double sw_sigma = 0.8;
  std::string sw_grid, sw_estimator = "median", sw_config, sw_out;
  int sw_n = 0;
  bool sw_compressed = false;
  sweep->add_option("--sigma", sw_sigma, "noise multiplier")->required();
  sweep->add_option("--grid", sw_grid, "geometric grid lo:hi:points")
      ->required();
  sweep
      ->add_option("--norm-estimator", sw_estimator,
                   "g_norm estimator informing the model curve")
      ->check(CLI::IsMember({"median", "mean-norm"}));
  sweep->add_option("--config", sw_config, "experiment config file");
  sweep->add_option("--n", sw_n, "Monte-Carlo trials per grid point");
  sweep->add_flag("--compressed", sw_compressed,
                  "include the configured compressor in the swept mechanism");
  sweep->add_option("--out", sw_out, "CSV destination (default stdout)");

  // denoise-run
  auto* denoise = app.add_subcommand(
      "denoise-run", "per-step trace of the denoise pipeline on the oracle stream");
  std::string dn_config, dn_out;
  int dn_steps = 200;
  denoise->add_option("--config", dn_config, "experiment config file");
  denoise->add_option("--steps", dn_steps, "stream length")
      ->check(CLI::PositiveNumber);
  denoise->add_option("--out", dn_out, "CSV destination (default stdout)");

  // oracle
  auto* oracle = app.add_subcommand(
      "oracle", "emit one oracle-stream batch in the gradient dump format");
  std::size_t or_dim = 256, or_batch = 16, or_spikes = 16;
  double or_mag = 2.5, or_noise = 1.0;
  std::string or_out;
  oracle->add_option("--dim", or_dim, "gradient dimension");
  oracle->add_option("--batch", or_batch, "rows per batch");
  oracle->add_option("--spikes", or_spikes, "spike count");
  oracle->add_option("--spike-mag", or_mag, "spike magnitude");
  oracle->add_option("--noise", or_noise, "per-sample perturbation scale");
  oracle->add_option("--out", or_out,
                     "dump destination (stdout when omitted; with --out the "
                     "norm statistics print to stdout)");

  // run
  auto* run = app.add_subcommand(
      "run", "train over the configured experiment grid and emit reports");
  std::string run_config, run_out = "results";
  run->add_option("--config", run_config, "experiment config file")->required();
  run->add_option("--out", run_out, "output directory");

  for (CLI::App* sub : {breakdown, sweep, denoise, oracle, run}) {
    sub->footer(key_help);
  }
  for (CLI::App* sub : {account, breakdown, sweep, denoise, oracle, run}) {
    sub->fallthrough();  // --seed / --jobs may follow the subcommand
  }

  try {
    // CLI11's vector overload consumes arguments back to front.
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return 1;
  }

  try {
    const std::uint64_t root_seed = resolve_seed(seed_opt, seed);
    apply_jobs(jobs);
    if (account->parsed()) {
      return run_account(acc_sigma, acc_steps, acc_delta, acc_orders, out);
    }
    if (breakdown->parsed()) {
      return run_error_breakdown(eb_config, eb_n, eb_sigma, eb_out, root_seed,
                                 out);
    }
    if (sweep->parsed()) {
      return run_sweep_clipping(sw_sigma, sw_grid, sw_estimator, sw_config,
                                sw_n, sw_compressed, sw_out, root_seed, out);
    }
    if (denoise->parsed()) {
      return run_denoise(dn_config, dn_steps, dn_out, root_seed, out);
    }
    if (oracle->parsed()) {
      return run_oracle(or_dim, or_batch, or_spikes, or_mag, or_noise, or_out,
                        root_seed, out);
    }
    if (run->parsed()) {
      return run_experiment(run_config, run_out, root_seed, out);
    }
    err << app.help();
    return 1;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dpgrad::cli
