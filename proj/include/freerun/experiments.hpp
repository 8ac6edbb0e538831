#pragma once

// Noise-robustness sweeps and runtime benchmarks on the Chen benchmark system.
//
// Seed derivation. Every realization draws from streams derived from the master seed:
//   realization seed = derive_seed(master, {noise kind, band label, sigma bits, r})
//   data streams     = derive_seed(realization seed, {"train-input" | "equation-noise" |
//                                                     "output-noise" | "validation-input"})
//   initial weights  = derive_seed(realization seed, {"init"})
// Training methods share both the data and the initial weights of a realization, and adding
// cells to a sweep never changes the numbers of existing cells.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "freerun/metrics.hpp"
#include "freerun/signals.hpp"
#include "freerun/training.hpp"

namespace freerun {

struct ChenExperimentConfig {
  Index n_train = 1000;
  Index n_validation = 1000;
  Index hold = 5;
  NoiseSpec equation_noise{};  // v
  NoiseSpec output_noise{};    // w
};

struct ChenExperimentData {
  Dataset train;       // noisy
  Dataset validation;  // noise-free, fresh input realization
  VectorXd train_clean;
};

ChenExperimentData generate_chen_experiment(const ChenExperimentConfig& config, std::uint64_t seed);

/// Trains one model on `data.train` and scores its free run on `data.validation`.
/// Returns +inf when training breaks down or the simulation diverges.
double train_and_score(const ChenExperimentData& data, TrainOptions options);

/// Runs `count` independent tasks on up to `jobs` threads (0 picks the hardware concurrency).
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& task);

enum class NoiseKind { equation, output };

std::string_view noise_kind_name(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view text);

struct SweepConfig {
  NoiseKind noise = NoiseKind::equation;
  std::vector<NoiseSpec> bands{NoiseSpec{}};  // sigma fields ignored
  std::vector<double> sigmas{1.0};
  int realizations = 12;
  std::vector<TrainingMethod> methods{TrainingMethod::sp, TrainingMethod::p_phi};
  int epochs = 100;
  Index n_train = 1000;
  Index n_validation = 1000;
  Index hidden = 10;
  ModelOrders orders{2, 2, 1};
  std::uint64_t master_seed = 1;
  unsigned jobs = 1;

  /// Throws DataError when fewer than 2 realizations or a negative sigma is requested.
  void validate() const;
};

struct SweepCell {
  std::string band;
  double sigma = 0.0;
  TrainingMethod method = TrainingMethod::sp;
  std::vector<double> mse;            // one per realization, +inf for failed runs
  std::optional<SummaryStats> stats;  // over the finite entries, absent when fewer than 4
  int failures = 0;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // ordered band, sigma, method

  const SweepCell* find(const std::string& band, double sigma, TrainingMethod method) const;
};

std::uint64_t realization_seed(std::uint64_t master, NoiseKind kind, const NoiseSpec& band, double sigma, int r);

SweepResult run_sweep(const SweepConfig& config);

/// Per-cell summary: band,sigma,method,n_ok,failures,median,iqr_low,iqr_high,trimmed_mean,trimmed_std.
void write_sweep_results_csv(std::ostream& os, const SweepResult& result);
/// Long-format curves for plotting: band,sigma,method,realization,mse.
void write_sweep_curves_csv(std::ostream& os, const SweepResult& result);

struct BenchConfig {
  std::vector<Index> n_list{1000, 2000, 4000, 8000};
  Index n_theta_for_n_grid = 61;
  std::vector<Index> n_theta_list{61, 121, 181, 241, 301};
  Index n_for_n_theta_grid = 10000;
  int repetitions = 5;
  int epochs = 100;
  std::vector<TrainingMethod> methods{TrainingMethod::sp, TrainingMethod::p_phi};
  std::uint64_t seed = 1;

  void validate() const;
};

struct BenchPoint {
  std::string grid;  // "N" or "NTheta"
  Index n = 0;
  Index n_theta = 0;
  Index hidden = 0;
  TrainingMethod method = TrainingMethod::sp;
  double mean_seconds = 0.0;   // raw wall time of a training run
  double mean_accepted = 0.0;  // accepted steps per run; each one costs a Jacobian evaluation
  /// Wall time of a run in which every epoch is accepted: epochs x mean duration of the
  /// accepted epochs. Rejected trials skip the Jacobian, so raw times depend on how often the
  /// damping rejects steps; this figure does not.
  double full_epoch_seconds = 0.0;
  std::int64_t predicted_flops = 0;  // per epoch
};

/// Slopes are fitted to full_epoch_seconds.
struct BenchSlope {
  TrainingMethod method = TrainingMethod::sp;
  double slope_n = 0.0;
  double slope_n_theta = 0.0;
};

struct BenchResult {
  std::vector<BenchPoint> points;
  std::vector<BenchSlope> slopes;

  /// full_epoch_seconds(method) / full_epoch_seconds(sp) for each grid point, in point order.
  std::vector<double> time_ratios(TrainingMethod method) const;
};

/// Hidden-layer size for a single-hidden-layer net with `n_theta` parameters; throws DataError
/// when no integer size matches exactly.
Index hidden_for_param_count(Index n_theta, Index n_inputs, Index n_outputs);

/// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

BenchResult run_bench(const BenchConfig& config, const std::function<void(const BenchPoint&)>& on_point = {});

/// Mean duration of the accepted epochs in `history`, in seconds; falls back to the mean over
/// all epochs when none was accepted.
double accepted_epoch_seconds(const std::vector<EpochRecord>& history);

/// grid,N,NTheta,hidden,method,mean_seconds,mean_accepted,full_epoch_seconds,predicted_flops_per_epoch
void write_bench_csv(std::ostream& os, const BenchResult& result);

}  // namespace freerun
