#include "freerun/experiments.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "freerun/errors.hpp"

namespace freerun {

ChenExperimentData generate_chen_experiment(const ChenExperimentConfig& config, std::uint64_t seed) {
  config.equation_noise.validate();
  config.output_noise.validate();
  Rng input_rng = make_rng(derive_seed(seed, {label_key("train-input")}));
  Rng v_rng = make_rng(derive_seed(seed, {label_key("equation-noise")}));
  Rng w_rng = make_rng(derive_seed(seed, {label_key("output-noise")}));
  Rng val_rng = make_rng(derive_seed(seed, {label_key("validation-input")}));

  const VectorXd u = held_gaussian_input(config.n_train, config.hold, input_rng);
  const VectorXd v = band_noise(config.n_train, config.equation_noise, v_rng);
  const VectorXd w = band_noise(config.n_train, config.output_noise, w_rng);
  const ChenRecord train = chen_generate(u, v, w);

  const VectorXd u_val = held_gaussian_input(config.n_validation, config.hold, val_rng);
  const VectorXd zeros = VectorXd::Zero(config.n_validation);
  const ChenRecord val = chen_generate(u_val, zeros, zeros);

  ChenExperimentData data;
  data.train.u = u;
  data.train.y = train.y;
  data.train_clean = train.y_clean;
  data.validation.u = u_val;
  data.validation.y = val.y_clean;
  return data;
}

double train_and_score(const ChenExperimentData& data, TrainOptions options) {
  const TrainResult trained = train_model(data.train, options);
  if (!trained.ok()) return std::numeric_limits<double>::infinity();
  return validate_model(trained.model, data.validation).mse;
}

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& task) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  if (jobs == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> workers;
  const auto n_workers = std::min<std::size_t>(jobs, count);
  for (std::size_t w = 0; w < n_workers; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  workers.clear();
  if (error) std::rethrow_exception(error);
}

std::string_view noise_kind_name(NoiseKind kind) { return kind == NoiseKind::equation ? "equation" : "output"; }

NoiseKind parse_noise_kind(std::string_view text) {
  if (text == "equation") return NoiseKind::equation;
  if (text == "output") return NoiseKind::output;
  throw DataError("noise kind must be 'equation' or 'output', got '" + std::string(text) + "'");
}

void SweepConfig::validate() const {
  if (realizations < 2) throw DataError("a sweep needs at least 2 realizations");
  if (epochs < 1) throw DataError("epochs must be positive");
  if (bands.empty() || sigmas.empty() || methods.empty()) throw DataError("sweep grid is empty");
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw DataError("noise levels must be nonnegative");
  }
  for (const auto& b : bands) b.validate();
  orders.validate();
}

const SweepCell* SweepResult::find(const std::string& band, double sigma, TrainingMethod method) const {
  for (const auto& c : cells) {
    if (c.band == band && c.sigma == sigma && c.method == method) return &c;
  }
  return nullptr;
}

std::uint64_t realization_seed(std::uint64_t master, NoiseKind kind, const NoiseSpec& band, double sigma, int r) {
  return derive_seed(master, {label_key(noise_kind_name(kind)), label_key(band.band_label()),
                              std::bit_cast<std::uint64_t>(sigma), static_cast<std::uint64_t>(r)});
}

SweepResult run_sweep(const SweepConfig& config) {
  config.validate();
  const std::size_t n_methods = config.methods.size();
  const std::size_t n_real = static_cast<std::size_t>(config.realizations);

  SweepResult result;
  for (const auto& band : config.bands) {
    for (double sigma : config.sigmas) {
      for (auto m : config.methods) {
        SweepCell cell;
        cell.band = band.band_label();
        cell.sigma = sigma;
        cell.method = m;
        cell.mse.assign(n_real, std::numeric_limits<double>::infinity());
        result.cells.push_back(std::move(cell));
      }
    }
  }

  const std::size_t n_data_cells = config.bands.size() * config.sigmas.size();
  parallel_for(n_data_cells * n_real, config.jobs, [&](std::size_t task) {
    const std::size_t data_cell = task / n_real;
    const int r = static_cast<int>(task % n_real);
    const NoiseSpec& band = config.bands[data_cell / config.sigmas.size()];
    const double sigma = config.sigmas[data_cell % config.sigmas.size()];
    const std::uint64_t seed = realization_seed(config.master_seed, config.noise, band, sigma, r);

    ChenExperimentConfig exp;
    exp.n_train = config.n_train;
    exp.n_validation = config.n_validation;
    NoiseSpec noise = band;
    noise.sigma = sigma;
    (config.noise == NoiseKind::equation ? exp.equation_noise : exp.output_noise) = noise;
    const ChenExperimentData data = generate_chen_experiment(exp, seed);

    for (std::size_t m = 0; m < n_methods; ++m) {
      TrainOptions options;
      options.method = config.methods[m];
      options.orders = config.orders;
      options.hidden = {config.hidden};
      options.lm.max_epochs = config.epochs;
      options.seed = derive_seed(seed, {label_key("init")});
      double score = std::numeric_limits<double>::infinity();
      try {
        score = train_and_score(data, options);
      } catch (const DataError&) {
        // recorded as a failed realization
      }
      // Each task writes a distinct slot.
      result.cells[data_cell * n_methods + m].mse[static_cast<std::size_t>(r)] = score;
    }
  });

  for (auto& cell : result.cells) {
    std::vector<double> ok;
    for (double v : cell.mse) {
      if (std::isfinite(v)) ok.push_back(v);
    }
    cell.failures = static_cast<int>(cell.mse.size() - ok.size());
    if (ok.size() >= 4) cell.stats = summarize(ok, kSweepTailFraction);
  }
  return result;
}

void write_sweep_results_csv(std::ostream& os, const SweepResult& result) {
  const auto old_precision = os.precision(10);
  os << "band,sigma,method,n_ok,failures,median,iqr_low,iqr_high,trimmed_mean,trimmed_std\n";
  for (const auto& c : result.cells) {
    os << c.band << ',' << c.sigma << ',' << method_name(c.method) << ',' << (c.mse.size() - c.failures) << ','
       << c.failures;
    if (c.stats) {
      os << ',' << c.stats->median << ',' << c.stats->iqr_low << ',' << c.stats->iqr_high << ','
         << c.stats->trimmed_mean << ',' << c.stats->trimmed_std << '\n';
    } else {
      os << ",,,,,\n";
    }
  }
  os.precision(old_precision);
}

void write_sweep_curves_csv(std::ostream& os, const SweepResult& result) {
  const auto old_precision = os.precision(17);
  os << "band,sigma,method,realization,mse\n";
  for (const auto& c : result.cells) {
    for (std::size_t r = 0; r < c.mse.size(); ++r) {
      os << c.band << ',' << c.sigma << ',' << method_name(c.method) << ',' << r << ',' << c.mse[r] << '\n';
    }
  }
  os.precision(old_precision);
}

void BenchConfig::validate() const {
  if (n_list.empty() || n_theta_list.empty()) throw DataError("bench grids must be nonempty");
  if (repetitions < 1 || epochs < 1) throw DataError("repetitions and epochs must be positive");
  if (methods.empty()) throw DataError("bench needs at least one method");
}

std::vector<double> BenchResult::time_ratios(TrainingMethod method) const {
  std::vector<double> ratios;
  for (const auto& p : points) {
    if (p.method != method) continue;
    for (const auto& q : points) {
      if (q.method == TrainingMethod::sp && q.grid == p.grid && q.n == p.n && q.n_theta == p.n_theta) {
        ratios.push_back(p.full_epoch_seconds / q.full_epoch_seconds);
      }
    }
  }
  return ratios;
}

Index hidden_for_param_count(Index n_theta, Index n_inputs, Index n_outputs) {
  // n_theta = h * (n_inputs + 1) + n_outputs * (h + 1)
  const Index per_node = n_inputs + 1 + n_outputs;
  const Index rest = n_theta - n_outputs;
  if (rest <= 0 || rest % per_node != 0) {
    throw DataError("no single-hidden-layer network with " + std::to_string(n_inputs) + " inputs has " +
                    std::to_string(n_theta) + " parameters");
  }
  return rest / per_node;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DataError("slope fit needs at least two points");
  const auto n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

constexpr Index kBenchInputs = 4;  // ny = nu = 2, tau_d = 1, scalar channels

ChenExperimentConfig bench_data_config(Index n) {
  ChenExperimentConfig c;
  c.n_train = n;
  c.n_validation = 100;
  c.equation_noise.sigma = 0.1;
  c.output_noise.sigma = 0.5;
  return c;
}

}  // namespace

double accepted_epoch_seconds(const std::vector<EpochRecord>& history) {
  double accepted_ms = 0.0;
  int accepted = 0;
  for (std::size_t k = 1; k < history.size(); ++k) {
    if (!history[k].accepted) continue;
    accepted_ms += history[k].wall_ms - history[k - 1].wall_ms;
    ++accepted;
  }
  if (accepted > 0) return accepted_ms / accepted / 1000.0;
  if (history.size() < 2) return 0.0;
  return (history.back().wall_ms - history.front().wall_ms) / static_cast<double>(history.size() - 1) / 1000.0;
}

BenchResult run_bench(const BenchConfig& config, const std::function<void(const BenchPoint&)>& on_point) {
  config.validate();
  BenchResult result;

  auto measure = [&](const std::string& grid, Index n, Index n_theta) {
    const Index hidden = hidden_for_param_count(n_theta, kBenchInputs, 1);
    const std::uint64_t data_seed = derive_seed(config.seed, {label_key("bench"), static_cast<std::uint64_t>(n)});
    const ChenExperimentData data = generate_chen_experiment(bench_data_config(n), data_seed);
    std::vector<double> seconds(config.methods.size(), 0.0);
    std::vector<double> accepted(config.methods.size(), 0.0);
    std::vector<double> full(config.methods.size(), 0.0);
    for (int rep = 0; rep < config.repetitions; ++rep) {
      for (std::size_t m = 0; m < config.methods.size(); ++m) {
        TrainOptions options;
        options.method = config.methods[m];
        options.hidden = {hidden};
        options.lm.max_epochs = config.epochs;
        options.seed = derive_seed(data_seed, {label_key("init"), static_cast<std::uint64_t>(rep)});
        const TrainResult run = train_model(data.train, options);
        seconds[m] += run.seconds;
        for (const auto& rec : run.state.history) accepted[m] += rec.epoch > 0 && rec.accepted ? 1.0 : 0.0;
        full[m] += config.epochs * accepted_epoch_seconds(run.state.history);
      }
    }
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
      BenchPoint p;
      p.grid = grid;
      p.n = n;
      p.n_theta = n_theta;
      p.hidden = hidden;
      p.method = config.methods[m];
      p.mean_seconds = seconds[m] / config.repetitions;
      p.mean_accepted = accepted[m] / config.repetitions;
      p.full_epoch_seconds = full[m] / config.repetitions;
      p.predicted_flops = predict_flops(NetDims::single_hidden(n, kBenchInputs, hidden, 1, 2), config.methods[m]).total;
      result.points.push_back(p);
      if (on_point) on_point(p);
    }
  };

  for (Index n : config.n_list) measure("N", n, config.n_theta_for_n_grid);
  for (Index nt : config.n_theta_list) measure("NTheta", config.n_for_n_theta_grid, nt);

  for (auto method : config.methods) {
    BenchSlope slope;
    slope.method = method;
    std::vector<double> xn, yn, xt, yt;
    for (const auto& p : result.points) {
      if (p.method != method) continue;
      if (p.grid == "N") {
        xn.push_back(static_cast<double>(p.n));
        yn.push_back(p.full_epoch_seconds);
      } else {
        xt.push_back(static_cast<double>(p.n_theta));
        yt.push_back(p.full_epoch_seconds);
      }
    }
    slope.slope_n = xn.size() >= 2 ? log_log_slope(xn, yn) : std::numeric_limits<double>::quiet_NaN();
    slope.slope_n_theta = xt.size() >= 2 ? log_log_slope(xt, yt) : std::numeric_limits<double>::quiet_NaN();
    result.slopes.push_back(slope);
  }
  return result;
}

void write_bench_csv(std::ostream& os, const BenchResult& result) {
  const auto old_precision = os.precision(10);
  os << "grid,N,NTheta,hidden,method,mean_seconds,mean_accepted,full_epoch_seconds,predicted_flops_per_epoch\n";
  for (const auto& p : result.points) {
    os << p.grid << ',' << p.n << ',' << p.n_theta << ',' << p.hidden << ',' << method_name(p.method) << ','
       << p.mean_seconds << ',' << p.mean_accepted << ',' << p.full_epoch_seconds << ',' << p.predicted_flops << '\n';
  }
  os.precision(old_precision);
}

}  // namespace freerun
