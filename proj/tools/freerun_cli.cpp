// freerun: train and evaluate neural difference-equation models.
//
//   freerun generate --sigma-v 0.1 --sigma-w 0.5 --seed 7 --out data/
//   freerun train    --data data/train.csv --method p-phi --out run/
//   freerun validate --model run/model.json --data data/validation.csv --out run/
//   freerun sweep    --noise output --sigma 0 --sigma 0.5 --sigma 1 --out sweep/
//   freerun bench    --out bench/
//
// Exit codes: 0 success, 1 data error, 2 solver error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "freerun/errors.hpp"
#include "freerun/experiments.hpp"
#include "freerun/io.hpp"
#include "freerun/training.hpp"

namespace fs = std::filesystem;
using namespace freerun;

namespace {

constexpr int kExitData = 1;
constexpr int kExitSolver = 2;

fs::path prepare_out_dir(const std::string& dir) {
  fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
  return out;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

nlohmann::json noise_json(const NoiseSpec& s) { return {{"sigma", s.sigma}, {"band", s.band_label()}}; }

struct ModelArgs {
  Index ny = 2;
  Index nu = 2;
  Index tau_d = 1;
  std::vector<Index> hidden{10};

  void add_to(CLI::App* cmd) {
    cmd->add_option("--ny", ny, "output lags")->capture_default_str();
    cmd->add_option("--nu", nu, "input lags")->capture_default_str();
    cmd->add_option("--taud", tau_d, "input-output delay")->capture_default_str();
    cmd->add_option("--hidden", hidden, "hidden layer sizes, one per hidden layer")
        ->delimiter(',')
        ->capture_default_str();
  }
  ModelOrders orders() const { return {ny, nu, tau_d}; }
};

struct GenerateArgs {
  Index n = 1000;
  Index n_val = 1000;
  Index hold = 5;
  double sigma_v = 0.0;
  double sigma_w = 0.0;
  std::string band = "white";
  std::uint64_t seed = 1;
  std::string out = ".";
};

int cmd_generate(const GenerateArgs& a) {
  ChenExperimentConfig config;
  config.n_train = a.n;
  config.n_validation = a.n_val;
  config.hold = a.hold;
  config.equation_noise = NoiseSpec::parse_band(a.band, a.sigma_v);
  config.output_noise = NoiseSpec::parse_band(a.band, a.sigma_w);
  config.equation_noise.validate();
  config.output_noise.validate();

  const ChenExperimentData data = generate_chen_experiment(config, a.seed);
  const fs::path out = prepare_out_dir(a.out);
  write_dataset_csv(out / "train.csv", data.train);
  write_dataset_csv(out / "validation.csv", data.validation);
  write_json(out / "metadata.json", {{"generator", "chen"},
                                     {"seed", a.seed},
                                     {"n_train", a.n},
                                     {"n_validation", a.n_val},
                                     {"hold", a.hold},
                                     {"equation_noise", noise_json(config.equation_noise)},
                                     {"output_noise", noise_json(config.output_noise)},
                                     {"validation", "noise-free output, fresh input realization"}});
  std::cout << "wrote " << (out / "train.csv").string() << " and " << (out / "validation.csv").string() << '\n';
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string method = "sp";
  int epochs = 100;
  std::uint64_t seed = 1;
  double lambda0 = 100.0;
  std::string schedule = "fletcher";
  bool no_normalize = false;
  ModelArgs model;
  std::string out = ".";
};

int cmd_train(const TrainArgs& a) {
  const Dataset data = read_dataset_csv(fs::path(a.data));
  TrainOptions options;
  options.method = parse_method(a.method);
  options.orders = a.model.orders();
  try {
    options.orders.validate();
  } catch (const StructuralError& e) {
    throw DataError(e.what());
  }
  options.hidden = a.model.hidden;
  options.seed = a.seed;
  options.normalize = !a.no_normalize;
  options.lm.max_epochs = a.epochs;
  options.lm.lambda0 = a.lambda0;
  options.lm.schedule_mode = a.schedule == "paper-literal" ? ScheduleMode::paper_literal : ScheduleMode::fletcher;

  const TrainResult result = train_model(data, options);
  const fs::path out = prepare_out_dir(a.out);
  {
    auto hist = open_out(out / "history.csv");
    write_history_csv(hist, result.state.history);
  }
  nlohmann::json meta = {{"method", a.method},
                         {"epochs", a.epochs},
                         {"seed", a.seed},
                         {"final_objective", result.state.objective},
                         {"seconds", result.seconds},
                         {"num_params", result.state.params.size()},
                         {"data", a.data}};
  if (options.method == TrainingMethod::p_phi) {
    meta["initial_conditions_scaled"] = std::vector<double>(result.y0.data(), result.y0.data() + result.y0.size());
  }
  if (!result.ok()) meta["solver_error"] = result.solver_error;
  save_model(out / "model.json", result.model, meta);

  std::cout << "method " << a.method << ": " << result.state.epoch << " epochs, V = " << result.state.objective << ", "
            << result.state.params.size() << " parameters, " << result.seconds << " s\n";
  if (!result.ok()) {
    std::cerr << "solver error: " << result.solver_error << '\n';
    return kExitSolver;
  }
  return 0;
}

struct ValidateArgs {
  std::string model;
  std::string data;
  std::string out = ".";
};

int cmd_validate(const ValidateArgs& a) {
  const ModelFile file = load_model(fs::path(a.model));
  const Dataset data = read_dataset_csv(fs::path(a.data));
  const ValidationResult v = validate_model(file.model, data);
  const fs::path out = prepare_out_dir(a.out);
  {
    auto sim = open_out(out / "simulation.csv");
    write_series_csv(sim, v.simulation, "yhat");
  }
  write_json(out / "validation.json", {{"mse", v.mse}, {"model", a.model}, {"data", a.data}});
  std::cout.precision(10);
  std::cout << "free-run MSE " << v.mse << '\n';
  return 0;
}

struct SweepArgs {
  std::string noise = "equation";
  std::vector<std::string> bands{"white"};
  std::vector<double> sigmas{1.0};
  std::vector<std::string> methods{"sp", "p-phi"};
  int realizations = 12;
  int epochs = 100;
  Index n = 1000;
  Index n_val = 1000;
  ModelArgs model;
  std::uint64_t seed = 1;
  unsigned jobs = 0;
  std::string out = ".";
};

int cmd_sweep(const SweepArgs& a) {
  SweepConfig config;
  config.noise = parse_noise_kind(a.noise);
  config.bands.clear();
  for (const auto& b : a.bands) config.bands.push_back(NoiseSpec::parse_band(b));
  config.sigmas = a.sigmas;
  config.methods.clear();
  for (const auto& m : a.methods) config.methods.push_back(parse_method(m));
  config.realizations = a.realizations;
  config.epochs = a.epochs;
  config.n_train = a.n;
  config.n_validation = a.n_val;
  if (a.model.hidden.size() != 1) throw DataError("sweep uses a single hidden layer");
  config.hidden = a.model.hidden.front();
  config.orders = a.model.orders();
  config.master_seed = a.seed;
  config.jobs = a.jobs;

  const SweepResult result = run_sweep(config);
  const fs::path out = prepare_out_dir(a.out);
  {
    auto f = open_out(out / "results.csv");
    write_sweep_results_csv(f, result);
  }
  {
    auto f = open_out(out / "curves.csv");
    write_sweep_curves_csv(f, result);
  }
  write_sweep_results_csv(std::cout, result);
  return 0;
}

struct BenchArgs {
  std::vector<Index> n_list{1000, 2000, 4000, 8000};
  std::vector<Index> n_theta_list{61, 121, 181, 241, 301};
  Index n_fixed = 10000;
  Index n_theta_fixed = 61;
  int reps = 5;
  int epochs = 100;
  std::uint64_t seed = 1;
  std::string out = ".";
};

int cmd_bench(const BenchArgs& a) {
  BenchConfig config;
  config.n_list = a.n_list;
  config.n_theta_list = a.n_theta_list;
  config.n_for_n_theta_grid = a.n_fixed;
  config.n_theta_for_n_grid = a.n_theta_fixed;
  config.repetitions = a.reps;
  config.epochs = a.epochs;
  config.seed = a.seed;

  const BenchResult result = run_bench(config, [](const BenchPoint& p) {
    std::cout << p.grid << " N=" << p.n << " NTheta=" << p.n_theta << ' ' << method_name(p.method) << ": "
              << p.mean_seconds << " s, " << p.mean_accepted << " accepted steps, " << p.full_epoch_seconds
              << " s at full epochs\n";
  });
  const fs::path out = prepare_out_dir(a.out);
  {
    auto f = open_out(out / "timing.csv");
    write_bench_csv(f, result);
  }
  auto f = open_out(out / "exponents.csv");
  f << "method,slope_N,slope_NTheta\n";
  for (const auto& s : result.slopes) {
    f << method_name(s.method) << ',' << s.slope_n << ',' << s.slope_n_theta << '\n';
    std::cout << method_name(s.method) << ": slope vs N " << s.slope_n << ", slope vs NTheta " << s.slope_n_theta
              << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Train neural difference-equation models in series-parallel and parallel configurations"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "generate Chen benchmark training and validation data");
  generate->add_option("--n", gen.n, "training samples")->capture_default_str();
  generate->add_option("--n-val", gen.n_val, "validation samples")->capture_default_str();
  generate->add_option("--hold", gen.hold, "samples each input value is held")->capture_default_str();
  generate->add_option("--sigma-v", gen.sigma_v, "equation error standard deviation")->capture_default_str();
  generate->add_option("--sigma-w", gen.sigma_w, "output error standard deviation")->capture_default_str();
  generate->add_option("--band", gen.band, "noise band: white, low:<wc> or high:<wc>")->capture_default_str();
  generate->add_option("--seed", gen.seed, "master seed")->capture_default_str();
  generate->add_option("--out", gen.out, "output directory")->capture_default_str();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "train a model with Levenberg-Marquardt");
  train->add_option("--data", tr.data, "training dataset CSV")->required();
  train->add_option("--method", tr.method, "sp, p-theta or p-phi")
      ->check(CLI::IsMember({"sp", "p-theta", "p-phi"}))
      ->capture_default_str();
  train->add_option("--epochs", tr.epochs, "Levenberg-Marquardt iterations")->capture_default_str();
  train->add_option("--seed", tr.seed, "seed for the initial weights")->capture_default_str();
  train->add_option("--lambda0", tr.lambda0, "initial damping")->capture_default_str();
  train->add_option("--schedule", tr.schedule, "damping schedule")
      ->check(CLI::IsMember({"fletcher", "paper-literal"}))
      ->capture_default_str();
  train->add_flag("--no-normalize", tr.no_normalize, "train on unscaled data");
  tr.model.add_to(train);
  train->add_option("--out", tr.out, "output directory")->capture_default_str();

  ValidateArgs va;
  auto* validate = app.add_subcommand("validate", "free-run simulation error on a dataset");
  validate->add_option("--model", va.model, "model file")->required();
  validate->add_option("--data", va.data, "validation dataset CSV")->required();
  validate->add_option("--out", va.out, "output directory")->capture_default_str();

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "noise sweep: train and validate many realizations");
  sweep->add_option("--noise", sw.noise, "equation or output")
      ->check(CLI::IsMember({"equation", "output"}))
      ->capture_default_str();
  sweep->add_option("--band", sw.bands, "noise bands")->delimiter(',')->capture_default_str();
  sweep->add_option("--sigma", sw.sigmas, "noise levels")->delimiter(',')->capture_default_str();
  sweep->add_option("--methods", sw.methods, "training methods")->delimiter(',')->capture_default_str();
  sweep->add_option("--realizations", sw.realizations, "realizations per cell")->capture_default_str();
  sweep->add_option("--epochs", sw.epochs, "epochs per training run")->capture_default_str();
  sweep->add_option("--n", sw.n, "training samples")->capture_default_str();
  sweep->add_option("--n-val", sw.n_val, "validation samples")->capture_default_str();
  sw.model.add_to(sweep);
  sweep->add_option("--seed", sw.seed, "master seed")->capture_default_str();
  sweep->add_option("--jobs", sw.jobs, "worker threads, 0 for all cores")->capture_default_str();
  sweep->add_option("--out", sw.out, "output directory")->capture_default_str();

  BenchArgs be;
  auto* bench = app.add_subcommand("bench", "training time versus N and number of parameters");
  bench->add_option("--n-list", be.n_list, "sample counts for the N grid")->delimiter(',')->capture_default_str();
  bench->add_option("--ntheta-list", be.n_theta_list, "parameter counts for the NTheta grid")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--n-fixed", be.n_fixed, "samples used on the NTheta grid")->capture_default_str();
  bench->add_option("--ntheta-fixed", be.n_theta_fixed, "parameters used on the N grid")->capture_default_str();
  bench->add_option("--reps", be.reps, "runs averaged per point")->capture_default_str();
  bench->add_option("--epochs", be.epochs, "epochs per run")->capture_default_str();
  bench->add_option("--seed", be.seed, "seed")->capture_default_str();
  bench->add_option("--out", be.out, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitData;
  }

  try {
    if (*generate) return cmd_generate(gen);
    if (*train) return cmd_train(tr);
    if (*validate) return cmd_validate(va);
    if (*sweep) return cmd_sweep(sw);
    if (*bench) return cmd_bench(be);
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
