#include <cmath>
#include <sstream>

#include "doctest.h"
#include "freerun/errors.hpp"
#include "freerun/experiments.hpp"
#include "support.hpp"

using namespace freerun;
using namespace testsupport;

namespace {

// Noise-free record generated by a small tanh net.
Dataset self_generated(const FeedforwardNet& truth, const ModelOrders& orders, Index n, Rng& rng) {
  Dataset d;
  d.u = held_gaussian_input(n, 2, rng);
  d.y = simulate_free_run(truth, orders, d.u, MatrixXd::Zero(orders.ny, 1));
  return d;
}

}  // namespace

TEST_CASE("generate-then-refit recovers a noise-free generator") {
  const ModelOrders orders{2, 2, 1};
  Rng rng(51);
  const auto structure = NetStructure::mlp(orders.regressor_size(1, 1), {3}, 1);
  FeedforwardNet truth = init_params(structure, rng);
  const Dataset d = self_generated(truth, orders, 300, rng);

  TrainOptions options;
  options.orders = orders;
  options.hidden = {3};
  options.lm.max_epochs = 300;
  options.seed = 5;
  const TrainResult sp = train_model(d, options);
  REQUIRE(sp.ok());
  CHECK(sp.state.objective < 1e-6);
  CHECK(validate_model(sp.model, d).mse < 1e-6);

  options.method = TrainingMethod::p_phi;
  const TrainResult p = train_model(d, options);
  REQUIRE(p.ok());
  CHECK(p.state.params.size() == structure.num_params() + 2);
  CHECK(p.y0.size() == 2);
  CHECK(p.initial_params == sp.initial_params);
}

TEST_CASE("validating the zero model gives the output power") {
  Rng rng(52);
  Dataset d;
  d.u = gaussian_matrix(rng, 500, 1);
  d.y = gaussian_matrix(rng, 500, 1);
  const auto model = DynamicModel::make(ModelOrders{1, 1, 1}, 1, 1, {4});
  const auto v = validate_model(model, d);
  CHECK(v.mse == doctest::Approx(d.y.bottomRows(499).squaredNorm() / 499.0));
}

TEST_CASE("Chen experiment data") {
  ChenExperimentConfig config;
  config.n_train = 300;
  config.n_validation = 200;
  const auto clean = generate_chen_experiment(config, 3);
  CHECK(clean.train.y == clean.train_clean);
  CHECK(clean.validation.y.rows() == 200);

  config.equation_noise = NoiseSpec{0.1};
  config.output_noise = NoiseSpec{0.5};
  const auto noisy = generate_chen_experiment(config, 3);
  CHECK(noisy.train.u == clean.train.u);
  CHECK(noisy.validation.y == clean.validation.y);
  CHECK((noisy.train.y - noisy.train_clean).norm() > 1.0);
  const auto again = generate_chen_experiment(config, 3);
  CHECK(again.train.y == noisy.train.y);
}

TEST_CASE("sweeps are deterministic and cells are independent") {
  SweepConfig config;
  config.noise = NoiseKind::output;
  config.sigmas = {0.0, 0.5};
  config.realizations = 4;
  config.epochs = 5;
  config.n_train = 200;
  config.n_validation = 100;
  config.hidden = 3;
  config.jobs = 2;
  const SweepResult a = run_sweep(config);
  REQUIRE(a.cells.size() == 4);
  config.jobs = 1;
  const SweepResult b = run_sweep(config);
  for (std::size_t i = 0; i < a.cells.size(); ++i) CHECK(a.cells[i].mse == b.cells[i].mse);

  config.sigmas = {0.5};
  const SweepResult c = run_sweep(config);
  CHECK(c.find("white", 0.5, TrainingMethod::sp)->mse == a.find("white", 0.5, TrainingMethod::sp)->mse);
  CHECK(a.find("white", 0.5, TrainingMethod::p_phi)->stats.has_value());
  CHECK(a.find("low:0.2", 0.5, TrainingMethod::sp) == nullptr);

  std::ostringstream results, curves;
  write_sweep_results_csv(results, a);
  write_sweep_curves_csv(curves, a);
  CHECK(results.str().rfind("band,sigma,method,n_ok,failures,median,iqr_low,iqr_high,trimmed_mean,trimmed_std\n", 0) ==
        0);
  CHECK(curves.str().rfind("band,sigma,method,realization,mse\n", 0) == 0);

  config.realizations = 1;
  CHECK_THROWS_AS(config.validate(), DataError);
  config.realizations = 4;
  config.sigmas = {-1.0};
  CHECK_THROWS_AS(config.validate(), DataError);
}

TEST_CASE("realization seeds") {
  const NoiseSpec white{};
  const auto low = NoiseSpec::parse_band("low:0.2");
  const auto s = realization_seed(1, NoiseKind::equation, white, 1.0, 0);
  CHECK(s == realization_seed(1, NoiseKind::equation, white, 1.0, 0));
  CHECK(s != realization_seed(1, NoiseKind::output, white, 1.0, 0));
  CHECK(s != realization_seed(1, NoiseKind::equation, low, 1.0, 0));
  CHECK(s != realization_seed(1, NoiseKind::equation, white, 0.5, 0));
  CHECK(s != realization_seed(1, NoiseKind::equation, white, 1.0, 1));
  CHECK(s != realization_seed(2, NoiseKind::equation, white, 1.0, 0));
}

TEST_CASE("bench helpers") {
  CHECK(hidden_for_param_count(61, 4, 1) == 10);
  CHECK(hidden_for_param_count(301, 4, 1) == 50);
  CHECK_THROWS_AS(hidden_for_param_count(60, 4, 1), DataError);
  CHECK(log_log_slope({1, 2, 4, 8}, {3, 12, 48, 192}) == doctest::Approx(2.0));
  CHECK(log_log_slope({10, 100}, {5, 50}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(log_log_slope({1}, {1}), DataError);

  std::vector<EpochRecord> h(4);
  h[0] = {0, 1.0, 1.0, 0.0, true, 0.0, 0.0};
  h[1] = {1, 1.0, 1.0, 0.0, true, 10.0, 0.0};
  h[2] = {2, 1.0, 1.0, 0.0, false, 12.0, 0.0};
  h[3] = {3, 1.0, 1.0, 0.0, true, 30.0, 0.0};
  // accepted epochs last 10 ms and 18 ms
  CHECK(accepted_epoch_seconds(h) == doctest::Approx(0.014));
}

TEST_CASE("tiny bench") {
  BenchConfig config;
  config.n_list = {200, 400};
  config.n_theta_list = {13, 25};
  config.n_for_n_theta_grid = 200;
  config.n_theta_for_n_grid = 13;
  config.repetitions = 1;
  config.epochs = 3;
  int calls = 0;
  const BenchResult r = run_bench(config, [&](const BenchPoint&) { ++calls; });
  CHECK(calls == 8);
  CHECK(r.points.size() == 8);
  CHECK(r.slopes.size() == 2);
  CHECK(r.time_ratios(TrainingMethod::p_phi).size() == 4);
  for (const auto& p : r.points) {
    CHECK(p.full_epoch_seconds > 0.0);
    CHECK(p.predicted_flops > 0);
  }
  std::ostringstream os;
  write_bench_csv(os, r);
  CHECK(os.str().rfind(
            "grid,N,NTheta,hidden,method,mean_seconds,mean_accepted,full_epoch_seconds,predicted_flops_per_epoch\n",
            0) == 0);
}
