#include <cmath>

#include "doctest.h"
#include "freerun/dynmodel.hpp"
#include "freerun/errors.hpp"
#include "support.hpp"

using namespace freerun;
using namespace testsupport;

namespace {

using Instance = DynInstance;

// Linear net y = a1*y[t-1] + a2*y[t-2] + b*u[t-1] built by hand.
FeedforwardNet linear_second_order(double a1, double a2, double b) {
  NetStructure s;
  s.input_size = 3;
  s.layers = {{1, Activation::identity}};
  FeedforwardNet net(s);
  net.weights(0) << a1, a2, b;
  return net;
}

}  // namespace

TEST_CASE("regressor stacks output lags before input lags") {
  Dataset d;
  d.y = MatrixXd(5, 1);
  d.y << 10, 11, 12, 13, 14;
  d.u = MatrixXd(5, 1);
  d.u << 20, 21, 22, 23, 24;
  const ModelOrders orders{2, 3, 1};
  const VectorXd x = build_regressor(d.y, d.u, orders, 3);
  REQUIRE(x.size() == 5);
  CHECK(x[0] == 12);
  CHECK(x[1] == 11);
  CHECK(x[2] == 22);
  CHECK(x[3] == 21);
  CHECK(x[4] == 20);
  CHECK_THROWS_AS(build_regressor(d.y, d.u, orders, 2), std::out_of_range);
}

TEST_CASE("orders validation and window placement") {
  CHECK_THROWS_AS((ModelOrders{0, 1, 0}.validate()), StructuralError);
  CHECK_THROWS_AS((ModelOrders{1, 1, 2}.validate()), StructuralError);
  const ModelOrders wide{1, 3, 1};
  CHECK(wide.first_predictable() == 3);
  CHECK(wide.initial_window_start() == 2);
  const ModelOrders usual{2, 2, 1};
  CHECK(usual.initial_window_start() == 0);
  CHECK(usual.regressor_size(1, 1) == 4);
}

TEST_CASE("free run of a hand-built linear model") {
  const auto net = linear_second_order(0.5, -0.25, 1.0);
  const ModelOrders orders{2, 1, 1};
  MatrixXd u = MatrixXd::Zero(6, 1);
  u(2, 0) = 1.0;
  MatrixXd y0(2, 1);
  y0 << 1.0, 2.0;
  const MatrixXd ys = simulate_free_run(net, orders, u, y0);
  // y2 = 0.5*2 - 0.25*1 + u1 = 0.75, y3 = 0.5*0.75 - 0.25*2 + u2 = 0.875
  CHECK(ys(2, 0) == doctest::Approx(0.75));
  CHECK(ys(3, 0) == doctest::Approx(0.875));
  CHECK(ys(4, 0) == doctest::Approx(0.5 * 0.875 - 0.25 * 0.75));
}

TEST_CASE("rows before the initial window are NaN when nu exceeds ny") {
  NetStructure s;
  s.input_size = 4;
  s.layers = {{1, Activation::identity}};
  FeedforwardNet net(s);
  const ModelOrders orders{1, 3, 1};
  const MatrixXd u = MatrixXd::Ones(8, 1);
  const MatrixXd ys = simulate_free_run(net, orders, u, MatrixXd::Constant(1, 1, 5.0));
  CHECK(std::isnan(ys(0, 0)));
  CHECK(std::isnan(ys(1, 0)));
  CHECK(ys(2, 0) == 5.0);
  CHECK(ys(3, 0) == 0.0);
}

TEST_CASE("one-step residuals of the generating model vanish") {
  const auto net = linear_second_order(0.3, 0.2, -0.7);
  const ModelOrders orders{2, 1, 1};
  Rng rng(5);
  Dataset d;
  d.u = gaussian_matrix(rng, 40, 1);
  MatrixXd y0(2, 1);
  y0 << 0.1, -0.2;
  d.y = simulate_free_run(net, orders, d.u, y0);
  CHECK(residuals_sp(net, orders, d).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(residuals_p(net, orders, d, measured_initial_conditions(orders, d.y)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("residual vector lengths") {
  Rng rng(2);
  const ModelOrders orders{1, 3, 0};
  Dataset d;
  d.u = gaussian_matrix(rng, 20, 1);
  d.y = gaussian_matrix(rng, 20, 2);
  auto net = random_net(rng, orders.regressor_size(2, 1), 2, 61);
  CHECK(residuals_sp(net, orders, d).size() == (20 - 3) * 2);
  // free run includes the initial window: rows 2 .. 19
  const auto rj = residuals_jacobian_p(net, orders, d, measured_initial_conditions(orders, d.y), true);
  CHECK(rj.residuals.size() == 18 * 2);
  CHECK(rj.jacobian.cols() == net.num_params() + 2);
  // initial window residuals are zero when y0 is the measured window
  CHECK(rj.residuals.head(2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("series-parallel Jacobian matches finite differences") {
  Rng rng(101);
  for (int trial = 0; trial < 60; ++trial) {
    Instance inst = random_dyn_instance(rng);
    const VectorXd theta = pack_params(inst.net);
    FeedforwardNet scratch = inst.net;
    auto f = [&](const VectorXd& p) {
      unpack_params_into(p, scratch);
      return residuals_sp(scratch, inst.orders, inst.data);
    };
    const auto rj = residuals_jacobian_sp(inst.net, inst.orders, inst.data);
    CHECK(relative_error(rj.residuals, f(theta)) < 1e-14);
    CHECK(relative_error(rj.jacobian, central_difference_jacobian(f, theta)) < 1e-5);
  }
}

TEST_CASE("parallel Jacobian matches finite differences in both parameter blocks") {
  Rng rng(202);
  for (int trial = 0; trial < 60; ++trial) {
    Instance inst = random_dyn_instance(rng);
    const Index n_theta = inst.net.num_params();
    const VectorXd y0 = gaussian_vector(rng, inst.orders.ny * inst.data.num_outputs());
    VectorXd phi(n_theta + y0.size());
    phi << pack_params(inst.net), y0;
    FeedforwardNet scratch = inst.net;
    auto f = [&](const VectorXd& p) {
      unpack_params_into(p.head(n_theta), scratch);
      return residuals_p(scratch, inst.orders, inst.data, p.tail(y0.size()));
    };
    const auto full = residuals_jacobian_p(inst.net, inst.orders, inst.data, y0, true);
    const MatrixXd fd = central_difference_jacobian(f, phi);
    CHECK(relative_error(full.residuals, f(phi)) < 1e-14);
    CHECK(relative_error(full.jacobian, fd) < 1e-5);

    const auto theta_only = residuals_jacobian_p(inst.net, inst.orders, inst.data, y0, false);
    CHECK(theta_only.jacobian.cols() == n_theta);
    CHECK(relative_error(theta_only.jacobian, fd.leftCols(n_theta)) < 1e-5);
  }
}

TEST_CASE("initial-window rows of the parallel Jacobian") {
  Rng rng(9);
  const ModelOrders orders{2, 2, 1};
  Dataset d;
  d.u = gaussian_matrix(rng, 15, 1);
  d.y = gaussian_matrix(rng, 15, 2);
  auto net = random_net(rng, orders.regressor_size(2, 1), 2, 61);
  const auto rj = residuals_jacobian_p(net, orders, d, measured_initial_conditions(orders, d.y), true);
  const Index n_theta = net.num_params();
  const MatrixXd window = rj.jacobian.topRows(4);
  CHECK(window.leftCols(n_theta).cwiseAbs().maxCoeff() == 0.0);
  CHECK(window.rightCols(4).isIdentity());
}

TEST_CASE("scalers") {
  Dataset d;
  d.u = MatrixXd(4, 1);
  d.u << 1, 2, 3, 4;
  d.y = MatrixXd(4, 2);
  d.y << 0, 5, 2, 5, 4, 5, 6, 6;
  SUBCASE("constant channel is rejected with its name") {
    Dataset c = d;
    c.y.col(1).setConstant(5.0);
    CHECK_THROWS_WITH_AS(fit_scalers(c), "channel y2 has zero variance", DataError);
  }
  SUBCASE("z-score with sample standard deviation") {
    const Scalers s = fit_scalers(d);
    CHECK(s.u.mean[0] == doctest::Approx(2.5));
    CHECK(s.u.scale[0] == doctest::Approx(std::sqrt(5.0 / 3.0)));
    const Dataset z = apply_scaling(d, s);
    CHECK(z.u.mean() == doctest::Approx(0.0));
    CHECK(invert_output_scaling(z.y, s).isApprox(d.y));
  }
}

TEST_CASE("dataset validation") {
  Dataset d;
  d.u = MatrixXd::Zero(3, 1);
  d.y = MatrixXd::Zero(4, 1);
  CHECK_THROWS_AS(d.validate(ModelOrders{1, 1, 0}), DataError);
  d.u = MatrixXd::Zero(2, 1);
  d.y = MatrixXd::Zero(2, 1);
  CHECK_THROWS_AS(d.validate(ModelOrders{2, 2, 1}), DataError);
}

TEST_CASE("physical-unit simulation applies and inverts the scalers") {
  auto model = DynamicModel::make(ModelOrders{1, 1, 1}, 1, 1, {});
  model.net.weights(0) << 0.5, 1.0;
  model.scalers.u = {VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 2.0)};
  model.scalers.y = {VectorXd::Constant(1, 10.0), VectorXd::Constant(1, 4.0)};
  MatrixXd u(3, 1);
  u << 3.0, 5.0, 0.0;
  const MatrixXd y = simulate(model, u, MatrixXd::Constant(1, 1, 14.0));
  // scaled: y0 = 1, u = [1, 2, -0.5]; ys1 = 0.5 + 1 = 1.5 -> 16
  CHECK(y(1, 0) == doctest::Approx(16.0));
  CHECK(y(2, 0) == doctest::Approx(10.0 + 4.0 * (0.75 + 2.0)));
}

TEST_CASE("unbounded growth is representable") {
  NetStructure s;
  s.input_size = 2;
  s.layers = {{1, Activation::identity}};
  FeedforwardNet net(s);
  net.weights(0) << 2.0, 0.0;
  const MatrixXd ys = simulate_free_run(net, ModelOrders{1, 1, 1}, MatrixXd::Zero(40, 1), MatrixXd::Ones(1, 1));
  for (Index k = 0; k < 40; ++k) CHECK(ys(k, 0) == std::ldexp(1.0, static_cast<int>(k)));
  CHECK(simulate_free_run(net, ModelOrders{1, 1, 1}, MatrixXd::Zero(40, 1), MatrixXd::Zero(1, 1)).isZero(0.0));
}

TEST_CASE("series-parallel and parallel residuals agree where they must") {
  Rng rng(303);
  for (int trial = 0; trial < 30; ++trial) {
    Instance inst = random_dyn_instance(rng);
    const Index nyc = inst.data.num_outputs();
    const Index p = inst.orders.first_predictable();
    const Index s = inst.orders.initial_window_start();
    const VectorXd y0 = measured_initial_conditions(inst.orders, inst.data.y);
    const auto sp = residuals_jacobian_sp(inst.net, inst.orders, inst.data);
    const auto par = residuals_jacobian_p(inst.net, inst.orders, inst.data, y0, false);
    // first predictable step only reads measured lags
    const Index first = (p - s) * nyc;
    CHECK(relative_error(par.residuals.segment(first, nyc), sp.residuals.head(nyc)) < 1e-14);
    CHECK(relative_error(par.jacobian.middleRows(first, nyc), sp.jacobian.topRows(nyc)) < 1e-14);

    // without output feedback the free run degenerates to one-step prediction
    FeedforwardNet open_loop = inst.net;
    open_loop.weights(0).leftCols(inst.orders.ny * nyc).setZero();
    const auto sp0 = residuals_jacobian_sp(open_loop, inst.orders, inst.data);
    const auto par0 = residuals_jacobian_p(open_loop, inst.orders, inst.data, y0, false);
    const Index rows = sp0.residuals.size();
    CHECK(relative_error(par0.residuals.tail(rows), sp0.residuals) < 1e-14);
    // Columns of the zeroed feedback weights still differ: SP evaluates them at measured lags,
    // the free run at simulated ones.
    MatrixXd jp = par0.jacobian.bottomRows(rows);
    MatrixXd js = sp0.jacobian;
    const Index nx = open_loop.input_size();
    for (Index i = 0; i < open_loop.weights(0).rows(); ++i) {
      jp.middleCols(i * nx, inst.orders.ny * nyc).setZero();
      js.middleCols(i * nx, inst.orders.ny * nyc).setZero();
    }
    CHECK(relative_error(jp, js) < 1e-14);
  }
}

TEST_CASE("single-block series-parallel Jacobian is the network Jacobian") {
  Rng rng(304);
  const ModelOrders orders{2, 2, 1};
  Dataset d;
  d.u = gaussian_matrix(rng, 3, 1);
  d.y = gaussian_matrix(rng, 3, 1);
  auto net = random_net(rng, 4, 1, 40);
  const auto rj = residuals_jacobian_sp(net, orders, d);
  REQUIRE(rj.jacobian.rows() == 1);
  const auto cache = forward(net, build_regressor(d.y, d.u, orders, 2));
  CHECK(relative_error(rj.jacobian, param_jacobian(net, cache, backward(net, cache))) < 1e-15);
  CHECK(rj.residuals[0] == doctest::Approx(cache.output()[0] - d.y(2, 0)));
}
