#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace testsupport {

int uniform_int(freerun::Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double uniform(freerun::Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

VectorXd gaussian_vector(freerun::Rng& rng, Index n, double sigma) {
  std::normal_distribution<double> g(0.0, sigma);
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

MatrixXd gaussian_matrix(freerun::Rng& rng, Index rows, Index cols, double sigma) {
  std::normal_distribution<double> g(0.0, sigma);
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  return m;
}

freerun::FeedforwardNet random_net(freerun::Rng& rng, Index input_size, Index output_size, Index max_params) {
  for (;;) {
    std::vector<Index> hidden;
    const int layers = uniform_int(rng, 1, 2);
    for (int l = 0; l < layers; ++l) hidden.push_back(uniform_int(rng, 1, 8));
    auto structure = freerun::NetStructure::mlp(input_size, hidden, output_size);
    if (structure.num_params() > max_params) continue;
    freerun::FeedforwardNet net(structure);
    const VectorXd p = gaussian_vector(rng, structure.num_params(), 0.7);
    freerun::unpack_params_into(p, net);
    return net;
  }
}

MatrixXd central_difference_jacobian(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& x, double h) {
  const VectorXd f0 = f(x);
  MatrixXd jac(f0.size(), x.size());
  VectorXd xp = x;
  for (Index j = 0; j < x.size(); ++j) {
    xp[j] = x[j] + h;
    const VectorXd fp = f(xp);
    xp[j] = x[j] - h;
    const VectorXd fm = f(xp);
    xp[j] = x[j];
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

double relative_error(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1.0);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

std::vector<double> naive_periodogram(const VectorXd& x) {
  const Index n = x.size();
  std::vector<double> p(static_cast<std::size_t>(n / 2 + 1));
  for (Index k = 0; k <= n / 2; ++k) {
    double re = 0.0;
    double im = 0.0;
    for (Index t = 0; t < n; ++t) {
      const double arg = 2.0 * std::numbers::pi * static_cast<double>(k * t % n) / static_cast<double>(n);
      re += x[t] * std::cos(arg);
      im -= x[t] * std::sin(arg);
    }
    p[static_cast<std::size_t>(k)] = (re * re + im * im) / static_cast<double>(n);
  }
  return p;
}

double band_power_fraction(const VectorXd& x, double lo, double hi) {
  const auto p = naive_periodogram(x);
  const double n = static_cast<double>(x.size());
  double total = 0.0;
  double inside = 0.0;
  for (std::size_t k = 1; k < p.size(); ++k) {
    const double w = 2.0 * static_cast<double>(k) / n;
    total += p[k];
    if (w >= lo && w <= hi) inside += p[k];
  }
  return inside / total;
}

DynInstance random_dyn_instance(freerun::Rng& rng) {
  DynInstance inst;
  inst.orders.ny = uniform_int(rng, 1, 3);
  inst.orders.nu = uniform_int(rng, 1, 3);
  inst.orders.tau_d = uniform_int(rng, 0, static_cast<int>(inst.orders.nu));
  const Index nyc = uniform_int(rng, 1, 2);
  const Index nuc = uniform_int(rng, 1, 2);
  const Index n = uniform_int(rng, 10, 50);
  inst.data.u = gaussian_matrix(rng, n, nuc);
  inst.data.y = gaussian_matrix(rng, n, nyc);
  inst.net = random_net(rng, inst.orders.regressor_size(nyc, nuc), nyc, 61);
  return inst;
}

freerun::NetDims random_dims(freerun::Rng& rng) {
  freerun::NetDims d;
  d.n_samples = uniform_int(rng, 10, 5000);
  d.n_outputs = uniform_int(rng, 1, 3);
  d.output_lags = uniform_int(rng, 1, 3);
  d.n_inputs = d.output_lags * d.n_outputs + uniform_int(rng, 1, 4);
  const int hidden_layers = uniform_int(rng, 1, 3);
  for (int l = 0; l < hidden_layers; ++l) d.layer_sizes.push_back(uniform_int(rng, 4, 40));
  d.layer_sizes.push_back(d.n_outputs);
  return d;
}

std::int64_t hand_flop_total(const freerun::NetDims& d, freerun::TrainingMethod m) {
  std::int64_t nw = d.n_inputs * d.layer_sizes[0];
  std::int64_t ng = d.layer_sizes[0];
  for (std::size_t l = 1; l < d.layer_sizes.size(); ++l) {
    nw += d.layer_sizes[l - 1] * d.layer_sizes[l];
    ng += d.layer_sizes[l];
  }
  const std::int64_t nt = nw + ng;
  const std::int64_t nphi = nt + d.output_lags * d.n_outputs;
  const std::int64_t n = d.n_samples, ny = d.n_outputs, nx = d.n_inputs, ns1 = d.layer_sizes[0];
  const std::int64_t common = 2 * n * nw + n * (2 * ny + 1) * (nw - nx * ns1) + n * nw * ny;
  const std::int64_t recursion = 2 * n * nx * ns1 * ny + 2 * n * nt * (ny * ny + ny);
  const std::int64_t solve_theta = 2 * n * nt * nt + nt * nt * nt / 3;
  const std::int64_t solve_phi = 2 * n * nphi * nphi + nphi * nphi * nphi / 3;
  switch (m) {
    case freerun::TrainingMethod::sp:
      return common + solve_theta;
    case freerun::TrainingMethod::p_theta:
      return common + recursion + solve_theta;
    case freerun::TrainingMethod::p_phi:
      return common + recursion + 2 * n * d.output_lags * ny * (ny * ny + ny) + solve_phi;
  }
  return -1;
}

VectorXd chen_reference(const VectorXd& u, const VectorXd& v, const VectorXd& w) {
  const Index n = u.size();
  VectorXd ys = VectorXd::Zero(n);
  for (Index k = 2; k < n; ++k) {
    const double a = ys[k - 1];
    const double e = std::exp(-a * a);
    ys[k] = (0.8 - 0.5 * e) * a - (0.3 + 0.9 * e) * ys[k - 2] + u[k - 1] + 0.2 * u[k - 2] + 0.1 * u[k - 1] * u[k - 2] +
            v[k];
  }
  return ys + w;
}

}  // namespace testsupport
