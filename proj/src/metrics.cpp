#include "freerun/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "freerun/errors.hpp"

namespace freerun {

double mse(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat) {
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols()) {
    throw DataError("mse: shapes differ (" + std::to_string(y.rows()) + "x" + std::to_string(y.cols()) + " vs " +
                    std::to_string(y_hat.rows()) + "x" + std::to_string(y_hat.cols()) + ")");
  }
  if (y.size() == 0) throw DataError("mse: empty input");
  return (y - y_hat).squaredNorm() / static_cast<double>(y.size());
}

namespace {

double percentile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

SummaryStats summarize(std::vector<double> samples, double tail_fraction) {
  if (samples.empty()) throw DataError("summarize: no samples");
  if (samples.size() < 4) throw DataError("summarize: need at least 4 samples");
  if (!(tail_fraction >= 0.0 && tail_fraction < 0.5)) throw DataError("summarize: tail fraction must be in [0, 0.5)");
  for (double s : samples) {
    if (!std::isfinite(s)) throw DataError("summarize: non-finite sample");
  }
  std::sort(samples.begin(), samples.end());

  SummaryStats st;
  st.n_samples = samples.size();
  st.tail_fraction = tail_fraction;
  st.median = percentile_sorted(samples, 0.5);
  st.iqr_low = percentile_sorted(samples, 0.25);
  st.iqr_high = percentile_sorted(samples, 0.75);

  const auto cut = static_cast<std::size_t>(std::floor(tail_fraction * static_cast<double>(samples.size())));
  st.trimmed_per_tail = cut;
  const auto first = samples.begin() + static_cast<std::ptrdiff_t>(cut);
  const auto last = samples.end() - static_cast<std::ptrdiff_t>(cut);
  const auto kept = static_cast<double>(last - first);
  st.trimmed_mean = std::accumulate(first, last, 0.0) / kept;
  double ss = 0.0;
  for (auto it = first; it != last; ++it) ss += (*it - st.trimmed_mean) * (*it - st.trimmed_mean);
  st.trimmed_std = kept > 1 ? std::sqrt(ss / (kept - 1)) : 0.0;
  return st;
}

std::string_view method_name(TrainingMethod m) {
  switch (m) {
    case TrainingMethod::sp:
      return "sp";
    case TrainingMethod::p_theta:
      return "p-theta";
    case TrainingMethod::p_phi:
      return "p-phi";
  }
  return "sp";
}

TrainingMethod parse_method(std::string_view text) {
  if (text == "sp") return TrainingMethod::sp;
  if (text == "p-theta") return TrainingMethod::p_theta;
  if (text == "p-phi") return TrainingMethod::p_phi;
  throw DataError("unknown training method '" + std::string(text) + "' (expected sp, p-theta or p-phi)");
}

std::int64_t NetDims::num_weights() const {
  std::int64_t w = 0;
  std::int64_t prev = n_inputs;
  for (auto s : layer_sizes) {
    w += prev * s;
    prev = s;
  }
  return w;
}

std::int64_t NetDims::num_biases() const {
  return std::accumulate(layer_sizes.begin(), layer_sizes.end(), std::int64_t{0});
}

NetDims NetDims::single_hidden(std::int64_t n_samples, std::int64_t n_inputs, std::int64_t hidden,
                               std::int64_t n_outputs, std::int64_t output_lags) {
  return {n_samples, n_inputs, n_outputs, output_lags, {hidden, n_outputs}};
}

std::array<std::int64_t, 4> backprop_flops(const NetDims& d) {
  const std::int64_t nw = d.num_weights();
  const std::int64_t nz = d.n_outputs;
  const std::int64_t first = d.n_inputs * d.layer_sizes.front();
  return {2 * nw, (2 * nz + 1) * (nw - first), nw * nz, 2 * first * nz};
}

FlopBreakdown predict_flops(const NetDims& d, TrainingMethod method) {
  const std::int64_t n = d.n_samples;
  const std::int64_t ny = d.n_outputs;
  const std::int64_t nt = d.num_params();
  const std::int64_t nphi = d.num_extended_params();
  const auto per_sample = backprop_flops(d);

  std::array<std::int64_t, 8> all{};
  for (std::size_t i = 0; i < 4; ++i) all[i] = n * per_sample[i];
  all[4] = 2 * n * nt * (ny * ny + ny);
  all[5] = 2 * n * d.output_lags * ny * (ny * ny + ny);
  all[6] = 2 * n * nt * nt + nt * nt * nt / 3;
  all[7] = 2 * n * nphi * nphi + nphi * nphi * nphi / 3;

  // Rows used by each method, numbered i .. viii.
  std::array<bool, 8> used{};
  switch (method) {
    case TrainingMethod::sp:
      used = {true, true, true, false, false, false, true, false};
      break;
    case TrainingMethod::p_theta:
      used = {true, true, true, true, true, false, true, false};
      break;
    case TrainingMethod::p_phi:
      used = {true, true, true, true, true, true, false, true};
      break;
  }
  FlopBreakdown out;
  for (std::size_t i = 0; i < 8; ++i) {
    out.rows[i] = used[i] ? all[i] : 0;
    out.total += out.rows[i];
  }
  return out;
}

bool DimensionChecks::all() const {
  return std::all_of(input_chain.begin(), input_chain.end(), [](bool b) { return b; }) &&
         std::all_of(output_chain.begin(), output_chain.end(), [](bool b) { return b; });
}

DimensionChecks check_dimension_inequalities(const NetDims& d) {
  const std::int64_t nx = d.n_inputs;
  const std::int64_t ny = d.n_outputs;
  const std::int64_t nw = d.num_weights();
  const std::int64_t ns1 = d.layer_sizes.front();
  const std::size_t L = d.layer_sizes.size();
  const std::int64_t last_hidden = L >= 2 ? d.layer_sizes[L - 2] : nx;

  DimensionChecks c;
  c.input_chain = {d.output_lags * ny <= nx, nx < nx * ns1, nx * ns1 <= nw, nw < d.num_params()};
  c.output_chain = {ny <= ny * ny, ny * ny < ny * last_hidden, ny * last_hidden <= nw};
  return c;
}

}  // namespace freerun
