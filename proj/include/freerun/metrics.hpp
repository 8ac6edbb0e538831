#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace freerun {

/// Mean over all entries of (y - y_hat)^2. Throws DataError on shape mismatch or empty input.
double mse(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat);

struct SummaryStats {
  double median = 0.0;
  double iqr_low = 0.0;   // 25th percentile
  double iqr_high = 0.0;  // 75th percentile
  double trimmed_mean = 0.0;
  double trimmed_std = 0.0;
  double tail_fraction = 0.0;  // fraction trimmed from each tail
  std::size_t trimmed_per_tail = 0;
  std::size_t n_samples = 0;
};

/// Summary statistics for a small set of realizations.
///
/// Percentiles interpolate linearly between order statistics (position q * (n - 1)).
/// The trimmed mean and standard deviation (n - 1 denominator) drop floor(tail_fraction * n)
/// values from each end of the sorted sample. A "30% trimmed" estimate trims 15% per tail,
/// which removes one value per tail out of 12.
///
/// Throws DataError for fewer than 4 samples, non-finite samples or tail_fraction outside [0, 0.5).
SummaryStats summarize(std::vector<double> samples, double tail_fraction);

/// Fraction per tail used for the sweep tables.
inline constexpr double kSweepTailFraction = 0.15;

enum class TrainingMethod { sp, p_theta, p_phi };

std::string_view method_name(TrainingMethod m);
/// Accepts "sp", "p-theta" and "p-phi". Throws DataError otherwise.
TrainingMethod parse_method(std::string_view text);

/// Problem dimensions entering the per-iteration cost model.
struct NetDims {
  std::int64_t n_samples = 0;             // N
  std::int64_t n_inputs = 0;              // N_x, network input size
  std::int64_t n_outputs = 0;             // N_y
  std::int64_t output_lags = 0;           // n_y
  std::vector<std::int64_t> layer_sizes;  // N_s1 .. N_sL, last one equals N_y

  std::int64_t num_weights() const;
  std::int64_t num_biases() const;
  std::int64_t num_params() const { return num_weights() + num_biases(); }
  std::int64_t num_extended_params() const { return num_params() + output_lags * n_outputs; }

  /// Single hidden layer network with the given input and output sizes.
  static NetDims single_hidden(std::int64_t n_samples, std::int64_t n_inputs, std::int64_t hidden,
                               std::int64_t n_outputs, std::int64_t output_lags);
};

/// Flop counts per evaluation of a single network (forward, backward, dF/dparams, dF/dx).
std::array<std::int64_t, 4> backprop_flops(const NetDims& dims);

/// Per-iteration cost rows i .. viii and the total for one training method.
///
/// Rows that a method does not need are zero. The cubic factorization term N^3 / 3 is
/// evaluated with integer division.
struct FlopBreakdown {
  std::array<std::int64_t, 8> rows{};
  std::int64_t total = 0;
};

FlopBreakdown predict_flops(const NetDims& dims, TrainingMethod method);

/// The dimension orderings assumed by the cost comparison between methods. Each flag holds
/// one link of the chains
///   n_y N_y <= N_x < N_x N_s1 <= N_w < N_params
///   N_y <= N_y^2 < N_y N_s(L-1) <= N_w
/// The second chain's first link is non-strict so single-output models are covered.
struct DimensionChecks {
  std::array<bool, 4> input_chain{};
  std::array<bool, 3> output_chain{};

  bool all() const;
};

DimensionChecks check_dimension_inequalities(const NetDims& dims);

}  // namespace freerun
