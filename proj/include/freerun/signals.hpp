#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "freerun/rng.hpp"

namespace freerun {

using Eigen::Index;
using Eigen::VectorXd;

enum class BandKind { white, lowpass, highpass };

/// Gaussian noise with a target standard deviation, optionally confined to a band by a
/// zero-phase 4th-order Butterworth filter. Cutoffs are normalized so 1 is Nyquist.
struct NoiseSpec {
  double sigma = 0.0;
  BandKind band = BandKind::white;
  double cutoff = 1.0;

  /// Throws DataError for negative sigma or a cutoff outside (0, 1) on a filtered band.
  void validate() const;

  /// Parses "white", "low:0.2" or "high:0.6" into band and cutoff (sigma untouched).
  static NoiseSpec parse_band(const std::string& text, double sigma = 0.0);
  /// Inverse of parse_band.
  std::string band_label() const;
};

/// One second-order section: (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 2> a{};

  bool stable() const;
};

struct BiquadCascade {
  std::vector<Biquad> sections;

  int order() const { return static_cast<int>(2 * sections.size()); }
  /// |H(e^{j pi w})| for normalized frequency w in [0, 1].
  double magnitude(double w) const;
};

struct ChenRecord {
  VectorXd y;        // noisy measured output
  VectorXd y_clean;  // output without the output error w
};

/// Nonlinear benchmark system
///   y*[k] = (0.8 - 0.5 exp(-y*[k-1]^2)) y*[k-1] - (0.3 + 0.9 exp(-y*[k-1]^2)) y*[k-2]
///           + u[k-1] + 0.2 u[k-2] + 0.1 u[k-1] u[k-2] + v[k],
///   y[k]  = y*[k] + w[k],
/// with y*[0], y*[1] taken from `y_init`. Throws DataError on mismatched lengths.
ChenRecord chen_generate(const VectorXd& u, const VectorXd& v, const VectorXd& w,
                         const std::array<double, 2>& y_init = {0.0, 0.0});

/// Standard-normal values, each held for `hold` consecutive samples.
VectorXd held_gaussian_input(Index n, Index hold, Rng& rng);

/// Digital Butterworth filter from the analog prototype poles, mapped with a prewarped
/// bilinear transform and split into second-order sections with unit gain at DC (lowpass)
/// or Nyquist (highpass). `order` must be even. Throws DataError for cutoff outside (0, 1).
BiquadCascade butterworth_design(int order, double cutoff, BandKind kind);

/// Single causal pass with zero initial state.
VectorXd sosfilt(const BiquadCascade& cascade, const VectorXd& x);

/// Zero-phase filtering: odd-reflection padding of 3 * order samples at each end, forward pass,
/// reverse pass, trim. Each pass starts from the steady state for its first sample, so a
/// constant signal passes through a unit-DC-gain filter unchanged.
/// Throws DataError unless x.size() > 6 * order.
VectorXd filtfilt(const BiquadCascade& cascade, const VectorXd& x);

/// White Gaussian draws, band-limited per `spec`, then rescaled so the sample standard
/// deviation (n - 1 denominator) equals spec.sigma exactly.
VectorXd band_noise(Index n, const NoiseSpec& spec, Rng& rng);

}  // namespace freerun
