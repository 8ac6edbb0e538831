#include "freerun/signals.hpp"

#include <charconv>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "freerun/errors.hpp"

namespace freerun {

void NoiseSpec::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DataError("noise sigma must be finite and nonnegative");
  if (band != BandKind::white && !(cutoff > 0.0 && cutoff < 1.0)) {
    throw DataError("noise cutoff must lie in (0, 1), got " + std::to_string(cutoff));
  }
}

NoiseSpec NoiseSpec::parse_band(const std::string& text, double sigma) {
  NoiseSpec spec;
  spec.sigma = sigma;
  if (text == "white") return spec;
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw DataError("band must be white, low:<wc> or high:<wc>, got '" + text + "'");
  const std::string kind = text.substr(0, colon);
  if (kind == "low") {
    spec.band = BandKind::lowpass;
  } else if (kind == "high") {
    spec.band = BandKind::highpass;
  } else {
    throw DataError("unknown band kind '" + kind + "'");
  }
  try {
    std::size_t used = 0;
    spec.cutoff = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing characters");
  } catch (const std::exception&) {
    throw DataError("bad cutoff in band '" + text + "'");
  }
  spec.validate();
  return spec;
}

namespace {

// Shortest decimal that parses back to the same double.
std::string shortest(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

std::string NoiseSpec::band_label() const {
  switch (band) {
    case BandKind::white:
      return "white";
    case BandKind::lowpass:
      return "low:" + shortest(cutoff);
    case BandKind::highpass:
      return "high:" + shortest(cutoff);
  }
  return "white";
}

bool Biquad::stable() const {
  // Jury conditions for z^2 + a1 z + a2.
  return std::abs(a[1]) < 1.0 && std::abs(a[0]) < 1.0 + a[1];
}

double BiquadCascade::magnitude(double w) const {
  const std::complex<double> zinv = std::polar(1.0, -std::numbers::pi * w);
  std::complex<double> h = 1.0;
  for (const auto& s : sections) {
    const auto num = s.b[0] + zinv * (s.b[1] + zinv * s.b[2]);
    const auto den = 1.0 + zinv * (s.a[0] + zinv * s.a[1]);
    h *= num / den;
  }
  return std::abs(h);
}

ChenRecord chen_generate(const VectorXd& u, const VectorXd& v, const VectorXd& w, const std::array<double, 2>& y_init) {
  const Index n = u.size();
  if (v.size() != n || w.size() != n) throw DataError("u, v and w must have the same length");
  ChenRecord rec;
  rec.y_clean.resize(n);
  for (Index k = 0; k < n && k < 2; ++k) rec.y_clean[k] = y_init[static_cast<std::size_t>(k)];
  for (Index k = 2; k < n; ++k) {
    const double y1 = rec.y_clean[k - 1];
    const double y2 = rec.y_clean[k - 2];
    const double g = std::exp(-y1 * y1);
    rec.y_clean[k] =
        (0.8 - 0.5 * g) * y1 - (0.3 + 0.9 * g) * y2 + u[k - 1] + 0.2 * u[k - 2] + 0.1 * u[k - 1] * u[k - 2] + v[k];
  }
  rec.y = rec.y_clean + w;
  return rec;
}

VectorXd held_gaussian_input(Index n, Index hold, Rng& rng) {
  if (hold < 1) throw DataError("hold must be at least 1");
  std::normal_distribution<double> dist(0.0, 1.0);
  VectorXd u(n);
  double value = 0.0;
  for (Index k = 0; k < n; ++k) {
    if (k % hold == 0) value = dist(rng);
    u[k] = value;
  }
  return u;
}

BiquadCascade butterworth_design(int order, double cutoff, BandKind kind) {
  if (order < 2 || order % 2 != 0) throw DataError("Butterworth order must be a positive even number");
  if (!(cutoff > 0.0 && cutoff < 1.0)) throw DataError("cutoff must lie in (0, 1), got " + std::to_string(cutoff));
  if (kind == BandKind::white) throw DataError("white band has no filter");

  using cplx = std::complex<double>;
  constexpr double pi = std::numbers::pi;
  // Bilinear map s = (z - 1) / (z + 1); the analog cutoff is prewarped to match cutoff exactly.
  const double warped = std::tan(pi * cutoff / 2.0);

  BiquadCascade cascade;
  for (int k = 1; k <= order / 2; ++k) {
    const cplx proto = std::polar(1.0, pi * (2.0 * k + order - 1.0) / (2.0 * order));
    const cplx analog = kind == BandKind::lowpass ? warped * proto : warped / proto;
    const cplx pole = (1.0 + analog) / (1.0 - analog);

    Biquad s;
    s.a = {-2.0 * pole.real(), std::norm(pole)};
    if (kind == BandKind::lowpass) {
      const double g = (1.0 + s.a[0] + s.a[1]) / 4.0;
      s.b = {g, 2.0 * g, g};
    } else {
      const double g = (1.0 - s.a[0] + s.a[1]) / 4.0;
      s.b = {g, -2.0 * g, g};
    }
    cascade.sections.push_back(s);
  }
  return cascade;
}

namespace {

using State = std::vector<std::array<double, 2>>;

// Transposed direct form II, one section after another.
VectorXd run_cascade(const BiquadCascade& cascade, const VectorXd& x, State state) {
  VectorXd out = x;
  for (std::size_t j = 0; j < cascade.sections.size(); ++j) {
    const Biquad& s = cascade.sections[j];
    auto& z = state[j];
    for (Index k = 0; k < out.size(); ++k) {
      const double in = out[k];
      const double y = s.b[0] * in + z[0];
      z[0] = s.b[1] * in - s.a[0] * y + z[1];
      z[1] = s.b[2] * in - s.a[1] * y;
      out[k] = y;
    }
  }
  return out;
}

// Section states that reproduce a constant input `level` in steady state.
State steady_state(const BiquadCascade& cascade, double level) {
  State state(cascade.sections.size());
  double in = level;
  for (std::size_t j = 0; j < cascade.sections.size(); ++j) {
    const Biquad& s = cascade.sections[j];
    const double gain = (s.b[0] + s.b[1] + s.b[2]) / (1.0 + s.a[0] + s.a[1]);
    const double out = gain * in;
    state[j] = {out - s.b[0] * in, s.b[2] * in - s.a[1] * out};
    in = out;
  }
  return state;
}

}  // namespace

VectorXd sosfilt(const BiquadCascade& cascade, const VectorXd& x) {
  return run_cascade(cascade, x, State(cascade.sections.size(), {0.0, 0.0}));
}

VectorXd filtfilt(const BiquadCascade& cascade, const VectorXd& x) {
  const Index pad = 3 * cascade.order();
  const Index n = x.size();
  if (n <= 2 * pad) {
    throw DataError("signal of length " + std::to_string(n) + " too short for filtfilt; need more than " +
                    std::to_string(2 * pad));
  }
  VectorXd ext(n + 2 * pad);
  for (Index i = 0; i < pad; ++i) {
    ext[i] = 2.0 * x[0] - x[pad - i];
    ext[n + pad + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  }
  ext.segment(pad, n) = x;

  VectorXd fwd = run_cascade(cascade, ext, steady_state(cascade, ext[0]));
  fwd.reverseInPlace();
  VectorXd back = run_cascade(cascade, fwd, steady_state(cascade, fwd[0]));
  back.reverseInPlace();
  return back.segment(pad, n);
}

VectorXd band_noise(Index n, const NoiseSpec& spec, Rng& rng) {
  spec.validate();
  if (n < 2) throw DataError("band_noise needs at least two samples");
  std::normal_distribution<double> dist(0.0, 1.0);
  VectorXd x(n);
  for (Index k = 0; k < n; ++k) x[k] = dist(rng);
  if (spec.sigma == 0.0) return VectorXd::Zero(n);
  if (spec.band != BandKind::white) x = filtfilt(butterworth_design(4, spec.cutoff, spec.band), x);

  const double mean = x.mean();
  const double sd = std::sqrt((x.array() - mean).square().sum() / static_cast<double>(n - 1));
  return x * (spec.sigma / sd);
}

}  // namespace freerun
