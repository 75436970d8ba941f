#include "imgan/resample.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace imgan::dsp {

namespace {

// Modified Bessel function of the first kind, order zero (series expansion).
double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_sq = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= half_sq / (k * static_cast<double>(k));
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

double kaiser(double frac, double beta) {  // frac in [-1, 1]
  const double a = 1.0 - frac * frac;
  if (a <= 0.0) return 0.0;
  return bessel_i0(beta * std::sqrt(a)) / bessel_i0(beta);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

Waveform resample(const Waveform& w, int target_rate) {
  if (target_rate <= 0) throw std::invalid_argument("resample: non-positive rate");
  if (w.empty()) throw std::invalid_argument("resample: empty input");
  if (target_rate == w.sample_rate) return w;

  const int g = std::gcd(target_rate, w.sample_rate);
  const long long up = target_rate / g;     // L
  const long long down = w.sample_rate / g; // M

  constexpr int kTaps = 32;           // taps per phase
  constexpr int kHalf = kTaps / 2;    // input-sample reach on each side
  constexpr double kBeta = 8.0;
  const double cutoff = std::min(1.0, static_cast<double>(up) / down);  // of input Nyquist

  // Phase p holds the filter sampled at fractional offsets (k - p/L) for
  // k in [-kHalf+1, kHalf]; normalized so each phase sums to 1 (exact DC).
  std::vector<std::vector<double>> phases(static_cast<std::size_t>(up));
  for (long long p = 0; p < up; ++p) {
    auto& taps = phases[static_cast<std::size_t>(p)];
    taps.resize(kTaps);
    const double frac = static_cast<double>(p) / up;
    double sum = 0.0;
    for (int k = 0; k < kTaps; ++k) {
      const double t = (k - kHalf + 1) - frac;
      taps[k] = cutoff * sinc(cutoff * t) * kaiser(t / kHalf, kBeta);
      sum += taps[k];
    }
    for (double& v : taps) v /= sum;
  }

  const long long in_len = w.size();
  const long long out_len = (in_len * up + down - 1) / down;
  Waveform out{Eigen::VectorXd::Zero(out_len), target_rate};

  for (long long n = 0; n < out_len; ++n) {
    const long long num = n * down;
    const long long i0 = num / up;
    const auto& taps = phases[static_cast<std::size_t>(num % up)];
    double acc = 0.0;
    for (int k = 0; k < kTaps; ++k) {
      const long long idx = i0 + k - kHalf + 1;
      if (idx >= 0 && idx < in_len) acc += taps[k] * w.samples[idx];
    }
    out.samples[n] = acc;
  }
  return out;
}

}  // namespace imgan::dsp
