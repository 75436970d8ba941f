#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "imgan/common.hpp"
#include "imgan/resample.hpp"
#include "imgan/waveform.hpp"

using imgan::Rng;
using imgan::Waveform;
namespace dsp = imgan::dsp;

namespace {

Waveform sine(double freq, int rate, double dur_s) {
  const auto n = static_cast<Eigen::Index>(dur_s * rate);
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i)
    s[i] = std::sin(2.0 * std::numbers::pi * freq * i / rate);
  return {s, rate};
}

// Direct DFT magnitude at an arbitrary frequency (1 Hz resolution oracle).
double dft_mag_at(const Eigen::VectorXd& x, int rate, double freq) {
  double re = 0.0, im = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double ang = 2.0 * std::numbers::pi * freq * i / rate;
    re += x[i] * std::cos(ang);
    im -= x[i] * std::sin(ang);
  }
  return std::hypot(re, im);
}

}  // namespace

TEST_CASE("identity-rate resample returns the input unchanged") {
  Rng rng(1);
  Eigen::VectorXd s(1000);
  for (auto& v : s.reshaped()) v = rng.normal();
  Waveform w{s, 16000};
  Waveform out = dsp::resample(w, 16000);
  CHECK((out.samples - w.samples).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("DC is preserved through arbitrary rate changes") {
  Waveform dc{Eigen::VectorXd::Ones(5000), 44100};
  for (int rate : {10000, 16000, 48000}) {
    Waveform out = dsp::resample(dc, rate);
    const auto expect = static_cast<Eigen::Index>(
        (5000LL * rate + 44099) / 44100);
    CHECK(out.size() == expect);
    // Interior samples (full kernel support): exact unit gain by phase
    // normalization.
    const Eigen::Index lo = 40, hi = out.size() - 40;
    for (Eigen::Index i = lo; i < hi; ++i)
      CHECK(std::abs(out.samples[i] - 1.0) < 1e-3);
  }
}

TEST_CASE("1 kHz tone survives 44.1 kHz -> 10 kHz with the right frequency") {
  Waveform w = sine(1000.0, 44100, 1.0);
  Waveform out = dsp::resample(w, 10000);
  REQUIRE(out.sample_rate == 10000);

  // Scan integer frequencies: the DFT-peak oracle must land within 1 Hz
  // of 1 kHz (bin width 1 Hz at 1 s duration).
  double best_f = 0.0, best_m = 0.0;
  for (double f = 900.0; f <= 1100.0; f += 1.0) {
    const double m = dft_mag_at(out.samples, 10000, f);
    if (m > best_m) {
      best_m = m;
      best_f = f;
    }
  }
  CHECK(std::abs(best_f - 1000.0) <= 1.0);

  // Amplitude roughly preserved in the passband.
  CHECK(imgan::rms(out) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.05));
}

TEST_CASE("out-of-band content is attenuated when downsampling") {
  // 8 kHz sits well past the 5 kHz target Nyquist; the 32-tap Kaiser
  // prototype has a soft transition, hence the modest -20 dB bar.
  Waveform w = sine(8000.0, 44100, 0.5);
  Waveform out = dsp::resample(w, 10000);
  CHECK(imgan::rms(out) < 0.1 * imgan::rms(w));
}

TEST_CASE("upsampling preserves tone frequency") {
  Waveform w = sine(1000.0, 10000, 1.0);
  Waveform out = dsp::resample(w, 44100);
  double best_f = 0.0, best_m = 0.0;
  for (double f = 900.0; f <= 1100.0; f += 1.0) {
    const double m = dft_mag_at(out.samples, 44100, f);
    if (m > best_m) {
      best_m = m;
      best_f = f;
    }
  }
  CHECK(std::abs(best_f - 1000.0) <= 1.0);
}

TEST_CASE("resample validates arguments") {
  Waveform w = sine(440.0, 16000, 0.1);
  CHECK_THROWS_AS(dsp::resample(w, 0), std::invalid_argument);
  CHECK_THROWS_AS(dsp::resample(w, -8000), std::invalid_argument);
  Waveform empty{Eigen::VectorXd(), 16000};
  CHECK_THROWS_AS(dsp::resample(empty, 8000), std::invalid_argument);
}

TEST_CASE("equal-length inputs resample to equal lengths") {
  // The metric front-ends rely on this to keep ref/deg aligned.
  Rng rng(9);
  Eigen::VectorXd a(22050), b(22050);
  for (auto& v : a.reshaped()) v = rng.normal();
  for (auto& v : b.reshaped()) v = rng.normal();
  Waveform wa{a, 44100}, wb{b, 44100};
  CHECK(dsp::resample(wa, 10000).size() == dsp::resample(wb, 10000).size());
}
