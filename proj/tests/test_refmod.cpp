#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "imgan/common.hpp"
#include "imgan/data/toyset.hpp"
#include "imgan/dsp.hpp"
#include "imgan/metrics.hpp"
#include "imgan/refmod.hpp"

using imgan::Rng;
using imgan::Waveform;
namespace refmod = imgan::refmod;
namespace dsp = imgan::dsp;

namespace {

Waveform tone(double freq, double amp, double seconds, int rate) {
  Waveform w;
  w.sample_rate = rate;
  const auto n = static_cast<Eigen::Index>(seconds * rate);
  w.samples.resize(n);
  for (Eigen::Index i = 0; i < n; ++i)
    w.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / rate);
  return w;
}

double frame_dynamic_range_db(const Waveform& w) {
  std::vector<double> energies;
  for (Eigen::Index start = 0; start + 256 <= w.samples.size(); start += 128)
    energies.push_back(w.samples.segment(start, 256).squaredNorm() + 1e-20);
  std::sort(energies.begin(), energies.end());
  const auto lo = energies[static_cast<size_t>(0.05 * (energies.size() - 1))];
  const auto hi = energies[static_cast<size_t>(0.95 * (energies.size() - 1))];
  return 10.0 * std::log10(hi / lo);
}

}  // namespace

TEST_CASE("shaping gain curve hits its landmarks") {
  CHECK(refmod::shaping_gain_db(2000.0) == doctest::Approx(12.0));
  CHECK(refmod::shaping_gain_db(1000.0) == doctest::Approx(12.0));
  CHECK(refmod::shaping_gain_db(4000.0) == doctest::Approx(12.0));
  CHECK(refmod::shaping_gain_db(500.0) == doctest::Approx(0.0));
  CHECK(refmod::shaping_gain_db(250.0) == doctest::Approx(-6.0));
  CHECK(refmod::shaping_gain_db(125.0) == doctest::Approx(-12.0));
  CHECK(refmod::shaping_gain_db(8000.0) == doctest::Approx(0.0));
  CHECK(refmod::shaping_gain_db(750.0) == doctest::Approx(6.0));   // cosine midpoint
  CHECK(refmod::shaping_gain_db(6000.0) == doctest::Approx(6.0));  // cosine midpoint
  // The low-frequency tilt is capped so DC stays finite.
  CHECK(refmod::shaping_gain_db(0.0) == doctest::Approx(refmod::shaping_gain_db(20.0)));
  CHECK(refmod::shaping_gain_db(0.0) > -30.0);
  // Monotone through the rise.
  for (double f = 510.0; f < 1000.0; f += 35.0)
    CHECK(refmod::shaping_gain_db(f) < refmod::shaping_gain_db(f + 35.0));
}

TEST_CASE("spectral shaping boosts the formant band and cuts the lows") {
  Waveform t2k = tone(2000.0, 0.1, 1.0, 16000);
  Waveform out2k = refmod::spectral_shape(t2k);
  CHECK(out2k.samples.size() == t2k.samples.size());
  const double gain2k = imgan::lin_to_db(imgan::rms(out2k) / imgan::rms(t2k));
  CHECK(gain2k == doctest::Approx(12.0).epsilon(0.05));

  Waveform t250 = tone(250.0, 0.1, 1.0, 16000);
  const double gain250 = imgan::lin_to_db(imgan::rms(refmod::spectral_shape(t250)) / imgan::rms(t250));
  CHECK(gain2k - gain250 >= 12.0);
  CHECK(gain250 == doctest::Approx(-6.0).epsilon(0.1));
}

TEST_CASE("white noise output spectrum follows the gain curve per band") {
  Rng rng(61);
  Waveform noise;
  noise.sample_rate = 16000;
  noise.samples.resize(160000);
  for (Eigen::Index i = 0; i < noise.samples.size(); ++i) noise.samples[i] = 0.1 * rng.normal();
  Waveform shaped = refmod::spectral_shape(noise);

  dsp::MagSpectrogram in = dsp::magnitude(dsp::stft(noise));
  dsp::MagSpectrogram out = dsp::magnitude(dsp::stft(shaped));
  const double bin_hz = 16000.0 / dsp::kWindowLen;
  const int band = 16;  // average 16 bins to tame estimator variance
  for (int b0 = 16; b0 + band <= 500; b0 += band) {
    double ein = 0.0, eout = 0.0, gain_lin = 0.0;
    for (int b = b0; b < b0 + band; ++b) {
      ein += in.mags.row(b).squaredNorm();
      eout += out.mags.row(b).squaredNorm();
      const double g = refmod::shaping_gain_db(b * bin_hz);
      gain_lin += imgan::db_to_lin(g) * imgan::db_to_lin(g);
    }
    const double measured_db = 10.0 * std::log10(eout / ein);
    const double expected_db = 10.0 * std::log10(gain_lin / band);
    INFO("band at bin ", b0);
    CHECK(std::abs(measured_db - expected_db) < 1.0);
  }
}

TEST_CASE("static compression curve: unity below the knee, 2:1 above") {
  CHECK(refmod::compression_out_db(-50.0) == doctest::Approx(-50.0));
  CHECK(refmod::compression_out_db(-20.0) == doctest::Approx(-20.0));
  CHECK(refmod::compression_out_db(-10.0) == doctest::Approx(-15.0));
  CHECK(refmod::compression_out_db(0.0) == doctest::Approx(-10.0));
  CHECK(refmod::compression_out_db(4.0) == doctest::Approx(-8.0));  // end slope extends

  // Level monotonicity: the gain never increases with level.
  double prev_gain = 1e9;
  for (double e = -80.0; e <= 10.0; e += 0.5) {
    const double gain = refmod::compression_out_db(e) - e;
    CHECK(gain <= prev_gain + 1e-12);
    prev_gain = gain;
  }
}

TEST_CASE("drc leaves quiet signals untouched") {
  Waveform quiet = tone(440.0, 0.01, 0.5, 16000);  // -40 dBFS, below the knee
  Waveform out = refmod::drc(quiet);
  CHECK((out.samples - quiet.samples).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("drc settles to the 2:1 gain shortly after a level step") {
  const int rate = 16000;
  Waveform w = tone(500.0, 1.0, 1.0, rate);
  const Eigen::Index half = w.samples.size() / 2;
  for (Eigen::Index i = 0; i < half; ++i) w.samples[i] *= 0.01;       // -40 dBFS
  for (Eigen::Index i = half; i < w.samples.size(); ++i) w.samples[i] *= 0.316;  // -10 dBFS

  Waveform out = refmod::drc(w);
  // The global renormalization cancels in before/after ratios.
  auto seg_rms = [](const Waveform& x, Eigen::Index a, Eigen::Index n) {
    return std::sqrt(x.samples.segment(a, n).squaredNorm() / n);
  };
  const Eigen::Index settle = half + rate / 100;  // 10 ms = 5x attack
  const Eigen::Index n = rate / 5;
  const double in_step_db = imgan::lin_to_db(seg_rms(w, settle, n) / seg_rms(w, half / 2, n));
  const double out_step_db = imgan::lin_to_db(seg_rms(out, settle, n) / seg_rms(out, half / 2, n));
  // Above the knee the -10 dBFS envelope maps to -15 dB out: 5 dB reduction.
  CHECK(std::abs(out_step_db - (in_step_db - 5.0)) < 1.0);
}

TEST_CASE("drc shrinks the frame-energy dynamic range of speech") {
  imgan::data::ToyParams tp;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    Waveform s = imgan::data::toy_speech(seed, tp);
    Waveform scaled = s;
    scaled.samples *= 3.0;  // push the AM peaks above the knee
    Waveform out = refmod::drc(scaled);
    CHECK(frame_dynamic_range_db(out) < frame_dynamic_range_db(scaled));
  }
}

TEST_CASE("drc output never clips after renormalization") {
  Waveform loud = tone(300.0, 0.95, 0.6, 16000);
  // Strong AM so compression lifts the valleys and renormalization pushes up.
  for (Eigen::Index i = 0; i < loud.samples.size(); ++i)
    loud.samples[i] *= 0.3 + 0.7 * std::abs(std::sin(2.0 * std::numbers::pi * 3.0 * i / 16000.0));
  Waveform out = refmod::drc(loud);
  CHECK(imgan::peak(out) <= 1.0);
}

TEST_CASE("make_example pins rms and duration") {
  imgan::data::ToyParams tp;
  Waveform s = imgan::data::toy_speech(21, tp);
  Waveform ex = refmod::make_example(s);
  CHECK(ex.samples.size() == s.samples.size());
  CHECK(ex.sample_rate == s.sample_rate);
  CHECK(std::abs(imgan::lin_to_db(imgan::rms(ex) / imgan::rms(s))) < 1e-9);

  Waveform ex2 = refmod::make_example(s);
  CHECK((ex.samples - ex2.samples).cwiseAbs().maxCoeff() == 0.0);  // deterministic
}

TEST_CASE("profile validation rejects broken settings") {
  refmod::ShapingProfile p;
  p.attack_ms = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.curve_db = {{-100.0, -10.0}, {-20.0, -30.0}};  // decreasing output
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.plateau_hi_hz = 900.0;  // out of order
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("examples raise intelligibility scores in heavy noise") {
  imgan::data::ToyParams tp;
  imgan::metrics::MetricSelection sel;
  sel.estoi = true;
  sel.siib = false;
  int improved = 0;
  const int total = 8;
  for (int i = 0; i < total; ++i) {
    Waveform s = imgan::data::toy_speech(300 + i, tp);
    Waveform n = imgan::data::toy_noise(400 + i, tp);
    Waveform scaled = dsp::scaled_noise_for_mix(s, n, -5.0, 77 + i);
    Waveform ex = refmod::make_example(s);

    auto q_plain = imgan::metrics::q_scores(s, s, scaled, sel);
    auto q_mod = imgan::metrics::q_scores(ex, s, scaled, sel);
    if (q_mod.estoi.value() > q_plain.estoi.value()) ++improved;
  }
  INFO("improved ", improved, " of ", total);
  CHECK(improved * 2 > total);
}
