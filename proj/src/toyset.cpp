#include "imgan/data/toyset.hpp"

#include <cmath>
#include <numbers>

#include "imgan/common.hpp"
#include "imgan/data/wav.hpp"

namespace imgan::data {

namespace {

void set_rms(Eigen::VectorXd& s, double target) {
  const double r = std::sqrt(s.squaredNorm() / s.size());
  if (r > 0.0) s *= target / r;
}

}  // namespace

Waveform toy_speech(std::uint64_t seed, const ToyParams& params) {
  Rng rng(Rng::derive(seed, 0x5be));
  const int rate = params.sample_rate;
  const auto n = static_cast<Eigen::Index>(params.speech_dur_s * rate);

  const double f0 = rng.uniform(110.0, 220.0);
  const double formant1 = rng.uniform(350.0, 700.0);
  const double formant2 = rng.uniform(1200.0, 2400.0);
  const double am_rate = rng.uniform(3.0, 4.0);  // syllabic modulation
  const double am_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double vib_rate = rng.uniform(4.5, 5.5);

  const int n_harmonics = static_cast<int>((0.45 * rate) / f0);
  std::vector<double> amp(n_harmonics + 1, 0.0);
  std::vector<double> phase(n_harmonics + 1);
  for (int h = 1; h <= n_harmonics; ++h) {
    const double f = h * f0;
    const double bump1 = std::exp(-std::pow((f - formant1) / 150.0, 2.0));
    const double bump2 = 0.8 * std::exp(-std::pow((f - formant2) / 250.0, 2.0));
    const double tilt = 1.0 / std::sqrt(1.0 + std::pow(f / 800.0, 2.0));
    amp[h] = (0.15 * tilt + bump1 + bump2) / std::sqrt(static_cast<double>(h));
    phase[h] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }

  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  double base_phase = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    const double f_inst =
        f0 * (1.0 + 0.02 * std::sin(2.0 * std::numbers::pi * vib_rate * t));
    base_phase += 2.0 * std::numbers::pi * f_inst / rate;

    double v = 0.0;
    for (int h = 1; h <= n_harmonics; ++h)
      v += amp[h] * std::sin(h * base_phase + phase[h]);

    // Syllabic envelope dips to -12 dB but never to silence, so the whole
    // utterance counts as active speech for the metrics.
    const double c = std::cos(std::numbers::pi * am_rate * t + am_phase);
    double env = 0.25 + 0.75 * c * c;

    // 50 ms raised-cosine fades at both ends.
    const double fade = 0.05 * rate;
    if (i < fade) env *= 0.5 - 0.5 * std::cos(std::numbers::pi * i / fade);
    if (i >= n - fade)
      env *= 0.5 - 0.5 * std::cos(std::numbers::pi * (n - 1 - i) / fade);

    s[i] = env * v;
  }
  set_rms(s, params.speech_rms);
  return {s, rate};
}

Waveform toy_noise(std::uint64_t seed, const ToyParams& params) {
  Rng rng(Rng::derive(seed, 0x401));
  const int rate = params.sample_rate;
  const auto n = static_cast<Eigen::Index>(params.noise_dur_s * rate);

  // Two one-pole low-passes at 400 Hz (-12 dB/oct above) plus a small white
  // floor: energy sits mostly under 1 kHz, leaving 1-4 kHz relatively clear.
  const double a = 1.0 - std::exp(-2.0 * std::numbers::pi * 400.0 / rate);
  double y1 = 0.0, y2 = 0.0;
  Eigen::VectorXd s(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = rng.normal();
    y1 += a * (x - y1);
    y2 += a * (y1 - y2);
    s[i] = y2 + 0.05 * x;
  }
  set_rms(s, params.noise_rms);
  return {s, rate};
}

std::pair<std::vector<std::filesystem::path>, std::vector<std::filesystem::path>>
write_toy_corpus(const std::filesystem::path& root, int n_speech, int n_noise,
                 std::uint64_t seed, const ToyParams& params) {
  namespace fs = std::filesystem;
  fs::create_directories(root / "speech");
  fs::create_directories(root / "noise");

  std::vector<fs::path> speech_paths, noise_paths;
  char name[32];
  for (int i = 0; i < n_speech; ++i) {
    std::snprintf(name, sizeof name, "s%03d.wav", i);
    fs::path p = root / "speech" / name;
    write_wav(p, toy_speech(Rng::derive(seed, 1000 + i), params), WavFormat::Float32);
    speech_paths.push_back(p);
  }
  for (int i = 0; i < n_noise; ++i) {
    std::snprintf(name, sizeof name, "n%03d.wav", i);
    fs::path p = root / "noise" / name;
    write_wav(p, toy_noise(Rng::derive(seed, 2000 + i), params), WavFormat::Float32);
    noise_paths.push_back(p);
  }
  return {speech_paths, noise_paths};
}

}  // namespace imgan::data
