#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "imgan/waveform.hpp"

namespace imgan::data {

// Synthetic stand-ins for a speech/noise corpus so every test and demo run
// is hermetic.  "Speech": harmonic tone complexes with two formant-like
// spectral bumps, vibrato and syllabic amplitude modulation.  "Noise":
// low-pass shaped Gaussian noise, deliberately concentrated below the
// second formant so reallocating energy upward is a learnable win.
struct ToyParams {
  int sample_rate = 16000;
  double speech_dur_s = 2.2;
  double noise_dur_s = 4.0;
  double speech_rms = 0.1;
  double noise_rms = 0.1;
};

Waveform toy_speech(std::uint64_t seed, const ToyParams& params = {});
Waveform toy_noise(std::uint64_t seed, const ToyParams& params = {});

// Writes speech/sNNN.wav and noise/nNNN.wav under root; returns the file
// paths (speech first).  Deterministic in (seed, counts, params).
std::pair<std::vector<std::filesystem::path>, std::vector<std::filesystem::path>>
write_toy_corpus(const std::filesystem::path& root, int n_speech, int n_noise,
                 std::uint64_t seed, const ToyParams& params = {});

}  // namespace imgan::data
