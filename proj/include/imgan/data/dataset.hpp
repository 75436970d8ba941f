#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "imgan/data/manifest.hpp"
#include "imgan/waveform.hpp"

namespace imgan::data {

// One training unit, fully materialized: noise is already cropped to the
// speech length and scaled to the row's SNR.
struct TrainSample {
  std::string id;
  Waveform speech;
  Waveform noise;
  std::optional<Waveform> enhanced;  // reference-enhanced example, if prepared
  double snr_db = 0.0;
};

struct PrepareOptions {
  std::vector<double> snr_grid{-12.0, -6.0, 0.0};
  std::uint64_t seed = 1;
  bool with_examples = false;   // write reference-enhanced wavs per speech file
  bool write_mixtures = true;   // write speech+noise wavs for listening checks
  double train_frac = 0.7;
  double heldout_frac = 0.15;
  std::filesystem::path out_dir;
};

// Scans speech_dir and noise_dir for .wav files, assigns every speech file a
// split (all SNRs of one utterance stay in the same split), pairs each
// (speech, snr) row with a seeded noise pick and crop seed, and writes
// out_dir/manifest.jsonl plus any requested example and mixture wavs.
// Deterministic in (directory contents, options).
Manifest prepare(const std::filesystem::path& speech_dir,
                 const std::filesystem::path& noise_dir, const PrepareOptions& opt);

// Loads the row's wavs and applies the seeded crop and SNR scaling.
// Relative paths resolve against base_dir (the manifest's directory).
TrainSample load_sample(const ManifestRow& row, const std::filesystem::path& base_dir);

}  // namespace imgan::data
