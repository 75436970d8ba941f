#pragma once

#include <utility>
#include <vector>

#include "imgan/waveform.hpp"

namespace imgan::refmod {

// Rule-based clean-speech modifier: formant-band spectral shaping followed
// by dynamic range compression, RMS-pinned to the input.  Deterministic.
struct ShapingProfile {
  double formant_gain_db = 12.0;  // plateau boost
  double tilt_corner_hz = 500.0;  // -6 dB/octave below this
  double plateau_lo_hz = 1000.0;  // raised-cosine rise ends here
  double plateau_hi_hz = 4000.0;  // raised-cosine fall starts here
  double fade_hi_hz = 8000.0;     // back to 0 dB here
  double min_freq_hz = 20.0;      // tilt cap, keeps DC gain finite

  double attack_ms = 2.0;
  double release_ms = 50.0;
  // Static compression curve, input dBFS -> output dBFS, interpolated
  // linearly; unity below the knee, 2:1 above it.
  std::vector<std::pair<double, double>> curve_db{{-100.0, -100.0}, {-20.0, -20.0}, {0.0, -10.0}};

  void validate() const;
};

// Gain curve in dB at a given frequency.
double shaping_gain_db(double f_hz, const ShapingProfile& profile = {});

// Static compression curve: output level in dB for an envelope level in dB.
double compression_out_db(double in_db, const ShapingProfile& profile = {});

// Per-frame spectral gain curve in the STFT domain; duration preserved.
Waveform spectral_shape(const Waveform& w, const ShapingProfile& profile = {});

// Envelope-follower compressor (attack/release smoothing of |x|), gain from
// the static curve, then RMS renormalized to the input with a +-1 peak guard.
Waveform drc(const Waveform& w, const ShapingProfile& profile = {});

// drc(spectral_shape(s)) followed by RMS normalization to rms(s).
Waveform make_example(const Waveform& s, const ShapingProfile& profile = {});

}  // namespace imgan::refmod
