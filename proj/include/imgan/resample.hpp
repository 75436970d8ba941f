#pragma once

#include "imgan/waveform.hpp"

namespace imgan::dsp {

// Rational-ratio polyphase resampler: windowed-sinc prototype (Kaiser, β=8,
// 32 taps per phase), cutoff at the lower of the two Nyquist rates.  Each
// phase is normalized to unit DC gain.  Identity rate returns the input
// unchanged.
Waveform resample(const Waveform& w, int target_rate);

}  // namespace imgan::dsp
