#pragma once

#include <filesystem>

#include "imgan/waveform.hpp"

namespace imgan::data {

enum class WavFormat { Pcm16, Float32 };

// RIFF/WAVE reader for PCM16 and IEEE float32.  Stereo input is averaged to
// mono (a warning is printed once per file).  Samples map to ±1.0 full scale.
Waveform read_wav(const std::filesystem::path& path);

// Float32 writes are read_wav's exact inverse; PCM16 quantizes (clipping at
// full scale).
void write_wav(const std::filesystem::path& path, const Waveform& w,
               WavFormat format = WavFormat::Float32);

}  // namespace imgan::data
