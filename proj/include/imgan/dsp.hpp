#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>

#include "imgan/waveform.hpp"

namespace imgan::dsp {

// Spectrograms are stored bins-by-frames (one column per frame) so a frame is
// contiguous in Eigen's column-major layout.  Analysis settings are fixed in
// samples (1024-point periodic Hann, hop 512, one-sided 513-bin spectra)
// regardless of sample rate.

constexpr int kWindowLen = 1024;
constexpr int kHop = 512;
constexpr int kBins = kWindowLen / 2 + 1;  // 513
constexpr double kCompressionExponent = 0.3;

struct ComplexSpectrogram {
  Eigen::MatrixXcd bins;    // kBins x frames
  int window_len = kWindowLen;
  int hop = kHop;
  int sample_rate = 0;
  Eigen::Index orig_len = 0;  // pre-padding sample count, drives istft trimming

  Eigen::Index frames() const { return bins.cols(); }
};

struct MagSpectrogram {
  Eigen::MatrixXd mags;     // kBins x frames, non-negative
  bool compressed = false;  // true iff entries are mag^p
  double p = kCompressionExponent;
  int sample_rate = 0;

  Eigen::Index frames() const { return mags.cols(); }
  Eigen::Index bins() const { return mags.rows(); }
};

// Forward STFT.  Input is zero-padded by window_len/2 on both sides; frame
// count is floor(len/hop) + 1.  Throws on empty input.
ComplexSpectrogram stft(const Waveform& w);

// Weighted overlap-add inverse with the analysis window, normalized by the
// accumulated squared window and trimmed to orig_len.  Exact for unmodified
// spectra everywhere except the trailing len-mod-hop samples, which have
// single-window coverage.
Waveform istft(const ComplexSpectrogram& s);

// Magnitudes of a complex spectrogram (linear, uncompressed).
MagSpectrogram magnitude(const ComplexSpectrogram& s);

// Replace magnitudes, keep phase angles of phase_source, then istft.
// modified_mag must be uncompressed and shape-matched.
Waveform recombine(const MagSpectrogram& modified_mag, const ComplexSpectrogram& phase_source);

// Entrywise mag^p / mag^(1/p).  The compressed flag must match the
// direction; double application is an error, not a silent no-op.
MagSpectrogram compress(const MagSpectrogram& m, double p = kCompressionExponent);
MagSpectrogram expand(const MagSpectrogram& m);

// Scale `modified` so its total squared energy matches `reference`.
// Both must be uncompressed: by Parseval this pins the time-domain RMS.
MagSpectrogram energy_normalize(const MagSpectrogram& modified, const MagSpectrogram& reference);

// Sum of squared entries.
double total_energy(const MagSpectrogram& m);

// Crop noise to speech length at a seeded random offset and scale it so the
// global-RMS SNR of speech vs scaled noise equals snr_db exactly.
Waveform scaled_noise_for_mix(const Waveform& speech, const Waveform& noise, double snr_db,
                              std::uint64_t crop_seed);

// speech + scaled_noise_for_mix(...).
Waveform mix_at_snr(const Waveform& speech, const Waveform& noise, double snr_db,
                    std::uint64_t crop_seed);

// Drop 256-sample frames (hop 128) whose reference energy sits more than
// dyn_range_db below the loudest frame; both signals keep the same frames.
// Returns overlap-added active parts.  Throws "no active speech" if nothing
// survives.
std::pair<Waveform, Waveform> remove_silent_frames(const Waveform& ref, const Waveform& deg,
                                                   double dyn_range_db = 40.0, int frame = 256,
                                                   int hop = 128);

// One-third-octave band envelopes for 257-bin magnitude frames at 10 kHz:
// 15 bands, lowest center 150 Hz, edges rounded to the nearest bin (adjacent
// bands share an edge, so rounding keeps them non-overlapping).  Returns
// 15 x frames; entry = sqrt of summed squared bin magnitudes.
Eigen::MatrixXd third_octave_bands(const Eigen::MatrixXd& mags, int sample_rate, int nfft);

// Gammatone filterbank energies: 25 ms frames, 50% hop, FFT of the next
// power of two, n_filters 4th-order gammatone magnitude responses with
// ERB-spaced centers in [f_lo, f_hi].  Returns n_filters x frames.
Eigen::MatrixXd gammatone_bank(const Waveform& x, int n_filters, double f_lo, double f_hi);

// ERB helpers (Glasberg-Moore).
double erb_bandwidth(double f_hz);
double erb_number(double f_hz);
double erb_number_inverse(double erb);

// Internal framing helpers shared by the metric front-ends: plain Hann
// frames with no edge padding, tail discarded.
Eigen::MatrixXcd stft_frames(const Eigen::VectorXd& x, int win, int hop, int nfft);

}  // namespace imgan::dsp
