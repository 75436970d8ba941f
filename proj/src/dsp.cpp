#include "imgan/dsp.hpp"

#include <unsupported/Eigen/FFT>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "imgan/common.hpp"

namespace imgan::dsp {

namespace {

// One FFT object per thread; it caches plans per size internally.
Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  return fft;
}

Eigen::VectorXd periodic_hann(int n) {
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

const Eigen::VectorXd& analysis_window() {
  static const Eigen::VectorXd w = periodic_hann(kWindowLen);
  return w;
}

}  // namespace

ComplexSpectrogram stft(const Waveform& w) {
  if (w.empty()) throw std::invalid_argument("stft: empty input");
  if (!w.samples.allFinite()) throw std::invalid_argument("stft: non-finite input");
  const Eigen::Index len = w.size();
  const Eigen::Index frames = len / kHop + 1;

  Eigen::VectorXd padded = Eigen::VectorXd::Zero(len + 2 * (kWindowLen / 2));
  padded.segment(kWindowLen / 2, len) = w.samples;

  ComplexSpectrogram out;
  out.sample_rate = w.sample_rate;
  out.orig_len = len;
  out.bins.resize(kBins, frames);

  const Eigen::VectorXd& win = analysis_window();
  Eigen::VectorXd frame(kWindowLen);
  Eigen::VectorXcd spec(kBins);
  auto& fft = fft_engine();
  for (Eigen::Index t = 0; t < frames; ++t) {
    frame = padded.segment(t * kHop, kWindowLen).cwiseProduct(win);
    fft.fwd(spec, frame);
    out.bins.col(t) = spec;
  }
  return out;
}

Waveform istft(const ComplexSpectrogram& s) {
  if (s.bins.rows() != kBins)
    throw std::invalid_argument("istft: expected 513 bins");
  if (s.hop != kHop || s.window_len != kWindowLen)
    throw std::invalid_argument("istft: inconsistent window/hop metadata");
  const Eigen::Index frames = s.bins.cols();
  if (frames < 1) throw std::invalid_argument("istft: empty spectrogram");

  const Eigen::Index padded_len = (frames - 1) * kHop + kWindowLen;
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(padded_len);
  Eigen::VectorXd den = Eigen::VectorXd::Zero(padded_len);

  const Eigen::VectorXd& win = analysis_window();
  const Eigen::VectorXd win_sq = win.cwiseProduct(win);
  Eigen::VectorXd frame(kWindowLen);
  Eigen::VectorXcd spec(kBins);
  auto& fft = fft_engine();
  for (Eigen::Index t = 0; t < frames; ++t) {
    spec = s.bins.col(t);
    fft.inv(frame, spec, kWindowLen);
    acc.segment(t * kHop, kWindowLen) += frame.cwiseProduct(win);
    den.segment(t * kHop, kWindowLen) += win_sq;
  }

  Eigen::Index out_len = s.orig_len > 0 ? s.orig_len : padded_len - kWindowLen;
  if (out_len + kWindowLen / 2 > padded_len)
    throw std::invalid_argument("istft: orig_len exceeds frame coverage");

  // Interior samples have two-window coverage with den in [0.5, 1]; the
  // floor only matters in the single-coverage tail where the window decays.
  Waveform out;
  out.sample_rate = s.sample_rate;
  out.samples = acc.segment(kWindowLen / 2, out_len).array() /
                den.segment(kWindowLen / 2, out_len).array().max(1e-4);
  return out;
}

MagSpectrogram magnitude(const ComplexSpectrogram& s) {
  MagSpectrogram m;
  m.mags = s.bins.cwiseAbs();
  m.compressed = false;
  m.sample_rate = s.sample_rate;
  return m;
}

Waveform recombine(const MagSpectrogram& modified_mag, const ComplexSpectrogram& phase_source) {
  if (modified_mag.compressed)
    throw std::invalid_argument("recombine: magnitudes must be uncompressed");
  if (modified_mag.mags.rows() != phase_source.bins.rows() ||
      modified_mag.mags.cols() != phase_source.bins.cols())
    throw std::invalid_argument("recombine: dimension mismatch");

  ComplexSpectrogram s;
  s.sample_rate = phase_source.sample_rate;
  s.orig_len = phase_source.orig_len;
  s.bins.resize(phase_source.bins.rows(), phase_source.bins.cols());
  for (Eigen::Index j = 0; j < s.bins.cols(); ++j)
    for (Eigen::Index i = 0; i < s.bins.rows(); ++i) {
      const std::complex<double> z = phase_source.bins(i, j);
      const double a = std::abs(z);
      // Zero phase bins keep zero phase: angle(0) is 0 by convention.
      s.bins(i, j) = a > 0.0 ? z * (modified_mag.mags(i, j) / a)
                             : std::complex<double>(modified_mag.mags(i, j), 0.0);
    }
  return istft(s);
}

MagSpectrogram compress(const MagSpectrogram& m, double p) {
  if (m.compressed) throw std::invalid_argument("compress: already compressed");
  if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("compress: exponent out of (0,1)");
  MagSpectrogram out;
  out.mags = m.mags.array().pow(p);
  out.compressed = true;
  out.p = p;
  out.sample_rate = m.sample_rate;
  return out;
}

MagSpectrogram expand(const MagSpectrogram& m) {
  if (!m.compressed) throw std::invalid_argument("expand: not compressed");
  MagSpectrogram out;
  out.mags = m.mags.array().pow(1.0 / m.p);
  out.compressed = false;
  out.p = m.p;
  out.sample_rate = m.sample_rate;
  return out;
}

double total_energy(const MagSpectrogram& m) { return m.mags.squaredNorm(); }

MagSpectrogram energy_normalize(const MagSpectrogram& modified, const MagSpectrogram& reference) {
  if (modified.compressed || reference.compressed)
    throw std::invalid_argument("energy_normalize: operands must be uncompressed");
  if (modified.mags.rows() != reference.mags.rows() ||
      modified.mags.cols() != reference.mags.cols())
    throw std::invalid_argument("energy_normalize: shape mismatch");
  const double e_ref = total_energy(reference);
  const double e_mod = total_energy(modified);
  if (e_ref <= 0.0) throw std::invalid_argument("energy_normalize: reference all-zero");
  if (e_mod <= 0.0) throw std::invalid_argument("energy_normalize: degenerate enhancement");
  MagSpectrogram out = modified;
  out.mags *= std::sqrt(e_ref / e_mod);
  return out;
}

Waveform scaled_noise_for_mix(const Waveform& speech, const Waveform& noise, double snr_db,
                              std::uint64_t crop_seed) {
  if (speech.sample_rate != noise.sample_rate)
    throw std::invalid_argument("mix_at_snr: sample rate mismatch");
  if (noise.size() < speech.size())
    throw std::invalid_argument("mix_at_snr: noise shorter than speech");
  if (!std::isfinite(snr_db)) throw std::invalid_argument("mix_at_snr: non-finite snr");

  Rng rng(crop_seed);
  const Eigen::Index offset =
      static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(noise.size() - speech.size() + 1)));
  Waveform cropped{noise.samples.segment(offset, speech.size()), noise.sample_rate};

  const double rs = rms(speech);
  const double rn = rms(cropped);
  if (rs <= 0.0) throw std::invalid_argument("mix_at_snr: zero-RMS speech");
  if (rn <= 0.0) throw std::invalid_argument("mix_at_snr: zero-RMS noise");

  const double g = (rs / rn) * db_to_lin(-snr_db);
  cropped.samples *= g;
  return cropped;
}

Waveform mix_at_snr(const Waveform& speech, const Waveform& noise, double snr_db,
                    std::uint64_t crop_seed) {
  Waveform w = scaled_noise_for_mix(speech, noise, snr_db, crop_seed);
  w.samples += speech.samples;
  return w;
}

std::pair<Waveform, Waveform> remove_silent_frames(const Waveform& ref, const Waveform& deg,
                                                   double dyn_range_db, int frame, int hop) {
  if (ref.size() != deg.size())
    throw std::invalid_argument("remove_silent_frames: length mismatch");
  if (ref.empty()) throw std::invalid_argument("remove_silent_frames: empty input");

  const Eigen::Index len = ref.size();
  const Eigen::Index n_frames =
      len <= frame ? 1 : (len - frame + hop - 1) / hop + 1;

  Eigen::VectorXd win = periodic_hann(frame);
  auto windowed = [&](const Waveform& x, Eigen::Index t) {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(frame);
    const Eigen::Index start = t * hop;
    const Eigen::Index n = std::min<Eigen::Index>(frame, len - start);
    if (n > 0) f.head(n) = x.samples.segment(start, n);
    return Eigen::VectorXd(f.cwiseProduct(win));
  };

  Eigen::VectorXd energy(n_frames);
  for (Eigen::Index t = 0; t < n_frames; ++t) energy[t] = windowed(ref, t).squaredNorm();
  const double thresh = energy.maxCoeff() * std::pow(10.0, -dyn_range_db / 10.0);

  std::vector<Eigen::Index> kept;
  for (Eigen::Index t = 0; t < n_frames; ++t)
    if (energy[t] > thresh) kept.push_back(t);
  if (kept.empty() || energy.maxCoeff() <= 0.0)
    throw std::runtime_error("remove_silent_frames: no active speech");

  // Hann at 50% overlap sums to one, so overlap-adding the kept windowed
  // frames reconstructs contiguous active regions exactly (edges taper).
  const Eigen::Index out_len = static_cast<Eigen::Index>(kept.size() - 1) * hop + frame;
  Waveform r{Eigen::VectorXd::Zero(out_len), ref.sample_rate};
  Waveform d{Eigen::VectorXd::Zero(out_len), deg.sample_rate};
  for (std::size_t j = 0; j < kept.size(); ++j) {
    r.samples.segment(static_cast<Eigen::Index>(j) * hop, frame) += windowed(ref, kept[j]);
    d.samples.segment(static_cast<Eigen::Index>(j) * hop, frame) += windowed(deg, kept[j]);
  }
  if (static_cast<Eigen::Index>(kept.size()) == n_frames && out_len >= len) {
    r.samples.conservativeResize(len);
    d.samples.conservativeResize(len);
  }
  return {std::move(r), std::move(d)};
}

Eigen::MatrixXd third_octave_bands(const Eigen::MatrixXd& mags, int sample_rate, int nfft) {
  if (sample_rate != 10000)
    throw std::invalid_argument("third_octave_bands: expected 10 kHz input");
  if (nfft != 512 || mags.rows() != nfft / 2 + 1)
    throw std::invalid_argument("third_octave_bands: expected 512-point frames");

  constexpr int kBands = 15;
  constexpr double kLowestCenter = 150.0;
  const double bin_hz = static_cast<double>(sample_rate) / nfft;

  Eigen::MatrixXd out(kBands, mags.cols());
  for (int k = 0; k < kBands; ++k) {
    const double cf = kLowestCenter * std::pow(2.0, k / 3.0);
    const double lo = cf * std::pow(2.0, -1.0 / 6.0);
    const double hi = cf * std::pow(2.0, 1.0 / 6.0);
    const auto lo_bin = static_cast<Eigen::Index>(std::lround(lo / bin_hz));
    const auto hi_bin = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::lround(hi / bin_hz)),
                                               mags.rows());
    if (lo_bin >= hi_bin) throw std::invalid_argument("third_octave_bands: empty band");
    for (Eigen::Index t = 0; t < mags.cols(); ++t)
      out(k, t) = std::sqrt(mags.col(t).segment(lo_bin, hi_bin - lo_bin).squaredNorm());
  }
  return out;
}

double erb_bandwidth(double f_hz) { return 24.7 * (0.00437 * f_hz + 1.0); }
double erb_number(double f_hz) { return 21.4 * std::log10(0.00437 * f_hz + 1.0); }
double erb_number_inverse(double erb) {
  return (std::pow(10.0, erb / 21.4) - 1.0) / 0.00437;
}

Eigen::MatrixXcd stft_frames(const Eigen::VectorXd& x, int win, int hop, int nfft) {
  if (x.size() < win) throw std::invalid_argument("stft_frames: input shorter than window");
  if (nfft < win) throw std::invalid_argument("stft_frames: nfft < window");
  const Eigen::Index n_frames = (x.size() - win) / hop + 1;
  const Eigen::VectorXd w = periodic_hann(win);

  Eigen::MatrixXcd out(nfft / 2 + 1, n_frames);
  Eigen::VectorXd frame = Eigen::VectorXd::Zero(nfft);
  Eigen::VectorXcd spec(nfft / 2 + 1);
  auto& fft = fft_engine();
  for (Eigen::Index t = 0; t < n_frames; ++t) {
    frame.head(win) = x.segment(t * hop, win).cwiseProduct(w);
    fft.fwd(spec, frame);
    out.col(t) = spec;
  }
  return out;
}

Eigen::MatrixXd gammatone_bank(const Waveform& x, int n_filters, double f_lo, double f_hi) {
  if (x.empty()) throw std::invalid_argument("gammatone_bank: empty input");
  const double nyquist = x.sample_rate / 2.0;
  if (!(f_lo > 0.0 && f_lo < f_hi && f_hi < nyquist))
    throw std::invalid_argument("gammatone_bank: invalid band edges");
  if (n_filters < 1) throw std::invalid_argument("gammatone_bank: need at least one filter");

  const int frame = static_cast<int>(std::lround(0.025 * x.sample_rate));
  const int hop = frame / 2;
  int nfft = 1;
  while (nfft < frame) nfft *= 2;

  Eigen::MatrixXcd spec = stft_frames(x.samples, frame, hop, nfft);
  Eigen::MatrixXd power = spec.cwiseAbs2();

  // Center frequencies equally spaced on the ERB-number scale.
  Eigen::VectorXd cfs(n_filters);
  const double e_lo = erb_number(f_lo), e_hi = erb_number(f_hi);
  for (int k = 0; k < n_filters; ++k) {
    const double e = n_filters == 1 ? (e_lo + e_hi) / 2.0
                                    : e_lo + (e_hi - e_lo) * k / (n_filters - 1.0);
    cfs[k] = erb_number_inverse(e);
  }

  // 4th-order gammatone magnitude response: |H(f)|^2 = (1 + ((f-fc)/b)^2)^-4
  // with b = 1.019 * ERB(fc).
  const Eigen::Index n_bins = power.rows();
  Eigen::MatrixXd response_sq(n_bins, n_filters);
  const double bin_hz = static_cast<double>(x.sample_rate) / nfft;
  for (int k = 0; k < n_filters; ++k) {
    const double b = 1.019 * erb_bandwidth(cfs[k]);
    for (Eigen::Index i = 0; i < n_bins; ++i) {
      const double d = (i * bin_hz - cfs[k]) / b;
      response_sq(i, k) = std::pow(1.0 + d * d, -4.0);
    }
  }

  return Eigen::MatrixXd(response_sq.transpose() * power);  // n_filters x frames
}

}  // namespace imgan::dsp
