#include "imgan/refmod.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "imgan/common.hpp"
#include "imgan/dsp.hpp"

namespace imgan::refmod {

void ShapingProfile::validate() const {
  if (!(attack_ms > 0.0) || !(release_ms > 0.0))
    throw std::invalid_argument("profile: attack and release must be positive");
  if (!(min_freq_hz > 0.0) || !(tilt_corner_hz > min_freq_hz) ||
      !(plateau_lo_hz > tilt_corner_hz) || !(plateau_hi_hz > plateau_lo_hz) ||
      !(fade_hi_hz > plateau_hi_hz))
    throw std::invalid_argument("profile: corner frequencies must increase");
  if (curve_db.size() < 2) throw std::invalid_argument("profile: curve needs two points");
  for (size_t i = 1; i < curve_db.size(); ++i) {
    if (!(curve_db[i].first > curve_db[i - 1].first))
      throw std::invalid_argument("profile: curve inputs must increase");
    if (curve_db[i].second < curve_db[i - 1].second)
      throw std::invalid_argument("profile: curve must be non-decreasing");
  }
  if (!std::isfinite(formant_gain_db)) throw std::invalid_argument("profile: gain not finite");
}

double shaping_gain_db(double f_hz, const ShapingProfile& p) {
  const double g = p.formant_gain_db;
  if (f_hz < p.tilt_corner_hz)
    return -6.0 * std::log2(p.tilt_corner_hz / std::max(f_hz, p.min_freq_hz));
  if (f_hz < p.plateau_lo_hz) {
    const double x = (f_hz - p.tilt_corner_hz) / (p.plateau_lo_hz - p.tilt_corner_hz);
    return g * 0.5 * (1.0 - std::cos(std::numbers::pi * x));
  }
  if (f_hz <= p.plateau_hi_hz) return g;
  if (f_hz < p.fade_hi_hz) {
    const double x = (f_hz - p.plateau_hi_hz) / (p.fade_hi_hz - p.plateau_hi_hz);
    return g * 0.5 * (1.0 + std::cos(std::numbers::pi * x));
  }
  return 0.0;
}

double compression_out_db(double in_db, const ShapingProfile& p) {
  const auto& c = p.curve_db;
  if (in_db <= c.front().first) return c.front().second + (in_db - c.front().first);
  for (size_t i = 1; i < c.size(); ++i) {
    if (in_db <= c[i].first) {
      const double t = (in_db - c[i - 1].first) / (c[i].first - c[i - 1].first);
      return c[i - 1].second + t * (c[i].second - c[i - 1].second);
    }
  }
  const auto& a = c[c.size() - 2];
  const auto& b = c.back();
  const double slope = (b.second - a.second) / (b.first - a.first);
  return b.second + slope * (in_db - b.first);
}

Waveform spectral_shape(const Waveform& w, const ShapingProfile& p) {
  p.validate();
  dsp::ComplexSpectrogram s = dsp::stft(w);
  const double bin_hz = static_cast<double>(w.sample_rate) / dsp::kWindowLen;
  for (Eigen::Index b = 0; b < s.bins.rows(); ++b)
    s.bins.row(b) *= db_to_lin(shaping_gain_db(b * bin_hz, p));
  return dsp::istft(s);
}

Waveform drc(const Waveform& w, const ShapingProfile& p) {
  p.validate();
  if (w.empty()) throw std::invalid_argument("drc: empty input");
  const double alpha_a = std::exp(-1.0 / (p.attack_ms * 1e-3 * w.sample_rate));
  const double alpha_r = std::exp(-1.0 / (p.release_ms * 1e-3 * w.sample_rate));
  const double floor_db = p.curve_db.front().first;

  Waveform out = w;
  double env = 0.0;
  for (Eigen::Index n = 0; n < w.samples.size(); ++n) {
    const double mag = std::abs(w.samples[n]);
    const double alpha = mag > env ? alpha_a : alpha_r;
    env = alpha * env + (1.0 - alpha) * mag;
    const double env_db = std::max(lin_to_db(std::max(env, 1e-12)), floor_db);
    out.samples[n] = w.samples[n] * db_to_lin(compression_out_db(env_db, p) - env_db);
  }

  const double r_in = rms(w);
  const double r_out = rms(out);
  if (r_out > 0.0) out.samples *= r_in / r_out;
  const double pk = peak(out);
  if (pk > 1.0) out.samples /= pk;  // renormalization must not clip
  return out;
}

Waveform make_example(const Waveform& s, const ShapingProfile& p) {
  Waveform shaped = drc(spectral_shape(s, p), p);
  const double r = rms(shaped);
  if (r > 0.0) shaped.samples *= rms(s) / r;
  return shaped;
}

}  // namespace imgan::refmod
