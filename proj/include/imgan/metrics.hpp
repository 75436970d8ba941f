#pragma once

#include <optional>
#include <string>
#include <vector>

#include "imgan/waveform.hpp"

namespace imgan::metrics {

enum class Metric { Siib, Estoi };

// Which intelligibility metrics drive training; fixes the discriminator
// output width K and the label order (SIIB first, then ESTOI).
struct MetricSelection {
  bool siib = true;
  bool estoi = false;

  int k() const { return (siib ? 1 : 0) + (estoi ? 1 : 0); }
  std::vector<Metric> ordered() const {
    std::vector<Metric> out;
    if (siib) out.push_back(Metric::Siib);
    if (estoi) out.push_back(Metric::Estoi);
    return out;
  }
  std::string to_string() const;
  static MetricSelection parse(const std::string& s);
  bool operator==(const MetricSelection&) const = default;
};

struct MetricScores {
  std::optional<double> estoi;
  std::optional<double> siib_raw;   // bits/second
  std::optional<double> siib_norm;  // clamp(siib_raw / r_max, 0, 1)
};

// Extended short-time objective intelligibility: spectro-temporal envelope
// correlation at 10 kHz over length-30 segments of 15 one-third-octave
// bands.  Result in [-1, 1]; identical signals score 1.
double estoi(const Waveform& ref, const Waveform& deg);

struct SiibOptions {
  int internal_rate = 16000;
  int n_filters = 40;
  double f_lo = 100.0;
  double f_hi = 6500.0;
  double r_production = 0.75;  // speaker production-noise correlation bound
};

// Speech intelligibility in bits (Gaussian-capacity form): KLT-decorrelated
// gammatone log-energy channels, per-channel mutual information
// -0.5*log2(1 - r^2 rho_k^2) summed and scaled to bits/second.
double siib(const Waveform& ref, const Waveform& deg, const SiibOptions& opt = {});

// clamp(raw / r_max, 0, 1); raw must be non-negative.
double normalize_siib(double raw, double r_max);

// The paper's scoring convention: reference = unprocessed clean speech,
// degraded = processed + noise.  r_max feeds SIIB normalization.
MetricScores q_scores(const Waveform& processed, const Waveform& unprocessed,
                      const Waveform& noise, const MetricSelection& sel,
                      double r_max = 750.0);

}  // namespace imgan::metrics
