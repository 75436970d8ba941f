#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>

namespace imgan {

// Mono audio buffer.  Samples are double precision regardless of file
// encoding; sample_rate is in Hz.
struct Waveform {
  Eigen::VectorXd samples;
  int sample_rate = 0;

  Waveform() = default;
  Waveform(Eigen::VectorXd s, int rate) : samples(std::move(s)), sample_rate(rate) {}

  Eigen::Index size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
  bool empty() const { return samples.size() == 0; }
};

// Root-mean-square level.  Empty input is an error: every caller that could
// hand us an empty buffer has already gone wrong.
inline double rms(const Waveform& x) {
  if (x.empty()) throw std::invalid_argument("rms: empty input");
  return std::sqrt(x.samples.squaredNorm() / static_cast<double>(x.size()));
}

inline double peak(const Waveform& x) {
  if (x.empty()) throw std::invalid_argument("peak: empty input");
  return x.samples.cwiseAbs().maxCoeff();
}

}  // namespace imgan
