#pragma once

#include <cmath>
#include <stdexcept>

#include "imgan/dsp.hpp"
#include "imgan/gan/generator.hpp"
#include "imgan/neural/conv2d.hpp"

namespace imgan::gan {

// Energy-constrained mask application in the compressed domain, with an
// exact backward pass.  With z = mask .* C (compressed), the normalized
// processed spectrogram the discriminator sees is P = a z where
//   e = sum(z^(2/p)),  a = (e_ref / e)^(p/2),
// because expanding z, scaling total linear energy to e_ref, and compressing
// again is the same map.  Working entirely on z avoids differentiating
// x^p at x = 0, where the compression slope is unbounded.
template <class S>
class MaskBridge {
 public:
  neural::Mat<S> forward(const neural::Mat<S>& mask, const neural::Mat<S>& c_comp,
                         S e_ref, S p = S(dsp::kCompressionExponent)) {
    if (mask.rows() != c_comp.rows() || mask.cols() != c_comp.cols())
      throw std::invalid_argument("mask bridge: shape mismatch");
    if (!(e_ref > S(0))) throw std::invalid_argument("mask bridge: reference all-zero");
    c_ = c_comp;
    z_ = mask.cwiseProduct(c_comp);
    const S q = S(2) / p;
    e_ = z_.array().pow(q).sum();
    if (!(e_ > S(0))) throw std::runtime_error("mask bridge: degenerate enhancement");
    a_ = std::pow(e_ref / e_, p / S(2));
    z_pow_ = z_.array().pow(q - S(1));  // exponent > 0, so 0 maps to 0
    return a_ * z_;
  }

  // dL/dmask from dL/dP.  a depends on every z entry through e:
  // dL/dz = a dP - (a/e) <dP, z> z^(2/p - 1), then dL/dmask = dL/dz .* C.
  neural::Mat<S> backward(const neural::Mat<S>& d_p) const {
    const S inner = (d_p.array() * z_.array()).sum();
    neural::Mat<S> dz = a_ * d_p - (a_ / e_) * inner * z_pow_;
    return dz.cwiseProduct(c_);
  }

  S scale() const { return a_; }

 private:
  neural::Mat<S> z_, c_, z_pow_;
  S a_ = S(0), e_ = S(0);
};

// Stack the two compressed input branches into the generator's per-frame
// feature vector: speech bins on top, noise bins below.
template <class S>
neural::Mat<S> stack_features(const dsp::MagSpectrogram& speech_c,
                              const dsp::MagSpectrogram& noise_c) {
  if (!speech_c.compressed || !noise_c.compressed)
    throw std::invalid_argument("features: inputs must be compressed");
  if (speech_c.mags.rows() != noise_c.mags.rows() ||
      speech_c.mags.cols() != noise_c.mags.cols())
    throw std::invalid_argument("features: shape mismatch");
  neural::Mat<S> f(2 * speech_c.mags.rows(), speech_c.mags.cols());
  f.topRows(speech_c.mags.rows()) = speech_c.mags.template cast<S>();
  f.bottomRows(noise_c.mags.rows()) = noise_c.mags.template cast<S>();
  return f;
}

// The discriminator's 3-channel input: (processed, unprocessed, noise),
// all in the compressed domain.
template <class S>
neural::FeatureMap<S> disc_input(const neural::Mat<S>& processed_c,
                                 const neural::Mat<S>& speech_c,
                                 const neural::Mat<S>& noise_c) {
  neural::FeatureMap<S> x(3, speech_c.rows(), speech_c.cols());
  x.ch[0] = processed_c;
  x.ch[1] = speech_c;
  x.ch[2] = noise_c;
  return x;
}

struct GeneratorOutput {
  Eigen::MatrixXd mask;         // bins x frames, entries in [e^-2.5, e^5.5]
  dsp::MagSpectrogram enhanced;  // linear domain, energy-matched to the input
};

// Full generator op on spectrogram domain types: mask the compressed input,
// expand, and normalize total energy against the linear unmodified speech.
template <class S>
GeneratorOutput generator_forward(GeneratorNet<S>& gen, const dsp::MagSpectrogram& speech_spec,
                                  const dsp::MagSpectrogram& noise_spec) {
  neural::Mat<S> features = stack_features<S>(speech_spec, noise_spec);
  Eigen::MatrixXd mask = gen.forward(features).template cast<double>();

  dsp::MagSpectrogram masked = speech_spec;
  masked.mags = mask.cwiseProduct(speech_spec.mags);
  dsp::MagSpectrogram linear = dsp::expand(masked);
  dsp::MagSpectrogram reference = dsp::expand(speech_spec);
  GeneratorOutput out;
  out.mask = std::move(mask);
  out.enhanced = dsp::energy_normalize(linear, reference);
  return out;
}

// End-to-end enhancement: analyze, mask, reconstruct with the speech phase,
// then pin the waveform RMS to the input exactly (the spectral energy match
// already lands within a fraction of a dB; the tail windowing is the only
// leak).
template <class S>
Waveform enhance(GeneratorNet<S>& gen, const Waveform& speech, const Waveform& noise) {
  if (speech.samples.size() != noise.samples.size())
    throw std::invalid_argument("enhance: length mismatch");
  if (speech.sample_rate != noise.sample_rate)
    throw std::invalid_argument("enhance: sample rate mismatch");

  dsp::ComplexSpectrogram cs = dsp::stft(speech);
  dsp::ComplexSpectrogram cn = dsp::stft(noise);
  dsp::MagSpectrogram sc = dsp::compress(dsp::magnitude(cs));
  dsp::MagSpectrogram nc = dsp::compress(dsp::magnitude(cn));

  GeneratorOutput g = generator_forward(gen, sc, nc);
  Waveform out = dsp::recombine(g.enhanced, cs);
  const double target_rms = rms(speech);
  const double got = rms(out);
  if (got > 0.0) out.samples *= target_rms / got;
  return out;
}

}  // namespace imgan::gan
