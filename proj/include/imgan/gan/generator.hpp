#pragma once

#include <stdexcept>

#include "imgan/gan/config.hpp"
#include "imgan/neural/activations.hpp"
#include "imgan/neural/dense.hpp"
#include "imgan/neural/lstm.hpp"

namespace imgan::gan {

// Mask generator: stacked BLSTMs over the frame sequence, then a per-frame
// dense head ending in the bounded exponential scale activation, so every
// mask entry lies in [e^-2.5, e^5.5] no matter the input.
template <class S>
class GeneratorNet {
 public:
  explicit GeneratorNet(const GenArch& arch)
      : arch_(arch),
        bl1_(2 * arch.in_bins, arch.lstm1),
        bl2_(2 * arch.lstm1, arch.lstm2),
        d1_(2 * arch.lstm2, arch.dense),
        d_out_(arch.dense, arch.out_bins),
        lrelu_(S(0.3)) {}

  void init(Rng& rng) {
    bl1_.init(rng);
    bl2_.init(rng);
    d1_.init(rng);
    d_out_.init(rng);
  }

  // features: (2 * in_bins) x frames, one column per frame.
  neural::Mat<S> forward(const neural::Mat<S>& features) {
    if (features.rows() != 2 * arch_.in_bins)
      throw std::invalid_argument("generator: input width mismatch");
    auto h1 = bl1_.forward(features);
    auto h2 = bl2_.forward(h1);
    auto z = lrelu_.forward(d1_.forward(h2));
    return scale_.forward(d_out_.forward(z));
  }

  // Accumulates parameter gradients from dL/dmask; input gradients are not
  // needed (the generator is the head of the differentiable chain).
  void backward(const neural::Mat<S>& d_mask) {
    auto da = d_out_.backward(scale_.backward(d_mask));
    auto dh2 = d1_.backward(lrelu_.backward(da));
    bl1_.backward(bl2_.backward(dh2));
  }

  void visit_params(const std::string& prefix, const neural::ParamVisitor<S>& fn) {
    bl1_.visit_params(prefix + ".bl1", fn);
    bl2_.visit_params(prefix + ".bl2", fn);
    d1_.visit_params(prefix + ".d1", fn);
    d_out_.visit_params(prefix + ".d_out", fn);
  }

  long long param_count() {
    long long n = 0;
    visit_params("g", [&](const std::string&, neural::Param<S>& p) { n += p.numel(); });
    return n;
  }

  const GenArch& arch() const { return arch_; }

 private:
  GenArch arch_;
  neural::BiLstm<S> bl1_, bl2_;
  neural::Dense<S> d1_, d_out_;
  neural::LeakyRelu<S> lrelu_;
  neural::ScaleActivation<S> scale_;
};

}  // namespace imgan::gan
