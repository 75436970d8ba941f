#pragma once

#include <stdexcept>
#include <vector>

#include "imgan/gan/config.hpp"
#include "imgan/neural/activations.hpp"
#include "imgan/neural/conv2d.hpp"
#include "imgan/neural/dense.hpp"

namespace imgan::gan {

// Metric predictor: spectrally normalized conv stack over the 3-channel
// compressed spectrograms (processed, unprocessed speech, noise), pooled to
// a vector, then a small dense head with one sigmoid output per metric.
template <class S>
class DiscriminatorNet {
 public:
  explicit DiscriminatorNet(const DiscArch& arch) : arch_(arch) {
    arch.validate();
    int in_ch = 3;
    for (size_t i = 0; i < arch.channels.size(); ++i) {
      convs_.emplace_back(in_ch, arch.channels[i], arch.kernels[i], arch.kernels[i],
                          arch.freq_stride, 1, /*spectral_norm=*/true);
      conv_acts_.emplace_back(S(0.3));
      in_ch = arch.channels[i];
    }
    fc_.emplace_back(in_ch, arch.dense1, true);
    fc_.emplace_back(arch.dense1, arch.dense2, true);
    fc_.emplace_back(arch.dense2, arch.k, true);
  }

  void init(Rng& rng) {
    for (auto& c : convs_) c.init(rng);
    for (auto& d : fc_) d.init(rng);
  }

  // x: exactly 3 channels, bins x frames each.  Returns k x 1 scores in (0,1).
  neural::Mat<S> forward(const neural::FeatureMap<S>& x) {
    if (x.channels() != 3) throw std::invalid_argument("discriminator: expected 3 channels");
    neural::FeatureMap<S> h = x;
    for (size_t i = 0; i < convs_.size(); ++i) h = conv_acts_[i].forward(convs_[i].forward(h));
    pooled_channels_ = h.channels();
    auto v = gap_.forward(h);
    v = fc_act1_.forward(fc_[0].forward(v));
    v = fc_act2_.forward(fc_[1].forward(v));
    return sig_.forward(fc_[2].forward(v));
  }

  // Accumulates parameter gradients and returns gradients wrt the input map
  // (the processed channel feeds the generator's chain).
  neural::FeatureMap<S> backward(const neural::Mat<S>& d_score) {
    auto dv = fc_[2].backward(sig_.backward(d_score));
    dv = fc_[1].backward(fc_act2_.backward(dv));
    dv = fc_[0].backward(fc_act1_.backward(dv));
    auto dh = gap_.backward(dv, pooled_channels_);
    for (size_t i = convs_.size(); i-- > 0;)
      dh = convs_[i].backward(conv_acts_[i].backward(dh));
    return dh;
  }

  void set_sn_frozen(bool frozen) {
    for (auto& c : convs_) c.set_sn_frozen(frozen);
    for (auto& d : fc_) d.set_sn_frozen(frozen);
  }

  // Normalized weight matrices of every layer, for Lipschitz audits.
  std::vector<neural::Mat<S>> effective_weights() {
    std::vector<neural::Mat<S>> out;
    for (auto& c : convs_) out.push_back(c.effective_weight());
    for (auto& d : fc_) out.push_back(d.effective_weight());
    return out;
  }

  void visit_params(const std::string& prefix, const neural::ParamVisitor<S>& fn) {
    for (size_t i = 0; i < convs_.size(); ++i)
      convs_[i].visit_params(prefix + ".conv" + std::to_string(i), fn);
    for (size_t i = 0; i < fc_.size(); ++i)
      fc_[i].visit_params(prefix + ".fc" + std::to_string(i), fn);
  }

  void visit_state(const std::string& prefix, const neural::StateVisitor<S>& fn) {
    for (size_t i = 0; i < convs_.size(); ++i)
      convs_[i].visit_state(prefix + ".conv" + std::to_string(i), fn);
    for (size_t i = 0; i < fc_.size(); ++i)
      fc_[i].visit_state(prefix + ".fc" + std::to_string(i), fn);
  }

  long long param_count() {
    long long n = 0;
    visit_params("d", [&](const std::string&, neural::Param<S>& p) { n += p.numel(); });
    return n;
  }

  const DiscArch& arch() const { return arch_; }

 private:
  DiscArch arch_;
  std::vector<neural::Conv2d<S>> convs_;
  std::vector<neural::FmLeakyRelu<S>> conv_acts_;
  neural::GlobalAvgPool<S> gap_;
  int pooled_channels_ = 0;
  std::vector<neural::Dense<S>> fc_;
  neural::LeakyRelu<S> fc_act1_{S(0.3)}, fc_act2_{S(0.3)};
  neural::Sigmoid<S> sig_;
};

}  // namespace imgan::gan
