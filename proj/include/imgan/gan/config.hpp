#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "imgan/metrics.hpp"

namespace imgan::gan {

// Training variants.  SiibGAN-zs trains the discriminator on generator
// output alone; the other two also show it reference-enhanced examples.
enum class Variant { kSiibGanZs, kSiibGan, kMultiGan };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::kSiibGanZs: return "SiibGAN-zs";
    case Variant::kSiibGan: return "SiibGAN";
    case Variant::kMultiGan: return "MultiGAN";
  }
  throw std::logic_error("unknown variant");
}

inline Variant parse_variant(const std::string& s) {
  if (s == "SiibGAN-zs") return Variant::kSiibGanZs;
  if (s == "SiibGAN") return Variant::kSiibGan;
  if (s == "MultiGAN") return Variant::kMultiGan;
  throw std::invalid_argument("unknown variant: " + s);
}

inline metrics::MetricSelection variant_selection(Variant v) {
  metrics::MetricSelection sel;
  sel.siib = true;
  sel.estoi = (v == Variant::kMultiGan);
  return sel;
}

inline bool variant_uses_examples(Variant v) { return v != Variant::kSiibGanZs; }

// Generator sizes.  The full-scale preset follows the published layout; the
// desk preset shrinks the recurrent and dense widths for CPU training.
struct GenArch {
  int in_bins = 513;   // per input branch; the net sees 2x this per frame
  int lstm1 = 400;     // per direction
  int lstm2 = 400;
  int dense = 600;
  int out_bins = 513;

  static GenArch full() { return {}; }
  static GenArch desk() { return {513, 96, 96, 150, 513}; }

  long long param_count() const {
    auto bilstm = [](long long in, long long h) { return 2 * 4 * h * (in + h + 1); };
    auto fc = [](long long in, long long out) { return out * (in + 1); };
    return bilstm(2LL * in_bins, lstm1) + bilstm(2LL * lstm1, lstm2) +
           fc(2LL * lstm2, dense) + fc(dense, out_bins);
  }

  bool operator==(const GenArch&) const = default;
};

// Discriminator sizes.  freq_stride > 1 strides the frequency axis of every
// conv for desk-scale speed; it is off (1) by default.
struct DiscArch {
  std::vector<int> channels{8, 16, 32, 48, 64};
  std::vector<int> kernels{5, 7, 10, 15, 20};
  int freq_stride = 1;
  int dense1 = 64;
  int dense2 = 10;
  int k = 1;  // one sigmoid output per selected metric

  static DiscArch full(int k_metrics) {
    DiscArch a;
    a.k = k_metrics;
    return a;
  }
  static DiscArch desk(int k_metrics) {
    DiscArch a;
    a.channels = {6, 8, 12, 16, 24};
    a.kernels = {5, 5, 5, 5, 5};
    a.freq_stride = 2;
    a.k = k_metrics;
    return a;
  }

  void validate() const {
    if (channels.size() != kernels.size() || channels.empty())
      throw std::invalid_argument("disc arch: channels/kernels size mismatch");
    if (k < 1) throw std::invalid_argument("disc arch: k must be positive");
    if (freq_stride < 1) throw std::invalid_argument("disc arch: bad stride");
  }

  long long param_count() const {
    long long total = 0;
    long long in_ch = 3;
    for (size_t i = 0; i < channels.size(); ++i) {
      total += static_cast<long long>(channels[i]) *
                   (in_ch * kernels[i] * kernels[i]) +
               channels[i];
      in_ch = channels[i];
    }
    total += static_cast<long long>(dense1) * (in_ch + 1);
    total += static_cast<long long>(dense2) * (dense1 + 1);
    total += static_cast<long long>(k) * (dense2 + 1);
    return total;
  }

  bool operator==(const DiscArch&) const = default;
};

struct TrainConfig {
  Variant variant = Variant::kSiibGanZs;
  GenArch gen;
  DiscArch disc;
  int max_epochs = 50;
  int patience = 5;  // early stop on held-out D prediction error
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double r_max = 750.0;  // SIIB normalization ceiling, bits/s
  double target_t = 1.0;
  std::uint64_t seed = 1;

  bool operator==(const TrainConfig&) const = default;
};

}  // namespace imgan::gan
