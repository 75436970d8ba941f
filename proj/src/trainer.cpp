#include "imgan/gan/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>

#include "imgan/dsp.hpp"
#include "imgan/gan/losses.hpp"
#include "imgan/gan/pipeline.hpp"
#include "imgan/metrics.hpp"
#include "imgan/neural/grad_check.hpp"

namespace imgan::gan {

namespace fs = std::filesystem;

// Everything derivable from the fixed waveforms once, shared across epochs.
// Only the mask (and what depends on it) changes between steps.
struct Trainer::SampleCache {
  std::string id;
  const data::TrainSample* sample = nullptr;
  dsp::ComplexSpectrogram speech_stft;
  dsp::MagSpectrogram speech_comp;  // compressed
  dsp::MagSpectrogram noise_comp;
  neural::Mat<float> features;      // stacked speech/noise, 2*bins x frames
  neural::Mat<float> c_speech_f;
  neural::Mat<float> c_noise_f;
  std::optional<neural::Mat<float>> c_example_f;
  std::optional<Eigen::VectorXd> q_example;  // measured once, the example is fixed
  double e_ref = 0.0;                        // linear-domain spectral energy of speech
  double speech_rms = 0.0;
};

namespace {

Eigen::VectorXd q_vector(const metrics::MetricScores& ms, const metrics::MetricSelection& sel) {
  Eigen::VectorXd q(sel.k());
  int i = 0;
  for (auto m : sel.ordered())
    q[i++] = (m == metrics::Metric::Siib) ? *ms.siib_norm : *ms.estoi;
  return q;
}

// Compressed processed spectrogram back to a waveform with the clean-speech
// phase, RMS pinned to the input exactly.
Waveform reconstruct(const Eigen::MatrixXd& p_comp, const dsp::ComplexSpectrogram& phase,
                     double target_rms) {
  dsp::MagSpectrogram m;
  m.mags = p_comp;
  m.compressed = true;
  m.p = dsp::kCompressionExponent;
  m.sample_rate = phase.sample_rate;
  Waveform out = dsp::recombine(dsp::expand(m), phase);
  const double got = rms(out);
  if (got > 0.0) out.samples *= target_rms / got;
  return out;
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_(cfg),
      sel_(variant_selection(cfg.variant)),
      gen_(cfg.gen),
      disc_(cfg.disc),
      adam_g_(static_cast<float>(cfg.lr_g)),
      adam_d_(static_cast<float>(cfg.lr_d)) {
  if (cfg.disc.k != sel_.k())
    throw std::invalid_argument("train: discriminator k does not match the metric selection");
  if (cfg.max_epochs < 1 || cfg.patience < 1)
    throw std::invalid_argument("train: max_epochs and patience must be positive");
  Rng rg(Rng::derive(cfg.seed, 1));
  gen_.init(rg);
  Rng rd(Rng::derive(cfg.seed, 2));
  disc_.init(rd);
  adam_g_.attach(neural::collect_params<float>(gen_, "g"));
  adam_d_.attach(neural::collect_params<float>(disc_, "d"));
}

Trainer::Trainer(const TrainConfig& cfg, const data::Checkpoint& ck) : Trainer(cfg) {
  if (ck.variant != cfg.variant || !(ck.gen == cfg.gen) || !(ck.disc == cfg.disc))
    throw std::runtime_error("resume: checkpoint does not match the config");
  restore(ck);
}

Trainer::~Trainer() = default;

void Trainer::restore(const data::Checkpoint& ck) {
  auto fetch = [&](const std::string& name, neural::Mat<float>& dst) {
    const auto* t = ck.find(name);
    if (!t) throw std::runtime_error("resume: missing tensor " + name);
    if (t->value.rows() != dst.rows() || t->value.cols() != dst.cols())
      throw std::runtime_error("resume: tensor shape mismatch for " + name);
    dst = t->value;
  };
  gen_.visit_params("g", [&](const std::string& n, neural::Param<float>& p) {
    fetch(n, p.value);
    p.zero_grad();
  });
  disc_.visit_params("d", [&](const std::string& n, neural::Param<float>& p) {
    fetch(n, p.value);
    p.zero_grad();
  });
  disc_.visit_state("d", [&](const std::string& n, neural::Mat<float>& m) { fetch(n, m); });
  for (std::size_t i = 0; i < adam_g_.size(); ++i) {
    fetch(adam_g_.name_at(i) + ".m", adam_g_.m_at(i));
    fetch(adam_g_.name_at(i) + ".v", adam_g_.v_at(i));
  }
  for (std::size_t i = 0; i < adam_d_.size(); ++i) {
    fetch(adam_d_.name_at(i) + ".m", adam_d_.m_at(i));
    fetch(adam_d_.name_at(i) + ".v", adam_d_.v_at(i));
  }
  adam_g_.set_step_count(ck.adam_g_step);
  adam_d_.set_step_count(ck.adam_d_step);
  start_epoch_ = ck.epoch;
  best_epoch_ = ck.best_epoch;
  best_heldout_ = ck.best_heldout;
}

data::Checkpoint Trainer::snapshot(int epoch_label) {
  data::Checkpoint ck;
  ck.variant = cfg_.variant;
  ck.gen = cfg_.gen;
  ck.disc = cfg_.disc;
  ck.epoch = epoch_label;
  ck.best_epoch = best_epoch_;
  ck.best_heldout = best_heldout_;
  ck.adam_g_step = adam_g_.step_count();
  ck.adam_d_step = adam_d_.step_count();
  ck.lr_g = cfg_.lr_g;
  ck.lr_d = cfg_.lr_d;
  ck.rng_state = cfg_.seed;
  auto push = [&](const std::string& n, const neural::Mat<float>& m) {
    ck.tensors.push_back({n, m});
  };
  gen_.visit_params("g", [&](const std::string& n, neural::Param<float>& p) { push(n, p.value); });
  disc_.visit_params("d", [&](const std::string& n, neural::Param<float>& p) { push(n, p.value); });
  disc_.visit_state("d", [&](const std::string& n, neural::Mat<float>& m) { push(n, m); });
  for (std::size_t i = 0; i < adam_g_.size(); ++i) {
    push(adam_g_.name_at(i) + ".m", adam_g_.m_at(i));
    push(adam_g_.name_at(i) + ".v", adam_g_.v_at(i));
  }
  for (std::size_t i = 0; i < adam_d_.size(); ++i) {
    push(adam_d_.name_at(i) + ".m", adam_d_.m_at(i));
    push(adam_d_.name_at(i) + ".v", adam_d_.v_at(i));
  }
  return ck;
}

Trainer::SampleCache Trainer::build_cache(const data::TrainSample& s, bool want_example) const {
  SampleCache c;
  c.id = s.id;
  c.sample = &s;
  c.speech_stft = dsp::stft(s.speech);
  c.speech_comp = dsp::compress(dsp::magnitude(c.speech_stft));
  c.noise_comp = dsp::compress(dsp::magnitude(dsp::stft(s.noise)));
  c.features = stack_features<float>(c.speech_comp, c.noise_comp);
  c.c_speech_f = c.speech_comp.mags.cast<float>();
  c.c_noise_f = c.noise_comp.mags.cast<float>();
  c.e_ref = dsp::total_energy(dsp::expand(c.speech_comp));
  c.speech_rms = rms(s.speech);
  if (want_example)
    c.c_example_f =
        neural::Mat<float>(dsp::compress(dsp::magnitude(dsp::stft(*s.enhanced))).mags.cast<float>());
  return c;
}

Trainer::HeldoutEval Trainer::eval_heldout(std::vector<SampleCache>& held) {
  disc_.set_sn_frozen(true);
  double mse_acc = 0.0, q_acc = 0.0;
  int n = 0;
  for (auto& c : held) {
    try {
      neural::Mat<float> mask_f = gen_.forward(c.features);
      MaskBridge<double> bridge;
      const Eigen::MatrixXd p = bridge.forward(mask_f.cast<double>(), c.speech_comp.mags, c.e_ref);
      const Waveform enh = reconstruct(p, c.speech_stft, c.speech_rms);
      const Eigen::VectorXd q = q_vector(
          metrics::q_scores(enh, c.sample->speech, c.sample->noise, sel_, cfg_.r_max), sel_);
      const Eigen::VectorXd d =
          disc_.forward(disc_input<float>(p.cast<float>(), c.c_speech_f, c.c_noise_f))
              .cast<double>();
      mse_acc += mean_sq_gap(d, q);
      q_acc += q.mean();
      ++n;
    } catch (const std::exception&) {
      // metric failure on a held-out sample: it simply drops out of the means
    }
  }
  disc_.set_sn_frozen(false);
  HeldoutEval ev;
  if (n > 0) {
    ev.mse = mse_acc / n;
    ev.mean_q = q_acc / n;
  }
  return ev;
}

double Trainer::heldout_mse(const std::vector<data::TrainSample>& heldout_set) {
  std::vector<SampleCache> held;
  held.reserve(heldout_set.size());
  for (const auto& s : heldout_set) held.push_back(build_cache(s, false));
  return eval_heldout(held).mse;
}

TrainResult Trainer::run(const std::vector<data::TrainSample>& train_set,
                         const std::vector<data::TrainSample>& heldout_set,
                         const fs::path& run_dir, const TrainHooks& hooks) {
  if (train_set.empty()) throw std::invalid_argument("train: empty training set");
  const bool examples = variant_uses_examples(cfg_.variant);
  if (examples)
    for (const auto& s : train_set)
      if (!s.enhanced)
        throw std::invalid_argument("train: variant requires an example for sample " + s.id);

  fs::create_directories(run_dir / "ckpt");
  std::ofstream log(run_dir / "logs.jsonl", std::ios::app | std::ios::binary);
  if (!log) throw std::runtime_error("train: cannot write logs in " + run_dir.string());

  std::vector<SampleCache> caches;
  caches.reserve(train_set.size());
  for (const auto& s : train_set) caches.push_back(build_cache(s, examples));

  std::vector<SampleCache*> usable;
  for (auto& c : caches) {
    if (examples) {
      try {
        c.q_example = q_vector(metrics::q_scores(*c.sample->enhanced, c.sample->speech,
                                                 c.sample->noise, sel_, cfg_.r_max),
                               sel_);
      } catch (const std::exception& e) {
        log << nlohmann::json{{"sample_id", c.id},
                              {"warning", std::string("example score failed: ") + e.what()}}
                   .dump()
            << '\n';
        continue;
      }
    }
    usable.push_back(&c);
  }
  if (usable.empty()) throw std::runtime_error("train: no usable samples");

  std::vector<SampleCache> held;
  held.reserve(heldout_set.size());
  for (const auto& s : heldout_set) held.push_back(build_cache(s, false));

  TrainResult result;
  result.epochs_run = start_epoch_;
  const double k = sel_.k();
  const double t_target = cfg_.target_t;

  auto ckpt_path = [&](int e) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "epoch_%04d.imgn", e);
    return run_dir / "ckpt" / buf;
  };

  bool stop = false;
  for (int epoch = start_epoch_ + 1; epoch <= cfg_.max_epochs && !stop; ++epoch) {
    // The order is a pure function of (seed, epoch) so a resumed run replays
    // exactly the schedule an uninterrupted one would have used.
    std::vector<size_t> order(usable.size());
    std::iota(order.begin(), order.end(), size_t{0});
    Rng shuffle_rng(Rng::derive(cfg_.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    EpochStats st;
    st.epoch = epoch;
    double d_acc = 0.0, g_acc = 0.0;
    int done = 0;

    for (size_t oi = 0; oi < order.size(); ++oi) {
      SampleCache& c = *usable[order[oi]];

      neural::Mat<float> mask_f = gen_.forward(c.features);
      MaskBridge<double> bridge;
      Eigen::MatrixXd p_comp;
      Eigen::VectorXd q;
      try {
        p_comp = bridge.forward(mask_f.cast<double>(), c.speech_comp.mags, c.e_ref);
        const Waveform enh = reconstruct(p_comp, c.speech_stft, c.speech_rms);
        q = q_vector(metrics::q_scores(enh, c.sample->speech, c.sample->noise, sel_, cfg_.r_max),
                     sel_);
      } catch (const std::exception& e) {
        ++st.skipped;
        log << nlohmann::json{{"epoch", epoch},
                              {"sample_id", c.id},
                              {"warning", std::string("metric failure: ") + e.what()}}
                   .dump()
            << '\n';
        continue;
      }

      double d_loss = 0.0, g_l = 0.0;
      Eigen::VectorXd d_gen;
      try {
        // Discriminator update: predict on the generator output (and the
        // example when the variant uses one), regress toward measured scores.
        const neural::FeatureMap<float> x =
            disc_input<float>(p_comp.cast<float>(), c.c_speech_f, c.c_noise_f);
        d_gen = disc_.forward(x).cast<double>();
        d_loss = mean_sq_gap(d_gen, q);
        adam_d_.zero_grad();
        neural::Mat<float> seed_d = ((2.0 / k) * (d_gen - q)).cast<float>();
        disc_.backward(seed_d);
        if (examples) {
          const Eigen::VectorXd d_ex =
              disc_.forward(disc_input<float>(*c.c_example_f, c.c_speech_f, c.c_noise_f))
                  .cast<double>();
          d_loss += mean_sq_gap(d_ex, *c.q_example);
          neural::Mat<float> seed_e = ((2.0 / k) * (d_ex - *c.q_example)).cast<float>();
          disc_.backward(seed_e);
        }
        adam_d_.step();

        // Generator update against the refreshed discriminator.  The forward
        // from the D step is still valid (G did not change); the D forward on
        // the same input refreshes its caches for the input-gradient pass.
        const Eigen::VectorXd d2 = disc_.forward(x).cast<double>();
        g_l = (d2.array() - t_target).square().sum() / k;
        adam_g_.zero_grad();
        neural::Mat<float> seed_g = ((2.0 / k) * (d2.array() - t_target)).matrix().cast<float>();
        const neural::FeatureMap<float> dx = disc_.backward(seed_g);
        const neural::Mat<float> d_mask =
            bridge.backward(dx.ch[0].cast<double>()).cast<float>();
        gen_.backward(d_mask);
        adam_g_.step();
        if (!std::isfinite(d_loss) || !std::isfinite(g_l))
          throw std::runtime_error("non-finite loss");
      } catch (const std::runtime_error& e) {
        result.diverged = true;
        log << nlohmann::json{{"epoch", epoch}, {"sample_id", c.id}, {"error", e.what()}}.dump()
            << '\n';
        break;
      }

      d_acc += d_loss;
      g_acc += g_l;
      ++done;

      nlohmann::json line{
          {"epoch", epoch}, {"sample_id", c.id}, {"d_loss", d_loss}, {"g_loss", g_l}};
      int qi = 0;
      for (auto m : sel_.ordered()) {
        const char* nm = (m == metrics::Metric::Siib) ? "siib" : "estoi";
        line[std::string("q_") + nm] = q[qi];
        line[std::string("d_") + nm] = d_gen[qi];
        ++qi;
      }
      log << line.dump() << '\n';
    }

    if (result.diverged) break;  // keep the last good checkpoint as-is
    if (done == 0)
      throw std::runtime_error("train: no usable samples in epoch " + std::to_string(epoch));

    st.mean_d_loss = d_acc / done;
    st.mean_g_loss = g_acc / done;
    if (!held.empty()) {
      const HeldoutEval ev = eval_heldout(held);
      st.heldout_mse = ev.mse;
      st.heldout_q = ev.mean_q;
    }

    // Model selection targets what the generator is for: measured quality of
    // held-out enhancements, not the discriminator's prediction error.
    if (std::isfinite(st.heldout_q) && st.heldout_q > best_heldout_) {
      best_heldout_ = st.heldout_q;
      best_epoch_ = epoch;
    }

    const fs::path cp = ckpt_path(epoch);
    data::save_checkpoint(cp, snapshot(epoch));
    for (const auto& ent : fs::directory_iterator(run_dir / "ckpt")) {
      const std::string fn = ent.path().filename().string();
      if (fn.rfind("epoch_", 0) != 0) continue;
      const int n = std::atoi(fn.substr(6, 4).c_str());
      if (n != epoch && n != best_epoch_) fs::remove(ent.path());
    }
    result.last_checkpoint = cp;
    result.best_checkpoint = best_epoch_ > 0 ? ckpt_path(best_epoch_) : cp;

    log << nlohmann::json{{"epoch", epoch},
                          {"mean_d_loss", st.mean_d_loss},
                          {"mean_g_loss", st.mean_g_loss},
                          {"heldout_mse", st.heldout_mse},
                          {"heldout_q", st.heldout_q},
                          {"skipped", st.skipped}}
               .dump()
        << '\n';
    log.flush();

    result.history.push_back(st);
    result.epochs_run = epoch;
    if (hooks.on_epoch) hooks.on_epoch(st);

    if (!held.empty() && best_epoch_ > 0 && (epoch - best_epoch_) >= cfg_.patience) stop = true;
  }

  start_epoch_ = result.epochs_run;
  result.best_epoch = best_epoch_;
  result.best_heldout_q = best_heldout_;
  return result;
}

}  // namespace imgan::gan
