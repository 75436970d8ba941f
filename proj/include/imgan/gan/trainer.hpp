#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "imgan/data/checkpoint.hpp"
#include "imgan/data/dataset.hpp"
#include "imgan/gan/config.hpp"
#include "imgan/gan/discriminator.hpp"
#include "imgan/gan/generator.hpp"
#include "imgan/neural/adam.hpp"

namespace imgan::gan {

struct EpochStats {
  int epoch = 0;
  double mean_d_loss = 0.0;
  double mean_g_loss = 0.0;
  // Both held-out figures are NaN when the held-out set is empty.
  double heldout_mse = std::numeric_limits<double>::quiet_NaN();  // D prediction error
  double heldout_q = std::numeric_limits<double>::quiet_NaN();    // mean measured quality
  int skipped = 0;  // samples dropped this epoch after a metric failure
};

struct TrainResult {
  std::vector<EpochStats> history;  // epochs run by this call only
  int epochs_run = 0;               // total completed, counting resumed-from ones
  int best_epoch = 0;               // epoch with the highest held-out quality
  double best_heldout_q = -std::numeric_limits<double>::infinity();
  bool diverged = false;
  std::filesystem::path last_checkpoint;
  std::filesystem::path best_checkpoint;
};

struct TrainHooks {
  // Runs after each epoch's checkpoint is on disk; the trainer's nets are
  // readable through gen()/disc() at that point.
  std::function<void(const EpochStats&)> on_epoch;
};

// Alternating single-sample training: one discriminator update then one
// generator update per utterance, reusing the generator forward between the
// two.  Measured scores are recomputed from the reconstructed waveform every
// discriminator step; example scores are fixed per sample and cached.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);
  // Resume: cfg must match the checkpoint's variant and architectures.
  Trainer(const TrainConfig& cfg, const data::Checkpoint& ck);
  ~Trainer();

  // Trains from the current state up to cfg.max_epochs, writing
  // run_dir/logs.jsonl (append) and run_dir/ckpt/epoch_NNNN.imgn per epoch;
  // only the best and latest checkpoints are kept.  Best means highest mean
  // measured quality of held-out enhancements (the score the generator is
  // deployed for, not the discriminator's fit).  Early stop: no held-out
  // quality improvement for cfg.patience epochs (disabled when heldout is
  // empty).
  TrainResult run(const std::vector<data::TrainSample>& train_set,
                  const std::vector<data::TrainSample>& heldout_set,
                  const std::filesystem::path& run_dir, const TrainHooks& hooks = {});

  // Mean over samples of the mean-over-metrics squared gap between predicted
  // and measured scores, with normalizer state frozen.  Read-only.
  double heldout_mse(const std::vector<data::TrainSample>& heldout_set);

  data::Checkpoint snapshot(int epoch_label);

  GeneratorNet<float>& gen() { return gen_; }
  DiscriminatorNet<float>& disc() { return disc_; }
  const TrainConfig& config() const { return cfg_; }

 private:
  struct SampleCache;
  struct HeldoutEval {
    double mse = std::numeric_limits<double>::quiet_NaN();
    double mean_q = std::numeric_limits<double>::quiet_NaN();
  };
  SampleCache build_cache(const data::TrainSample& s, bool want_example) const;
  HeldoutEval eval_heldout(std::vector<SampleCache>& held);
  void restore(const data::Checkpoint& ck);

  TrainConfig cfg_;
  metrics::MetricSelection sel_;
  GeneratorNet<float> gen_;
  DiscriminatorNet<float> disc_;
  neural::Adam<float> adam_g_;
  neural::Adam<float> adam_d_;
  int start_epoch_ = 0;
  int best_epoch_ = 0;
  double best_heldout_ = -std::numeric_limits<double>::infinity();
};

}  // namespace imgan::gan
