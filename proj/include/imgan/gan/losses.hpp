#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

namespace imgan::gan {

// Per-sample predicted and measured normalized metric scores, K entries each.
struct ScorePair {
  Eigen::VectorXd d;
  Eigen::VectorXd q;
};

inline double mean_sq_gap(const Eigen::VectorXd& d, const Eigen::VectorXd& q) {
  if (d.size() != q.size() || d.size() == 0)
    throw std::invalid_argument("loss: score size mismatch");
  return (d - q).squaredNorm() / static_cast<double>(d.size());
}

// Mean over the batch of the mean-over-metrics squared prediction error on
// generator output alone.
inline double d_loss_zero_knowledge(const std::vector<ScorePair>& batch) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  double acc = 0.0;
  for (const auto& s : batch) acc += mean_sq_gap(s.d, s.q);
  return acc / static_cast<double>(batch.size());
}

// As above plus the same error on the reference-enhanced example.
struct ExampleScores {
  ScorePair gen;
  ScorePair example;
};

inline double d_loss_with_examples(const std::vector<ExampleScores>& batch) {
  if (batch.empty()) throw std::invalid_argument("loss: empty batch");
  double acc = 0.0;
  for (const auto& s : batch) acc += mean_sq_gap(s.gen.d, s.gen.q) + mean_sq_gap(s.example.d, s.example.q);
  return acc / static_cast<double>(batch.size());
}

// Mean squared gap between the discriminator's prediction on generator
// output and the target score t (1.0 = the normalized maximum).
inline double g_loss(const std::vector<Eigen::VectorXd>& d_outputs, double t = 1.0) {
  if (d_outputs.empty()) throw std::invalid_argument("loss: empty batch");
  double acc = 0.0;
  for (const auto& d : d_outputs) {
    if (d.size() == 0) throw std::invalid_argument("loss: empty scores");
    acc += (d.array() - t).square().sum() / static_cast<double>(d.size());
  }
  return acc / static_cast<double>(d_outputs.size());
}

}  // namespace imgan::gan
