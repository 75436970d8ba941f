#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "imgan/gan/config.hpp"

namespace imgan::data {

// One named f32 tensor. Vectors are stored as n x 1.
struct TensorEntry {
  std::string name;
  Eigen::MatrixXf value;
};

// Full training state: architecture, weights, optimizer moments, normalizer
// state, and the RNG position. Self-describing: a reader reconstructs both
// networks from the metadata alone.
struct Checkpoint {
  gan::Variant variant = gan::Variant::kSiibGanZs;
  gan::GenArch gen;
  gan::DiscArch disc;
  int epoch = 0;
  int best_epoch = 0;  // early-stop bookkeeping survives a resume
  // Highest held-out quality seen so far; -inf before any held-out eval.
  double best_heldout = -std::numeric_limits<double>::infinity();
  std::uint64_t adam_g_step = 0;
  std::uint64_t adam_d_step = 0;
  double lr_g = 0.0;
  double lr_d = 0.0;
  std::uint64_t rng_state = 0;
  std::vector<TensorEntry> tensors;

  const TensorEntry* find(const std::string& name) const;
};

// Container layout: "IMGN" | u32 version | u64 json_len | metadata JSON |
// f32 little-endian tensor blocks in index order | CRC32 of everything prior.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace imgan::data
