#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace imgan::data {

// One prepared mixture: a speech/noise pairing at a fixed SNR with a seeded
// noise crop.  enhanced_path points at the rule-based example when present.
struct ManifestRow {
  std::string id;
  std::string speech_path;
  std::string noise_path;
  double snr_db = 0.0;
  std::uint64_t crop_seed = 0;
  std::optional<std::string> enhanced_path;
  std::string split;  // train | heldout | test
};

using Manifest = std::vector<ManifestRow>;

// Unique ids, finite SNR, known split names.
void validate_manifest(const Manifest& m);

// JSON-lines, one row per line, keys sorted; deterministic bytes.
void save_manifest(const std::filesystem::path& path, const Manifest& m);

// Parses, validates, and checks that every referenced file exists; relative
// paths resolve against the manifest's directory.
Manifest load_manifest(const std::filesystem::path& path);

// The path resolution rule used by load_manifest and load_sample.
std::filesystem::path resolve_path(const std::string& stored,
                                   const std::filesystem::path& base_dir);

}  // namespace imgan::data
