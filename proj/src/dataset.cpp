#include "imgan/data/dataset.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "imgan/common.hpp"
#include "imgan/data/wav.hpp"
#include "imgan/dsp.hpp"
#include "imgan/refmod.hpp"

namespace imgan::data {

namespace {

namespace fs = std::filesystem;

std::vector<fs::path> list_wavs(const fs::path& dir) {
  if (!fs::is_directory(dir))
    throw std::runtime_error("prepare: no such directory " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav") out.push_back(e.path());
  if (out.empty()) throw std::runtime_error("prepare: no wav files in " + dir.string());
  std::sort(out.begin(), out.end());
  return out;
}

// Split sizes: floor of the fractions, then nudged so every split is
// non-empty whenever there are at least three speech files.
std::vector<std::string> assign_splits(size_t n, const PrepareOptions& opt) {
  if (opt.train_frac <= 0.0 || opt.heldout_frac < 0.0 ||
      opt.train_frac + opt.heldout_frac >= 1.0)
    throw std::invalid_argument("prepare: bad split fractions");
  int n_train = static_cast<int>(opt.train_frac * static_cast<double>(n));
  int n_held = static_cast<int>(opt.heldout_frac * static_cast<double>(n));
  if (n == 1) {
    n_train = 1;
    n_held = 0;
  } else if (n == 2) {
    n_train = 1;
    n_held = 1;
  } else {
    n_train = std::max(1, n_train);
    n_held = std::max(1, n_held);
    while (n_train + n_held > static_cast<int>(n) - 1)
      (n_train > n_held ? n_train : n_held)--;
  }

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(Rng::derive(opt.seed, 0));
  for (size_t i = n; i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);

  std::vector<std::string> split(n);
  for (size_t i = 0; i < n; ++i) {
    const int rank = static_cast<int>(i);
    split[order[i]] = rank < n_train              ? "train"
                      : rank < n_train + n_held ? "heldout"
                                                  : "test";
  }
  return split;
}

std::string format_snr(double snr_db) {
  std::ostringstream os;
  os << snr_db;
  return os.str();
}

}  // namespace

Manifest prepare(const fs::path& speech_dir, const fs::path& noise_dir,
                 const PrepareOptions& opt) {
  if (opt.out_dir.empty()) throw std::invalid_argument("prepare: out_dir required");
  if (opt.snr_grid.empty()) throw std::invalid_argument("prepare: empty snr grid");
  const auto speech_files = list_wavs(speech_dir);
  const auto noise_files = list_wavs(noise_dir);
  const auto splits = assign_splits(speech_files.size(), opt);

  fs::create_directories(opt.out_dir);
  if (opt.with_examples) fs::create_directories(opt.out_dir / "examples");
  if (opt.write_mixtures) fs::create_directories(opt.out_dir / "mixtures");

  std::map<size_t, Waveform> noise_cache;
  auto noise_at = [&](size_t idx) -> const Waveform& {
    auto it = noise_cache.find(idx);
    if (it == noise_cache.end())
      it = noise_cache.emplace(idx, read_wav(noise_files[idx])).first;
    return it->second;
  };

  Manifest m;
  std::uint64_t row_index = 0;
  for (size_t si = 0; si < speech_files.size(); ++si) {
    const std::string stem = speech_files[si].stem().string();
    const bool need_audio = opt.with_examples || opt.write_mixtures;
    Waveform speech;
    if (need_audio) speech = read_wav(speech_files[si]);

    std::optional<std::string> example_rel;
    if (opt.with_examples) {
      example_rel = "examples/" + stem + ".wav";
      write_wav(opt.out_dir / *example_rel, refmod::make_example(speech));
    }

    for (double snr : opt.snr_grid) {
      ManifestRow row;
      row.id = stem + "_snr" + format_snr(snr);
      row.speech_path = fs::absolute(speech_files[si]).string();
      const size_t noise_idx =
          Rng(Rng::derive(opt.seed, 20000 + row_index)).below(noise_files.size());
      row.noise_path = fs::absolute(noise_files[noise_idx]).string();
      row.snr_db = snr;
      row.crop_seed = Rng::derive(opt.seed, 10000 + row_index);
      row.enhanced_path = example_rel;
      row.split = splits[si];
      ++row_index;

      if (opt.write_mixtures) {
        const Waveform& noise = noise_at(noise_idx);
        if (noise.sample_rate != speech.sample_rate)
          throw std::runtime_error("prepare: sample rate mismatch between " +
                                   speech_files[si].string() + " and " +
                                   noise_files[noise_idx].string());
        write_wav(opt.out_dir / "mixtures" / (row.id + ".wav"),
                  dsp::mix_at_snr(speech, noise, snr, row.crop_seed));
      }
      m.push_back(std::move(row));
    }
  }

  save_manifest(opt.out_dir / "manifest.jsonl", m);
  return m;
}

TrainSample load_sample(const ManifestRow& row, const fs::path& base_dir) {
  TrainSample s;
  s.id = row.id;
  s.snr_db = row.snr_db;
  s.speech = read_wav(resolve_path(row.speech_path, base_dir));
  const Waveform noise_raw = read_wav(resolve_path(row.noise_path, base_dir));
  if (noise_raw.sample_rate != s.speech.sample_rate)
    throw std::runtime_error("load: sample rate mismatch for " + row.id);
  s.noise = dsp::scaled_noise_for_mix(s.speech, noise_raw, row.snr_db, row.crop_seed);
  if (row.enhanced_path) {
    Waveform ex = read_wav(resolve_path(*row.enhanced_path, base_dir));
    if (ex.sample_rate != s.speech.sample_rate)
      throw std::runtime_error("load: sample rate mismatch for " + row.id);
    if (ex.samples.size() != s.speech.samples.size())
      throw std::runtime_error("load: enhanced length mismatch for " + row.id);
    s.enhanced = std::move(ex);
  }
  return s;
}

}  // namespace imgan::data
