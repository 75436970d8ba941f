#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>

#include "imgan/common.hpp"
#include "imgan/data/checkpoint.hpp"
#include "imgan/data/dataset.hpp"
#include "imgan/data/manifest.hpp"
#include "imgan/data/toyset.hpp"
#include "imgan/data/wav.hpp"
#include "imgan/dsp.hpp"
#include "imgan/waveform.hpp"

namespace fs = std::filesystem;
using imgan::Rng;
using imgan::Waveform;
namespace data = imgan::data;

namespace {

// Fresh per-case scratch directory, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("imgan_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Waveform tiny_wave(std::uint64_t seed, int rate = 16000, int n = 64) {
  Rng rng(seed);
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (int i = 0; i < n; ++i) w.samples[i] = 0.25 * rng.normal();
  return w;
}

data::Manifest small_manifest(const fs::path& dir) {
  data::write_wav(dir / "sp.wav", tiny_wave(1));
  data::write_wav(dir / "no.wav", tiny_wave(2));
  fs::create_directories(dir / "examples");
  data::write_wav(dir / "examples" / "sp.wav", tiny_wave(3));

  data::Manifest m;
  data::ManifestRow a;
  a.id = "sp_snr-6";
  a.speech_path = fs::absolute(dir / "sp.wav").string();
  a.noise_path = fs::absolute(dir / "no.wav").string();
  a.snr_db = -6.0;
  a.crop_seed = 0xdeadbeefcafe1234ULL;
  a.enhanced_path = "examples/sp.wav";
  a.split = "train";
  data::ManifestRow b = a;
  b.id = "sp_snr0";
  b.snr_db = 0.0;
  b.crop_seed = 42;
  b.enhanced_path.reset();
  b.split = "test";
  m.push_back(a);
  m.push_back(b);
  return m;
}

}  // namespace

TEST_CASE("manifest survives a save/load round trip") {
  TempDir td("manifest_rt");
  const auto m = small_manifest(td.path);
  data::save_manifest(td.path / "manifest.jsonl", m);
  const auto loaded = data::load_manifest(td.path / "manifest.jsonl");

  REQUIRE(loaded.size() == m.size());
  for (size_t i = 0; i < m.size(); ++i) {
    CHECK(loaded[i].id == m[i].id);
    CHECK(loaded[i].speech_path == m[i].speech_path);
    CHECK(loaded[i].noise_path == m[i].noise_path);
    CHECK(loaded[i].snr_db == m[i].snr_db);
    CHECK(loaded[i].crop_seed == m[i].crop_seed);
    CHECK(loaded[i].enhanced_path == m[i].enhanced_path);
    CHECK(loaded[i].split == m[i].split);
  }

  // Saving the loaded manifest reproduces the original bytes.
  data::save_manifest(td.path / "again.jsonl", loaded);
  CHECK(slurp(td.path / "manifest.jsonl") == slurp(td.path / "again.jsonl"));
}

TEST_CASE("manifest validation rejects malformed rows") {
  TempDir td("manifest_bad");
  auto m = small_manifest(td.path);

  SUBCASE("duplicate id") {
    m[1].id = m[0].id;
    CHECK_THROWS_WITH_AS(data::validate_manifest(m),
                         doctest::Contains("duplicate id"), std::runtime_error);
  }
  SUBCASE("unknown split") {
    m[0].split = "validation";
    CHECK_THROWS_WITH_AS(data::validate_manifest(m),
                         doctest::Contains("unknown split"), std::runtime_error);
  }
  SUBCASE("non-finite snr") {
    m[0].snr_db = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(data::validate_manifest(m),
                         doctest::Contains("non-finite snr"), std::runtime_error);
  }
  SUBCASE("missing referenced file") {
    data::save_manifest(td.path / "manifest.jsonl", m);
    fs::remove(td.path / "no.wav");
    CHECK_THROWS_WITH_AS(data::load_manifest(td.path / "manifest.jsonl"),
                         doctest::Contains("missing files"), std::runtime_error);
  }
}

TEST_CASE("relative manifest paths resolve against the manifest directory") {
  TempDir td("manifest_rel");
  auto m = small_manifest(td.path);
  // Store everything relative; the wavs sit next to the manifest.
  m[0].speech_path = "sp.wav";
  m[0].noise_path = "no.wav";
  m[1].speech_path = "sp.wav";
  m[1].noise_path = "no.wav";
  data::save_manifest(td.path / "manifest.jsonl", m);

  const auto loaded = data::load_manifest(td.path / "manifest.jsonl");
  CHECK(loaded[0].speech_path == "sp.wav");
  CHECK(data::resolve_path(loaded[0].speech_path, td.path) == td.path / "sp.wav");
  const auto abs = fs::absolute(td.path / "no.wav").string();
  CHECK(data::resolve_path(abs, "/elsewhere") == fs::path(abs));

  const auto s = data::load_sample(loaded[0], td.path);
  CHECK(s.speech.samples.size() == 64);
  CHECK(s.enhanced.has_value());
}

TEST_CASE("checkpoint container round-trips every field bit-exactly") {
  TempDir td("ckpt_rt");
  Rng rng(99);

  data::Checkpoint ck;
  ck.variant = imgan::gan::Variant::kMultiGan;
  ck.gen = imgan::gan::GenArch::desk();
  ck.disc = imgan::gan::DiscArch::desk(2);
  ck.epoch = 17;
  ck.best_epoch = 14;
  ck.best_heldout = 0.03125;
  ck.adam_g_step = 1234;
  ck.adam_d_step = 1235;
  ck.lr_g = 2e-4;
  ck.lr_d = 1.5e-4;
  ck.rng_state = 0xfeedface12345678ULL;
  for (int i = 0; i < 5; ++i) {
    data::TensorEntry t;
    t.name = "t" + std::to_string(i);
    t.value.resize(3 + i, 2 + i);
    for (Eigen::Index r = 0; r < t.value.rows(); ++r)
      for (Eigen::Index c = 0; c < t.value.cols(); ++c)
        t.value(r, c) = static_cast<float>(rng.normal());
    ck.tensors.push_back(std::move(t));
  }

  const auto file = td.path / "ck.imgn";
  data::save_checkpoint(file, ck);
  const auto loaded = data::load_checkpoint(file);

  CHECK(loaded.variant == ck.variant);
  CHECK(loaded.gen == ck.gen);
  CHECK(loaded.disc == ck.disc);
  CHECK(loaded.epoch == ck.epoch);
  CHECK(loaded.best_epoch == ck.best_epoch);
  CHECK(loaded.best_heldout == ck.best_heldout);
  CHECK(loaded.adam_g_step == ck.adam_g_step);
  CHECK(loaded.adam_d_step == ck.adam_d_step);
  CHECK(loaded.lr_g == ck.lr_g);
  CHECK(loaded.lr_d == ck.lr_d);
  CHECK(loaded.rng_state == ck.rng_state);
  REQUIRE(loaded.tensors.size() == ck.tensors.size());
  for (size_t i = 0; i < ck.tensors.size(); ++i) {
    CHECK(loaded.tensors[i].name == ck.tensors[i].name);
    CHECK(loaded.tensors[i].value == ck.tensors[i].value);
  }
  CHECK(loaded.find("t3") != nullptr);
  CHECK(loaded.find("nope") == nullptr);

  // Re-saving the loaded state reproduces the file byte for byte.
  data::save_checkpoint(td.path / "ck2.imgn", loaded);
  CHECK(slurp(file) == slurp(td.path / "ck2.imgn"));
}

TEST_CASE("checkpoint loader rejects damaged files") {
  TempDir td("ckpt_bad");
  data::Checkpoint ck;
  ck.gen = imgan::gan::GenArch::desk();
  ck.disc = imgan::gan::DiscArch::desk(1);
  data::TensorEntry t;
  t.name = "w";
  t.value = Eigen::MatrixXf::Constant(4, 4, 0.5f);
  ck.tensors.push_back(t);
  const auto file = td.path / "ck.imgn";
  data::save_checkpoint(file, ck);
  const std::string good = slurp(file);

  SUBCASE("flipped payload byte fails the integrity check") {
    std::string bad = good;
    bad[bad.size() / 2] ^= 0x40;
    spit(file, bad);
    CHECK_THROWS_WITH_AS(data::load_checkpoint(file),
                         doctest::Contains("crc mismatch"), std::runtime_error);
  }
  SUBCASE("wrong magic") {
    std::string bad = good;
    bad[0] = 'X';
    spit(file, bad);
    CHECK_THROWS_WITH_AS(data::load_checkpoint(file),
                         doctest::Contains("bad magic"), std::runtime_error);
  }
  SUBCASE("unsupported version") {
    std::string bad = good;
    bad[4] = 2;
    spit(file, bad);
    CHECK_THROWS_WITH_AS(data::load_checkpoint(file),
                         doctest::Contains("unsupported version"), std::runtime_error);
  }
  SUBCASE("truncation") {
    spit(file, good.substr(0, 10));
    CHECK_THROWS_WITH_AS(data::load_checkpoint(file),
                         doctest::Contains("truncated"), std::runtime_error);
    spit(file, good.substr(0, good.size() - 9));
    CHECK_THROWS_AS(data::load_checkpoint(file), std::runtime_error);
  }
}

TEST_CASE("prepare lays out a deterministic corpus with leak-free splits") {
  TempDir td("prepare");
  imgan::data::ToyParams tp;
  tp.speech_dur_s = 0.5;
  tp.noise_dur_s = 1.0;
  const auto [speech_files, noise_files] =
      data::write_toy_corpus(td.path / "corpus", 5, 3, 11, tp);
  REQUIRE(speech_files.size() == 5);
  REQUIRE(noise_files.size() == 3);

  data::PrepareOptions opt;
  opt.snr_grid = {-12.0, -6.0, 0.0};
  opt.seed = 7;
  opt.with_examples = true;
  opt.out_dir = td.path / "run_a";
  const auto m = data::prepare(td.path / "corpus" / "speech",
                               td.path / "corpus" / "noise", opt);

  REQUIRE(m.size() == 15);
  CHECK(fs::exists(opt.out_dir / "manifest.jsonl"));

  // Every row carries an example and all three splits are populated; rows of
  // one utterance never straddle splits.
  std::map<std::string, std::set<std::string>> split_by_stem;
  std::set<std::string> splits_seen;
  for (const auto& row : m) {
    CHECK(row.enhanced_path.has_value());
    CHECK(fs::exists(data::resolve_path(*row.enhanced_path, opt.out_dir)));
    CHECK(fs::exists(row.speech_path));
    CHECK(fs::exists(row.noise_path));
    CHECK(fs::path(row.speech_path).is_absolute());
    const auto stem = fs::path(row.speech_path).stem().string();
    split_by_stem[stem].insert(row.split);
    splits_seen.insert(row.split);
  }
  CHECK(split_by_stem.size() == 5);
  for (const auto& [stem, splits] : split_by_stem) CHECK(splits.size() == 1);
  CHECK(splits_seen == std::set<std::string>{"heldout", "test", "train"});

  // A second run into a different directory emits identical manifest bytes
  // and identical mixture audio.
  data::PrepareOptions opt_b = opt;
  opt_b.out_dir = td.path / "run_b";
  const auto m2 = data::prepare(td.path / "corpus" / "speech",
                                td.path / "corpus" / "noise", opt_b);
  CHECK(slurp(opt.out_dir / "manifest.jsonl") == slurp(opt_b.out_dir / "manifest.jsonl"));
  const auto mix_name = "mixtures/" + m.front().id + ".wav";
  CHECK(slurp(opt.out_dir / mix_name) == slurp(opt_b.out_dir / mix_name));

  // The mixture wav equals speech + seeded scaled noise after the float32
  // round trip through the file.
  const auto& row = m.front();
  const Waveform sp = data::read_wav(row.speech_path);
  const Waveform no = data::read_wav(row.noise_path);
  const Waveform expect = imgan::dsp::mix_at_snr(sp, no, row.snr_db, row.crop_seed);
  const Waveform got = data::read_wav(opt.out_dir / mix_name);
  REQUIRE(got.samples.size() == expect.samples.size());
  CHECK(got.samples == expect.samples.cast<float>().cast<double>());

  // Reloading the manifest from disk matches the returned one.
  const auto reloaded = data::load_manifest(opt.out_dir / "manifest.jsonl");
  REQUIRE(reloaded.size() == m.size());
  for (size_t i = 0; i < m.size(); ++i) {
    CHECK(reloaded[i].id == m[i].id);
    CHECK(reloaded[i].crop_seed == m[i].crop_seed);
  }
}

TEST_CASE("load_sample applies the seeded crop and exact snr scaling") {
  TempDir td("load_sample");
  imgan::data::ToyParams tp;
  tp.speech_dur_s = 0.5;
  tp.noise_dur_s = 1.0;
  data::write_toy_corpus(td.path / "corpus", 3, 2, 5, tp);

  data::PrepareOptions opt;
  opt.snr_grid = {-5.0};
  opt.seed = 3;
  opt.with_examples = true;
  opt.out_dir = td.path / "run";
  const auto m = data::prepare(td.path / "corpus" / "speech",
                               td.path / "corpus" / "noise", opt);

  const auto s = data::load_sample(m.front(), opt.out_dir);
  CHECK(s.id == m.front().id);
  CHECK(s.snr_db == -5.0);
  CHECK(s.speech.samples.size() == s.noise.samples.size());
  REQUIRE(s.enhanced.has_value());
  CHECK(s.enhanced->samples.size() == s.speech.samples.size());

  // Global SNR of the pre-scaled pair is exact by construction.
  const double snr = 20.0 * std::log10(imgan::rms(s.speech) / imgan::rms(s.noise));
  CHECK(snr == doctest::Approx(-5.0).epsilon(1e-9));

  // Twin load is bit-identical (the crop is seeded, not time-varying).
  const auto s2 = data::load_sample(m.front(), opt.out_dir);
  CHECK(s.noise.samples == s2.noise.samples);
}

TEST_CASE("load_sample rejects a sample-rate mismatch") {
  TempDir td("load_rate");
  data::write_wav(td.path / "sp.wav", tiny_wave(1, 16000));
  data::write_wav(td.path / "no.wav", tiny_wave(2, 8000));
  data::ManifestRow row;
  row.id = "x";
  row.speech_path = "sp.wav";
  row.noise_path = "no.wav";
  row.snr_db = 0.0;
  row.crop_seed = 1;
  row.split = "train";
  CHECK_THROWS_WITH_AS(data::load_sample(row, td.path),
                       doctest::Contains("sample rate mismatch"), std::runtime_error);
}

TEST_CASE("prepare rejects empty inputs and bad fractions") {
  TempDir td("prepare_bad");
  fs::create_directories(td.path / "empty");
  data::PrepareOptions opt;
  opt.out_dir = td.path / "run";

  CHECK_THROWS_WITH_AS(data::prepare(td.path / "missing", td.path / "empty", opt),
                       doctest::Contains("no such directory"), std::runtime_error);
  CHECK_THROWS_WITH_AS(data::prepare(td.path / "empty", td.path / "empty", opt),
                       doctest::Contains("no wav files"), std::runtime_error);

  imgan::data::ToyParams tp;
  tp.speech_dur_s = 0.3;
  tp.noise_dur_s = 0.6;
  data::write_toy_corpus(td.path / "corpus", 2, 1, 1, tp);
  data::PrepareOptions bad = opt;
  bad.train_frac = 0.9;
  bad.heldout_frac = 0.2;
  CHECK_THROWS_AS(data::prepare(td.path / "corpus" / "speech",
                                td.path / "corpus" / "noise", bad),
                  std::invalid_argument);

  data::PrepareOptions none = opt;
  none.snr_grid.clear();
  CHECK_THROWS_AS(data::prepare(td.path / "corpus" / "speech",
                                td.path / "corpus" / "noise", none),
                  std::invalid_argument);
}
