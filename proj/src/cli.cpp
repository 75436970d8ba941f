#include "imgan/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <map>
#include <optional>
#include <sstream>

#include "imgan/data/checkpoint.hpp"
#include "imgan/data/dataset.hpp"
#include "imgan/data/toyset.hpp"
#include "imgan/data/wav.hpp"
#include "imgan/dsp.hpp"
#include "imgan/gan/pipeline.hpp"
#include "imgan/gan/trainer.hpp"
#include "imgan/metrics.hpp"
#include "imgan/refmod.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace imgan::cli {
namespace {

// ---------------------------------------------------------------------------
// Config file handling.

void reject_unknown(const json& j, const std::vector<std::string>& allowed,
                    const std::string& ctx) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw UsageError("config: unknown key '" + it.key() + "' in " + ctx);
  }
}

double get_number(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw UsageError("config: " + key + " must be a number");
  return j[key].get<double>();
}

int get_int(const json& j, const std::string& key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer())
    throw UsageError("config: " + key + " must be an integer");
  return j[key].get<int>();
}

std::string get_string(const json& j, const std::string& key,
                       const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) throw UsageError("config: " + key + " must be a string");
  return j[key].get<std::string>();
}

std::vector<int> get_int_array(const json& j, const std::string& key,
                               std::vector<int> fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_array()) throw UsageError("config: " + key + " must be an array");
  std::vector<int> out;
  for (const auto& v : j[key]) {
    if (!v.is_number_integer())
      throw UsageError("config: " + key + " must hold integers");
    out.push_back(v.get<int>());
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("config: top level must be an object");
  reject_unknown(j,
                 {"variant", "metrics", "preset", "gen", "disc", "stft", "max_epochs",
                  "patience", "lr_g", "lr_d", "r_max", "target_t", "seed"},
                 "the top level");

  RunConfig cfg;
  auto& t = cfg.train;

  try {
    t.variant = gan::parse_variant(get_string(j, "variant", "SiibGAN-zs"));
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  const metrics::MetricSelection sel = gan::variant_selection(t.variant);

  if (j.contains("metrics")) {
    metrics::MetricSelection asked;
    try {
      asked = metrics::MetricSelection::parse(get_string(j, "metrics", ""));
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
    if (!(asked == sel))
      throw UsageError("config: metrics '" + asked.to_string() +
                       "' do not match variant " + gan::to_string(t.variant) +
                       " (expects '" + sel.to_string() + "')");
  }

  const std::string preset = get_string(j, "preset", "desk");
  if (preset == "desk") {
    t.gen = gan::GenArch::desk();
    t.disc = gan::DiscArch::desk(sel.k());
  } else if (preset == "full") {
    t.gen = gan::GenArch::full();
    t.disc = gan::DiscArch::full(sel.k());
  } else {
    throw UsageError("config: unknown preset '" + preset + "' (desk or full)");
  }

  if (j.contains("gen")) {
    const json& g = j["gen"];
    if (!g.is_object()) throw UsageError("config: gen must be an object");
    reject_unknown(g, {"in_bins", "lstm1", "lstm2", "dense", "out_bins"}, "gen");
    if (get_int(g, "in_bins", t.gen.in_bins) != t.gen.in_bins ||
        get_int(g, "out_bins", t.gen.out_bins) != t.gen.out_bins)
      throw UsageError("config: spectrogram bins are fixed at 513");
    t.gen.lstm1 = get_int(g, "lstm1", t.gen.lstm1);
    t.gen.lstm2 = get_int(g, "lstm2", t.gen.lstm2);
    t.gen.dense = get_int(g, "dense", t.gen.dense);
    if (t.gen.lstm1 < 1 || t.gen.lstm2 < 1 || t.gen.dense < 1)
      throw UsageError("config: generator sizes must be positive");
  }

  if (j.contains("disc")) {
    const json& d = j["disc"];
    if (!d.is_object()) throw UsageError("config: disc must be an object");
    reject_unknown(d, {"channels", "kernels", "freq_stride", "dense1", "dense2", "k"},
                   "disc");
    if (get_int(d, "k", t.disc.k) != t.disc.k)
      throw UsageError("config: disc k is derived from the variant");
    t.disc.channels = get_int_array(d, "channels", t.disc.channels);
    t.disc.kernels = get_int_array(d, "kernels", t.disc.kernels);
    t.disc.freq_stride = get_int(d, "freq_stride", t.disc.freq_stride);
    t.disc.dense1 = get_int(d, "dense1", t.disc.dense1);
    t.disc.dense2 = get_int(d, "dense2", t.disc.dense2);
    if (t.disc.dense1 < 1 || t.disc.dense2 < 1)
      throw UsageError("config: discriminator dense sizes must be positive");
    try {
      t.disc.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
  }

  if (j.contains("stft")) {
    const json& s = j["stft"];
    if (!s.is_object()) throw UsageError("config: stft must be an object");
    reject_unknown(s, {"window_len", "hop"}, "stft");
    if (get_int(s, "window_len", dsp::kWindowLen) != dsp::kWindowLen ||
        get_int(s, "hop", dsp::kHop) != dsp::kHop)
      throw UsageError("config: stft is fixed at window 1024, hop 512");
  }

  t.max_epochs = get_int(j, "max_epochs", t.max_epochs);
  t.patience = get_int(j, "patience", t.patience);
  if (t.max_epochs < 1 || t.patience < 1)
    throw UsageError("config: max_epochs and patience must be positive");
  t.lr_g = get_number(j, "lr_g", t.lr_g);
  t.lr_d = get_number(j, "lr_d", t.lr_d);
  if (!(t.lr_g >= 0.0) || !(t.lr_d >= 0.0))
    throw UsageError("config: learning rates must be non-negative");
  t.r_max = get_number(j, "r_max", t.r_max);
  if (!(t.r_max > 0.0)) throw UsageError("config: r_max must be positive");
  t.target_t = get_number(j, "target_t", t.target_t);
  if (!std::isfinite(t.target_t)) throw UsageError("config: target_t must be finite");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned())
      throw UsageError("config: seed must be a non-negative integer");
    t.seed = j["seed"].get<std::uint64_t>();
  }
  return cfg;
}

std::string effective_config_json(const RunConfig& cfg) {
  const auto& t = cfg.train;
  json j;
  j["variant"] = gan::to_string(t.variant);
  j["metrics"] = gan::variant_selection(t.variant).to_string();
  j["gen"] = {{"in_bins", t.gen.in_bins}, {"lstm1", t.gen.lstm1},
              {"lstm2", t.gen.lstm2},     {"dense", t.gen.dense},
              {"out_bins", t.gen.out_bins}};
  j["disc"] = {{"channels", t.disc.channels}, {"kernels", t.disc.kernels},
               {"freq_stride", t.disc.freq_stride}, {"dense1", t.disc.dense1},
               {"dense2", t.disc.dense2}, {"k", t.disc.k}};
  j["stft"] = {{"window_len", dsp::kWindowLen}, {"hop", dsp::kHop}};
  j["max_epochs"] = t.max_epochs;
  j["patience"] = t.patience;
  j["lr_g"] = t.lr_g;
  j["lr_d"] = t.lr_d;
  j["r_max"] = t.r_max;
  j["target_t"] = t.target_t;
  j["seed"] = t.seed;
  return j.dump(2) + "\n";
}

namespace {

// ---------------------------------------------------------------------------
// Shared helpers.

std::string slurp_file(const fs::path& p, const char* what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError(std::string(what) + ": cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit_file(const fs::path& p, const std::string& text, const char* what) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(std::string(what) + ": cannot write " + p.string());
  out << text;
}

std::string fmt_f6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_g(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

gan::GeneratorNet<float> load_generator(const data::Checkpoint& ck) {
  gan::GeneratorNet<float> g(ck.gen);
  g.visit_params("g", [&](const std::string& name, neural::Param<float>& p) {
    const data::TensorEntry* t = ck.find(name);
    if (!t) throw DataError("checkpoint: missing generator tensor " + name);
    if (t->value.rows() != p.value.rows() || t->value.cols() != p.value.cols())
      throw DataError("checkpoint: tensor shape mismatch for " + name);
    p.value = t->value;
  });
  return g;
}

data::Checkpoint load_checkpoint_or_die(const fs::path& p) {
  try {
    return data::load_checkpoint(p);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
}

std::vector<data::TrainSample> load_split(const data::Manifest& m,
                                          const fs::path& base_dir,
                                          const std::string& split) {
  std::vector<data::TrainSample> out;
  for (const auto& row : m) {
    if (row.split != split) continue;
    try {
      out.push_back(data::load_sample(row, base_dir));
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// toyset

struct ToysetOpts {
  std::string out;
  int n_speech = 26;
  int n_noise = 6;
  std::uint64_t seed = 1;
  int rate = 16000;
  double speech_dur = 2.2;
  double noise_dur = 4.0;
};

int cmd_toyset(const ToysetOpts& o, std::ostream& out) {
  if (o.n_speech < 1 || o.n_noise < 1)
    throw UsageError("toyset: file counts must be positive");
  data::ToyParams params;
  params.sample_rate = o.rate;
  params.speech_dur_s = o.speech_dur;
  params.noise_dur_s = o.noise_dur;
  try {
    auto [speech, noise] =
        data::write_toy_corpus(o.out, o.n_speech, o.n_noise, o.seed, params);
    out << "wrote " << speech.size() << " speech and " << noise.size()
        << " noise files under " << o.out << "\n";
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareOpts {
  std::string speech_dir;
  std::string noise_dir;
  std::string out_dir;
  std::string snr = "-12,-6,0";
  std::uint64_t seed = 1;
  bool with_examples = false;
  bool no_mixtures = false;
  double train_frac = 0.7;
  double heldout_frac = 0.15;
};

std::vector<double> parse_snr_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      size_t used = 0;
      double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("prepare: bad snr value '" + tok + "'");
    }
  }
  if (out.empty()) throw UsageError("prepare: empty snr list");
  return out;
}

int cmd_prepare(const PrepareOpts& o, std::ostream& out) {
  data::PrepareOptions opt;
  opt.snr_grid = parse_snr_list(o.snr);
  opt.seed = o.seed;
  opt.with_examples = o.with_examples;
  opt.write_mixtures = !o.no_mixtures;
  opt.train_frac = o.train_frac;
  opt.heldout_frac = o.heldout_frac;
  opt.out_dir = o.out_dir;
  data::Manifest m;
  try {
    m = data::prepare(o.speech_dir, o.noise_dir, opt);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  out << "prepared " << m.size() << " rows -> "
      << (fs::path(o.out_dir) / "manifest.jsonl").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOpts {
  std::string config;
  std::string manifest;
  std::string out_dir;
  bool dry_run = false;
  bool resume = false;
};

fs::path latest_checkpoint(const fs::path& ckpt_dir) {
  fs::path best;
  int best_n = -1;
  if (fs::is_directory(ckpt_dir)) {
    for (const auto& entry : fs::directory_iterator(ckpt_dir)) {
      const std::string fn = entry.path().filename().string();
      if (fn.rfind("epoch_", 0) != 0 || entry.path().extension() != ".imgn") continue;
      int n = std::atoi(fn.substr(6, fn.size() - 11).c_str());
      if (n > best_n) {
        best_n = n;
        best = entry.path();
      }
    }
  }
  if (best_n < 0)
    throw DataError("resume: no checkpoint found under " + ckpt_dir.string());
  return best;
}

int cmd_train(const TrainOpts& o, std::ostream& out, std::ostream& err) {
  const RunConfig cfg = parse_run_config(slurp_file(o.config, "config"));

  if (o.dry_run) {
    gan::GeneratorNet<float> g(cfg.train.gen);
    gan::DiscriminatorNet<float> d(cfg.train.disc);
    out << "variant " << gan::to_string(cfg.train.variant) << "\n"
        << "metrics " << gan::variant_selection(cfg.train.variant).to_string() << "\n"
        << "generator parameters " << g.param_count() << "\n"
        << "discriminator parameters " << d.param_count() << "\n";
    return 0;
  }
  if (o.manifest.empty() || o.out_dir.empty())
    throw UsageError("train: --manifest and --out are required (or use --dry-run)");

  data::Manifest manifest;
  try {
    manifest = data::load_manifest(o.manifest);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const fs::path base_dir = fs::path(o.manifest).parent_path();
  auto train_set = load_split(manifest, base_dir, "train");
  auto heldout_set = load_split(manifest, base_dir, "heldout");
  if (train_set.empty()) throw DataError("train: manifest has no train rows");

  const fs::path run_dir = o.out_dir;
  std::error_code ec;
  fs::create_directories(run_dir, ec);
  if (ec) throw DataError("train: cannot create " + run_dir.string());
  spit_file(run_dir / "config.json", effective_config_json(cfg), "train");
  spit_file(run_dir / "manifest.jsonl", slurp_file(o.manifest, "train"), "train");

  std::optional<gan::Trainer> trainer;
  try {
    if (o.resume) {
      const fs::path ck_path = latest_checkpoint(run_dir / "ckpt");
      const data::Checkpoint ck = load_checkpoint_or_die(ck_path);
      trainer.emplace(cfg.train, ck);
      out << "resuming from " << ck_path.string() << " (epoch " << ck.epoch << ")\n";
    } else {
      trainer.emplace(cfg.train);
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }

  gan::TrainHooks hooks;
  hooks.on_epoch = [&](const gan::EpochStats& st) {
    out << "epoch " << st.epoch << "  d_loss " << fmt_g(st.mean_d_loss) << "  g_loss "
        << fmt_g(st.mean_g_loss) << "  heldout_mse " << fmt_g(st.heldout_mse)
        << "  heldout_q " << fmt_g(st.heldout_q);
    if (st.skipped > 0) out << "  skipped " << st.skipped;
    out << "\n";
  };

  gan::TrainResult res;
  try {
    res = trainer->run(train_set, heldout_set, run_dir, hooks);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  if (res.diverged) {
    if (!res.last_checkpoint.empty())
      err << "last good checkpoint: " << res.last_checkpoint.string() << "\n";
    throw TrainingError("training diverged; see logs.jsonl in " + run_dir.string());
  }
  out << "trained " << res.epochs_run << " epochs";
  if (res.best_epoch > 0)
    out << "; best epoch " << res.best_epoch << " (heldout_q "
        << fmt_g(res.best_heldout_q) << ")";
  out << "\n";
  out << "checkpoint " << res.last_checkpoint.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// enhance

struct EnhanceOpts {
  std::string checkpoint;
  std::string speech;
  std::string noise;
  std::string out_path;
  std::string manifest;
  std::string out_dir;
  std::string split = "test";
};

// Writes the enhanced wav and reports the duration and RMS constraints that
// every output must satisfy.
void enhance_one(gan::GeneratorNet<float>& g, const Waveform& speech,
                 const Waveform& noise, const fs::path& out_path, std::ostream& out) {
  Waveform enhanced;
  try {
    enhanced = gan::enhance(g, speech, noise);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  if (enhanced.size() != speech.size())
    throw DataError("enhance: output duration drifted for " + out_path.string());
  const double delta_db = 20.0 * std::log10(rms(enhanced) / rms(speech));
  if (!(std::abs(delta_db) <= 0.1))
    throw DataError("enhance: output rms drifted " + fmt_f6(delta_db) + " dB for " +
                    out_path.string());
  try {
    data::write_wav(out_path, enhanced);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  out << out_path.string() << ": duration ok, rms delta " << fmt_f6(delta_db)
      << " dB (<= 0.1)\n";
}

int cmd_enhance(const EnhanceOpts& o, std::ostream& out) {
  const bool single = !o.speech.empty() || !o.noise.empty() || !o.out_path.empty();
  const bool batch = !o.manifest.empty() || !o.out_dir.empty();
  if (single == batch)
    throw UsageError(
        "enhance: use either --speech/--noise/--out or --manifest/--out-dir");

  const data::Checkpoint ck = load_checkpoint_or_die(o.checkpoint);
  gan::GeneratorNet<float> g = load_generator(ck);

  if (single) {
    if (o.speech.empty() || o.noise.empty() || o.out_path.empty())
      throw UsageError("enhance: --speech, --noise, and --out are all required");
    Waveform speech, noise;
    try {
      speech = data::read_wav(o.speech);
      noise = data::read_wav(o.noise);
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    if (noise.sample_rate != speech.sample_rate)
      throw DataError("enhance: sample rate mismatch between inputs");
    if (noise.size() < speech.size())
      throw DataError("enhance: noise is shorter than the speech");
    noise.samples = noise.samples.head(speech.size()).eval();
    enhance_one(g, speech, noise, o.out_path, out);
    return 0;
  }

  data::Manifest manifest;
  try {
    manifest = data::load_manifest(o.manifest);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const fs::path base_dir = fs::path(o.manifest).parent_path();
  std::error_code ec;
  fs::create_directories(o.out_dir, ec);
  if (ec) throw DataError("enhance: cannot create " + o.out_dir);
  int done = 0;
  for (const auto& row : manifest) {
    if (o.split != "all" && row.split != o.split) continue;
    data::TrainSample s;
    try {
      s = data::load_sample(row, base_dir);
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    enhance_one(g, s.speech, s.noise, fs::path(o.out_dir) / (row.id + ".wav"), out);
    ++done;
  }
  if (done == 0) throw DataError("enhance: no rows in split '" + o.split + "'");
  out << "enhanced " << done << " files -> " << o.out_dir << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOpts {
  std::string manifest;
  std::string checkpoint;
  std::string out_csv;
  std::string split = "test";
  double r_max = 750.0;
};

// Scores one processed signal against the clean speech in its noise; nan
// cells mark metric failures so downstream averaging can skip them.
std::string score_row(const std::string& id, double snr_db,
                      const std::string& condition, const Waveform& processed,
                      const Waveform& speech, const Waveform& noise, double r_max,
                      std::ostream& err) {
  metrics::MetricSelection sel{true, true};
  double e = std::numeric_limits<double>::quiet_NaN();
  double raw = e, norm = e;
  try {
    metrics::MetricScores s = metrics::q_scores(processed, speech, noise, sel, r_max);
    e = s.estoi.value();
    raw = s.siib_raw.value();
    norm = s.siib_norm.value();
  } catch (const std::exception& ex) {
    err << "warning: " << id << "/" << condition << ": " << ex.what() << "\n";
  }
  std::ostringstream line;
  line << id << "," << fmt_g(snr_db) << "," << condition << "," << fmt_g(e) << ","
       << fmt_g(raw) << "," << fmt_g(norm) << "\n";
  return line.str();
}

int cmd_evaluate(const EvaluateOpts& o, std::ostream& out, std::ostream& err) {
  if (!(o.r_max > 0.0)) throw UsageError("evaluate: r_max must be positive");
  data::Manifest manifest;
  try {
    manifest = data::load_manifest(o.manifest);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  const fs::path base_dir = fs::path(o.manifest).parent_path();
  const data::Checkpoint ck = load_checkpoint_or_die(o.checkpoint);
  gan::GeneratorNet<float> g = load_generator(ck);

  std::string csv = "id,snr_db,condition,estoi,siib_raw,siib_norm\n";
  int rows = 0;
  for (const auto& row : manifest) {
    if (o.split != "all" && row.split != o.split) continue;
    data::TrainSample s;
    try {
      s = data::load_sample(row, base_dir);
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    csv += score_row(row.id, row.snr_db, "plain", s.speech, s.speech, s.noise,
                     o.r_max, err);
    csv += score_row(row.id, row.snr_db, "refmod", refmod::make_example(s.speech),
                     s.speech, s.noise, o.r_max, err);
    Waveform enhanced;
    try {
      enhanced = gan::enhance(g, s.speech, s.noise);
    } catch (const std::exception& e) {
      throw DataError(e.what());
    }
    csv += score_row(row.id, row.snr_db, "model", enhanced, s.speech, s.noise,
                     o.r_max, err);
    rows += 3;
  }
  if (rows == 0) throw DataError("evaluate: no rows in split '" + o.split + "'");
  spit_file(o.out_csv, csv, "evaluate");
  out << "wrote " << rows << " rows -> " << o.out_csv << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportOpts {
  std::string results;
  std::string out_csv;
  std::string out_text;
};

struct ConditionMean {
  int n = 0;
  double estoi = 0.0;
  double siib_raw = 0.0;
  double siib_norm = 0.0;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

int cmd_report(const ReportOpts& o, std::ostream& out, std::ostream& err) {
  std::istringstream in(slurp_file(o.results, "report"));
  std::string line;
  if (!std::getline(in, line) ||
      line != "id,snr_db,condition,estoi,siib_raw,siib_norm")
    throw DataError("report: unexpected results header in " + o.results);

  std::map<std::string, ConditionMean> acc;
  std::vector<std::string> order;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 6)
      throw DataError("report: line " + std::to_string(line_no) + ": expected 6 cells");
    double e, raw, norm;
    try {
      e = std::stod(cells[3]);
      raw = std::stod(cells[4]);
      norm = std::stod(cells[5]);
    } catch (const std::exception&) {
      throw DataError("report: line " + std::to_string(line_no) + ": bad number");
    }
    if (!std::isfinite(e) || !std::isfinite(raw) || !std::isfinite(norm)) {
      err << "warning: skipping " << cells[0] << "/" << cells[2]
          << " (non-finite scores)\n";
      continue;
    }
    const std::string& cond = cells[2];
    if (acc.find(cond) == acc.end()) order.push_back(cond);
    auto& m = acc[cond];
    ++m.n;
    m.estoi += e;
    m.siib_raw += raw;
    m.siib_norm += norm;
  }
  if (acc.empty()) throw DataError("report: no usable rows in " + o.results);

  // Fixed condition order first, anything else in first-seen order after.
  std::vector<std::string> conditions;
  for (const std::string fixed : {"plain", "refmod", "model"})
    if (acc.count(fixed)) conditions.push_back(fixed);
  for (const auto& c : order)
    if (std::find(conditions.begin(), conditions.end(), c) == conditions.end())
      conditions.push_back(c);

  std::string csv = "condition,n,estoi,siib_raw,siib_norm\n";
  size_t name_w = std::string("condition").size();
  for (const auto& c : conditions) name_w = std::max(name_w, c.size());
  std::ostringstream text;
  text << std::left << std::setw(static_cast<int>(name_w) + 2) << "condition"
       << std::right << std::setw(4) << "n" << std::setw(12) << "estoi"
       << std::setw(14) << "siib_raw" << std::setw(12) << "siib_norm" << "\n";
  for (const auto& c : conditions) {
    const auto& m = acc[c];
    const double e = m.estoi / m.n;
    const double raw = m.siib_raw / m.n;
    const double norm = m.siib_norm / m.n;
    csv += c + "," + std::to_string(m.n) + "," + fmt_f6(e) + "," + fmt_f6(raw) + "," +
           fmt_f6(norm) + "\n";
    text << std::left << std::setw(static_cast<int>(name_w) + 2) << c << std::right
         << std::setw(4) << m.n << std::setw(12) << fmt_f6(e) << std::setw(14)
         << fmt_f6(raw) << std::setw(12) << fmt_f6(norm) << "\n";
  }
  spit_file(o.out_csv, csv, "report");
  if (!o.out_text.empty()) spit_file(o.out_text, text.str(), "report");
  out << text.str();
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// Argument wiring.

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Near-end listening enhancement: data prep, training, scoring"};
  app.name("imgan");
  app.require_subcommand(1);

  ToysetOpts toy;
  CLI::App* c_toy = app.add_subcommand("toyset", "Write a synthetic speech/noise corpus");
  c_toy->add_option("--out", toy.out, "Output directory")->required();
  c_toy->add_option("--speech", toy.n_speech, "Number of speech files (default 26)");
  c_toy->add_option("--noise", toy.n_noise, "Number of noise files (default 6)");
  c_toy->add_option("--seed", toy.seed, "RNG seed (default 1)");
  c_toy->add_option("--rate", toy.rate, "Sample rate in Hz (default 16000)");
  c_toy->add_option("--speech-dur", toy.speech_dur,
                    "Speech duration in seconds (default 2.2)");
  c_toy->add_option("--noise-dur", toy.noise_dur,
                    "Noise duration in seconds (default 4.0)");

  PrepareOpts prep;
  CLI::App* c_prep =
      app.add_subcommand("prepare", "Pair speech with noise and write a manifest");
  c_prep->add_option("--speech", prep.speech_dir, "Directory of speech wavs")->required();
  c_prep->add_option("--noise", prep.noise_dir, "Directory of noise wavs")->required();
  c_prep->add_option("--out", prep.out_dir, "Output directory")->required();
  c_prep->add_option("--snr", prep.snr, "Comma-separated SNR grid in dB (default -12,-6,0)");
  c_prep->add_option("--seed", prep.seed, "RNG seed for splits and crops (default 1)");
  c_prep->add_flag("--with-examples", prep.with_examples,
                   "Also write rule-based enhanced examples");
  c_prep->add_flag("--no-mixtures", prep.no_mixtures, "Skip writing mixture wavs");
  c_prep->add_option("--train-frac", prep.train_frac,
                     "Fraction of utterances in the train split (default 0.7)");
  c_prep->add_option("--heldout-frac", prep.heldout_frac,
                     "Fraction of utterances in the heldout split (default 0.15)");

  TrainOpts tr;
  CLI::App* c_train = app.add_subcommand("train", "Train a model from a manifest");
  c_train->add_option("--config", tr.config, "JSON run config")->required();
  c_train->add_option("--manifest", tr.manifest, "Prepared manifest.jsonl");
  c_train->add_option("--out", tr.out_dir, "Run directory for logs and checkpoints");
  c_train->add_flag("--dry-run", tr.dry_run,
                    "Print the parameter counts for the config and exit");
  c_train->add_flag("--resume", tr.resume,
                    "Continue from the latest checkpoint in the run directory");

  EnhanceOpts enh;
  CLI::App* c_enh = app.add_subcommand("enhance", "Enhance speech with a trained model");
  c_enh->add_option("--checkpoint", enh.checkpoint, "Trained checkpoint (.imgn)")->required();
  c_enh->add_option("--speech", enh.speech, "Clean speech wav (single-file mode)");
  c_enh->add_option("--noise", enh.noise, "Noise wav (single-file mode)");
  c_enh->add_option("--out", enh.out_path, "Output wav (single-file mode)");
  c_enh->add_option("--manifest", enh.manifest, "Manifest for batch mode");
  c_enh->add_option("--out-dir", enh.out_dir, "Output directory for batch mode");
  c_enh->add_option("--split", enh.split,
                    "Manifest split to enhance: train|heldout|test|all (default test)");

  EvaluateOpts ev;
  CLI::App* c_ev = app.add_subcommand(
      "evaluate", "Score plain, rule-based, and model conditions per utterance");
  c_ev->add_option("--manifest", ev.manifest, "Prepared manifest.jsonl")->required();
  c_ev->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint (.imgn)")->required();
  c_ev->add_option("--out", ev.out_csv, "Output CSV path")->required();
  c_ev->add_option("--split", ev.split,
                   "Manifest split to score: train|heldout|test|all (default test)");
  c_ev->add_option("--r-max", ev.r_max,
                   "SIIB normalization ceiling in bits/s (default 750)");

  ReportOpts rep;
  CLI::App* c_rep =
      app.add_subcommand("report", "Average evaluate results per condition");
  c_rep->add_option("--results", rep.results, "CSV written by evaluate")->required();
  c_rep->add_option("--out", rep.out_csv, "Output CSV of per-condition means")->required();
  c_rep->add_option("--out-text", rep.out_text, "Also write the text table here");

  int rc = 0;
  c_toy->callback([&] { rc = cmd_toyset(toy, out); });
  c_prep->callback([&] { rc = cmd_prepare(prep, out); });
  c_train->callback([&] { rc = cmd_train(tr, out, err); });
  c_enh->callback([&] { rc = cmd_enhance(enh, out); });
  c_ev->callback([&] { rc = cmd_evaluate(ev, out, err); });
  c_rep->callback([&] { rc = cmd_report(rep, out, err); });

  try {
    std::reverse(args.begin(), args.end());  // CLI::App::parse consumes back to front
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;  // help for the deepest subcommand named
    while (!target->get_subcommands().empty()) target = target->get_subcommands().back();
    out << target->help();
    return 0;
  } catch (const CLI::Success&) {
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingError& e) {
    err << "training error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return 2;
  }
  return rc;
}

}  // namespace imgan::cli
