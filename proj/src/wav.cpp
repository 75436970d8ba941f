#include "imgan/data/wav.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <vector>

namespace imgan::data {

static_assert(std::endian::native == std::endian::little,
              "WAV I/O assumes a little-endian host");

namespace {

struct FmtChunk {
  std::uint16_t format = 0;  // 1 = PCM, 3 = IEEE float
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& what) {
  throw std::runtime_error("wav: " + path.string() + ": " + what);
}

template <typename T>
T read_le(std::istream& in, const std::filesystem::path& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) fail(path, "truncated file");
  return v;
}

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open");

  char tag[4];
  if (!in.read(tag, 4) || std::memcmp(tag, "RIFF", 4) != 0) fail(path, "not a RIFF file");
  read_le<std::uint32_t>(in, path);  // RIFF size, unchecked
  if (!in.read(tag, 4) || std::memcmp(tag, "WAVE", 4) != 0) fail(path, "not a WAVE file");

  FmtChunk fmt;
  std::vector<char> data;
  bool have_fmt = false, have_data = false;
  while (in.read(tag, 4)) {
    const auto size = read_le<std::uint32_t>(in, path);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (size < 16) fail(path, "malformed fmt chunk");
      fmt.format = read_le<std::uint16_t>(in, path);
      fmt.channels = read_le<std::uint16_t>(in, path);
      fmt.sample_rate = read_le<std::uint32_t>(in, path);
      read_le<std::uint32_t>(in, path);  // byte rate
      read_le<std::uint16_t>(in, path);  // block align
      fmt.bits = read_le<std::uint16_t>(in, path);
      in.ignore(size - 16);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(size);
      if (!in.read(data.data(), size)) fail(path, "truncated data chunk");
      have_data = true;
    } else {
      in.ignore(size + (size & 1));  // chunks are word-aligned
    }
  }
  if (!have_fmt) fail(path, "missing fmt chunk");
  if (!have_data) fail(path, "missing data chunk");
  if (fmt.channels < 1) fail(path, "zero channels");
  if (fmt.sample_rate == 0) fail(path, "zero sample rate");

  const bool pcm16 = fmt.format == 1 && fmt.bits == 16;
  const bool f32 = fmt.format == 3 && fmt.bits == 32;
  if (!pcm16 && !f32) fail(path, "unsupported codec (want PCM16 or float32)");

  const std::size_t bytes_per = fmt.bits / 8;
  const std::size_t n_frames = data.size() / (bytes_per * fmt.channels);
  if (n_frames == 0) fail(path, "empty data chunk");

  if (fmt.channels > 1)
    std::cerr << "wav: " << path.string() << ": averaging " << fmt.channels
              << " channels to mono\n";

  Waveform w{Eigen::VectorXd(static_cast<Eigen::Index>(n_frames)),
             static_cast<int>(fmt.sample_rate)};
  const char* p = data.data();
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < fmt.channels; ++c) {
      if (pcm16) {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        acc += v / 32768.0;
      } else {
        float v;
        std::memcpy(&v, p, 4);
        acc += v;
      }
      p += bytes_per;
    }
    w.samples[static_cast<Eigen::Index>(i)] = acc / fmt.channels;
  }
  return w;
}

void write_wav(const std::filesystem::path& path, const Waveform& w, WavFormat format) {
  if (w.empty()) throw std::invalid_argument("write_wav: empty waveform");
  if (w.sample_rate <= 0) throw std::invalid_argument("write_wav: invalid sample rate");

  const bool f32 = format == WavFormat::Float32;
  const std::uint32_t bytes_per = f32 ? 4 : 2;
  const auto n = static_cast<std::uint32_t>(w.size());
  const std::uint32_t data_size = n * bytes_per;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("wav: " + path.string() + ": cannot open for writing");

  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + data_size);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, f32 ? 3 : 1);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.sample_rate) * bytes_per);
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(bytes_per));
  write_le<std::uint16_t>(out, static_cast<std::uint16_t>(bytes_per * 8));
  out.write("data", 4);
  write_le<std::uint32_t>(out, data_size);

  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (f32) {
      write_le<float>(out, static_cast<float>(w.samples[i]));
    } else {
      double v = std::clamp(w.samples[i], -1.0, 32767.0 / 32768.0);
      write_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(v * 32768.0)));
    }
  }
  if (!out) throw std::runtime_error("wav: " + path.string() + ": write failed");
}

}  // namespace imgan::data
