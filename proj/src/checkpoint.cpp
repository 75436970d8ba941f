#include "imgan/data/checkpoint.hpp"

#include <json.hpp>
#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

namespace imgan::data {

namespace {

constexpr char kMagic[4] = {'I', 'M', 'G', 'N'};
constexpr std::uint32_t kVersion = 1;

void append_raw(std::string& buf, const void* p, size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

std::uint32_t crc_of(const std::string& buf) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(buf.data()),
              static_cast<uInt>(buf.size())));
}

std::string to_hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::uint64_t from_hex(const std::string& s) {
  return std::stoull(s, nullptr, 16);
}

nlohmann::json arch_json(const gan::GenArch& a) {
  return {{"in_bins", a.in_bins}, {"lstm1", a.lstm1}, {"lstm2", a.lstm2},
          {"dense", a.dense},     {"out_bins", a.out_bins}};
}

gan::GenArch gen_from_json(const nlohmann::json& j) {
  gan::GenArch a;
  a.in_bins = j.at("in_bins").get<int>();
  a.lstm1 = j.at("lstm1").get<int>();
  a.lstm2 = j.at("lstm2").get<int>();
  a.dense = j.at("dense").get<int>();
  a.out_bins = j.at("out_bins").get<int>();
  return a;
}

nlohmann::json arch_json(const gan::DiscArch& a) {
  return {{"channels", a.channels}, {"kernels", a.kernels},
          {"freq_stride", a.freq_stride}, {"dense1", a.dense1},
          {"dense2", a.dense2},     {"k", a.k}};
}

gan::DiscArch disc_from_json(const nlohmann::json& j) {
  gan::DiscArch a;
  a.channels = j.at("channels").get<std::vector<int>>();
  a.kernels = j.at("kernels").get<std::vector<int>>();
  a.freq_stride = j.at("freq_stride").get<int>();
  a.dense1 = j.at("dense1").get<int>();
  a.dense2 = j.at("dense2").get<int>();
  a.k = j.at("k").get<int>();
  return a;
}

}  // namespace

const TensorEntry* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  nlohmann::json meta;
  meta["variant"] = gan::to_string(ck.variant);
  meta["gen"] = arch_json(ck.gen);
  meta["disc"] = arch_json(ck.disc);
  meta["epoch"] = ck.epoch;
  meta["best_epoch"] = ck.best_epoch;
  if (std::isfinite(ck.best_heldout)) meta["best_heldout"] = ck.best_heldout;
  meta["adam_g_step"] = ck.adam_g_step;
  meta["adam_d_step"] = ck.adam_d_step;
  meta["lr_g"] = ck.lr_g;
  meta["lr_d"] = ck.lr_d;
  meta["rng_state"] = to_hex(ck.rng_state);
  auto& index = meta["tensors"] = nlohmann::json::array();
  for (const auto& t : ck.tensors)
    index.push_back({{"name", t.name},
                     {"rows", t.value.rows()},
                     {"cols", t.value.cols()}});
  // dump() emits object keys sorted, so the byte stream is deterministic.
  const std::string json = meta.dump();

  std::string buf;
  append_raw(buf, kMagic, sizeof(kMagic));
  append_raw(buf, &kVersion, sizeof(kVersion));
  const std::uint64_t json_len = json.size();
  append_raw(buf, &json_len, sizeof(json_len));
  buf += json;
  for (const auto& t : ck.tensors)
    append_raw(buf, t.value.data(), sizeof(float) * t.value.size());
  const std::uint32_t crc = crc_of(buf);
  append_raw(buf, &crc, sizeof(crc));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot write " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint: write failed " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot read " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  constexpr size_t kHeader = sizeof(kMagic) + sizeof(kVersion) + sizeof(std::uint64_t);
  if (buf.size() < kHeader + sizeof(std::uint32_t))
    throw std::runtime_error("checkpoint: truncated file");
  if (std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic");

  std::uint32_t version = 0;
  std::memcpy(&version, buf.data() + sizeof(kMagic), sizeof(version));
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  std::uint32_t stored_crc = 0;
  std::memcpy(&stored_crc, buf.data() + buf.size() - sizeof(stored_crc), sizeof(stored_crc));
  const std::string body = buf.substr(0, buf.size() - sizeof(stored_crc));
  if (crc_of(body) != stored_crc) throw std::runtime_error("checkpoint: crc mismatch");

  std::uint64_t json_len = 0;
  std::memcpy(&json_len, buf.data() + sizeof(kMagic) + sizeof(kVersion), sizeof(json_len));
  if (kHeader + json_len > body.size())
    throw std::runtime_error("checkpoint: truncated file");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(body.substr(kHeader, json_len));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: bad metadata: ") + e.what());
  }

  Checkpoint ck;
  try {
    ck.variant = gan::parse_variant(meta.at("variant").get<std::string>());
    ck.gen = gen_from_json(meta.at("gen"));
    ck.disc = disc_from_json(meta.at("disc"));
    ck.epoch = meta.at("epoch").get<int>();
    ck.best_epoch = meta.at("best_epoch").get<int>();
    if (meta.contains("best_heldout")) ck.best_heldout = meta["best_heldout"].get<double>();
    ck.adam_g_step = meta.at("adam_g_step").get<std::uint64_t>();
    ck.adam_d_step = meta.at("adam_d_step").get<std::uint64_t>();
    ck.lr_g = meta.at("lr_g").get<double>();
    ck.lr_d = meta.at("lr_d").get<double>();
    ck.rng_state = from_hex(meta.at("rng_state").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: bad metadata: ") + e.what());
  }

  size_t offset = kHeader + json_len;
  for (const auto& entry : meta.at("tensors")) {
    TensorEntry t;
    t.name = entry.at("name").get<std::string>();
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const size_t bytes = sizeof(float) * static_cast<size_t>(rows) * static_cast<size_t>(cols);
    if (offset + bytes > body.size())
      throw std::runtime_error("checkpoint: tensor size mismatch for " + t.name);
    t.value.resize(rows, cols);
    std::memcpy(t.value.data(), body.data() + offset, bytes);
    offset += bytes;
    ck.tensors.push_back(std::move(t));
  }
  if (offset != body.size())
    throw std::runtime_error("checkpoint: tensor size mismatch");
  return ck;
}

}  // namespace imgan::data
