#include "imgan/data/manifest.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

namespace imgan::data {

namespace {

bool known_split(const std::string& s) {
  return s == "train" || s == "heldout" || s == "test";
}

}  // namespace

void validate_manifest(const Manifest& m) {
  std::set<std::string> ids;
  for (const auto& row : m) {
    if (row.id.empty()) throw std::runtime_error("manifest: empty id");
    if (!ids.insert(row.id).second)
      throw std::runtime_error("manifest: duplicate id " + row.id);
    if (!std::isfinite(row.snr_db))
      throw std::runtime_error("manifest: non-finite snr for " + row.id);
    if (!known_split(row.split))
      throw std::runtime_error("manifest: unknown split '" + row.split + "' for " + row.id);
    if (row.speech_path.empty() || row.noise_path.empty())
      throw std::runtime_error("manifest: missing path for " + row.id);
  }
}

void save_manifest(const std::filesystem::path& path, const Manifest& m) {
  validate_manifest(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("manifest: cannot write " + path.string());
  for (const auto& row : m) {
    nlohmann::json j;
    j["id"] = row.id;
    j["speech_path"] = row.speech_path;
    j["noise_path"] = row.noise_path;
    j["snr_db"] = row.snr_db;
    j["crop_seed"] = row.crop_seed;
    if (row.enhanced_path) j["enhanced_path"] = *row.enhanced_path;
    j["split"] = row.split;
    out << j.dump() << '\n';
  }
}

std::filesystem::path resolve_path(const std::string& stored,
                                   const std::filesystem::path& base_dir) {
  std::filesystem::path p(stored);
  return p.is_absolute() ? p : base_dir / p;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("manifest: cannot read " + path.string());
  const std::filesystem::path base = path.parent_path();

  Manifest m;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("manifest: line " + std::to_string(line_no) + ": " + e.what());
    }
    ManifestRow row;
    try {
      row.id = j.at("id").get<std::string>();
      row.speech_path = j.at("speech_path").get<std::string>();
      row.noise_path = j.at("noise_path").get<std::string>();
      row.snr_db = j.at("snr_db").get<double>();
      row.crop_seed = j.at("crop_seed").get<std::uint64_t>();
      row.split = j.at("split").get<std::string>();
      if (j.contains("enhanced_path")) row.enhanced_path = j["enhanced_path"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("manifest: line " + std::to_string(line_no) + ": " + e.what());
    }
    m.push_back(std::move(row));
  }
  validate_manifest(m);

  std::string missing;
  for (const auto& row : m) {
    for (const auto* p : {&row.speech_path, &row.noise_path}) {
      if (!std::filesystem::exists(resolve_path(*p, base))) missing += "\n  " + *p;
    }
    if (row.enhanced_path && !std::filesystem::exists(resolve_path(*row.enhanced_path, base)))
      missing += "\n  " + *row.enhanced_path;
  }
  if (!missing.empty()) throw std::runtime_error("manifest: missing files:" + missing);
  return m;
}

}  // namespace imgan::data
