#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "dream/core/error.hpp"
#include "dream/nn/dense.hpp"

namespace dream::nn {

// On disk: <stem>.json manifest and <stem>.bin holding the flat parameters as little-endian
// IEEE-754 doubles in layout (row-major) order.
struct Checkpoint {
  nlohmann::json manifest;  // model description; "step" and "parameter_count" are filled on save
  long step = 0;
  Vector params;
};

namespace detail {

inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
    return r;
  }
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& stem, const Checkpoint& ckpt) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  nlohmann::json manifest = ckpt.manifest;
  manifest["step"] = ckpt.step;
  manifest["parameter_count"] = ckpt.params.size();
  manifest["data_file"] = stem.filename().string() + ".bin";
  manifest["byte_order"] = "little";
  {
    std::ofstream out(stem.string() + ".json");
    if (!out) throw config_error("cannot write checkpoint manifest " + stem.string() + ".json");
    out << manifest.dump(2) << '\n';
  }
  std::ofstream bin(stem.string() + ".bin", std::ios::binary);
  if (!bin) throw config_error("cannot write checkpoint data " + stem.string() + ".bin");
  for (Eigen::Index i = 0; i < ckpt.params.size(); ++i) {
    std::uint64_t bits = 0;
    const double v = ckpt.params[i];
    std::memcpy(&bits, &v, sizeof bits);
    bits = detail::to_little_endian(bits);
    bin.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

inline Checkpoint load_checkpoint(const std::filesystem::path& stem) {
  Checkpoint ckpt;
  std::ifstream in(stem.string() + ".json");
  if (!in) throw config_error("missing checkpoint manifest " + stem.string() + ".json");
  try {
    in >> ckpt.manifest;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("malformed checkpoint manifest " + stem.string() + ".json: " + e.what());
  }
  ckpt.step = ckpt.manifest.value("step", 0L);
  const auto count = ckpt.manifest.at("parameter_count").get<std::int64_t>();
  std::ifstream bin(stem.string() + ".bin", std::ios::binary);
  if (!bin) throw config_error("missing checkpoint data " + stem.string() + ".bin");
  ckpt.params.resize(count);
  for (std::int64_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    if (!bin.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
      throw config_error("truncated checkpoint data " + stem.string() + ".bin");
    }
    bits = detail::to_little_endian(bits);
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof v);
    ckpt.params[i] = v;
  }
  return ckpt;
}

}  // namespace dream::nn
