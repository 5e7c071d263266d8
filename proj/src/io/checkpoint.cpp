#include "mnca/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace mnca {

using nlohmann::json;

json shape_to_json(const ModelShape& s) {
  return json{{"variant", std::string(to_string(s.variant))},
              {"channels", s.channels},
              {"hidden_dim", s.hidden},
              {"rules", s.rules},
              {"residual", s.residual},
              {"dropout", s.dropout}};
}

ModelShape shape_from_json(const json& j) {
  ModelShape s;
  s.variant = parse_variant(j.at("variant").get<std::string>());
  s.channels = j.at("channels").get<int>();
  s.hidden = j.at("hidden_dim").get<int>();
  s.rules = j.at("rules").get<int>();
  s.residual = j.at("residual").get<bool>();
  s.dropout = j.at("dropout").get<double>();
  return s;
}

namespace {

json inventory(const Model<float>& model) {
  json inv = json::array();
  std::size_t offset = 0;
  model.visit([&](const std::string& name, const Mat<float>& m) {
    inv.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    offset += static_cast<std::size_t>(m.size());
  });
  return inv;
}

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  ckpt.model.validate();
  json manifest;
  manifest["format"] = "mnca-checkpoint";
  manifest["version"] = kCheckpointVersion;
  manifest["shape"] = shape_to_json(ckpt.model.shape);
  manifest["parameters"] = inventory(ckpt.model);
  manifest["parameter_count"] = ckpt.model.parameter_count();
  manifest["training_steps"] = ckpt.training_steps;
  manifest["seed"] = ckpt.seed;
  manifest["config"] = ckpt.config;

  std::vector<std::uint32_t> words;
  words.reserve(ckpt.model.parameter_count());
  ckpt.model.visit([&](const std::string&, const Mat<float>& m) {
    for (Index i = 0; i < m.size(); ++i) words.push_back(to_le(std::bit_cast<std::uint32_t>(m.data()[i])));
  });

  std::ofstream blob(path + ".bin", std::ios::binary | std::ios::trunc);
  blob.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (!blob) throw CheckpointError(CheckpointErrc::Io, "cannot write " + path + ".bin");
  std::ofstream out(path, std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw CheckpointError(CheckpointErrc::Io, "cannot write " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError(CheckpointErrc::Io, "cannot open checkpoint " + path);
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointErrc::Corrupt, path + ": corrupt manifest: " + e.what());
  }

  Checkpoint ck;
  try {
    if (manifest.at("format").get<std::string>() != "mnca-checkpoint") {
      throw CheckpointError(CheckpointErrc::Corrupt, path + ": not a checkpoint manifest");
    }
    const int version = manifest.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError(CheckpointErrc::Version, path + ": checkpoint version " + std::to_string(version) +
                                                         ", expected " + std::to_string(kCheckpointVersion));
    }
    ModelShape shape;
    try {
      shape = shape_from_json(manifest.at("shape"));
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(CheckpointErrc::Corrupt, path + ": " + e.what());
    }
    ck.model = Model<float>::zeros(shape);
    if (manifest.at("parameters") != inventory(ck.model)) {
      throw CheckpointError(CheckpointErrc::Inventory,
                            path + ": parameter inventory disagrees with the declared model shape");
    }
    ck.training_steps = manifest.at("training_steps").get<long long>();
    ck.seed = manifest.at("seed").get<std::uint64_t>();
    ck.config = manifest.value("config", json());
  } catch (const json::exception& e) {
    throw CheckpointError(CheckpointErrc::Corrupt, path + ": corrupt manifest: " + e.what());
  }

  std::ifstream blob(path + ".bin", std::ios::binary);
  if (!blob) throw CheckpointError(CheckpointErrc::Io, "cannot open " + path + ".bin");
  const std::vector<char> bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());
  const std::size_t expected = ck.model.parameter_count() * 4;
  if (bytes.size() != expected) {
    throw CheckpointError(CheckpointErrc::Length, path + ".bin: " + std::to_string(bytes.size()) +
                                                      " bytes, expected " + std::to_string(expected));
  }
  std::size_t pos = 0;
  ck.model.visit([&](const std::string&, Mat<float>& m) {
    for (Index i = 0; i < m.size(); ++i) {
      std::uint32_t w;
      std::memcpy(&w, bytes.data() + pos, 4);
      pos += 4;
      m.data()[i] = std::bit_cast<float>(to_le(w));
    }
  });
  return ck;
}

Checkpoint load_checkpoint(const std::string& path, Model<float>& model) {
  Checkpoint ck = load_checkpoint(path);
  const ModelShape& a = ck.model.shape;
  const ModelShape& b = model.shape;
  if (a.variant != b.variant || a.channels != b.channels || a.hidden != b.hidden || a.rules != b.rules ||
      a.residual != b.residual || a.dropout != b.dropout) {
    throw CheckpointError(CheckpointErrc::Inventory, path + ": checkpoint shape differs from the target model");
  }
  model = ck.model;
  return ck;
}

}  // namespace mnca
