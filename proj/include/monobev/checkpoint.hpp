#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "monobev/model.hpp"

namespace monobev::nn {

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};
struct VersionMismatchError : std::runtime_error {
  explicit VersionMismatchError(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointMagic = "MONOBEV-CKPT";

struct CheckpointMeta {
  int epoch = 0;
  int stage = 0;
  std::uint64_t rng_state = 0;
  std::uint64_t rng_inc = 0;
};

inline void to_json(nlohmann::json& j, const BranchConfig& c) {
  j = nlohmann::json{{"crop_size", c.crop_size},
                     {"feature_dim", c.feature_dim},
                     {"br2_widths", c.br2_widths},
                     {"br3_widths", c.br3_widths},
                     {"br4_widths", c.br4_widths},
                     {"out_dim", c.out_dim},
                     {"dropout_p", c.dropout_p},
                     {"backbone_trainable", c.backbone_trainable}};
}

inline void from_json(const nlohmann::json& j, BranchConfig& c) {
  j.at("crop_size").get_to(c.crop_size);
  j.at("feature_dim").get_to(c.feature_dim);
  j.at("br2_widths").get_to(c.br2_widths);
  j.at("br3_widths").get_to(c.br3_widths);
  j.at("br4_widths").get_to(c.br4_widths);
  j.at("out_dim").get_to(c.out_dim);
  j.at("dropout_p").get_to(c.dropout_p);
  j.at("backbone_trainable").get_to(c.backbone_trainable);
}

namespace detail {
inline void append_double_le(std::string& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }
}

inline double read_double_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
  }
  return std::bit_cast<double>(bits);
}

inline nlohmann::json specs_json(const Branch& b) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& s : b.specs()) {
    layers.push_back({{"kind", layer_kind_name(s.kind)},
                      {"in", s.in_dim},
                      {"out", s.out_dim},
                      {"p", s.dropout_p}});
  }
  return {{"name", b.name()}, {"layers", layers}};
}
}  // namespace detail

// Parameter blob of the given branches, little-endian float64 in manifest
// order (branch by branch, layer by layer, weight before bias).
inline std::string serialize_params(Model& model, const std::vector<BranchId>& ids) {
  std::string blob;
  for (BranchId id : ids) {
    for (Tensor* t : model.branch(id).params()) {
      for (double v : t->values) detail::append_double_le(blob, v);
    }
  }
  return blob;
}

inline void save_checkpoint(Model& model, const CheckpointMeta& meta,
                            const std::string& path) {
  nlohmann::json manifest;
  manifest["config"] = model.config();
  manifest["epoch"] = meta.epoch;
  manifest["stage"] = meta.stage;
  manifest["rng_state"] = std::to_string(meta.rng_state);
  manifest["rng_inc"] = std::to_string(meta.rng_inc);
  nlohmann::json branches = nlohmann::json::array();
  std::int64_t count = 0;
  for (Branch* b : model.branches()) {
    branches.push_back(detail::specs_json(*b));
    count += b->param_count();
  }
  manifest["branches"] = branches;
  manifest["param_count"] = count;

  const std::string blob = serialize_params(
      model, {BranchId::BR1, BranchId::BR2, BranchId::BR3, BranchId::BR4});

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
  out << manifest.dump() << '\n';
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("short write to checkpoint: " + path);
}

struct LoadedCheckpoint {
  Model model;
  CheckpointMeta meta;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string header;
  if (!std::getline(in, header)) throw IoError("truncated checkpoint header");
  {
    std::istringstream hs(header);
    std::string magic;
    int version = -1;
    hs >> magic >> version;
    if (magic != kCheckpointMagic) throw VersionMismatchError("not a checkpoint file");
    if (version != kCheckpointVersion) {
      throw VersionMismatchError("unsupported checkpoint version " +
                                 std::to_string(version));
    }
  }
  std::string manifest_line;
  if (!std::getline(in, manifest_line)) throw IoError("truncated checkpoint manifest");
  nlohmann::json manifest = nlohmann::json::parse(manifest_line);

  BranchConfig cfg = manifest.at("config").get<BranchConfig>();
  Model model(cfg);

  // The stored layer table must match what the config reconstructs.
  nlohmann::json expect = nlohmann::json::array();
  for (Branch* b : model.branches()) expect.push_back(detail::specs_json(*b));
  if (manifest.at("branches") != expect) {
    throw ShapeMismatchError("checkpoint layer table does not match its config");
  }

  const std::int64_t count = manifest.at("param_count").get<std::int64_t>();
  std::string blob(static_cast<size_t>(count) * 8, '\0');
  in.read(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (in.gcount() != static_cast<std::streamsize>(blob.size())) {
    throw ShapeMismatchError("checkpoint blob shorter than param_count");
  }

  const char* p = blob.data();
  std::int64_t seen = 0;
  for (auto& ref : model.params()) {
    for (double& v : ref.tensor->values) {
      v = detail::read_double_le(p);
      p += 8;
      ++seen;
    }
  }
  if (seen != count) throw ShapeMismatchError("checkpoint blob length mismatch");

  CheckpointMeta meta;
  meta.epoch = manifest.at("epoch").get<int>();
  meta.stage = manifest.at("stage").get<int>();
  meta.rng_state = std::stoull(manifest.at("rng_state").get<std::string>());
  meta.rng_inc = std::stoull(manifest.at("rng_inc").get<std::string>());
  return {std::move(model), meta};
}

}  // namespace monobev::nn
