#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmib/data/dataset.hpp"
#include "cmib/data/labels.hpp"
#include "cmib/model/model.hpp"

namespace cmib::model {

// Per-term loss normalizers fixed before the first optimizer step.
struct LossScales {
  double c_sem = 1.0;
  double c_pos = 1.0;
  double c_rot = 1.0;
  bool operator==(const LossScales&) const = default;
};

struct TrainingMeta {
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  LossScales scales;
};

/// Everything needed to run inference and evaluation from one file.
struct Checkpoint {
  CmibConfig config;
  TrainingMeta meta;
  data::LabelTable labels;
  geom::Skeleton skeleton;
  std::optional<data::NormStats> stats;
  std::vector<float> params;  // canonical order
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

// Layout: magic "CMIB", u16 version, u32 header length, UTF-8 JSON header
// (config, meta, labels, skeleton, stats), u64 value count,
// then little-endian f32 parameter values.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Short hex digest of the encoded checkpoint.
std::string model_version(const Checkpoint& ck);

template <class T>
Checkpoint make_checkpoint(const CmibModel<T>& model, TrainingMeta meta, data::LabelTable labels,
                           geom::Skeleton skeleton, std::optional<data::NormStats> stats);

template <class T>
CmibModel<T> model_from_checkpoint(const Checkpoint& ck);

}  // namespace cmib::model
