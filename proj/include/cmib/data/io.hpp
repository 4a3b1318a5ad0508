#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cmib/data/bvh.hpp"
#include "cmib/data/dataset.hpp"
#include "cmib/data/labels.hpp"

namespace cmib::data {

nlohmann::json to_json(const geom::Skeleton& s);
geom::Skeleton skeleton_from_json(const nlohmann::json& j);

nlohmann::json to_json(const NormStats& s);
NormStats norm_stats_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SubjectSplit& s);
SubjectSplit split_from_json(const nlohmann::json& j);

nlohmann::json to_json(const LabelTable& t);
LabelTable labels_from_json(const nlohmann::json& j);

/// On-disk dataset layout shared by `synth`, `preprocess` and `augment`:
///
///   skeleton.json  labels.json  split.json  stats.json
///   windows/000000.cmibw ...
struct DatasetDir {
  geom::Skeleton skeleton;
  LabelTable labels;
  SubjectSplit split;
  std::optional<NormStats> stats;
  std::vector<MotionWindow> windows;
};

void save_dataset(const std::filesystem::path& dir, const DatasetDir& ds);
DatasetDir load_dataset(const std::filesystem::path& dir);

struct ManifestEntry {
  std::filesystem::path path;
  std::uint32_t subject = 0;
  std::string label;
};

// Accepts either a bare array of {path, subject, label} or an object with an
// "entries" array. Relative paths resolve against the manifest's directory.
// Subjects may be integers or HDM05 actor codes.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& manifest);

}  // namespace cmib::data
