#include "cmib/data/io.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "cmib/util/binary_io.hpp"
#include "cmib/util/error.hpp"

namespace cmib::data {

using nlohmann::json;
namespace fs = std::filesystem;

json to_json(const geom::Skeleton& s) {
  json j;
  j["joint_names"] = s.joint_names();
  j["parents"] = s.parents();
  j["ref_lengths"] = s.ref_lengths();
  json offsets = json::array();
  for (const auto& o : s.rest_offsets()) offsets.push_back({o.x, o.y, o.z});
  j["rest_offsets"] = offsets;
  return j;
}

geom::Skeleton skeleton_from_json(const json& j) {
  std::vector<geom::Vec3> offsets;
  if (j.contains("rest_offsets")) {
    for (const auto& o : j.at("rest_offsets")) {
      offsets.push_back({o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()});
    }
  }
  return {j.at("joint_names").get<std::vector<std::string>>(), j.at("parents").get<std::vector<int>>(),
          j.at("ref_lengths").get<std::vector<double>>(), offsets};
}

json to_json(const NormStats& s) { return {{"mean", s.mean}, {"std", s.std}}; }

NormStats norm_stats_from_json(const json& j) {
  NormStats s{j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
  if (s.mean.size() != s.std.size()) throw InvalidArgument("stats mean/std sizes differ");
  for (double& v : s.std) v = std::max(v, kStdFloor);
  return s;
}

json to_json(const SubjectSplit& s) { return {{"train", s.train}, {"test", s.test}}; }

SubjectSplit split_from_json(const json& j) {
  SubjectSplit s{j.at("train").get<std::set<std::uint32_t>>(),
                 j.at("test").get<std::set<std::uint32_t>>()};
  s.validate();
  return s;
}

json to_json(const LabelTable& t) { return t.names(); }

LabelTable labels_from_json(const json& j) {
  return LabelTable(j.get<std::vector<std::string>>());
}

void save_dataset(const fs::path& dir, const DatasetDir& ds) {
  fs::create_directories(dir / "windows");
  write_file_text(dir / "skeleton.json", to_json(ds.skeleton).dump(2) + "\n");
  write_file_text(dir / "labels.json", to_json(ds.labels).dump(2) + "\n");
  write_file_text(dir / "split.json", to_json(ds.split).dump(2) + "\n");
  if (ds.stats) write_file_text(dir / "stats.json", to_json(*ds.stats).dump(2) + "\n");
  for (std::size_t i = 0; i < ds.windows.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu.cmibw", i);
    write_window_file(dir / "windows" / name, ds.windows[i]);
  }
}

DatasetDir load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("dataset directory " + dir.string() + " not found");
  DatasetDir ds;
  ds.skeleton = skeleton_from_json(json::parse(read_file_text(dir / "skeleton.json")));
  ds.labels = labels_from_json(json::parse(read_file_text(dir / "labels.json")));
  ds.split = split_from_json(json::parse(read_file_text(dir / "split.json")));
  if (fs::exists(dir / "stats.json")) {
    ds.stats = norm_stats_from_json(json::parse(read_file_text(dir / "stats.json")));
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir / "windows")) {
    if (e.path().extension() == ".cmibw") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) ds.windows.push_back(read_window_file(f));
  return ds;
}

std::vector<ManifestEntry> load_manifest(const fs::path& manifest) {
  const json j = json::parse(read_file_text(manifest));
  const json& entries = j.is_array() ? j : j.at("entries");
  std::vector<ManifestEntry> out;
  for (const auto& e : entries) {
    ManifestEntry m;
    m.path = e.at("path").get<std::string>();
    if (m.path.is_relative()) m.path = manifest.parent_path() / m.path;
    const auto& s = e.at("subject");
    m.subject = s.is_string() ? hdm05_subject_id(s.get<std::string>()) : s.get<std::uint32_t>();
    m.label = e.at("label").get<std::string>();
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace cmib::data
