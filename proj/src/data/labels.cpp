#include "cmib/data/labels.hpp"

#include <filesystem>
#include <regex>

#include "cmib/util/error.hpp"

namespace cmib::data {

LabelTable::LabelTable(std::vector<std::string> names) {
  for (const auto& n : names) {
    if (find(n)) throw InvalidArgument("duplicate label '" + n + "'");
    add(n);
  }
}

std::uint32_t LabelTable::add(std::string_view name) {
  if (auto id = find(name)) return *id;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> LabelTable::find(std::string_view name) const {
  auto it = ids_.find(std::string(name));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t LabelTable::id(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw InvalidArgument("unknown label '" + std::string(name) + "'");
}

const std::string& LabelTable::name(std::uint32_t id) const {
  if (id >= names_.size()) throw InvalidArgument("unknown label id " + std::to_string(id));
  return names_[id];
}

FileTags tags_from_filename(std::string_view path, const std::string& pattern) {
  const std::string stem = std::filesystem::path(path).stem().string();
  std::smatch m;
  const std::regex re(pattern);
  if (!std::regex_search(stem, m, re) || m.size() < 2 || !m[1].matched) {
    throw InvalidArgument("file name '" + stem + "' does not match label pattern");
  }
  FileTags tags{m[1].str(), std::nullopt};
  if (m.size() > 2 && m[2].matched) {
    tags.subject = static_cast<std::uint32_t>(std::stoul(m[2].str()));
  }
  return tags;
}

}  // namespace cmib::data
