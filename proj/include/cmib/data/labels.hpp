#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cmib::data {

/// Bijective label-name <-> id table with ids contiguous from 0.
class LabelTable {
 public:
  LabelTable() = default;
  explicit LabelTable(std::vector<std::string> names);

  // Returns the existing id or appends a new one.
  std::uint32_t add(std::string_view name);

  std::optional<std::uint32_t> find(std::string_view name) const;
  std::uint32_t id(std::string_view name) const;  // throws InvalidArgument when unknown
  const std::string& name(std::uint32_t id) const;
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const LabelTable& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

// LAFAN1 naming: "<action><take>_subject<n>", e.g. walk1_subject5.bvh.
inline constexpr const char* kLafanFilePattern = R"(^([A-Za-z]+)\d*_subject(\d+))";

struct FileTags {
  std::string label;
  std::optional<std::uint32_t> subject;
};

// Applies `pattern` to the file stem: group 1 is the label, optional group 2
// the subject id. Throws InvalidArgument when the stem does not match.
FileTags tags_from_filename(std::string_view path, const std::string& pattern = kLafanFilePattern);

}  // namespace cmib::data
