#include "config_file.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cmib::cli {
namespace {

std::string scalar_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  return v.dump();
}

void flatten(const nlohmann::json& obj, std::vector<std::string>& parents,
             std::vector<CLI::ConfigItem>& out) {
  for (const auto& [key, value] : obj.items()) {
    if (value.is_object()) {
      parents.push_back(key);
      flatten(value, parents, out);
      parents.pop_back();
      continue;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    if (value.is_array()) {
      for (const auto& e : value) item.inputs.push_back(scalar_text(e));
    } else {
      item.inputs.push_back(scalar_text(value));
    }
    out.push_back(std::move(item));
  }
}

}  // namespace

std::vector<CLI::ConfigItem> ConfigFile::from_config(std::istream& input) const {
  const std::string text{std::istreambuf_iterator<char>(input), std::istreambuf_iterator<char>()};
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos || text[first] != '{') {
    std::istringstream toml(text);
    return CLI::ConfigBase::from_config(toml);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw CLI::ConversionError(std::string("config file: ") + e.what());
  }
  std::vector<CLI::ConfigItem> items;
  std::vector<std::string> parents;
  flatten(j, parents, items);
  return items;
}

std::vector<std::string> expand_config_args(const std::vector<std::string>& args) {
  if (args.size() < 2) return args;
  std::size_t at = args.size();
  std::string path;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      at = i;
      path = args[i + 1];
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      at = i;
      path = args[i].substr(9);
      break;
    }
  }
  if (at == args.size()) return args;

  std::ifstream in(path);
  if (!in) throw CLI::FileError::Missing(path);
  const auto items = ConfigFile().from_config(in);

  std::vector<std::string> rest;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (i == at) {
      if (args[i] == "--config") ++i;
      continue;
    }
    rest.push_back(args[i]);
  }
  auto given = [&](const std::string& flag) {
    return std::any_of(rest.begin(), rest.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
  };

  std::vector<std::string> out{args[0], args[1]};
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // CLI11 section markers
    if (!item.parents.empty() && item.parents != std::vector<std::string>{args[1]}) {
      throw CLI::ConversionError("config file: key '" + item.fullname() +
                                 "' does not belong to '" + args[1] + "'");
    }
    std::string name = item.name;
    std::replace(name.begin(), name.end(), '_', '-');
    const std::string flag = "--" + name;
    if (given(flag)) continue;
    // empty values (resume="") mean unset
    if (item.inputs.empty() || (item.inputs.size() == 1 && item.inputs.front().empty())) continue;
    if (item.inputs.size() == 1) {
      out.push_back(flag + "=" + item.inputs.front());
    } else {
      out.push_back(flag);
      out.insert(out.end(), item.inputs.begin(), item.inputs.end());
    }
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

}  // namespace cmib::cli
