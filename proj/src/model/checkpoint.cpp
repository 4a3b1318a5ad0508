#include "cmib/model/checkpoint.hpp"

#include <algorithm>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "cmib/data/io.hpp"
#include "cmib/util/binary_io.hpp"

namespace cmib::model {
namespace {

constexpr char kMagic[4] = {'C', 'M', 'I', 'B'};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
  nlohmann::json header;
  header["config"] = to_json(ck.config);
  header["meta"] = {{"step", ck.meta.step},
                    {"seed", ck.meta.seed},
                    {"loss_scales",
                     {{"c_sem", ck.meta.scales.c_sem},
                      {"c_pos", ck.meta.scales.c_pos},
                      {"c_rot", ck.meta.scales.c_rot}}}};
  header["labels"] = data::to_json(ck.labels);
  header["skeleton"] = data::to_json(ck.skeleton);
  header["stats"] = ck.stats ? data::to_json(*ck.stats) : nlohmann::json(nullptr);
  const std::string text = header.dump();

  ByteWriter w;
  w.bytes(kMagic, 4);
  w.u16(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text.data(), text.size());
  w.u64(ck.params.size());
  for (float v : ck.params) w.f32(v);
  return std::move(w.buffer());
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw IoError("not a checkpoint (bad magic)");
  const auto version = r.u16();
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  std::string text(r.u32(), '\0');
  r.bytes(text.data(), text.size());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corrupt checkpoint header: ") + e.what());
  }

  Checkpoint ck;
  try {
    ck.config = config_from_json(header.at("config"));
    const auto& meta = header.at("meta");
    ck.meta.step = meta.at("step").get<std::int64_t>();
    ck.meta.seed = meta.at("seed").get<std::uint64_t>();
    const auto& sc = meta.at("loss_scales");
    ck.meta.scales = {sc.at("c_sem").get<double>(), sc.at("c_pos").get<double>(),
                      sc.at("c_rot").get<double>()};
    ck.labels = data::labels_from_json(header.at("labels"));
    ck.skeleton = data::skeleton_from_json(header.at("skeleton"));
    if (!header.at("stats").is_null()) ck.stats = data::norm_stats_from_json(header.at("stats"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corrupt checkpoint header: ") + e.what());
  }

  const std::uint64_t n = r.u64();
  if (n * 4 != r.remaining()) {
    throw IoError("checkpoint parameter block has " + std::to_string(r.remaining()) +
                  " bytes, header declares " + std::to_string(n) + " values");
  }
  ck.params.resize(n);
  for (auto& v : ck.params) v = r.f32();
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  write_file_bytes(path, encode_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

std::string model_version(const Checkpoint& ck) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (std::uint8_t b : encode_checkpoint(ck)) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <class T>
Checkpoint make_checkpoint(const CmibModel<T>& model, TrainingMeta meta, data::LabelTable labels,
                           geom::Skeleton skeleton, std::optional<data::NormStats> stats) {
  Checkpoint ck;
  ck.config = model.config();
  ck.meta = meta;
  ck.labels = std::move(labels);
  ck.skeleton = std::move(skeleton);
  ck.stats = std::move(stats);
  ck.params.reserve(model.parameter_count());
  for (const auto* p : model.parameters()) {
    for (T v : p->value.values()) ck.params.push_back(static_cast<float>(v));
  }
  return ck;
}

template <class T>
CmibModel<T> model_from_checkpoint(const Checkpoint& ck) {
  CmibModel<T> m(ck.config, 0);
  if (m.parameter_count() != ck.params.size()) {
    throw IoError("checkpoint holds " + std::to_string(ck.params.size()) +
                  " parameter values, config implies " + std::to_string(m.parameter_count()));
  }
  std::size_t at = 0;
  for (auto* p : m.parameters()) {
    for (T& v : p->value.values()) v = static_cast<T>(ck.params[at++]);
  }
  return m;
}

template Checkpoint make_checkpoint<float>(const CmibModel<float>&, TrainingMeta, data::LabelTable,
                                           geom::Skeleton, std::optional<data::NormStats>);
template Checkpoint make_checkpoint<double>(const CmibModel<double>&, TrainingMeta,
                                            data::LabelTable, geom::Skeleton,
                                            std::optional<data::NormStats>);
template CmibModel<float> model_from_checkpoint<float>(const Checkpoint&);
template CmibModel<double> model_from_checkpoint<double>(const Checkpoint&);

}  // namespace cmib::model
