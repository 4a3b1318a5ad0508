#include "cmib/data/window.hpp"

#include <cmath>
#include <cstring>

#include "cmib/util/binary_io.hpp"
#include "cmib/util/error.hpp"

namespace cmib::data {
namespace {

constexpr char kMagic[6] = {'C', 'M', 'I', 'B', 'W', '\0'};

}  // namespace

geom::Pose MotionWindow::pose_at(geom::FrameIndex t) const {
  if (t < 1 || static_cast<std::uint32_t>(t) > length) {
    throw InvalidArgument("frame " + std::to_string(t) + " outside window of length " +
                          std::to_string(length));
  }
  return devectorize(row(static_cast<std::size_t>(t - 1)), joints);
}

geom::MotionSequence MotionWindow::to_sequence() const {
  geom::MotionSequence seq;
  seq.fps = fps;
  seq.label = static_cast<int>(label);
  seq.frames.reserve(length);
  for (std::uint32_t t = 1; t <= length; ++t) seq.frames.push_back(pose_at(static_cast<int>(t)));
  return seq;
}

MotionWindow MotionWindow::from_sequence(const geom::MotionSequence& seq, std::uint32_t label,
                                         std::uint32_t subject, std::string source) {
  seq.validate();
  MotionWindow w;
  w.joints = static_cast<std::uint32_t>(seq.joint_count());
  w.length = static_cast<std::uint32_t>(seq.length());
  w.label = label;
  w.subject = subject;
  w.fps = static_cast<float>(seq.fps);
  w.source = std::move(source);
  w.X.resize(w.length * w.dim());
  for (std::size_t t = 0; t < seq.length(); ++t) {
    vectorize<float>(seq.frames[t], std::span<float>(w.X.data() + t * w.dim(), w.dim()));
  }
  return w;
}

void MotionWindow::validate(std::optional<std::uint32_t> expected_length) const {
  if (joints == 0) throw InvalidArgument("window has no joints");
  if (X.size() != static_cast<std::size_t>(length) * dim()) {
    throw InvalidArgument("window matrix has " + std::to_string(X.size()) + " values, expected " +
                          std::to_string(static_cast<std::size_t>(length) * dim()));
  }
  if (expected_length && *expected_length != length) {
    throw InvalidArgument("window length " + std::to_string(length) + " != configured " +
                          std::to_string(*expected_length));
  }
  for (float v : X) {
    if (!std::isfinite(v)) throw InvalidArgument("window contains non-finite values");
  }
  for (std::uint32_t t = 0; t < length; ++t) {
    const auto r = row(t);
    for (std::uint32_t j = 0; j < joints; ++j) {
      double n2 = 0.0;
      for (int c = 0; c < 4; ++c) {
        const double v = r[3 * joints + 4 * j + static_cast<std::uint32_t>(c)];
        n2 += v * v;
      }
      if (std::abs(std::sqrt(n2) - 1.0) > 1e-5) {
        throw InvalidArgument("window quaternion at frame " + std::to_string(t + 1) + " joint " +
                              std::to_string(j) + " is not unit norm");
      }
    }
  }
}

std::vector<std::uint8_t> encode_window(const MotionWindow& w) {
  if (w.X.size() != static_cast<std::size_t>(w.length) * w.dim()) {
    throw InvalidArgument("cannot encode window with inconsistent matrix size");
  }
  ByteWriter out;
  out.bytes(kMagic, sizeof(kMagic));
  out.u16(kWindowFormatVersion);
  out.u32(w.joints);
  out.u32(w.length);
  out.u32(w.label);
  out.u32(w.subject);
  out.f32(w.fps);
  for (float v : w.X) out.f32(v);
  return std::move(out.buffer());
}

MotionWindow decode_window(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  char magic[6];
  in.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw IoError("not a CMIBW window file");
  const std::uint16_t version = in.u16();
  if (version != kWindowFormatVersion) {
    throw IoError("unsupported window format version " + std::to_string(version));
  }
  MotionWindow w;
  w.joints = in.u32();
  w.length = in.u32();
  w.label = in.u32();
  w.subject = in.u32();
  w.fps = in.f32();
  const std::size_t n = static_cast<std::size_t>(w.length) * w.dim();
  if (in.remaining() != n * 4) {
    throw IoError("window payload has " + std::to_string(in.remaining()) + " bytes, expected " +
                  std::to_string(n * 4));
  }
  w.X.resize(n);
  for (auto& v : w.X) v = in.f32();
  return w;
}

void write_window_file(const std::filesystem::path& path, const MotionWindow& w) {
  write_file_bytes(path, encode_window(w));
}

MotionWindow read_window_file(const std::filesystem::path& path) {
  MotionWindow w = decode_window(read_file_bytes(path));
  w.source = path.string();
  return w;
}

}  // namespace cmib::data
