#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmib/geom/pose.hpp"

namespace cmib::data {

// Per-frame pose vector layout: 3J positions (joint-major x, y, z) followed
// by 4J quaternion components (joint-major w, x, y, z).
inline std::size_t pose_dim(std::size_t joints) { return 7 * joints; }

template <class T>
void vectorize(const geom::Pose& pose, std::span<T> out) {
  const std::size_t J = pose.joint_count();
  for (std::size_t j = 0; j < J; ++j) {
    const auto& p = pose.positions[j];
    out[3 * j + 0] = static_cast<T>(p.x);
    out[3 * j + 1] = static_cast<T>(p.y);
    out[3 * j + 2] = static_cast<T>(p.z);
    const auto& q = pose.rotations[j];
    out[3 * J + 4 * j + 0] = static_cast<T>(q.w);
    out[3 * J + 4 * j + 1] = static_cast<T>(q.x);
    out[3 * J + 4 * j + 2] = static_cast<T>(q.y);
    out[3 * J + 4 * j + 3] = static_cast<T>(q.z);
  }
}

// Inverse of vectorize(); quaternions are copied as stored.
template <class T>
geom::Pose devectorize(std::span<const T> row, std::size_t joints) {
  geom::Pose pose(joints);
  for (std::size_t j = 0; j < joints; ++j) {
    pose.positions[j] = {static_cast<double>(row[3 * j]), static_cast<double>(row[3 * j + 1]),
                         static_cast<double>(row[3 * j + 2])};
    const std::size_t o = 3 * joints + 4 * j;
    pose.rotations[j] = {static_cast<double>(row[o]), static_cast<double>(row[o + 1]),
                         static_cast<double>(row[o + 2]), static_cast<double>(row[o + 3])};
  }
  return pose;
}

/// Fixed-length window of vectorized poses, stored row-major in f32.
struct MotionWindow {
  std::uint32_t joints = 0;
  std::uint32_t length = 0;  // frames, T
  std::vector<float> X;      // length x 7*joints
  std::uint32_t label = 0;
  std::uint32_t subject = 0;
  float fps = 30.0f;
  std::string source;

  std::size_t dim() const { return pose_dim(joints); }
  std::span<const float> row(std::size_t frame0) const {
    return {X.data() + frame0 * dim(), dim()};
  }

  // Pose at 1-based frame t.
  geom::Pose pose_at(geom::FrameIndex t) const;
  geom::MotionSequence to_sequence() const;

  static MotionWindow from_sequence(const geom::MotionSequence& seq, std::uint32_t label,
                                    std::uint32_t subject, std::string source = {});

  // Checks the matrix size, finiteness and quaternion norms (1e-5); when
  // expected_length is given also the frame count.
  void validate(std::optional<std::uint32_t> expected_length = std::nullopt) const;
};

inline constexpr std::uint16_t kWindowFormatVersion = 1;

// Native little-endian window encoding: magic "CMIBW\0", u16 version,
// u32 J, u32 T, u32 label, u32 subject, f32 fps, then T*7J f32 values.
std::vector<std::uint8_t> encode_window(const MotionWindow& w);
MotionWindow decode_window(std::span<const std::uint8_t> bytes);

void write_window_file(const std::filesystem::path& path, const MotionWindow& w);
MotionWindow read_window_file(const std::filesystem::path& path);

}  // namespace cmib::data
