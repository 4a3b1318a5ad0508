#pragma once

#include <string>
#include <string_view>

#include "cmib/geom/pose.hpp"
#include "cmib/util/error.hpp"

namespace cmib::data {

class BvhError : public Error {
 public:
  enum class Kind {
    kMalformedHeader,
    kMissingSection,
    kUnsupportedChannelOrder,
    kChannelCountMismatch,
    kNonFinite,
  };

  BvhError(Kind kind, int line, const std::string& what);

  Kind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  Kind kind_;
  int line_;
};

struct BvhOptions {
  enum class UpAxis { kY, kZ };
  // Vertical axis of the file. Y-up files are rotated +90 deg about X so
  // the result is Z-up.
  UpAxis up_axis = UpAxis::kY;
  // Multiplies offsets and root translations (e.g. 0.01 for centimeters).
  double scale = 1.0;
};

struct BvhMotion {
  geom::Skeleton skeleton;
  geom::MotionSequence sequence;
};

/// Parses HIERARCHY + MOTION into global positions and rotations.
///
/// Rotation channels must be declared in ZYX, ZXY or XYZ order; End Site
/// blocks are dropped.
BvhMotion parse_bvh(std::string_view text, const BvhOptions& opts = {});

// Writes global rotations as local ZYX Euler channels plus the root
// translation. Requires skeleton rest offsets.
std::string write_bvh(const geom::Skeleton& skeleton, const geom::MotionSequence& seq,
                      const BvhOptions& opts = {});

}  // namespace cmib::data
