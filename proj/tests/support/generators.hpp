#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "cmib/data/synthetic.hpp"
#include "cmib/geom/pose.hpp"
#include "cmib/geom/quaternion.hpp"
#include "cmib/model/model.hpp"
#include "cmib/util/rng.hpp"

namespace testgen {

using cmib::Rng;
using cmib::geom::Quat;
using cmib::geom::Vec3;

inline Vec3 vec3(Rng& rng, double lo = -2.0, double hi = 2.0) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

// Uniform on SO(3) (normalized 4-D Gaussian), canonical hemisphere.
inline Quat unit_quat(Rng& rng) {
  Quat q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
  return q.normalized().canonical();
}

inline cmib::geom::Pose pose(Rng& rng, std::size_t joints) {
  cmib::geom::Pose p(joints);
  for (std::size_t j = 0; j < joints; ++j) {
    p.positions[j] = vec3(rng);
    p.rotations[j] = unit_quat(rng);
  }
  return p;
}

// Strictly increasing abscissae with random positive steps.
inline std::vector<double> monotone_xs(Rng& rng, std::size_t n) {
  std::vector<double> xs(n);
  double x = rng.uniform(-1.0, 1.0);
  for (auto& v : xs) {
    v = x;
    x += rng.uniform(0.01, 0.2);
  }
  return xs;
}

// The small configuration used by the toy training runs.
inline cmib::model::CmibConfig toy_config(std::uint32_t n_labels = 3) {
  cmib::model::CmibConfig c;
  c.joints = 4;
  c.t_max = 32;
  c.heads = 4;
  c.layers = 2;
  c.d_ff = 128;
  c.n_labels = n_labels;
  return c;
}

inline cmib::model::CmibConfig tiny_config(std::uint32_t n_labels = 2) {
  cmib::model::CmibConfig c;
  c.joints = 3;
  c.t_max = 8;
  c.heads = 3;
  c.layers = 2;
  c.d_ff = 16;
  c.n_labels = n_labels;
  return c;
}

// Largest displacement of the unit axes between the two rotations (the
// chord, close to the angle for small gaps). Uses rotated probe vectors
// rather than quaternion algebra.
inline double rotation_gap(const Quat& a, const Quat& b) {
  double worst = 0.0;
  const Vec3 probes[] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (const auto& v : probes) worst = std::max(worst, (a.rotate(v) - b.rotate(v)).norm());
  return worst;
}

}  // namespace testgen
