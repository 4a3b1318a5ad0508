#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cmib/data/labels.hpp"
#include "cmib/data/window.hpp"
#include "cmib/util/error.hpp"
#include "cmib/util/rng.hpp"

namespace cmib::grp {

// Root trajectory projected on the ground plane.
struct PlanarPath {
  std::vector<double> xs;
  std::vector<double> ys;

  std::size_t size() const { return xs.size(); }
};

class MonotonicityViolation : public Error {
 public:
  using Error::Error;
};

struct GrpConfig {
  // Kernel length scale in meters along the aligned forward axis. When
  // unset the path is scaled to span `kernel_spans` unit kernel lengths.
  std::optional<double> length_scale;
  double kernel_spans = 4.0;
  // Observation noise on the two anchors; also the starting diagonal
  // regularizer for the Cholesky factorization.
  double jitter = 1e-8;
  double max_jitter = 1e-2;
  std::uint32_t n_samples = 4;
  std::uint64_t seed = 0;
  // Labels eligible for augmentation.
  std::set<std::string> labels = {"walk", "run"};
  int root_joint = 0;
};

struct AxisAlignment {
  PlanarPath path;     // rotated about the start point
  double angle = 0.0;  // applied rotation, radians; rotate by -angle to undo
};

// Rotates all points about the first one so that the last point lies on the
// +X ray from it. Throws InvalidArgument for coincident start and target.
AxisAlignment rotate_to_x_axis(const PlanarPath& raw);

/// Gaussian random path posterior over lateral offsets.
///
/// With inputs x~ = (x - x_1) / length_scale and the unit squared-exponential
/// kernel, conditions a zero-mean GP on (x~_1, y_1) and (x~_T, y_T):
///   mean = k(xP, xa) (Ka + s2 I)^-1 ya
///   cov  = K(xP, xP) - k(xP, xa) (Ka + s2 I)^-1 k(xP, xa)^T
/// chol is the lower factor of cov + jitter_used * I.
struct GrpPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  Eigen::MatrixXd chol;
  double jitter_used = 0.0;
  double length_scale = 1.0;  // meters per unit kernel input
  std::vector<double> inputs;  // scaled kernel inputs x~
};

// Throws MonotonicityViolation when xs steps backwards by more than
// 1e-6 of its range, and Error when no jitter up to max_jitter makes the
// covariance factorizable.
GrpPosterior grp_posterior(std::span<const double> xs, std::array<double, 2> y_anchor,
                           const GrpConfig& cfg);

// mean + chol * u
Eigen::VectorXd sample_path(const GrpPosterior& post, const Eigen::VectorXd& u);

// cfg.n_samples draws with u ~ N(0, I) from a generator seeded with cfg.seed.
std::vector<Eigen::VectorXd> sample_paths(const GrpPosterior& post, const GrpConfig& cfg);

struct AugmentResult {
  std::vector<data::MotionWindow> windows;
  std::optional<std::string> skipped;  // reason, when the window was not augmented
};

/// Re-routes the root of a locomotion window along GRP samples.
///
/// In the start/target-aligned frame the root keeps its forward and
/// vertical coordinates and takes the sampled lateral one. Every frame is
/// then turned about the vertical axis through the root by the change in
/// path tangent angle, so the body faces along the new path, and the
/// alignment is undone.
AugmentResult apply_augmentation(const data::MotionWindow& window, const data::LabelTable& labels,
                                 const GrpConfig& cfg);

// Same, with caller-provided standard-normal vectors instead of cfg.seed.
AugmentResult apply_augmentation(const data::MotionWindow& window, const data::LabelTable& labels,
                                 const GrpConfig& cfg, std::span<const Eigen::VectorXd> noise);

// Columns: frame, x, y_original, mean, sample_0..sample_{n-1} (aligned frame).
void write_path_csv(std::ostream& os, const PlanarPath& aligned, const GrpPosterior& post,
                    std::span<const Eigen::VectorXd> samples);

// Root ground-plane trajectory of a window.
PlanarPath root_path(const data::MotionWindow& window, int root_joint = 0);

}  // namespace cmib::grp
