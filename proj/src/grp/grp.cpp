#include "cmib/grp/grp.hpp"

#include <cmath>

#include "cmib/geom/heading.hpp"

namespace cmib::grp {

using geom::Quat;
using geom::Vec3;

namespace {

double se_kernel(double a, double b) {
  const double d = a - b;
  return std::exp(-0.5 * d * d);
}

// Finite-difference tangent angle, central in the interior.
std::vector<double> tangent_angles(std::span<const double> xs, std::span<const double> ys) {
  const std::size_t n = xs.size();
  std::vector<double> out(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t lo = t == 0 ? 0 : t - 1;
    const std::size_t hi = t + 1 == n ? n - 1 : t + 1;
    out[t] = std::atan2(ys[hi] - ys[lo], xs[hi] - xs[lo]);
  }
  return out;
}

}  // namespace

PlanarPath root_path(const data::MotionWindow& window, int root_joint) {
  PlanarPath p;
  const auto r = static_cast<std::size_t>(root_joint);
  for (std::uint32_t t = 0; t < window.length; ++t) {
    const auto row = window.row(t);
    p.xs.push_back(row[3 * r]);
    p.ys.push_back(row[3 * r + 1]);
  }
  return p;
}

AxisAlignment rotate_to_x_axis(const PlanarPath& raw) {
  if (raw.xs.size() < 2 || raw.xs.size() != raw.ys.size()) {
    throw InvalidArgument("planar path needs at least two points with matching coordinates");
  }
  const double x0 = raw.xs.front();
  const double y0 = raw.ys.front();
  const double dx = raw.xs.back() - x0;
  const double dy = raw.ys.back() - y0;
  if (std::hypot(dx, dy) < 1e-12) {
    throw InvalidArgument("path start and target coincide on the ground plane");
  }
  AxisAlignment out;
  out.angle = -std::atan2(dy, dx);
  const double c = std::cos(out.angle);
  const double s = std::sin(out.angle);
  out.path.xs.resize(raw.size());
  out.path.ys.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double px = raw.xs[i] - x0;
    const double py = raw.ys[i] - y0;
    out.path.xs[i] = x0 + c * px - s * py;
    out.path.ys[i] = y0 + s * px + c * py;
  }
  return out;
}

GrpPosterior grp_posterior(std::span<const double> xs, std::array<double, 2> y_anchor,
                           const GrpConfig& cfg) {
  const std::size_t n = xs.size();
  if (n < 2) throw InvalidArgument("GRP needs at least two path points");
  if (cfg.jitter < 0.0) throw InvalidArgument("GRP jitter must be non-negative");
  const double range = xs.back() - xs.front();
  if (!(range > 0.0)) {
    throw MonotonicityViolation("path does not advance along the aligned forward axis");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (xs[i - 1] - xs[i] > 1e-6 * range) {
      throw MonotonicityViolation("path steps backwards at frame " + std::to_string(i + 1));
    }
  }

  GrpPosterior post;
  post.length_scale = cfg.length_scale ? *cfg.length_scale : range / cfg.kernel_spans;
  if (!(post.length_scale > 0.0)) throw InvalidArgument("GRP length scale must be positive");
  post.inputs.resize(n);
  for (std::size_t i = 0; i < n; ++i) post.inputs[i] = (xs[i] - xs.front()) / post.length_scale;

  const double a0 = post.inputs.front();
  const double a1 = post.inputs.back();
  Eigen::Matrix2d Ka;
  Ka << se_kernel(a0, a0) + cfg.jitter, se_kernel(a0, a1), se_kernel(a1, a0),
      se_kernel(a1, a1) + cfg.jitter;
  Eigen::MatrixXd kPa(n, 2);
  Eigen::MatrixXd KPP(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    kPa(ii, 0) = se_kernel(post.inputs[i], a0);
    kPa(ii, 1) = se_kernel(post.inputs[i], a1);
    for (std::size_t j = 0; j < n; ++j) {
      KPP(ii, static_cast<Eigen::Index>(j)) = se_kernel(post.inputs[i], post.inputs[j]);
    }
  }
  const Eigen::Vector2d ya(y_anchor[0], y_anchor[1]);
  const Eigen::LDLT<Eigen::Matrix2d> Ka_solver(Ka);
  post.mean = kPa * Ka_solver.solve(ya);
  post.cov = KPP - kPa * Ka_solver.solve(kPa.transpose());
  post.cov = 0.5 * (post.cov + post.cov.transpose()).eval();

  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                       static_cast<Eigen::Index>(n));
  double jitter = cfg.jitter;
  while (true) {
    Eigen::LLT<Eigen::MatrixXd> llt(post.cov + jitter * I);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd L = llt.matrixL();
      if (L.allFinite()) {
        post.chol = std::move(L);
        post.jitter_used = jitter;
        return post;
      }
    }
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > cfg.max_jitter * (1.0 + 1e-9)) {
      throw Error("GRP covariance is not factorizable with jitter up to " +
                  std::to_string(cfg.max_jitter));
    }
  }
}

Eigen::VectorXd sample_path(const GrpPosterior& post, const Eigen::VectorXd& u) {
  if (u.size() != post.mean.size()) throw ShapeError("GRP noise vector has the wrong length");
  return post.mean + post.chol * u;
}

std::vector<Eigen::VectorXd> sample_paths(const GrpPosterior& post, const GrpConfig& cfg) {
  Rng rng(cfg.seed);
  std::vector<Eigen::VectorXd> out;
  out.reserve(cfg.n_samples);
  for (std::uint32_t s = 0; s < cfg.n_samples; ++s) {
    Eigen::VectorXd u(post.mean.size());
    for (auto& v : u) v = rng.normal();
    out.push_back(sample_path(post, u));
  }
  return out;
}

AugmentResult apply_augmentation(const data::MotionWindow& window, const data::LabelTable& labels,
                                 const GrpConfig& cfg) {
  std::vector<Eigen::VectorXd> noise;
  Rng rng(cfg.seed);
  for (std::uint32_t s = 0; s < cfg.n_samples; ++s) {
    Eigen::VectorXd u(window.length);
    for (auto& v : u) v = rng.normal();
    noise.push_back(std::move(u));
  }
  return apply_augmentation(window, labels, cfg, noise);
}

AugmentResult apply_augmentation(const data::MotionWindow& window, const data::LabelTable& labels,
                                 const GrpConfig& cfg, std::span<const Eigen::VectorXd> noise) {
  AugmentResult result;
  const std::string& label = labels.name(window.label);
  if (!cfg.labels.contains(label)) {
    result.skipped = "label '" + label + "' is not augmented";
    return result;
  }

  const PlanarPath raw = root_path(window, cfg.root_joint);
  AxisAlignment aligned;
  GrpPosterior post;
  std::vector<double> xs_rel(raw.size());
  std::vector<double> ys_rel(raw.size());
  try {
    aligned = rotate_to_x_axis(raw);
    for (std::size_t t = 0; t < raw.size(); ++t) {
      xs_rel[t] = aligned.path.xs[t] - aligned.path.xs.front();
      ys_rel[t] = aligned.path.ys[t] - aligned.path.ys.front();
    }
    post = grp_posterior(xs_rel, {0.0, ys_rel.back()}, cfg);
  } catch (const MonotonicityViolation& e) {
    result.skipped = std::string("non-monotone root path: ") + e.what();
    return result;
  } catch (const InvalidArgument& e) {
    result.skipped = e.what();
    return result;
  }

  const Vec3 pivot{raw.xs.front(), raw.ys.front(), 0.0};
  const std::vector<double> orig_heading = tangent_angles(xs_rel, ys_rel);
  const geom::MotionSequence seq = window.to_sequence();
  const auto root = static_cast<std::size_t>(cfg.root_joint);

  for (std::size_t s = 0; s < noise.size(); ++s) {
    const Eigen::VectorXd y_new = sample_path(post, noise[s]);
    const std::vector<double> ys_new(y_new.data(), y_new.data() + y_new.size());
    const std::vector<double> new_heading = tangent_angles(xs_rel, ys_new);

    geom::MotionSequence out = seq;
    for (std::size_t t = 0; t < seq.length(); ++t) {
      const geom::Pose rotated = geom::rotate_about_vertical(seq.frames[t], aligned.angle, pivot);
      const Vec3 old_root = rotated.positions[root];
      const Vec3 new_root{old_root.x, pivot.y + ys_new[t], old_root.z};
      geom::Pose moved = geom::rotate_about_vertical(rotated, new_heading[t] - orig_heading[t],
                                                     old_root);
      const Vec3 shift = new_root - old_root;
      for (auto& p : moved.positions) p += shift;
      geom::Pose back = geom::rotate_about_vertical(moved, -aligned.angle, pivot);
      for (auto& q : back.rotations) q = q.normalized();
      out.frames[t] = std::move(back);
    }
    auto w = data::MotionWindow::from_sequence(out, window.label, window.subject,
                                               window.source + "+grp" + std::to_string(s));
    result.windows.push_back(std::move(w));
  }
  return result;
}

void write_path_csv(std::ostream& os, const PlanarPath& aligned, const GrpPosterior& post,
                    std::span<const Eigen::VectorXd> samples) {
  os << "frame,x,y_original,mean";
  for (std::size_t s = 0; s < samples.size(); ++s) os << ",sample_" << s;
  os << "\n";
  for (std::size_t t = 0; t < aligned.size(); ++t) {
    const auto ti = static_cast<Eigen::Index>(t);
    os << (t + 1) << "," << aligned.xs[t] << "," << aligned.ys[t] << "," << post.mean(ti);
    for (const auto& s : samples) os << "," << s(ti);
    os << "\n";
  }
}

}  // namespace cmib::grp
