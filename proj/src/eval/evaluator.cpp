#include "cmib/eval/evaluator.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cmib/eval/metrics.hpp"
#include "cmib/geom/heading.hpp"
#include "cmib/geom/interpolation.hpp"
#include "cmib/util/parallel.hpp"
#include "cmib/util/rng.hpp"

namespace cmib::eval {

const char* method_name(Method m) {
  switch (m) {
    case Method::kZeroVelocity: return "zero-velocity";
    case Method::kInterp: return "interp";
    case Method::kModel: return "cmib";
  }
  return "?";
}

namespace {

geom::MotionSequence leading(const geom::MotionSequence& seq, std::size_t n) {
  geom::MotionSequence out = seq;
  out.frames.resize(n);
  return out;
}

geom::KeyFrames context_keys(const geom::MotionSequence& seq, std::uint32_t context,
                             geom::FrameIndex T) {
  geom::KeyFrames keys;
  const auto c = std::min<geom::FrameIndex>(static_cast<geom::FrameIndex>(std::max(context, 1u)), T - 1);
  for (geom::FrameIndex t = 1; t <= c; ++t) keys.emplace(t, seq.frames[t - 1]);
  keys.emplace(T, seq.frames[T - 1]);
  return keys;
}

std::vector<Method> methods(const EvalContext& ctx) {
  std::vector<Method> m{Method::kZeroVelocity, Method::kInterp};
  if (ctx.model) m.push_back(Method::kModel);
  return m;
}

geom::MotionSequence run_method(const EvalContext& ctx, Method m, const geom::KeyFrames& keys,
                                geom::FrameIndex T, std::uint32_t label) {
  switch (m) {
    case Method::kZeroVelocity: return zero_velocity_baseline(keys, T);
    case Method::kInterp: return geom::interpolate_missing(keys, T);
    case Method::kModel: return ctx.model->infill(keys, T, label, ctx.skeleton);
  }
  throw Error("unknown method");
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

double MibResult::mean_l2p(Method m, std::uint32_t horizon) const {
  for (const auto& r : rows) {
    if (r.method == m && r.horizon == horizon) return r.l2p;
  }
  throw InvalidArgument(std::string("no result for ") + method_name(m) + " at horizon " +
                        std::to_string(horizon));
}

MibResult evaluate_mib(const EvalContext& ctx, const std::vector<data::MotionWindow>& windows,
                       const std::vector<std::uint32_t>& horizons) {
  const auto ms = methods(ctx);
  struct Job {
    std::size_t window;
    std::uint32_t horizon;
  };
  std::vector<Job> jobs;
  for (std::uint32_t h : horizons) {
    if (h < 2) throw InvalidArgument("horizon must be >= 2");
    for (std::size_t w = 0; w < windows.size(); ++w) {
      if (windows[w].length >= h) jobs.push_back({w, h});
    }
  }
  std::vector<std::vector<WindowScore>> slots(jobs.size());
  parallel_for(
      jobs.size(),
      [&](std::size_t i) {
        const auto& w = windows[jobs[i].window];
        const auto H = static_cast<geom::FrameIndex>(jobs[i].horizon);
        const auto truth = leading(w.to_sequence(), jobs[i].horizon);
        const auto keys = context_keys(truth, ctx.context_frames, H);
        for (Method m : ms) {
          const auto pred = run_method(ctx, m, keys, H, w.label);
          slots[i].push_back({m, jobs[i].horizon, jobs[i].window, l2p(pred, truth, ctx.stats),
                              l2q(pred, truth)});
        }
      },
      ctx.threads);

  MibResult out;
  for (auto& s : slots) out.per_window.insert(out.per_window.end(), s.begin(), s.end());
  for (std::uint32_t h : horizons) {
    for (Method m : ms) {
      std::vector<double> p, q;
      for (const auto& s : out.per_window) {
        if (s.method == m && s.horizon == h) {
          p.push_back(s.l2p);
          q.push_back(s.l2q);
        }
      }
      if (!p.empty()) out.rows.push_back({m, h, mean(p), mean(q)});
    }
  }
  return out;
}

std::vector<AnchorRow> anchor_eval(const EvalContext& ctx,
                                   const std::vector<data::MotionWindow>& windows,
                                   const AnchorEvalConfig& cfg) {
  if (!ctx.model) throw InvalidArgument("anchor evaluation needs a model");
  const auto root = static_cast<std::size_t>(ctx.skeleton.root());
  for (const auto& w : windows) {
    for (auto t : cfg.anchor_frames) {
      if (t <= 1 || t >= static_cast<geom::FrameIndex>(w.length)) {
        throw InvalidArgument("anchor frame " + std::to_string(t) + " must satisfy 1 < t < T = " +
                              std::to_string(w.length));
      }
    }
  }
  const double sx = ctx.stats.std.at(3 * root), sy = ctx.stats.std.at(3 * root + 1);
  geom::HeadingOptions heading;
  heading.root_joint = static_cast<int>(root);

  const std::size_t nf = cfg.anchor_frames.size();
  struct Slot {
    double m = 0, n = 0, interp = 0;
  };
  std::vector<Slot> slots(windows.size() * nf);
  parallel_for(
      slots.size(),
      [&](std::size_t i) {
        const std::size_t wi = i / nf;
        const auto t = cfg.anchor_frames[i % nf];
        const auto& w = windows[wi];
        const auto T = static_cast<geom::FrameIndex>(w.length);
        Rng rng(derive_seed(cfg.seed, i));
        const double r = cfg.radius * std::sqrt(rng.uniform());
        const double a = 2.0 * std::numbers::pi * rng.uniform();
        const geom::Vec3 shift{r * std::cos(a), r * std::sin(a), 0.0};

        geom::Pose anchor = w.pose_at(t);
        for (auto& p : anchor.positions) p += shift;
        const geom::Vec3 goal = anchor.positions[root];

        auto face = [&](const geom::Pose& pose, const geom::Vec3& from, const geom::Vec3& to) {
          const double dx = to.x - from.x, dy = to.y - from.y;
          if (std::hypot(dx, dy) < 1e-6) return pose;
          const double turn = std::atan2(dy, dx) - geom::facing_angle(pose, heading);
          return geom::rotate_about_vertical(pose, turn, pose.positions[root]);
        };
        const geom::Pose start0 = w.pose_at(1);
        const geom::Pose target0 = w.pose_at(T);
        const geom::Pose start = face(start0, start0.positions[root], goal);
        const geom::Pose target = face(target0, goal, target0.positions[root]);

        const geom::KeyFrames keys{{1, start}, {t, anchor}, {T, target}};
        const auto gen = ctx.model->infill(keys, T, w.label, ctx.skeleton);
        const geom::Vec3 got = gen.frames[static_cast<std::size_t>(t - 1)].positions[root];
        const double dx = got.x - goal.x, dy = got.y - goal.y;
        slots[i].m = std::hypot(dx, dy);
        slots[i].n = std::hypot(dx / sx, dy / sy);
        const auto lin = geom::interpolate_missing(keys, T);
        const geom::Vec3 li = lin.frames[static_cast<std::size_t>(t - 1)].positions[root];
        slots[i].interp = std::hypot(li.x - goal.x, li.y - goal.y);
      },
      ctx.threads);

  std::vector<AnchorRow> rows;
  for (std::size_t f = 0; f < nf; ++f) {
    AnchorRow row{cfg.anchor_frames[f], 0, 0, 0, windows.size()};
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
      const auto& s = slots[wi * nf + f];
      row.l2_m += s.m;
      row.l2_normalized += s.n;
      row.interp_l2_m += s.interp;
    }
    if (!windows.empty()) {
      const double n = static_cast<double>(windows.size());
      row.l2_m /= n;
      row.l2_normalized /= n;
      row.interp_l2_m /= n;
    }
    rows.push_back(row);
  }
  return rows;
}

std::size_t SemanticMatrix::diagonal_minimum_rows() const {
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& row = l2p[r];
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] < row[best]) best = c;
    }
    if (!row.empty() && cols[best] == rows[r]) ++count;
  }
  return count;
}

SemanticMatrix semantic_matrix(const EvalContext& ctx,
                               const std::vector<data::MotionWindow>& windows) {
  if (!ctx.model) throw InvalidArgument("semantic matrix needs a model");
  SemanticMatrix out;
  std::set<std::uint32_t> present;
  for (const auto& w : windows) present.insert(w.label);
  const std::uint32_t n_labels = ctx.model->config().n_labels;
  for (std::uint32_t l = 0; l < n_labels; ++l) {
    out.cols.push_back(l);
    if (present.contains(l)) {
      out.rows.push_back(l);
    } else {
      const std::string name = l < ctx.labels.size() ? ctx.labels.name(l) : std::to_string(l);
      out.warnings.push_back("label '" + name + "' has no test windows; row omitted");
    }
  }

  std::vector<std::vector<double>> per(windows.size(), std::vector<double>(n_labels));
  parallel_for(
      windows.size() * n_labels,
      [&](std::size_t i) {
        const auto& w = windows[i / n_labels];
        const auto c = static_cast<std::uint32_t>(i % n_labels);
        const auto truth = w.to_sequence();
        const auto T = static_cast<geom::FrameIndex>(w.length);
        const auto pred =
            ctx.model->infill(context_keys(truth, ctx.context_frames, T), T, c, ctx.skeleton);
        per[i / n_labels][c] = l2p(pred, truth, ctx.stats);
      },
      ctx.threads);

  for (std::uint32_t r : out.rows) {
    std::vector<double> row(n_labels, 0.0);
    std::size_t n = 0;
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
      if (windows[wi].label != r) continue;
      for (std::uint32_t c = 0; c < n_labels; ++c) row[c] += per[wi][c];
      ++n;
    }
    for (auto& v : row) v /= static_cast<double>(n);
    out.l2p.push_back(std::move(row));
  }
  return out;
}

std::vector<LatencyRow> bench_inference(const model::CmibModel<float>& model,
                                        const geom::Skeleton& skeleton,
                                        const data::MotionWindow& sample,
                                        const std::vector<std::uint32_t>& batch_sizes,
                                        const std::vector<std::uint32_t>& horizons,
                                        std::uint32_t trials) {
  if (trials == 0) throw InvalidArgument("bench needs at least one trial");
  using clock = std::chrono::steady_clock;
  std::vector<LatencyRow> rows;
  for (std::uint32_t h : horizons) {
    if (h < 2 || h > model.config().t_max) continue;
    const geom::Pose start = sample.pose_at(1);
    const geom::Pose target =
        sample.pose_at(static_cast<geom::FrameIndex>(std::min<std::uint32_t>(h, sample.length)));
    for (std::uint32_t b : batch_sizes) {
      auto run = [&] {
        for (std::uint32_t i = 0; i < b; ++i) {
          (void)model.infill(start, target, std::nullopt, sample.label % model.config().n_labels,
                             static_cast<geom::FrameIndex>(h), skeleton);
        }
      };
      run();
      std::vector<double> times;
      for (std::uint32_t k = 0; k < trials; ++k) {
        const auto t0 = clock::now();
        run();
        times.push_back(std::chrono::duration<double>(clock::now() - t0).count());
      }
      const double m = mean(times);
      double var = 0.0;
      for (double x : times) var += (x - m) * (x - m);
      rows.push_back({b, h, trials, m, std::sqrt(var / static_cast<double>(times.size()))});
    }
  }
  return rows;
}

nlohmann::json to_json(const EvalReport& r, const data::LabelTable& labels) {
  auto label_name = [&](std::uint32_t id) {
    return id < labels.size() ? labels.name(id) : std::to_string(id);
  };
  nlohmann::json j = nlohmann::json::object();
  if (r.mib) {
    auto& rows = j["mib"] = nlohmann::json::array();
    for (const auto& row : r.mib->rows) {
      rows.push_back({{"method", method_name(row.method)},
                      {"horizon", row.horizon},
                      {"l2p", row.l2p},
                      {"l2q", row.l2q}});
    }
  }
  if (!r.anchor.empty()) {
    auto& rows = j["anchor"] = nlohmann::json::array();
    for (const auto& a : r.anchor) {
      rows.push_back({{"frame", a.frame},
                      {"l2_m", a.l2_m},
                      {"l2_normalized", a.l2_normalized},
                      {"interp_l2_m", a.interp_l2_m},
                      {"windows", a.windows}});
    }
  }
  if (r.semantic) {
    const auto& s = *r.semantic;
    nlohmann::json rows = nlohmann::json::array(), cols = nlohmann::json::array();
    for (auto id : s.rows) rows.push_back(label_name(id));
    for (auto id : s.cols) cols.push_back(label_name(id));
    j["semantic"] = {{"true_labels", rows},
                     {"given_labels", cols},
                     {"l2p", s.l2p},
                     {"diagonal_minimum_rows", s.diagonal_minimum_rows()},
                     {"warnings", s.warnings}};
  }
  if (!r.latency.empty()) {
    auto& rows = j["latency"] = nlohmann::json::array();
    for (const auto& l : r.latency) {
      rows.push_back({{"batch", l.batch},
                      {"horizon", l.horizon},
                      {"trials", l.trials},
                      {"mean_s", l.mean_s},
                      {"std_s", l.std_s}});
    }
  }
  return j;
}

void write_text_report(std::ostream& os, const EvalReport& r, const data::LabelTable& labels) {
  auto label_name = [&](std::uint32_t id) {
    return id < labels.size() ? labels.name(id) : std::to_string(id);
  };
  os << std::fixed << std::setprecision(4);
  if (r.mib) {
    std::set<std::uint32_t> hs;
    for (const auto& row : r.mib->rows) hs.insert(row.horizon);
    os << "In-betweening (L2P / L2Q)\n" << std::left << std::setw(16) << "method";
    for (auto h : hs) os << std::right << std::setw(10) << ("L2P@" + std::to_string(h));
    for (auto h : hs) os << std::right << std::setw(10) << ("L2Q@" + std::to_string(h));
    os << '\n';
    for (Method m : {Method::kZeroVelocity, Method::kInterp, Method::kModel}) {
      std::ostringstream p, q;
      bool any = false;
      for (auto h : hs) {
        for (const auto& row : r.mib->rows) {
          if (row.method != m || row.horizon != h) continue;
          p << std::fixed << std::setprecision(4) << std::setw(10) << row.l2p;
          q << std::fixed << std::setprecision(4) << std::setw(10) << row.l2q;
          any = true;
        }
      }
      if (any) os << std::left << std::setw(16) << method_name(m) << p.str() << q.str() << '\n';
    }
    os << '\n';
  }
  if (!r.anchor.empty()) {
    os << "Anchor L2 at anchor frame\n"
       << std::left << std::setw(8) << "frame" << std::right << std::setw(12) << "L2 (m)"
       << std::setw(14) << "L2 (norm.)" << std::setw(14) << "interp (m)" << std::setw(10)
       << "windows" << '\n';
    for (const auto& a : r.anchor) {
      os << std::left << std::setw(8) << a.frame << std::right << std::setw(12) << a.l2_m
         << std::setw(14) << a.l2_normalized << std::setw(14) << a.interp_l2_m << std::setw(10)
         << a.windows << '\n';
    }
    os << '\n';
  }
  if (r.semantic) {
    const auto& s = *r.semantic;
    os << "Semantic conditioning L2P (rows: true label, columns: given label)\n"
       << std::left << std::setw(12) << "";
    for (auto c : s.cols) os << std::right << std::setw(10) << label_name(c);
    os << '\n';
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      os << std::left << std::setw(12) << label_name(s.rows[i]);
      for (double v : s.l2p[i]) os << std::right << std::setw(10) << v;
      os << '\n';
    }
    os << "diagonal minimum in " << s.diagonal_minimum_rows() << " of " << s.rows.size()
       << " rows\n";
    for (const auto& w : s.warnings) os << "warning: " << w << '\n';
    os << '\n';
  }
  if (!r.latency.empty()) {
    os << "Inference latency (s)\n"
       << std::left << std::setw(8) << "batch" << std::setw(10) << "horizon" << std::right
       << std::setw(12) << "mean" << std::setw(12) << "std" << std::setw(8) << "trials" << '\n';
    for (const auto& l : r.latency) {
      os << std::left << std::setw(8) << l.batch << std::setw(10) << l.horizon << std::right
         << std::setprecision(6) << std::setw(12) << l.mean_s << std::setw(12) << l.std_s
         << std::setw(8) << l.trials << std::setprecision(4) << '\n';
    }
  }
}

void write_per_window_csv(std::ostream& os, const MibResult& r) {
  os << "method,horizon,window,l2p,l2q\n" << std::setprecision(9);
  for (const auto& s : r.per_window) {
    os << method_name(s.method) << ',' << s.horizon << ',' << s.window << ',' << s.l2p << ','
       << s.l2q << '\n';
  }
}

}  // namespace cmib::eval
