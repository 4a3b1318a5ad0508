#include "cmib/cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cmib/data/bvh.hpp"
#include "cmib/data/io.hpp"
#include "cmib/data/synthetic.hpp"
#include "cmib/eval/evaluator.hpp"
#include "cmib/grp/grp.hpp"
#include "cmib/model/checkpoint.hpp"
#include "cmib/service/service.hpp"
#include "cmib/train/trainer.hpp"
#include "cmib/util/binary_io.hpp"
#include "config_file.hpp"

namespace cmib::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kResolvedConfig = "cmib_config.toml";

void echo_config(const CLI::App& sub, const fs::path& dir) {
  fs::create_directories(dir);
  write_file_text(dir / kResolvedConfig, sub.config_to_str(true, false));
}

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& desc) {
  auto* sub = app.add_subcommand(name, desc);
  sub->config_formatter(std::make_shared<ConfigFile>());
  // Expanded before parsing (expand_config_args); registered for --help.
  sub->add_option("--config", "TOML or JSON file with option values (flags take precedence)")
      ->type_name("FILE")
      ->configurable(false);
  return sub;
}

// Root at the origin, each child at its parent plus the rest offset (or
// straight down by the reference length), identity rotations.
geom::Pose rest_pose(const geom::Skeleton& sk) {
  geom::Pose pose(sk.joint_count());
  for (int j : sk.topological_order()) {
    const int p = sk.parents()[static_cast<std::size_t>(j)];
    if (p < 0) continue;
    const auto ju = static_cast<std::size_t>(j);
    const geom::Vec3 off = sk.rest_offsets().empty() ? geom::Vec3{0, 0, -sk.ref_lengths()[ju]}
                                                     : sk.rest_offsets()[ju];
    pose.positions[ju] = pose.positions[static_cast<std::size_t>(p)] + off;
  }
  return pose;
}

std::vector<data::MotionWindow> select_split(const data::DatasetDir& ds, const std::string& which) {
  if (which == "all") return ds.windows;
  auto split = data::split_by_subject(ds.windows, ds.split);
  if (which == "train") return split.train;
  if (which == "test") return split.test;
  throw InvalidArgument("unknown split '" + which + "' (train, test or all)");
}

// ---------------------------------------------------------------- synth

struct SynthOpts {
  std::string out;
  std::uint64_t seed = 0;
  std::uint32_t joints = 4;
  std::uint32_t length = 32;
  std::uint32_t windows = 64;
  std::vector<std::string> labels = {"walk", "run", "jump"};
  double fps = 30.0;
};

void register_synth(CLI::App& app, SynthOpts& o, std::function<void()>& run) {
  auto* sub = add_command(app, "synth", "Generate a synthetic locomotion dataset");
  sub->add_option("--out", o.out, "Output dataset directory")->required()->configurable(false);
  sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  sub->add_option("--joints", o.joints, "Joint count (>= 3)")->capture_default_str();
  sub->add_option("--length", o.length, "Frames per window")->capture_default_str();
  sub->add_option("--windows", o.windows, "Number of windows")->capture_default_str();
  sub->add_option("--labels", o.labels, "Labels to cycle through (walk, run, jump)")
      ->delimiter(',')
      ->capture_default_str();
  sub->add_option("--fps", o.fps, "Frame rate")->capture_default_str();
  sub->callback([&, sub] {
    run = [&, sub] {
      data::SyntheticConfig cfg;
      cfg.joints = o.joints;
      cfg.length = o.length;
      cfg.n_windows = o.windows;
      cfg.labels = o.labels;
      cfg.seed = o.seed;
      cfg.fps = o.fps;
      data::DatasetDir ds;
      ds.skeleton = data::synthetic_skeleton(o.joints);
      ds.labels = data::synthetic_labels(cfg);
      ds.split = {{1, 2, 3, 4}, {5}};
      ds.windows = data::gen_synthetic(cfg);
      const auto train = data::split_by_subject(ds.windows, ds.split).train;
      if (!train.empty()) ds.stats = data::compute_norm_stats(train);
      data::save_dataset(o.out, ds);
      echo_config(*sub, o.out);
      std::cout << "wrote " << ds.windows.size() << " windows to " << o.out << '\n';
    };
  });
}

// ---------------------------------------------------------------- preprocess

struct PreprocessOpts {
  std::string manifest;
  std::string bvh_dir;
  std::string out;
  std::uint32_t length = 65;
  std::uint32_t stride = 20;
  std::string split = "lafan1";
  std::string up_axis = "y";
  double scale = 1.0;
  std::string pattern = data::kLafanFilePattern;
  std::string left_hip;
  std::string right_hip;
};

void register_preprocess(CLI::App& app, PreprocessOpts& o, std::function<void()>& run) {
  auto* sub = add_command(app, "preprocess", "Convert BVH files into windowed training data");
  auto* m = sub->add_option("--manifest", o.manifest, "JSON list of {path, subject, label}");
  auto* d = sub->add_option("--bvh-dir", o.bvh_dir,
                            "Directory of .bvh files; label and subject come from file names");
  m->excludes(d);
  sub->add_option("--out", o.out, "Output dataset directory")->required()->configurable(false);
  sub->add_option("--length", o.length, "Window length in frames")->capture_default_str();
  sub->add_option("--stride", o.stride, "Window stride in frames")->capture_default_str();
  sub->add_option("--split", o.split, "Subject split preset (lafan1, humaneva, human4d, hdm05)")
      ->capture_default_str();
  sub->add_option("--up-axis", o.up_axis, "Vertical axis of the BVH files")
      ->check(CLI::IsMember({"y", "z"}))
      ->capture_default_str();
  sub->add_option("--scale", o.scale, "Length scale applied to offsets and translations")
      ->capture_default_str();
  sub->add_option("--pattern", o.pattern, "File-name regex: group 1 label, group 2 subject")
      ->capture_default_str();
  sub->add_option("--left-hip", o.left_hip, "Left hip joint name (heading from the hip vector)");
  sub->add_option("--right-hip", o.right_hip, "Right hip joint name");
  sub->callback([&, sub] {
    run = [&, sub] {
      if (o.manifest.empty() && o.bvh_dir.empty()) {
        throw CLI::RequiredError("--manifest or --bvh-dir");
      }
      std::vector<data::ManifestEntry> entries;
      if (!o.manifest.empty()) {
        entries = data::load_manifest(o.manifest);
      } else {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(o.bvh_dir)) {
          if (e.path().extension() == ".bvh") files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
          const auto tags = data::tags_from_filename(f.filename().string(), o.pattern);
          if (!tags.subject) throw InvalidArgument("no subject in file name " + f.string());
          entries.push_back({f, *tags.subject, tags.label});
        }
      }
      if (entries.empty()) throw InvalidArgument("no input files");

      data::BvhOptions bopts;
      bopts.up_axis = o.up_axis == "z" ? data::BvhOptions::UpAxis::kZ : data::BvhOptions::UpAxis::kY;
      bopts.scale = o.scale;
      data::WindowingConfig wcfg;
      wcfg.length = o.length;
      wcfg.stride = o.stride;

      data::DatasetDir ds;
      ds.split = data::SubjectSplit::preset(o.split);
      bool first = true;
      for (const auto& e : entries) {
        auto motion = data::parse_bvh(read_file_text(e.path), bopts);
        if (first) {
          ds.skeleton = motion.skeleton;
          if (!o.left_hip.empty() || !o.right_hip.empty()) {
            const auto& names = ds.skeleton.joint_names();
            auto index = [&](const std::string& n) {
              const auto it = std::find(names.begin(), names.end(), n);
              if (it == names.end()) throw InvalidArgument("no joint named '" + n + "'");
              return static_cast<int>(it - names.begin());
            };
            wcfg.heading.source = geom::HeadingOptions::Source::kHipVector;
            wcfg.heading.left_hip = index(o.left_hip);
            wcfg.heading.right_hip = index(o.right_hip);
          }
          wcfg.heading.root_joint = ds.skeleton.root();
          first = false;
        } else if (motion.skeleton.joint_names() != ds.skeleton.joint_names()) {
          throw InvalidArgument(e.path.string() + ": skeleton differs from the first file");
        }
        const std::uint32_t label = ds.labels.find(e.label).value_or(ds.labels.size());
        if (label == ds.labels.size()) ds.labels.add(e.label);
        for (auto& w : data::make_windows(motion.sequence, wcfg, e.subject, e.path.string())) {
          w.label = label;
          ds.windows.push_back(std::move(w));
        }
      }
      const auto train = data::split_by_subject(ds.windows, ds.split).train;
      if (train.empty()) throw InvalidArgument("no training windows under split " + o.split);
      ds.stats = data::compute_norm_stats(train);
      data::save_dataset(o.out, ds);
      echo_config(*sub, o.out);
      std::cout << "wrote " << ds.windows.size() << " windows (" << ds.labels.size()
                << " labels) to " << o.out << '\n';
    };
  });
}

// ---------------------------------------------------------------- augment

struct AugmentOpts {
  std::string data;
  std::string out;
  std::uint32_t samples = 4;
  std::uint64_t seed = 0;
  std::vector<std::string> labels = {"walk", "run"};
  double kernel_spans = 4.0;
  double length_scale = 0.0;
  double jitter = 1e-8;
  std::string csv_dir;
};

void register_augment(CLI::App& app, AugmentOpts& o, std::function<void()>& run) {
  auto* sub = add_command(app, "augment", "Add Gaussian-random-path variants of root trajectories");
  sub->add_option("--data", o.data, "Input dataset directory")->required();
  sub->add_option("--out", o.out, "Output dataset directory")->required()->configurable(false);
  sub->add_option("--samples", o.samples, "Paths sampled per window")->capture_default_str();
  sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  sub->add_option("--labels", o.labels, "Labels to augment")->delimiter(',')->capture_default_str();
  sub->add_option("--kernel-spans", o.kernel_spans,
                  "Kernel length scales spanned by a path (when --length-scale is 0)")
      ->capture_default_str();
  sub->add_option("--length-scale", o.length_scale, "Kernel length scale in meters (0: auto)")
      ->capture_default_str();
  sub->add_option("--jitter", o.jitter, "Initial diagonal jitter")->capture_default_str();
  sub->add_option("--csv-dir", o.csv_dir, "Write per-window path CSVs here");
  sub->callback([&, sub] {
    run = [&, sub] {
      auto ds = data::load_dataset(o.data);
      grp::GrpConfig base;
      base.n_samples = o.samples;
      base.labels = {o.labels.begin(), o.labels.end()};
      base.kernel_spans = o.kernel_spans;
      if (o.length_scale > 0) base.length_scale = o.length_scale;
      base.jitter = o.jitter;
      base.root_joint = ds.skeleton.root();
      if (!o.csv_dir.empty()) fs::create_directories(o.csv_dir);

      std::vector<data::MotionWindow> added;
      std::size_t skipped = 0;
      for (std::size_t i = 0; i < ds.windows.size(); ++i) {
        grp::GrpConfig cfg = base;
        cfg.seed = derive_seed(o.seed, i);
        auto res = grp::apply_augmentation(ds.windows[i], ds.labels, cfg);
        if (res.skipped) {
          ++skipped;
          continue;
        }
        if (!o.csv_dir.empty()) {
          const auto raw = grp::root_path(ds.windows[i], cfg.root_joint);
          auto aligned = grp::rotate_to_x_axis(raw).path;
          const double x0 = aligned.xs.front(), y0 = aligned.ys.front();
          for (auto& x : aligned.xs) x -= x0;
          for (auto& y : aligned.ys) y -= y0;
          const auto post = grp::grp_posterior(aligned.xs, {0.0, aligned.ys.back()}, cfg);
          std::ostringstream name;
          name << std::setw(6) << std::setfill('0') << i << ".csv";
          std::ofstream csv(fs::path(o.csv_dir) / name.str());
          grp::write_path_csv(csv, aligned, post, grp::sample_paths(post, cfg));
        }
        for (auto& w : res.windows) added.push_back(std::move(w));
      }
      const std::size_t n_orig = ds.windows.size();
      for (auto& w : added) ds.windows.push_back(std::move(w));
      data::save_dataset(o.out, ds);
      echo_config(*sub, o.out);
      std::cout << "augmented " << n_orig - skipped << " of " << n_orig << " windows, "
                << added.size() << " new windows written to " << o.out << '\n';
    };
  });
}

// ---------------------------------------------------------------- train

struct TrainOpts {
  std::string data;
  std::string out;
  train::TrainConfig t;
  model::CmibConfig m;
  std::uint32_t t_max = 0;
  std::string gelu = "tanh";
  std::string resume;
  std::int64_t log_every = 100;
};

void register_train(CLI::App& app, TrainOpts& o, std::function<void()>& run) {
  auto* sub = add_command(app, "train", "Train a model on the training split of a dataset");
  sub->add_option("--data", o.data, "Dataset directory")->required();
  sub->add_option("--out", o.out, "Run directory")->required()->configurable(false);
  sub->add_option("--steps", o.t.steps, "Optimizer steps")->capture_default_str();
  sub->add_option("--batch", o.t.batch_size, "Windows per step")->capture_default_str();
  sub->add_option("--seed", o.t.seed, "Random seed")->capture_default_str();
  sub->add_option("--lr", o.t.optimizer.lr, "Learning rate")->capture_default_str();
  sub->add_option("--beta1", o.t.optimizer.beta1)->capture_default_str();
  sub->add_option("--beta2", o.t.optimizer.beta2)->capture_default_str();
  sub->add_option("--weight-decay", o.t.optimizer.weight_decay)->capture_default_str();
  sub->add_option("--clip", o.t.clip_norm, "Global gradient-norm clip (<= 0 disables)")
      ->capture_default_str();
  sub->add_option("--anchor-prob", o.t.anchor_probability,
                  "Probability of an interior anchor key per item")
      ->capture_default_str();
  sub->add_option("--w-sem", o.t.weights.w_sem, "Semantic loss weight")->capture_default_str();
  sub->add_option("--w-pos", o.t.weights.w_pos, "Position loss weight")->capture_default_str();
  sub->add_option("--w-rot", o.t.weights.w_rot, "Rotation loss weight")->capture_default_str();
  sub->add_flag("--augment", o.t.augment, "Add GRP path variants to the training pool");
  sub->add_option("--grp-samples", o.t.grp.n_samples, "Paths per augmented window")
      ->capture_default_str();
  sub->add_option("--heads", o.m.heads, "Attention heads (must divide 7 * joints)")
      ->capture_default_str();
  sub->add_option("--layers", o.m.layers, "Encoder layers")->capture_default_str();
  sub->add_option("--d-ff", o.m.d_ff, "Feed-forward width")->capture_default_str();
  sub->add_option("--dropout", o.m.dropout, "Dropout rate")->capture_default_str();
  sub->add_option("--context", o.m.context_frames, "Leading key frames")->capture_default_str();
  sub->add_option("--t-max", o.t_max, "Maximum sequence length (0: window length)")
      ->capture_default_str();
  sub->add_option("--gelu", o.gelu, "GeLU variant")
      ->check(CLI::IsMember({"tanh", "erf"}))
      ->capture_default_str();
  sub->add_option("--checkpoint-every", o.t.checkpoint_every, "Steps between checkpoints (0: final only)")
      ->capture_default_str();
  sub->add_option("--resume", o.resume, "Continue from this checkpoint");
  sub->add_option("--log-every", o.log_every, "Print the loss every N steps (0: quiet)")
      ->capture_default_str();
  sub->callback([&, sub] {
    run = [&, sub] {
      const auto ds = data::load_dataset(o.data);
      train::TrainInputs in;
      in.windows = data::split_by_subject(ds.windows, ds.split).train;
      in.labels = ds.labels;
      in.skeleton = ds.skeleton;
      in.stats = ds.stats ? ds.stats : std::optional(data::compute_norm_stats(in.windows));
      if (in.windows.empty()) throw InvalidArgument("dataset has no training windows");

      model::CmibConfig mc = o.m;
      mc.joints = static_cast<std::uint32_t>(ds.skeleton.joint_count());
      mc.n_labels = static_cast<std::uint32_t>(std::max<std::size_t>(1, ds.labels.size()));
      mc.gelu = o.gelu == "erf" ? ad::GeluVariant::kErf : ad::GeluVariant::kTanh;
      std::uint32_t longest = 0;
      for (const auto& w : in.windows) longest = std::max(longest, w.length);
      mc.t_max = o.t_max ? o.t_max : longest;

      train::TrainHooks hooks;
      hooks.run_dir = fs::path(o.out);
      if (!o.resume.empty()) {
        hooks.resume = model::load_checkpoint(o.resume);
        mc = hooks.resume->config;
      }
      if (o.log_every > 0) {
        hooks.on_step = [&](const train::LossRow& r) {
          if (r.step % o.log_every == 0) {
            std::cout << "step " << r.step << "  L_total " << r.loss.total << "  (sem "
                      << r.loss.sem << ", pos " << r.loss.pos << ", rot " << r.loss.rot << ")\n";
          }
        };
      }
      echo_config(*sub, o.out);
      const auto res = train::train(in, mc, o.t, hooks);
      std::cout << "trained " << res.trace.size() << " steps on " << res.pool_size
                << " windows; checkpoint " << (fs::path(o.out) / "model.cmib").string() << '\n';
    };
  });
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
  std::string ckpt;
  std::string data;
  std::string out;
  std::string split = "test";
  std::vector<std::uint32_t> horizons;
  std::vector<int> anchor_frames;
  double radius = 0.5;
  std::uint64_t seed = 0;
  bool semantic = false;
  bool bench = false;
  bool per_window = false;
  std::vector<std::uint32_t> batches = {1, 8, 64};
  std::uint32_t trials = 30;
  unsigned threads = 0;
};

void register_eval(CLI::App& app, EvalOpts& o, std::function<void()>& run) {
  auto* sub = add_command(app, "eval", "Evaluate a checkpoint against baselines");
  sub->add_option("--ckpt", o.ckpt, "Checkpoint file")->required();
  sub->add_option("--data", o.data, "Dataset directory")->required();
  sub->add_option("--out", o.out, "Report directory (default: print tables only)")
      ->configurable(false);
  sub->add_option("--split", o.split, "Windows to evaluate: test, train or all")
      ->capture_default_str();
  sub->add_option("--horizons", o.horizons, "In-betweening horizons (default: window length)")
      ->delimiter(',');
  sub->add_option("--anchor-frames", o.anchor_frames, "Anchor frames for the anchor protocol")
      ->delimiter(',');
  sub->add_option("--radius", o.radius, "Anchor perturbation radius in meters")
      ->capture_default_str();
  sub->add_option("--seed", o.seed, "Perturbation seed")->capture_default_str();
  sub->add_flag("--semantic", o.semantic, "Compute the cross-label L2P matrix");
  sub->add_flag("--bench", o.bench, "Measure inference latency");
  sub->add_option("--batches", o.batches, "Batch sizes for --bench")->delimiter(',')
      ->capture_default_str();
  sub->add_option("--trials", o.trials, "Timed repetitions for --bench")->capture_default_str();
  sub->add_flag("--per-window", o.per_window, "Write per_window.csv");
  sub->add_option("--threads", o.threads, "Worker threads (0: all cores)")->capture_default_str();
  sub->callback([&, sub] {
    run = [&, sub] {
      const auto ck = model::load_checkpoint(o.ckpt);
      const auto ds = data::load_dataset(o.data);
      const auto windows = select_split(ds, o.split);
      if (windows.empty()) throw InvalidArgument("no windows in split '" + o.split + "'");
      const auto m = model::model_from_checkpoint<float>(ck);
      eval::EvalContext ctx;
      ctx.model = &m;
      ctx.skeleton = ck.skeleton;
      ctx.stats = ck.stats ? *ck.stats
                           : (ds.stats ? *ds.stats : throw InvalidArgument("no normalization stats"));
      ctx.labels = ck.labels;
      ctx.context_frames = ck.config.context_frames;
      ctx.threads = o.threads;

      std::vector<std::uint32_t> horizons = o.horizons;
      if (horizons.empty()) horizons.push_back(std::min(windows.front().length, ck.config.t_max));
      eval::EvalReport rep;
      rep.mib = eval::evaluate_mib(ctx, windows, horizons);
      if (!o.anchor_frames.empty()) {
        eval::AnchorEvalConfig ac;
        ac.anchor_frames = o.anchor_frames;
        ac.radius = o.radius;
        ac.seed = o.seed;
        rep.anchor = eval::anchor_eval(ctx, windows, ac);
      }
      if (o.semantic) rep.semantic = eval::semantic_matrix(ctx, windows);
      if (o.bench) {
        rep.latency = eval::bench_inference(m, ck.skeleton, windows.front(), o.batches, horizons,
                                            o.trials);
      }
      eval::write_text_report(std::cout, rep, ck.labels);
      if (!o.out.empty()) {
        fs::create_directories(o.out);
        write_file_text(fs::path(o.out) / "report.json", eval::to_json(rep, ck.labels).dump(2) + "\n");
        std::ostringstream text;
        eval::write_text_report(text, rep, ck.labels);
        write_file_text(fs::path(o.out) / "report.txt", text.str());
        if (o.per_window) {
          std::ostringstream csv;
          eval::write_per_window_csv(csv, *rep.mib);
          write_file_text(fs::path(o.out) / "per_window.csv", csv.str());
        }
        echo_config(*sub, o.out);
      }
    };
  });
}

// ---------------------------------------------------------------- infill

struct InfillOpts {
  std::string ckpt;
  std::string request;
  std::string data;
  std::size_t window = 0;
  std::uint32_t T = 0;
  std::string label;
  int anchor_frame = 0;
  std::string out;
  std::string format;
};

json pose_json(const geom::Pose& p) {
  json pos = json::array(), rot = json::array();
  for (const auto& v : p.positions) pos.push_back({v.x, v.y, v.z});
  for (const auto& q : p.rotations) rot.push_back({q.w, q.x, q.y, q.z});
  return {{"positions", pos}, {"rotations", rot}};
}

geom::Pose pose_from_json(const json& j) {
  const auto& pos = j.at("positions");
  const auto& rot = j.at("rotations");
  geom::Pose p(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    p.positions[i] = {pos[i][0], pos[i][1], pos[i][2]};
    p.rotations[i] = {rot[i][0], rot[i][1], rot[i][2], rot[i][3]};
  }
  return p;
}

void register_infill(CLI::App& app, InfillOpts& o, std::function<void()>& run) {
  auto* sub = add_command(app, "infill", "Generate one in-between sequence");
  sub->add_option("--ckpt", o.ckpt, "Checkpoint file")->required();
  auto* req = sub->add_option("--request", o.request, "Request JSON (same shape as POST /v1/infill)");
  auto* data = sub->add_option("--data", o.data, "Dataset directory to take start/target from");
  req->excludes(data);
  sub->add_option("--window", o.window, "Window index within --data")->capture_default_str();
  sub->add_option("--T", o.T, "Horizon (default: window length)");
  sub->add_option("--label", o.label, "Label name (default: the window's label)");
  sub->add_option("--anchor-frame", o.anchor_frame, "Use the window's pose at this frame as anchor");
  sub->add_option("--out", o.out, "Output file")->required()->configurable(false);
  sub->add_option("--format", o.format, "json or bvh (default: from the extension)")
      ->check(CLI::IsMember({"json", "bvh"}));
  sub->callback([&] {
    run = [&] {
      service::InferenceService svc;
      svc.load(fs::path(o.ckpt));
      json request;
      if (!o.request.empty()) {
        request = json::parse(read_file_text(o.request));
      } else if (!o.data.empty()) {
        const auto ds = data::load_dataset(o.data);
        if (o.window >= ds.windows.size()) {
          throw InvalidArgument("window " + std::to_string(o.window) + " out of " +
                                std::to_string(ds.windows.size()));
        }
        const auto& w = ds.windows[o.window];
        const auto T = o.T ? o.T : w.length;
        if (T > w.length) throw InvalidArgument("--T exceeds the window length");
        request = {{"T", T},
                   {"label", o.label.empty() ? ds.labels.name(w.label) : o.label},
                   {"start", pose_json(w.pose_at(1))},
                   {"target", pose_json(w.pose_at(static_cast<geom::FrameIndex>(T)))}};
        if (o.anchor_frame) {
          request["anchor"] = {{"frame", o.anchor_frame}, {"pose", pose_json(w.pose_at(o.anchor_frame))}};
        }
      } else {
        throw CLI::RequiredError("--request or --data");
      }
      const auto res = svc.handle_infill(request.dump());
      if (res.status != 200) {
        const auto err = json::parse(res.body).at("error");
        throw InvalidArgument(err.at("message").get<std::string>());
      }
      std::string format = o.format;
      if (format.empty()) format = fs::path(o.out).extension() == ".bvh" ? "bvh" : "json";
      if (format == "json") {
        write_file_text(o.out, json::parse(res.body).dump(2) + "\n");
      } else {
        const auto ck = model::load_checkpoint(o.ckpt);
        geom::MotionSequence seq;
        for (const auto& f : json::parse(res.body).at("frames")) seq.frames.push_back(pose_from_json(f));
        data::BvhOptions bopts;
        bopts.up_axis = data::BvhOptions::UpAxis::kZ;
        write_file_text(o.out, data::write_bvh(ck.skeleton, seq, bopts));
      }
      std::cout << "wrote " << o.out << '\n';
    };
  });
}

// ---------------------------------------------------------------- serve

struct ServeOpts {
  std::string ckpt;
  service::ServerOptions server;
  std::string poses_from;
  std::size_t max_poses = 64;
};

void register_serve(CLI::App& app, ServeOpts& o, std::function<void()>& run) {
  auto* sub = add_command(app, "serve", "Serve the HTTP inference API");
  sub->add_option("--ckpt", o.ckpt, "Checkpoint file (default: $CMIB_CHECKPOINT)");
  sub->add_option("--host", o.server.host, "Bind address")->capture_default_str();
  sub->add_option("--port", o.server.port, "Port")->capture_default_str();
  sub->add_option("--cors-origin", o.server.cors_origin, "Allowed CORS origin (empty: none)")
      ->capture_default_str();
  sub->add_option("--poses-from", o.poses_from, "Dataset directory for the pose library");
  sub->add_option("--max-poses", o.max_poses, "Windows used for the pose library")
      ->capture_default_str();
  sub->callback([&] {
    run = [&] {
      std::string path = o.ckpt;
      if (path.empty()) {
        if (const char* env = std::getenv("CMIB_CHECKPOINT")) path = env;
      }
      if (path.empty()) throw CLI::RequiredError("--ckpt (or CMIB_CHECKPOINT)");
      service::InferenceService svc;
      if (!o.poses_from.empty()) {
        const auto ds = data::load_dataset(o.poses_from);
        std::vector<service::NamedPose> poses;
        for (std::size_t i = 0; i < ds.windows.size() && i < o.max_poses; ++i) {
          const auto& w = ds.windows[i];
          const std::string base = "window" + std::to_string(i) + ":" + ds.labels.name(w.label);
          poses.push_back({base + ":first", w.pose_at(1)});
          poses.push_back({base + ":last", w.pose_at(static_cast<geom::FrameIndex>(w.length))});
        }
        svc.set_pose_library(std::move(poses));
      }
      // Load in the background so /healthz answers (and infill reports 503)
      // while a large checkpoint is read.
      std::thread loader([&svc, path] {
        try {
          svc.load(fs::path(path));
          std::cerr << "loaded " << path << '\n';
        } catch (const std::exception& e) {
          std::cerr << "error: " << e.what() << '\n';
          std::exit(1);
        }
      });
      loader.detach();
      std::cerr << "listening on " << o.server.host << ':' << o.server.port << '\n';
      service::run_server(svc, o.server);
    };
  });
}

// ---------------------------------------------------------------- bench

struct BenchOpts {
  std::string ckpt;
  std::vector<std::uint32_t> batches = {1, 8, 64};
  std::vector<std::uint32_t> horizons;
  std::uint32_t trials = 30;
  std::string out;
};

void register_bench(CLI::App& app, BenchOpts& o, std::function<void()>& run) {
  auto* sub = add_command(app, "bench", "Measure inference latency");
  sub->add_option("--ckpt", o.ckpt, "Checkpoint file")->required();
  sub->add_option("--batches", o.batches, "Batch sizes")->delimiter(',')->capture_default_str();
  sub->add_option("--horizons", o.horizons, "Horizons (default: T_max)")->delimiter(',');
  sub->add_option("--trials", o.trials, "Timed repetitions")->capture_default_str();
  sub->add_option("--out", o.out, "Write the latency table as JSON here")->configurable(false);
  sub->callback([&] {
    run = [&] {
      const auto ck = model::load_checkpoint(o.ckpt);
      const auto m = model::model_from_checkpoint<float>(ck);
      auto horizons = o.horizons;
      if (horizons.empty()) horizons.push_back(ck.config.t_max);
      geom::MotionSequence seq;
      seq.frames.assign(ck.config.t_max, rest_pose(ck.skeleton));
      const auto sample = data::MotionWindow::from_sequence(seq, 0, 0, "rest");
      eval::EvalReport rep;
      rep.latency = eval::bench_inference(m, ck.skeleton, sample, o.batches, horizons, o.trials);
      eval::write_text_report(std::cout, rep, ck.labels);
      if (!o.out.empty()) write_file_text(o.out, eval::to_json(rep, ck.labels).dump(2) + "\n");
    };
  });
}

}  // namespace

namespace {

int parse_and_run(int argc, const char* const* argv) {
  CLI::App app{"Keyframe in-betweening: data preparation, training, evaluation and serving",
               "cmib"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::function<void()> run;
  SynthOpts synth;
  PreprocessOpts pre;
  AugmentOpts aug;
  TrainOpts tr;
  EvalOpts ev;
  InfillOpts inf;
  ServeOpts srv;
  BenchOpts bench;
  register_preprocess(app, pre, run);
  register_augment(app, aug, run);
  register_train(app, tr, run);
  register_eval(app, ev, run);
  register_infill(app, inf, run);
  register_serve(app, srv, run);
  register_bench(app, bench, run);
  register_synth(app, synth, run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run) run();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  return dispatch(std::vector<std::string>(argv, argv + argc));
}

int dispatch(const std::vector<std::string>& raw) {
  std::vector<std::string> args;
  try {
    args = expand_config_args(raw);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_and_run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cmib::cli
