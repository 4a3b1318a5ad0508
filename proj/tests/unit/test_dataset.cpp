#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "cmib/data/bvh.hpp"
#include "cmib/data/dataset.hpp"
#include "cmib/data/io.hpp"
#include "cmib/data/labels.hpp"
#include "cmib/data/synthetic.hpp"
#include "cmib/data/window.hpp"
#include "cmib/geom/heading.hpp"
#include "generators.hpp"

using namespace cmib;
using namespace cmib::data;
using geom::Vec3;
namespace fs = std::filesystem;

namespace {

const char* kTwoJoint = R"(HIERARCHY
ROOT hips
{
  OFFSET 0 0 0
  CHANNELS 6 Xposition Yposition Zposition Zrotation Yrotation Xrotation
  JOINT spine
  {
    OFFSET 1 0 0
    CHANNELS 3 Zrotation Yrotation Xrotation
    End Site
    {
      OFFSET 0 0 1
    }
  }
}
MOTION
Frames: 2
Frame Time: 0.04
0.5 0.25 2 0 0 0 0 0 0
0.5 0.25 2 90 0 0 0 0 0
)";

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("cmib_dataset_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

geom::MotionSequence walking_sequence(std::size_t frames, double heading) {
  geom::MotionSequence seq;
  for (std::size_t t = 0; t < frames; ++t) {
    geom::Pose p(3);
    const double s = 0.05 * static_cast<double>(t);
    p.positions[0] = {s * std::cos(heading), s * std::sin(heading), 1.0};
    p.positions[1] = p.positions[0] + Vec3{0, 0.2, -0.5};
    p.positions[2] = p.positions[0] + Vec3{0, -0.2, -0.5};
    p.rotations[0] = geom::Quat::about_z(heading + 0.01 * static_cast<double>(t));
    seq.frames.push_back(p);
  }
  return seq;
}

}  // namespace

TEST_CASE("BVH: zero rotation puts the child at root plus offset") {
  const auto m = parse_bvh(kTwoJoint, {.up_axis = BvhOptions::UpAxis::kZ});
  REQUIRE(m.sequence.length() == 2);
  CHECK(m.sequence.fps == doctest::Approx(25.0));
  CHECK(m.skeleton.joint_names() == std::vector<std::string>{"hips", "spine"});
  CHECK(m.skeleton.ref_lengths()[1] == doctest::Approx(1.0));
  const auto& f = m.sequence.frames[0];
  CHECK((f.positions[0] - Vec3{0.5, 0.25, 2}).norm() < 1e-12);
  CHECK((f.positions[1] - Vec3{1.5, 0.25, 2}).norm() < 1e-12);
}

TEST_CASE("BVH: root yaw turns the child offset about the vertical") {
  const auto m = parse_bvh(kTwoJoint, {.up_axis = BvhOptions::UpAxis::kZ});
  const auto& f = m.sequence.frames[1];
  // Rz(90) applied to (1, 0, 0) by hand
  CHECK((f.positions[1] - Vec3{0.5, 1.25, 2}).norm() < 1e-12);
  CHECK(std::abs(f.rotations[1].w - std::cos(std::numbers::pi / 4)) < 1e-12);
}

TEST_CASE("BVH: Y-up files become Z-up") {
  const auto m = parse_bvh(kTwoJoint, {.up_axis = BvhOptions::UpAxis::kY, .scale = 2.0});
  const auto& f = m.sequence.frames[0];
  // file (x, y, z) maps to (x, -z, y)
  CHECK((f.positions[0] - Vec3{1.0, -4.0, 0.5}).norm() < 1e-12);
  CHECK(m.skeleton.ref_lengths()[1] == doctest::Approx(2.0));
}

TEST_CASE("BVH: errors carry a kind and a line") {
  auto kind_of = [](const std::string& text) {
    try {
      parse_bvh(text);
    } catch (const BvhError& e) {
      CHECK(e.line() > 0);
      return e.kind();
    }
    FAIL("no error");
    return BvhError::Kind::kMalformedHeader;
  };
  std::string t = kTwoJoint;
  CHECK(kind_of(t.substr(0, t.find("MOTION"))) == BvhError::Kind::kMissingSection);
  CHECK(kind_of(std::string(t).replace(t.find("OFFSET 1 0 0"), 12, "OFFSET 1 0")) ==
        BvhError::Kind::kMalformedHeader);
  CHECK(kind_of(std::string(t).replace(t.find("90 0 0 0 0 0"), 12, "90 0 0 0 0")) ==
        BvhError::Kind::kChannelCountMismatch);
  CHECK(kind_of(std::string(t).replace(t.find("90 0 0"), 2, "nan")) == BvhError::Kind::kNonFinite);
  CHECK(kind_of(std::string(t).replace(t.find("Zrotation Yrotation Xrotation\n    End"), 29,
                                       "Yrotation Zrotation Xrotation")) ==
        BvhError::Kind::kUnsupportedChannelOrder);
  try {
    parse_bvh(t.substr(0, t.find("MOTION")));
  } catch (const BvhError& e) {
    CHECK(std::string(e.what()).find("MOTION") != std::string::npos);
  }
}

TEST_CASE("BVH: write then parse reproduces global poses") {
  SyntheticConfig sc;
  sc.n_windows = 3;
  sc.joints = 5;
  const auto windows = gen_synthetic(sc);
  // Synthetic skeletons have no rest offsets; take them from frame 1.
  const auto base = synthetic_skeleton(5);
  const auto seq = windows[0].to_sequence();
  std::vector<Vec3> offsets(5);
  for (std::size_t j = 1; j < 5; ++j) {
    const int p = base.parents()[j];
    offsets[j] = seq.frames[0].rotations[p].conjugate().rotate(seq.frames[0].positions[j] -
                                                                seq.frames[0].positions[p]);
  }
  const geom::Skeleton sk(base.joint_names(), base.parents(), base.ref_lengths(), offsets);
  const std::string text = write_bvh(sk, seq, {.up_axis = BvhOptions::UpAxis::kZ});
  const auto back = parse_bvh(text, {.up_axis = BvhOptions::UpAxis::kZ});
  REQUIRE(back.sequence.length() == seq.length());
  // joints come back in depth-first order; match them by name
  const auto& names = back.skeleton.joint_names();
  for (std::size_t t = 0; t < seq.length(); ++t) {
    for (std::size_t j = 0; j < 5; ++j) {
      const auto k = static_cast<std::size_t>(
          std::find(names.begin(), names.end(), sk.joint_names()[j]) - names.begin());
      REQUIRE(k < 5);
      const auto& a = seq.frames[t];
      const auto& b = back.sequence.frames[t];
      REQUIRE((a.positions[j] - b.positions[k]).norm() < 1e-4);
      REQUIRE(testgen::rotation_gap(a.rotations[j], b.rotations[k]) < 1e-4);
    }
  }
}

TEST_CASE("make_windows") {
  WindowingConfig cfg{.length = 50, .stride = 25};
  const auto seq = walking_sequence(100, 1.2);
  const auto w = make_windows(seq, cfg, 3, "clip");
  REQUIRE(w.size() == 3);
  for (const auto& win : w) {
    CHECK(win.length == 50);
    CHECK(win.subject == 3);
    win.validate(50);
    const auto check = geom::align_heading(win.to_sequence(), 10);
    CHECK(std::abs(check.angle) < 1e-6);  // f32 storage
  }
  // window 2 starts at frame 26: root speed matches frame 26 -> 27 of the source
  const auto s2 = w[1].to_sequence();
  const Vec3 d = s2.frames[1].positions[0] - s2.frames[0].positions[0];
  CHECK(std::hypot(d.x, d.y) == doctest::Approx(0.05).epsilon(1e-5));
  CHECK(make_windows(walking_sequence(49, 0.0), cfg, 1).empty());
}

TEST_CASE("subject splits") {
  SyntheticConfig sc;
  sc.n_windows = 20;
  auto windows = gen_synthetic(sc);
  const auto split = split_by_subject(windows, SubjectSplit::lafan1());
  CHECK(split.train.size() + split.test.size() == windows.size());
  for (const auto& w : split.train) CHECK(w.subject != 5);
  for (const auto& w : split.test) CHECK(w.subject == 5);
  CHECK(SubjectSplit::lafan1().train == std::set<std::uint32_t>{1, 2, 3, 4});
  CHECK(SubjectSplit::lafan1().test == std::set<std::uint32_t>{5});

  const SubjectSplit all_train{{1, 2, 3, 4, 5}, {}};
  CHECK(split_by_subject(windows, all_train).test.empty());

  windows[0].subject = 9;
  CHECK_THROWS_AS(split_by_subject(windows, SubjectSplit::lafan1()), InvalidArgument);
  CHECK_THROWS_AS((SubjectSplit{{1, 2}, {2}}.validate()), InvalidArgument);
}

TEST_CASE("norm stats") {
  MotionWindow a;
  a.joints = 1;
  a.length = 1;
  a.X = {0, 0, 0, 1, 0, 0, 0};
  MotionWindow b = a;
  b.X[1] = 2;
  const auto s = compute_norm_stats({a, b});
  CHECK(s.mean[0] == 0.0);
  CHECK(s.std[0] == kStdFloor);
  CHECK(s.mean[1] == doctest::Approx(1.0));
  CHECK(s.std[1] == doctest::Approx(1.0));
  REQUIRE(s.mean.size() == 3);
  CHECK_THROWS_AS(compute_norm_stats({}), InvalidArgument);
}

TEST_CASE("synthetic data") {
  SyntheticConfig sc;
  sc.seed = 7;
  sc.n_windows = 9;
  const auto a = gen_synthetic(sc);
  const auto b = gen_synthetic(sc);
  REQUIRE(a.size() == 9);
  const auto labels = synthetic_labels(sc);
  const auto sk = synthetic_skeleton(sc.joints);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(encode_window(a[i]) == encode_window(b[i]));
    a[i].validate(sc.length);
    const auto seq = a[i].to_sequence();
    const std::string name = labels.name(a[i].label);
    if (name == "jump") {
      CHECK(std::abs(seq.frames.back().positions[0].z - seq.frames.front().positions[0].z) < 1e-6);
    }
    if (name == "walk") {
      for (std::size_t t = 1; t < seq.length(); ++t) {
        CHECK(seq.frames[t].positions[0].x > seq.frames[t - 1].positions[0].x);
      }
    }
    for (const auto& f : seq.frames) {
      for (std::size_t j = 1; j < sk.joint_count(); ++j) {
        const double len = (f.positions[j] - f.positions[sk.parents()[j]]).norm();
        CHECK(len == doctest::Approx(sk.ref_lengths()[j]).epsilon(1e-5));
      }
    }
  }
  sc.seed = 8;
  CHECK(encode_window(gen_synthetic(sc)[0]) != encode_window(a[0]));
}

TEST_CASE("window file round trip") {
  Rng rng(3);
  MotionWindow w;
  w.joints = 3;
  w.length = 5;
  w.label = 2;
  w.subject = 4;
  w.fps = 24.0f;
  for (int t = 0; t < 5; ++t) {
    std::vector<float> row(21);
    vectorize<float>(testgen::pose(rng, 3), row);
    w.X.insert(w.X.end(), row.begin(), row.end());
  }
  const auto bytes = encode_window(w);
  CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "CMIBW");
  const auto back = decode_window(bytes);
  CHECK(back.X == w.X);
  CHECK(back.label == 2);
  CHECK(back.subject == 4);
  CHECK(back.fps == 24.0f);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_window(bad), IoError);
  CHECK_THROWS_AS(decode_window(std::span(bytes).first(bytes.size() - 4)), IoError);

  const fs::path dir = scratch_dir("window");
  write_window_file(dir / "a.cmibw", w);
  CHECK(read_window_file(dir / "a.cmibw").X == w.X);
}

TEST_CASE("label table and file tags") {
  LabelTable t;
  CHECK(t.add("walk") == 0);
  CHECK(t.add("run") == 1);
  CHECK(t.add("walk") == 0);
  CHECK(t.name(1) == "run");
  CHECK(!t.find("jump"));
  CHECK_THROWS_AS(t.id("jump"), InvalidArgument);

  const auto tags = tags_from_filename("/data/walk3_subject5.bvh");
  CHECK(tags.label == "walk");
  CHECK(tags.subject == 5u);
  CHECK_THROWS_AS(tags_from_filename("readme.txt"), InvalidArgument);
  CHECK(hdm05_subject_id("mm") == 3);
}

TEST_CASE("dataset directory and manifest round trip") {
  SyntheticConfig sc;
  sc.n_windows = 6;
  DatasetDir ds;
  ds.windows = gen_synthetic(sc);
  ds.labels = synthetic_labels(sc);
  ds.skeleton = synthetic_skeleton(sc.joints);
  ds.split = SubjectSplit::lafan1();
  ds.stats = compute_norm_stats(ds.windows);
  const fs::path dir = scratch_dir("dir");
  save_dataset(dir, ds);
  const auto back = load_dataset(dir);
  REQUIRE(back.windows.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(back.windows[i].X == ds.windows[i].X);
  CHECK(back.labels == ds.labels);
  CHECK(back.skeleton.parents() == ds.skeleton.parents());
  CHECK(back.stats->std == ds.stats->std);
  CHECK(back.split.test == ds.split.test);
  CHECK_THROWS_AS(load_dataset(dir / "missing"), IoError);

  std::ofstream(dir / "manifest.json")
      << R"({"entries": [{"path": "clips/a.bvh", "subject": 2, "label": "walk"},
                         {"path": "/abs/b.bvh", "subject": "dg", "label": "run"}]})";
  const auto m = load_manifest(dir / "manifest.json");
  REQUIRE(m.size() == 2);
  CHECK(m[0].path == dir / "clips/a.bvh");
  CHECK(m[1].subject == 2);
  CHECK(m[1].label == "run");
}
