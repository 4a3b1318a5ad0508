#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "cmib/data/synthetic.hpp"
#include "cmib/train/trainer.hpp"
#include "generators.hpp"

using namespace cmib;
using namespace cmib::train;

namespace {

train::TrainInputs synthetic_inputs(std::uint32_t n, std::uint64_t seed = 0) {
  data::SyntheticConfig sc;
  sc.n_windows = n;
  sc.seed = seed;
  return {data::gen_synthetic(sc), data::synthetic_labels(sc), data::synthetic_skeleton(4),
          std::nullopt};
}

TrainConfig quick(std::int64_t steps, std::uint64_t seed = 1) {
  TrainConfig c;
  c.steps = steps;
  c.batch_size = 4;
  c.seed = seed;
  c.optimizer.lr = 1e-3;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("key set sampling") {
  Rng rng(1);
  CHECK(sample_key_set(3, 1.0, rng) == std::set<geom::FrameIndex>{1, 2, 3});
  CHECK(sample_key_set(3, 0.0, rng) == std::set<geom::FrameIndex>{1, 3});
  CHECK(sample_key_set(2, 1.0, rng) == std::set<geom::FrameIndex>{1, 2});
  CHECK(sample_key_set(40, 0.0, rng, 5) == std::set<geom::FrameIndex>{1, 2, 3, 4, 5, 40});
  for (int i = 0; i < 1000; ++i) {
    const auto k = sample_key_set(40, 1.0, rng, 5);
    REQUIRE(k.size() == 7);
    const auto anchor = *std::next(k.begin(), 5);
    REQUIRE(anchor >= 6);
    REQUIRE(anchor <= 39);
  }

  SUBCASE("anchor position is uniform over the interior") {
    std::map<geom::FrameIndex, int> counts;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const auto k = sample_key_set(50, 1.0, rng);
      REQUIRE(k.size() == 3);
      ++counts[*std::next(k.begin())];
    }
    REQUIRE(counts.size() == 48);
    CHECK(counts.begin()->first == 2);
    CHECK(counts.rbegin()->first == 49);
    const double expected = n / 48.0;
    double chi2 = 0;
    for (const auto& [k, c] : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 47 degrees of freedom; 0.999 quantile is about 82.7
    CHECK(chi2 < 82.7);
  }

  SUBCASE("half of the items get an anchor") {
    int with = 0;
    for (int i = 0; i < 10000; ++i) with += sample_key_set(32, 0.5, rng).size() == 3;
    CHECK(std::abs(with - 5000) < 200);  // 4 sigma
  }
}

TEST_CASE("loss terms on hand-built predictions") {
  // J = 1, T = 2: columns 0..2 positions, 3..6 quaternion
  const ad::Tensor<double> truth(2, 7, {0, 0, 0, 1, 0, 0, 0, 1, 2, 3, 0, 1, 0, 0});
  const ad::Tensor<double> s(1, 7, {0.5, -0.5, 0, 0, 0, 0, 1});
  ad::Tensor<double> pred(3, 7);
  std::copy(s.values().begin(), s.values().end(), pred.row(0).begin());
  std::copy(truth.values().begin(), truth.values().end(), pred.row(1).begin());

  const model::LossScales unit;
  const LossWeights w;
  auto zero = compute_losses(pred, truth, s, unit, w);
  CHECK(zero.sem == 0.0);
  CHECK(zero.pos == 0.0);
  CHECK(zero.rot == 0.0);
  CHECK(zero.total == 0.0);

  // each position coordinate off by one on one axis per frame
  pred(1, 0) += 1.0;
  pred(2, 1) -= 1.0;
  auto l = compute_losses(pred, truth, s, unit, w);
  CHECK(l.pos == doctest::Approx(1.0 / 3.0));
  CHECK(l.rot == 0.0);
  CHECK(l.total == doctest::Approx(0.05 / 3.0));
  LossWeights doubled = w;
  doubled.w_pos *= 2;
  CHECK(compute_losses(pred, truth, s, unit, doubled).total == doctest::Approx(2 * l.total));
  doubled = w;
  doubled.w_rot *= 2;
  CHECK(compute_losses(pred, truth, s, unit, doubled).total == doctest::Approx(l.total));

  // one quaternion entry off by 0.8 across 8 rotation entries
  pred(2, 4) += 0.8;
  pred(0, 6) = 0.0;
  l = compute_losses(pred, truth, s, model::LossScales{4.0, 2.0, 0.5}, w);
  CHECK(l.rot == doctest::Approx(0.1 / 0.5));
  CHECK(l.sem == doctest::Approx((1.0 / 7.0) / 4.0));
  CHECK(l.pos == doctest::Approx((1.0 / 3.0) / 2.0));
  CHECK(l.total == doctest::Approx(1.5 * l.sem + 0.05 * l.pos + 2.0 * l.rot));

  CHECK_THROWS_AS(compute_losses(ad::Tensor<double>(2, 7), truth, s, unit, w), ShapeError);
}

TEST_CASE("loss scale calibration") {
  const auto in = synthetic_inputs(4);
  model::CmibModel<float> m(testgen::toy_config(), 2);
  std::vector<BatchItem> batch;
  for (const auto& w : in.windows) batch.push_back({&w, {1, 10, 32}});
  const auto scales = calibrate_loss_scales(m, batch);

  double sem = 0, pos = 0, rot = 0;
  for (const auto& item : batch) {
    geom::KeyFrames keys;
    for (auto k : item.keys) keys.emplace(k, item.window->pose_at(k));
    const auto input = m.build_input(keys, 32, item.window->label);
    ad::Tensor<float> s(1, 28);
    std::copy(input.row(0).begin(), input.row(0).end(), s.row(0).begin());
    const auto l = compute_losses<float>(m.forward(input), window_matrix<float>(*item.window), s,
                                         {}, {});
    sem += l.sem / 4;
    pos += l.pos / 4;
    rot += l.rot / 4;
  }
  CHECK(scales.c_sem == doctest::Approx(sem));
  CHECK(scales.c_pos == doctest::Approx(pos));
  CHECK(scales.c_rot == doctest::Approx(rot));

  // all-zero weights produce zero output, so the semantic term hits the floor
  for (auto* p : m.parameters()) p->value.fill(0.0f);
  const auto floored = calibrate_loss_scales(m, batch);
  CHECK(floored.c_sem == 1e-8);
  CHECK(floored.c_pos > 1e-3);
  CHECK_THROWS_AS(calibrate_loss_scales(m, {}), InvalidArgument);
}

TEST_CASE("first step of a dropout-free run sees unit scaled losses") {
  auto cfg = testgen::toy_config();
  cfg.dropout = 0.0;
  const auto r = train::train(synthetic_inputs(8), cfg, quick(1));
  REQUIRE(r.trace.size() == 1);
  CHECK(r.trace[0].loss.sem == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.trace[0].loss.pos == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.trace[0].loss.rot == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(r.trace[0].loss.total == doctest::Approx(1.5 + 0.05 + 2.0).epsilon(1e-4));
}

TEST_CASE("training is deterministic per seed") {
  const auto in = synthetic_inputs(12);
  const auto a = train::train(in, testgen::toy_config(), quick(5));
  const auto b = train::train(in, testgen::toy_config(), quick(5));
  REQUIRE(a.trace.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(a.trace[i].step == static_cast<std::int64_t>(i + 1));
    CHECK(a.trace[i].loss.total == b.trace[i].loss.total);
  }
  CHECK(a.checkpoint.params == b.checkpoint.params);
  CHECK(model::encode_checkpoint(a.checkpoint) == model::encode_checkpoint(b.checkpoint));

  const auto c = train::train(in, testgen::toy_config(), quick(5, 2));
  CHECK(c.checkpoint.params != a.checkpoint.params);
}

TEST_CASE("zero steps leave the initialization untouched") {
  const auto r = train::train(synthetic_inputs(4), testgen::toy_config(), quick(0, 5));
  const model::CmibModel<float> init(testgen::toy_config(), 5);
  const auto ck = model::make_checkpoint(init, {}, r.checkpoint.labels, r.checkpoint.skeleton,
                                         std::nullopt);
  CHECK(r.checkpoint.params == ck.params);
  CHECK(r.trace.empty());
}

TEST_CASE("resume continues step count with stored scales") {
  const auto in = synthetic_inputs(8);
  const auto first = train::train(in, testgen::toy_config(), quick(3));
  TrainHooks hooks;
  hooks.resume = first.checkpoint;
  const auto second = train::train(in, testgen::toy_config(), quick(2), hooks);
  REQUIRE(second.trace.size() == 2);
  CHECK(second.trace.front().step == 4);
  CHECK(second.checkpoint.meta.step == 5);
  CHECK(second.checkpoint.meta.scales == first.checkpoint.meta.scales);
  CHECK(second.checkpoint.params != first.checkpoint.params);
}

TEST_CASE("run directory contents") {
  const auto dir = std::filesystem::temp_directory_path() / "cmib_test_run";
  std::filesystem::remove_all(dir);
  auto cfg = quick(4);
  cfg.checkpoint_every = 2;
  TrainHooks hooks;
  hooks.run_dir = dir;
  int calls = 0;
  hooks.on_step = [&](const LossRow&) { ++calls; };
  const auto r = train::train(synthetic_inputs(6), testgen::toy_config(), cfg, hooks);
  CHECK(calls == 4);
  CHECK(std::filesystem::exists(dir / "config.json"));
  CHECK(std::filesystem::exists(dir / "step_0000002.cmib"));
  CHECK(std::filesystem::exists(dir / "step_0000004.cmib"));
  CHECK(model::encode_checkpoint(model::load_checkpoint(dir / "model.cmib")) ==
        model::encode_checkpoint(r.checkpoint));
  const auto csv = slurp(dir / "loss.csv");
  CHECK(csv.rfind("step,L_sem,L_pos,L_rot,L_total\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  std::filesystem::remove_all(dir);
}

TEST_CASE("augmentation grows the pool") {
  auto cfg = quick(1);
  cfg.augment = true;
  cfg.grp.n_samples = 2;
  const auto in = synthetic_inputs(6);
  const auto r = train::train(in, testgen::toy_config(), cfg);
  // jump windows (every third) are skipped
  CHECK(r.pool_size == 6 + 4 * 2);
}

TEST_CASE("input validation and non-finite losses") {
  auto in = synthetic_inputs(3);
  CHECK_THROWS_AS(train::train({}, testgen::toy_config(), quick(1)), InvalidArgument);
  auto small = testgen::toy_config();
  small.t_max = 16;
  CHECK_THROWS_AS(train::train(in, small, quick(1)), InvalidArgument);
  auto few_labels = testgen::toy_config(2);
  CHECK_THROWS_AS(train::train(in, few_labels, quick(1)), InvalidArgument);
  auto bad = quick(1);
  bad.batch_size = 0;
  CHECK_THROWS_AS(train::train(in, testgen::toy_config(), bad), InvalidArgument);

  for (auto& w : in.windows) w.X[5] = std::numeric_limits<float>::quiet_NaN();
  try {
    train::train(in, testgen::toy_config(), quick(2));
    FAIL("expected NonFiniteLoss");
  } catch (const NonFiniteLoss& e) {
    CHECK(e.step == 1);
    CHECK(!e.last_good);
  }
}
