#include <gtest/gtest.h>

#include "gazemotion/checkpoint.hpp"
#include "gazemotion/training.hpp"
#include "test_util.hpp"

using namespace gazemotion;

namespace {

Tensor<float> arc(std::size_t t, double start, double step) {
  Tensor<float> g({3, t});
  for (std::size_t f = 0; f < t; ++f) {
    const double a = start + step * static_cast<double>(f);
    g.data()[f] = static_cast<float>(std::sin(a));
    g.data()[t + f] = 0.0f;
    g.data()[2 * t + f] = static_cast<float>(std::cos(a));
  }
  return g;
}

std::vector<GazeSample<float>> gaze_fixture(std::size_t copies) {
  std::vector<GazeSample<float>> out;
  for (std::size_t i = 0; i < copies; ++i) out.push_back({arc(10, 0.0, 0.05), arc(10, 0.5, 0.05)});
  return out;
}

MotionNetConfig tiny_motion() {
  MotionNetConfig c;
  c.n_joints = 3;
  c.observed = 4;
  c.total = 10;
  c.blocks = 2;
  c.latent = 8;
  return c;
}

std::vector<MotionSample<float>> motion_fixture(const MotionNetConfig& c, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 0.3f);
  std::vector<MotionSample<float>> out;
  for (std::size_t i = 0; i < count; ++i) {
    Tensor<float> path({3, c.n_joints, c.total});
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t j = 0; j < c.n_joints; ++j) {
        const float base = d(rng), vel = d(rng) * 0.2f;
        for (std::size_t k = 0; k < c.total; ++k)
          path.data()[(ch * c.n_joints + j) * c.total + k] = base + vel * static_cast<float>(k);
      }
    Tensor<float> gaze({3, c.observed}, 0.0f);
    for (std::size_t k = 0; k < c.observed; ++k) gaze.data()[2 * c.observed + k] = 1.0f;
    out.push_back({fuse(slice(path, 2, 0, c.observed), gaze, c.total), slice(path, 2, c.observed, c.total)});
  }
  return out;
}

}  // namespace

TEST(TrainConfig, Defaults) {
  const auto g = TrainConfig::gaze_defaults();
  EXPECT_EQ(g.lr0, 0.01);
  EXPECT_EQ(g.decay, 0.9);
  EXPECT_EQ(g.epochs, 50u);
  EXPECT_EQ(g.batch, 32u);
  const auto m = TrainConfig::motion_defaults();
  EXPECT_EQ(m.lr0, 0.01);
  EXPECT_EQ(m.decay, 0.95);
  EXPECT_EQ(m.epochs, 100u);
  EXPECT_EQ(m.batch, 32u);
  TrainConfig bad;
  bad.batch = 0;
  EXPECT_THROW(bad.validate(), ArgumentError);
  bad = {};
  bad.decay = 0.0;
  EXPECT_THROW(bad.validate(), ArgumentError);
}

TEST(TrainGaze, LearningRateScheduleAndBatches) {
  auto p = init_gaze_params<float>(0, 8);
  auto cfg = TrainConfig::gaze_defaults();
  cfg.epochs = 3;
  cfg.batch = 2;
  const auto r = train_gaze(p, gaze_fixture(5), cfg);
  ASSERT_EQ(r.steps.size(), 9u);  // partial last batch kept
  EXPECT_NEAR(r.steps[0].lr, 0.01, 1e-15);
  EXPECT_NEAR(r.steps[3].lr, 0.009, 1e-15);
  EXPECT_NEAR(r.steps[6].lr, 0.0081, 1e-15);
  EXPECT_EQ(r.epoch_loss.size(), 3u);
}

TEST(TrainGaze, EmptyDatasetRejected) {
  auto p = init_gaze_params<float>(0, 8);
  EXPECT_THROW(train_gaze(p, {}, TrainConfig::gaze_defaults()), ArgumentError);
}

TEST(TrainGaze, OverfitsIdenticalWindows) {
  auto p = init_gaze_params<float>(1);
  auto cfg = TrainConfig::gaze_defaults();
  cfg.batch = 4;
  cfg.epochs = 200;
  cfg.decay = 1.0;
  const auto data = gaze_fixture(4);
  const auto r = train_gaze(p, data, cfg);
  ASSERT_EQ(r.steps.size(), 200u);
  const double final_loss = angular_loss(gaze_forward(p, data[0].past), data[0].future).item();
  EXPECT_LT(final_loss, 0.1 * r.steps.front().loss);
}

TEST(TrainGaze, SeedFixedRunIsReproducible) {
  auto cfg = TrainConfig::gaze_defaults();
  cfg.epochs = 3;
  cfg.batch = 2;
  auto a = init_gaze_params<float>(2, 8), b = init_gaze_params<float>(2, 8);
  const auto ra = train_gaze(a, gaze_fixture(5), cfg);
  const auto rb = train_gaze(b, gaze_fixture(5), cfg);
  EXPECT_EQ(encode_tensors(a.named()), encode_tensors(b.named()));
  for (std::size_t i = 0; i < ra.steps.size(); ++i) EXPECT_EQ(ra.steps[i].loss, rb.steps[i].loss);
}

TEST(TrainMotion, SeedFixedRunIsBitwiseReproducible) {
  const auto c = tiny_motion();
  const auto data = motion_fixture(c, 6, 1);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 4;
  cfg.seed = 17;
  auto a = init_motion_params<float>(c, 3), b = init_motion_params<float>(c, 3);
  train_motion(a, data, cfg);
  train_motion(b, data, cfg);
  EXPECT_EQ(encode_tensors(a.named()), encode_tensors(b.named()));
  auto other = init_motion_params<float>(c, 3);
  cfg.seed = 18;
  train_motion(other, data, cfg);
  EXPECT_NE(encode_tensors(a.named()), encode_tensors(other.named()));
}

TEST(TrainMotion, VelocityTermLoggedButNotOptimized) {
  const auto c = tiny_motion();
  const auto data = motion_fixture(c, 4, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch = 2;
  auto with = init_motion_params<float>(c, 4), without = init_motion_params<float>(c, 4);
  const auto rw = train_motion(with, data, cfg);
  cfg.velocity_loss = false;
  const auto ro = train_motion(without, data, cfg);
  for (const auto& s : ro.steps) {
    EXPECT_EQ(s.loss, s.motion);
    EXPECT_GT(s.velocity, 0.0);
  }
  for (const auto& s : rw.steps) EXPECT_NEAR(s.loss, s.motion + s.velocity, 1e-6 * s.loss);
  EXPECT_NE(encode_tensors(with.named()), encode_tensors(without.named()));
}

TEST(TrainMotion, OverfitsSmallSet) {
  const auto c = tiny_motion();
  const auto data = motion_fixture(c, 4, 3);
  TrainConfig cfg;
  cfg.epochs = 150;
  cfg.decay = 1.0;
  auto p = init_motion_params<float>(c, 5);
  const auto r = train_motion(p, data, cfg);
  EXPECT_LT(r.steps.back().motion, 0.1 * r.steps.front().motion);
}

TEST(TrainMotion, MaxStepsAndCheckpointHook) {
  const auto c = tiny_motion();
  const auto data = motion_fixture(c, 6, 4);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch = 3;
  cfg.max_steps = 7;
  cfg.checkpoint_every = 2;
  std::vector<std::size_t> saved;
  std::size_t logged = 0;
  cfg.on_checkpoint = [&](std::size_t e) { saved.push_back(e); };
  cfg.on_step = [&](const StepRecord&) { ++logged; };
  auto p = init_motion_params<float>(c, 6);
  const auto r = train_motion(p, data, cfg);
  EXPECT_EQ(r.steps.size(), 7u);
  EXPECT_EQ(logged, 7u);
  EXPECT_EQ(saved, (std::vector<std::size_t>{1, 3}));
}

TEST(TrainMotion, FrozenAdjacenciesStayIdentity) {
  auto c = tiny_motion();
  c.spatial_gcn = false;
  const auto data = motion_fixture(c, 4, 5);
  TrainConfig cfg;
  cfg.epochs = 2;
  auto p = init_motion_params<float>(c, 7);
  train_motion(p, data, cfg);
  EXPECT_EQ(p.start.spatial.values(), Tensor<float>::eye(c.nodes()).values());
  EXPECT_EQ(p.blocks[1].gcn.spatial.values(), Tensor<float>::eye(c.nodes()).values());
}
