#include <gtest/gtest.h>

#include "gazemotion/experiment.hpp"
#include "gazemotion/synth.hpp"
#include "test_util.hpp"

using namespace gazemotion;

namespace {

DatasetManifest tiny_dataset(const std::string& name, std::size_t train, std::size_t test) {
  const auto dir = testutil::scratch_dir(name);
  DatasetManifest m;
  m.name = name;
  m.n_joints = 4;
  m.frame_rate = 30.0;
  for (std::size_t i = 0; i < train + test; ++i) {
    SynthConfig c;
    c.n_joints = 4;
    c.frames = 40;
    c.seed = 100 + i;
    c.gaze_noise = 0.02;
    const auto file = "seq_" + std::to_string(i) + ".gzmo";
    write_sequence(dir / file, synth_generate(c).sequence);
    m.sequences.push_back({file, i < train ? "train" : "test"});
  }
  write_manifest(dir / "manifest.json", m);
  return read_manifest(dir / "manifest.json");
}

MatrixConfig tiny_matrix() {
  MatrixConfig mc;
  mc.model.observed = 4;
  mc.model.total = 10;
  mc.model.blocks = 1;
  mc.model.latent = 4;
  mc.motion_train.epochs = 1;
  mc.motion_train.batch = 16;
  mc.gaze_train.epochs = 1;
  mc.gaze_train.batch = 16;
  mc.train_stride = 4;
  mc.gaze_stride = 4;
  mc.eval_stride = 5;
  mc.horizons_ms = {100, 200};
  return mc;
}

}  // namespace

TEST(Variants, NamesRoundTrip) {
  for (const auto& [v, name] : kVariantNames) EXPECT_EQ(parse_variant(name), v);
  try {
    parse_variant("bogus");
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("no-temporal-gcn"), std::string::npos);
  }
}

TEST(Variants, SpecsMapToConfigurations) {
  const MotionNetConfig base;
  EXPECT_TRUE(apply_variant(base, variant_spec(Variant::full)).gaze_nodes);
  EXPECT_EQ(variant_spec(Variant::full).fusion.source, GazeSource::future_gaze);
  EXPECT_FALSE(apply_variant(base, variant_spec(Variant::no_gaze)).gaze_nodes);
  EXPECT_FALSE(apply_variant(base, variant_spec(Variant::no_spatial_gcn)).spatial_gcn);
  EXPECT_FALSE(apply_variant(base, variant_spec(Variant::no_temporal_gcn)).temporal_gcn);
  EXPECT_FALSE(apply_variant(base, variant_spec(Variant::no_global_residual)).global_residual);
  EXPECT_FALSE(variant_spec(Variant::no_velocity_loss).velocity_loss);
  EXPECT_EQ(variant_spec(Variant::past_head).fusion.source, GazeSource::past_head);
  EXPECT_TRUE(variant_spec(Variant::constant_velocity_baseline).baseline);
}

TEST(PrepareInput, SourcesAndLayouts) {
  SynthConfig c;
  c.n_joints = 3;
  c.frames = 20;
  const auto seq = synth_generate(c).sequence;
  const auto w = windows(seq, 4, 10, 1).front();
  const auto predictor = init_gaze_params<float>(0, 8);
  EXPECT_FALSE(prepare_input<float>(w, {GazeSource::none}, nullptr).has_gaze);
  const auto past = prepare_input<float>(w, {GazeSource::past_head}, nullptr);
  EXPECT_EQ(past.x.at(2, 3, 0), seq.head[2]);
  EXPECT_THROW(prepare_input<float>(w, {GazeSource::future_gaze}, nullptr), ConfigError);
  const auto predicted = gaze_forward(predictor, direction_tensor<float>(w.past_gaze));
  const auto fut = prepare_input<float>(w, {GazeSource::future_gaze, GazeLayout::predicted_only}, &predictor);
  EXPECT_EQ(fut.x.at(1, 4, 0), predicted.at(1, 0));
  EXPECT_EQ(fut.x.at(1, 4, 9), predicted.at(1, 3));
  const auto both = prepare_input<float>(w, {GazeSource::future_gaze, GazeLayout::past_then_predicted}, &predictor);
  EXPECT_EQ(both.x.at(1, 4, 0), w.past_gaze[1]);
  EXPECT_EQ(both.x.at(1, 4, 5), predicted.at(1, 1));
}

TEST(Checkpoints, MotionModelRoundTrip) {
  const auto dir = testutil::scratch_dir("ckpt");
  MotionModel m;
  m.spec = variant_spec(Variant::no_spatial_gcn);
  MotionNetConfig c;
  c.n_joints = 3;
  c.observed = 2;
  c.total = 6;
  c.blocks = 2;
  c.latent = 5;
  m.params = init_motion_params<float>(apply_variant(c, m.spec), 3);
  save_motion_model(dir / "m.gzmt", m);
  EXPECT_TRUE(std::filesystem::exists(dir / "m.gzmt.json"));
  const auto back = load_motion_model(dir / "m.gzmt");
  EXPECT_EQ(back.spec.variant, Variant::no_spatial_gcn);
  EXPECT_EQ(back.params.config.latent, 5u);
  EXPECT_FALSE(back.params.config.spatial_gcn);
  EXPECT_EQ(encode_tensors(back.params.named()), encode_tensors(m.params.named()));
  EXPECT_THROW(load_gaze_model(dir / "m.gzmt"), ConfigError);
}

TEST(RunMatrix, BaselinesOnlyNeedNoTraining) {
  const auto m = tiny_dataset("baselines", 0, 2);
  auto mc = tiny_matrix();
  mc.train = false;
  const auto r = run_matrix({Variant::zero_velocity_baseline, Variant::constant_velocity_baseline}, m, {0, 1}, mc);
  EXPECT_EQ(r.trained_models, 0u);
  ASSERT_EQ(r.cells.size(), 4u);
  EXPECT_EQ(r.cells[0].eval.report.variant, "zero-velocity-baseline");
  EXPECT_EQ(r.cells[0].eval.report.horizons.size(), 2u);
  EXPECT_EQ(r.cells[0].eval.report.average_mm, r.cells[2].eval.report.average_mm);
  EXPECT_NE(r.table.find("constant-velocity-baseline"), std::string::npos);
}

TEST(RunMatrix, MissingCheckpointWithoutTraining) {
  const auto m = tiny_dataset("no_train", 2, 1);
  auto mc = tiny_matrix();
  mc.train = false;
  EXPECT_THROW(run_matrix({Variant::no_gaze}, m, {0}, mc), ConfigError);
}

TEST(RunMatrix, HorizonBeyondPrediction) {
  const auto m = tiny_dataset("horizon", 0, 1);
  auto mc = tiny_matrix();
  mc.horizons_ms = {400};
  EXPECT_THROW(run_matrix({Variant::zero_velocity_baseline}, m, {0}, mc), ArgumentError);
}

TEST(RunMatrix, ReproducibleAndCheckpointsReused) {
  const auto m = tiny_dataset("repro", 3, 1);
  auto mc = tiny_matrix();
  const std::vector<Variant> vs{Variant::full, Variant::no_gaze};
  const auto a = run_matrix(vs, m, {0}, mc);
  const auto b = run_matrix(vs, m, {0}, mc);
  EXPECT_EQ(a.trained_models, 3u);  // gaze predictor + two motion models
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].eval.window_errors, b.cells[i].eval.window_errors);
    EXPECT_EQ(report_csv_row(a.cells[i].eval.report), report_csv_row(b.cells[i].eval.report));
  }

  mc.checkpoint_dir = testutil::scratch_dir("repro_ckpt");
  const auto saved = run_matrix(vs, m, {0}, mc);
  EXPECT_TRUE(std::filesystem::exists(mc.checkpoint_dir / "full-seed0.gzmt"));
  EXPECT_TRUE(std::filesystem::exists(mc.checkpoint_dir / "gaze-gaze-seed0.gzmt"));
  mc.train = false;
  const auto loaded = run_matrix(vs, m, {0}, mc);
  EXPECT_EQ(loaded.trained_models, 0u);
  for (std::size_t i = 0; i < vs.size(); ++i)
    EXPECT_EQ(loaded.cells[i].eval.window_errors, saved.cells[i].eval.window_errors);
}

TEST(ComparisonTable, MeanStdAndPValue) {
  std::vector<MatrixCell> cells;
  for (std::uint64_t s = 0; s < 2; ++s)
    for (auto v : {Variant::full, Variant::no_gaze}) {
      MatrixCell c;
      c.variant = v;
      c.seed = s;
      c.eval.report.horizons = {{200, 6, 10.0 + s}};
      c.eval.report.average_mm = v == Variant::full ? 1.0 + 2.0 * s : 5.0;
      for (int w = 0; w < 8; ++w) c.eval.window_errors.push_back(v == Variant::full ? w : w + 1.0 + 0.1 * w);
      cells.push_back(c);
    }
  const auto t = comparison_table(cells);
  EXPECT_NE(t.find("2.0 +- 1.4"), std::string::npos) << t;
  EXPECT_NE(t.find("5.0 +- 0.0"), std::string::npos) << t;
  EXPECT_NE(t.find("0.00781"), std::string::npos) << t;  // 2/256
}
