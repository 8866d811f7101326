// Small end-to-end run: synthesize a corpus, train the gaze and motion
// networks for a few epochs, and compare against the two baselines.
#include <cstdio>
#include <iostream>

#include "gazemotion/experiment.hpp"
#include "gazemotion/synth.hpp"

using namespace gazemotion;

int main() {
  std::vector<MotionSequence> train, test;
  for (std::uint64_t i = 0; i < 12; ++i) {
    SynthConfig c;
    c.n_joints = 12;
    c.frames = 200;
    c.seed = i;
    c.gaze_noise = 0.05;
    c.pose_noise = 0.005;
    (i < 10 ? train : test).push_back(synth_generate(c).sequence);
  }

  MotionNetConfig base;
  base.n_joints = 12;
  base.blocks = 4;
  const auto train_windows = collect_windows(train, base.observed, base.total, 5);
  const auto test_windows = collect_windows(test, base.observed, base.total, 5);

  auto gaze_cfg = TrainConfig::gaze_defaults();
  gaze_cfg.epochs = 5;
  auto gaze = std::make_shared<const GazeModel>(train_gaze_model(train, DirectionStream::gaze, 10, 5, gaze_cfg));

  auto motion_cfg = TrainConfig::motion_defaults();
  motion_cfg.epochs = 10;
  const auto offsets = horizon_frames({200, 400, 600, 800, 1000}, 30.0);

  std::vector<EvalReport> reports;
  for (auto v : {Variant::full, Variant::no_gaze, Variant::zero_velocity_baseline,
                 Variant::constant_velocity_baseline}) {
    const auto spec = variant_spec(v);
    std::shared_ptr<const MotionModel> model;
    if (!spec.baseline) {
      std::printf("training %s on %zu windows\n", variant_name(v).c_str(), train_windows.size());
      model = std::make_shared<const MotionModel>(
          train_motion_model(train_windows, spec, base, &gaze->params, motion_cfg));
    }
    auto ev = evaluate_windows(test_windows, make_predictor(spec, model, gaze), offsets, 30.0);
    ev.report.variant = variant_name(v);
    reports.push_back(ev.report);
  }
  std::cout << '\n' << render_table(reports);
}
