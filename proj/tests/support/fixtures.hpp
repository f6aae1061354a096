#pragma once

// Deterministic fixture construction. The checked-in files under
// tests/fixtures are produced by exactly this code (see the fixture_gen
// tool); tests regenerate them and compare bytes to guard against drift.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "modelaug/image.hpp"
#include "modelaug/io/feature.hpp"
#include "modelaug/io/plan.hpp"
#include "modelaug/io/pnm.hpp"
#include "modelaug/io/text.hpp"
#include "modelaug/numeric.hpp"
#include "modelaug/rng.hpp"
#include "modelaug/trainer.hpp"

namespace fixtures {

namespace fs = std::filesystem;

inline constexpr std::uint64_t kGaussianSeed = 777001;
inline constexpr std::uint64_t kToySeed = 424243;

// ---------------------------------------------------------------------------
// Gaussian feature fixture: two well-separated spherical Gaussians in 8 dims,
// means at +/- 5/sqrt(8) per coordinate (centre distance 10, unit noise).

inline modelaug::LabeledFeature gaussian_sample(int label, modelaug::SplitMix64& rng) {
  const double mu = (label == 0 ? 5.0 : -5.0) / std::sqrt(8.0);
  modelaug::Vector f(8);
  for (double& v : f) v = mu + rng.normal();
  return {label, f};
}

struct GaussianFixture {
  modelaug::io::FeatureDataset train;         // 50 per class, no softmax
  modelaug::io::FeatureDataset test_uniform;  // 20 per class, softmax (0.5, 0.5)
  modelaug::io::FeatureDataset test_correct;  // same features, softmax 0.9 toward the truth
  modelaug::io::FeatureDataset combined;      // train then test, uniform softmax throughout
};

inline GaussianFixture make_gaussian_fixture() {
  modelaug::SplitMix64 rng(kGaussianSeed);
  auto base = [] {
    modelaug::io::FeatureDataset ds;
    ds.dim = 8;
    ds.classes = {0, 1};
    return ds;
  };
  GaussianFixture fx;
  fx.train = base();
  for (int i = 0; i < 50; ++i)
    for (int c : {0, 1}) fx.train.samples.push_back(gaussian_sample(c, rng));

  fx.test_uniform = base();
  fx.test_uniform.has_softmax = true;
  for (int i = 0; i < 20; ++i)
    for (int c : {0, 1}) {
      fx.test_uniform.samples.push_back(gaussian_sample(c, rng));
      fx.test_uniform.softmax.push_back({0.5, 0.5});
    }

  fx.test_correct = fx.test_uniform;
  fx.test_correct.softmax.clear();
  for (const modelaug::LabeledFeature& s : fx.test_correct.samples)
    fx.test_correct.softmax.push_back(s.label == 0 ? modelaug::Vector{0.9, 0.1}
                                                   : modelaug::Vector{0.1, 0.9});

  fx.combined = base();
  fx.combined.has_softmax = true;
  for (const auto& s : fx.train.samples) {
    fx.combined.samples.push_back(s);
    fx.combined.softmax.push_back({0.5, 0.5});
  }
  for (const auto& s : fx.test_uniform.samples) {
    fx.combined.samples.push_back(s);
    fx.combined.softmax.push_back({0.5, 0.5});
  }
  return fx;
}

inline void write_gaussian_fixture(const fs::path& dir) {
  fs::create_directories(dir);
  const GaussianFixture fx = make_gaussian_fixture();
  modelaug::io::write_feature_file(dir / "train.txt", fx.train);
  modelaug::io::write_feature_file(dir / "test_uniform.txt", fx.test_uniform);
  modelaug::io::write_feature_file(dir / "test_correct.txt", fx.test_correct);
  modelaug::io::write_feature_file(dir / "combined.txt", fx.combined);
}

// ---------------------------------------------------------------------------
// Toy image datasets, 16x16 grayscale, integer pixels in [0, 255].
//
// The checked-in tree (toy_data/) drives the published schedule and the CLI:
// intermediate classes are {top half, bottom half, centre block} bright,
// target classes are {top, bottom} at a shifted contrast. All three patterns
// are invariant under horizontal flips, so the schedule's reflection
// augmentation respects the labels.

inline modelaug::ImageGrid banded_pattern(int cls, int bright, int dark, long offset,
                                          modelaug::SplitMix64& rng) {
  modelaug::ImageGrid img = modelaug::ImageGrid::zeros(16, 16, 1);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      bool lit = false;
      if (cls == 0) lit = y < 8;
      else if (cls == 1) lit = y >= 8;
      else lit = y >= 4 && y < 12 && x >= 4 && x < 12;
      long v = (lit ? bright : dark) + offset + rng.uniform_int(-20, 20);
      img.at(y, x, 0) = static_cast<double>(std::clamp(v, 0l, 255l));
    }
  return img;
}

inline std::vector<modelaug::LabeledImage> toy_intermediate() {
  modelaug::SplitMix64 rng(kToySeed);
  std::vector<modelaug::LabeledImage> out;
  for (int c : {0, 1, 2})
    for (int i = 0; i < 8; ++i)
      out.push_back({c, banded_pattern(c, 180, 60, rng.uniform_int(-30, 30), rng)});
  return out;
}

inline std::vector<modelaug::LabeledImage> toy_target_train() {
  modelaug::SplitMix64 rng(kToySeed + 1);
  std::vector<modelaug::LabeledImage> out;
  for (int c : {0, 1})
    for (int i = 0; i < 3; ++i) out.push_back({c, banded_pattern(c, 150, 90, 0, rng)});
  return out;
}

inline std::vector<modelaug::LabeledImage> unit_scaled(std::vector<modelaug::LabeledImage> set) {
  for (modelaug::LabeledImage& s : set)
    for (double& v : s.image.data) v /= 255.0;
  return set;
}

// Same directory layout the CLI trainer consumes; intermediate images are
// written binary, target images ASCII, to exercise both PNM paths.
inline void write_toy_dataset(const fs::path& dir) {
  auto dump = [](const std::vector<modelaug::LabeledImage>& set, const fs::path& root,
                 bool binary) {
    for (std::size_t i = 0, per_class_idx = 0; i < set.size(); ++i) {
      if (i > 0 && set[i].label != set[i - 1].label) per_class_idx = 0;
      fs::path class_dir = root / std::to_string(set[i].label);
      fs::create_directories(class_dir);
      char name[32];
      std::snprintf(name, sizeof(name), "img%02zu.pgm", per_class_idx++);
      modelaug::io::write_pnm(class_dir / name, set[i].image, binary);
    }
  };
  dump(toy_intermediate(), dir / "intermediate", true);
  dump(toy_target_train(), dir / "target", false);
}

inline modelaug::BackboneConfig toy_backbone_config() {
  modelaug::BackboneConfig cfg;
  cfg.input_h = 16;
  cfg.input_w = 16;
  cfg.kernel = 3;
  cfg.stride = 2;
  cfg.hidden_units = 16;
  cfg.class_ids = {0, 1, 2};
  return cfg;
}

// The published schedule, executed verbatim on the toy task. One optimizer
// step per epoch keeps the parameter movement small at these rates, which is
// exactly what this run verifies: the staging bookkeeping, not convergence.
inline modelaug::TrainResult run_default_plan() {
  using namespace modelaug;
  const auto intermediate = unit_scaled(toy_intermediate());
  const auto target_train = unit_scaled(toy_target_train());
  SplitMix64 rng(kToySeed + 10);
  ToyBackbone model = make_toy_backbone(toy_backbone_config(), rng);
  return run_plan(std::move(model), paper_default_plan(), intermediate, target_train, rng.next());
}

// ---------------------------------------------------------------------------
// Head-to-head instance: left/right classification where the intermediate
// domain is a shifted, plentiful, unconfounded version of the target domain.
// The tiny target training draw carries a brightness confound (bright class-0
// scans, dim class-1 scans) that is uniform over the evaluation distribution,
// so fitting the target set alone latches onto a cue that does not
// generalize. Horizontal flips would break left/right labels, so the staged
// augmentation uses rotation only.

inline modelaug::ImageGrid sided_pattern(int cls, int bright, int dark, long offset,
                                         modelaug::SplitMix64& rng) {
  modelaug::ImageGrid img = modelaug::ImageGrid::zeros(16, 16, 1);
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      const bool lit = (cls == 0) ? x < 8 : x >= 8;
      long v = (lit ? bright : dark) + offset + rng.uniform_int(-15, 15);
      img.at(y, x, 0) = static_cast<double>(std::clamp(v, 0l, 255l));
    }
  return img;
}

inline std::vector<modelaug::LabeledImage> shifted_intermediate() {
  modelaug::SplitMix64 rng(kToySeed + 5);
  std::vector<modelaug::LabeledImage> out;
  for (int c : {0, 1})
    for (int i = 0; i < 12; ++i)
      out.push_back({c, sided_pattern(c, 150, 100, rng.uniform_int(-50, 50), rng)});
  return out;
}

inline std::vector<modelaug::LabeledImage> confounded_target_train() {
  modelaug::SplitMix64 rng(kToySeed + 6);
  std::vector<modelaug::LabeledImage> out;
  for (int c : {0, 1})
    for (int i = 0; i < 3; ++i)
      out.push_back({c, sided_pattern(c, 130, 110, c == 0 ? 50 : -50, rng)});
  return out;
}

inline std::vector<modelaug::LabeledImage> confounded_target_eval() {
  modelaug::SplitMix64 rng(kToySeed + 7);
  std::vector<modelaug::LabeledImage> out;
  for (int c : {0, 1})
    for (int i = 0; i < 16; ++i)
      out.push_back({c, sided_pattern(c, 130, 110, rng.uniform_int(-50, 50), rng)});
  return out;
}

struct HeadToHead {
  double staged_final_eval = 0.0;
  double direct_final_eval = 0.0;
  modelaug::TrainResult staged;
  modelaug::TrainResult direct;
};

// Two-hop transfer vs a single direct stage with the same total epoch
// budget, same init, same data; compared by loss on a held-out target set.
// Rates are scaled up from the published schedule so that 40 full-batch
// steps amount to real training at desk scale.
inline HeadToHead run_head_to_head() {
  using namespace modelaug;
  const auto intermediate = unit_scaled(shifted_intermediate());
  const auto target_train = unit_scaled(confounded_target_train());
  const auto target_eval = unit_scaled(confounded_target_eval());

  const std::vector<ParamGroup> all_groups = {ParamGroup::new_input, ParamGroup::trunk,
                                              ParamGroup::output_head};
  AugmentationPolicy rotation_only;
  rotation_only.rotation_deg = 7.0;

  StagedTransferPlan staged_plan;
  TrainingStage warmup;
  warmup.name = "intermediate-new-layers";
  warmup.role = DatasetRole::intermediate;
  warmup.trainable = {ParamGroup::new_input, ParamGroup::output_head};
  warmup.learning_rate = 1e-2;
  warmup.epochs = 10;
  staged_plan.stages.push_back(warmup);
  TrainingStage full;
  full.name = "intermediate-full-model";
  full.role = DatasetRole::intermediate;
  full.trainable = all_groups;
  full.learning_rate = 1e-2;
  full.epochs = 20;
  full.augment = rotation_only;
  staged_plan.stages.push_back(full);
  TrainingStage finetune;
  finetune.name = "target-finetune";
  finetune.role = DatasetRole::target;
  finetune.trainable = all_groups;
  finetune.learning_rate = 2e-3;
  finetune.lr_multipliers[ParamGroup::output_head] = 10.0;
  finetune.epochs = 10;
  staged_plan.stages.push_back(finetune);

  StagedTransferPlan direct_plan;
  TrainingStage direct_stage = finetune;
  direct_stage.name = "direct-target";
  direct_stage.learning_rate = 1e-2;  // the rate the staged arm trains fresh layers with
  direct_stage.epochs = 40;           // 10 + 20 + 10
  direct_plan.stages.push_back(direct_stage);

  BackboneConfig cfg = toy_backbone_config();
  cfg.class_ids = {0, 1};

  HeadToHead result;
  {
    SplitMix64 rng(kToySeed + 30);
    ToyBackbone model = make_toy_backbone(cfg, rng);
    result.direct = run_plan(std::move(model), direct_plan, intermediate, target_train, rng.next());
    result.direct_final_eval = mean_loss(result.direct.model, target_eval);
  }
  {
    SplitMix64 rng(kToySeed + 30);
    ToyBackbone model = make_toy_backbone(cfg, rng);
    result.staged = run_plan(std::move(model), staged_plan, intermediate, target_train, rng.next());
    result.staged_final_eval = mean_loss(result.staged.model, target_eval);
  }
  return result;
}

inline void write_golden_files(const fs::path& dir) {
  fs::create_directories(dir);
  modelaug::io::write_plan_file(dir / "paper_plan.json", modelaug::paper_default_plan());
  const HeadToHead h = run_head_to_head();
  modelaug::io::atomic_write(dir / "head_to_head.txt",
                             "staged " + modelaug::io::format_double(h.staged_final_eval) +
                                 "\ndirect " + modelaug::io::format_double(h.direct_final_eval) +
                                 "\n");
}

// Small color test cards covering the pixmap formats.
inline void write_pnm_samples(const fs::path& dir) {
  fs::create_directories(dir);
  modelaug::ImageGrid card = modelaug::ImageGrid::zeros(4, 6, 3);
  for (std::size_t y = 0; y < card.height; ++y)
    for (std::size_t x = 0; x < card.width; ++x) {
      card.at(y, x, 0) = static_cast<double>(x * 51);
      card.at(y, x, 1) = static_cast<double>(y * 85);
      card.at(y, x, 2) = static_cast<double>((x + y) * 25);
    }
  modelaug::io::write_pnm(dir / "testcard_ascii.ppm", card, false);
  modelaug::io::write_pnm(dir / "testcard_binary.ppm", card, true);
}

inline void write_all(const fs::path& root) {
  write_gaussian_fixture(root / "gaussian");
  write_toy_dataset(root / "toy_data");
  write_golden_files(root / "golden");
  write_pnm_samples(root / "pnm");
}

}  // namespace fixtures
