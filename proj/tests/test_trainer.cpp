#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "modelaug/io/plan.hpp"
#include "modelaug/trainer.hpp"
#include "support/fixtures.hpp"

using namespace modelaug;

namespace {

std::vector<LabeledImage> random_batch(std::size_t count, std::size_t h, std::size_t w,
                                       int classes, SplitMix64& rng) {
  std::vector<LabeledImage> out;
  for (std::size_t i = 0; i < count; ++i) {
    ImageGrid img = ImageGrid::zeros(h, w, 1);
    for (double& v : img.data) v = rng.uniform(0.0, 1.0);
    out.push_back({static_cast<int>(i) % classes, std::move(img)});
  }
  return out;
}

ToyBackbone small_model(bool norm, std::uint64_t seed) {
  BackboneConfig cfg;
  cfg.input_h = 8;
  cfg.input_w = 8;
  cfg.kernel = 3;
  cfg.stride = 2;
  cfg.hidden_units = 8;
  cfg.adapter_norm = norm;
  cfg.class_ids = {0, 1};
  SplitMix64 rng(seed);
  return make_toy_backbone(cfg, rng);
}

// central differences against the analytic batch gradients, every parameter
double max_gradcheck_error(ToyBackbone& model, const std::vector<LabeledImage>& batch) {
  Gradients grads = Gradients::zeros_like(model);
  batch_gradients(model, batch, grads);

  const double h = 1e-5;
  double worst = 0.0;
  for (ParamGroup group : {ParamGroup::new_input, ParamGroup::trunk, ParamGroup::output_head}) {
    std::vector<double*> params = detail::group_params(model, group);
    std::vector<const double*> analytic = detail::group_grads(grads, group, model.adapter_norm);
    REQUIRE(params.size() == analytic.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double saved = *params[i];
      *params[i] = saved + h;
      const double up = mean_loss(model, batch);
      *params[i] = saved - h;
      const double down = mean_loss(model, batch);
      *params[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double a = *analytic[i];
      const double denom = std::max({std::abs(a), std::abs(fd), 1e-9 / 1e-4});
      const double rel = std::abs(a - fd) / denom;
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("the default plan carries the published hyperparameters") {
  StagedTransferPlan plan = paper_default_plan();
  REQUIRE(plan.stages.size() == 4);

  const TrainingStage& s1 = plan.stages[0];
  CHECK(s1.learning_rate == 1e-3);
  CHECK(s1.epochs == 5);
  CHECK(s1.role == DatasetRole::intermediate);
  CHECK(s1.trainable == std::vector<ParamGroup>{ParamGroup::new_input, ParamGroup::output_head});
  CHECK_FALSE(s1.augment.any());

  const TrainingStage& s2 = plan.stages[1];
  CHECK(s2.learning_rate == 1e-4);
  CHECK(s2.epochs == 5);
  CHECK(s2.trainable == s1.trainable);
  CHECK(s2.augment.rotation_deg == 7.0);
  CHECK(s2.augment.horizontal_flip);
  CHECK(s2.augment.crop_fraction == 850.0 / 1024.0);

  const TrainingStage& s3 = plan.stages[2];
  CHECK(s3.learning_rate == 1e-5);
  CHECK(s3.epochs == 5);
  CHECK(s3.trainable.size() == 3);
  CHECK(s3.augment.rotation_deg == 7.0);

  const TrainingStage& s4 = plan.stages[3];
  CHECK(s4.role == DatasetRole::target);
  CHECK(s4.learning_rate == 5e-4);
  CHECK(s4.epochs == 6);
  CHECK(s4.lr_multipliers.at(ParamGroup::output_head) == 10.0);
  CHECK(s4.augment.scale_range->first == 0.9);
  CHECK(s4.augment.scale_range->second == 1.1);
  CHECK(s4.augment.translate_px == 5);
  CHECK(s4.augment.horizontal_flip);

  CHECK_NOTHROW(validate_plan(plan));
}

TEST_CASE("plan serialization round trips") {
  const StagedTransferPlan plan = paper_default_plan();
  const std::string text = io::plan_to_string(plan);
  const StagedTransferPlan parsed = io::plan_from_json(nlohmann::json::parse(text));
  CHECK(io::plan_to_string(parsed) == text);
}

TEST_CASE("plan validation rejects broken stages") {
  StagedTransferPlan plan = paper_default_plan();
  SECTION("zero epochs") {
    plan.stages[0].epochs = 0;
    CHECK_THROWS_AS(validate_plan(plan), invalid_input);
  }
  SECTION("nonpositive learning rate") {
    plan.stages[1].learning_rate = 0.0;
    CHECK_THROWS_AS(validate_plan(plan), invalid_input);
  }
  SECTION("no trainable groups") {
    plan.stages[2].trainable.clear();
    CHECK_THROWS_AS(validate_plan(plan), invalid_input);
  }
  SECTION("bad crop fraction") {
    plan.stages[1].augment.crop_fraction = 1.5;
    CHECK_THROWS_AS(validate_plan(plan), invalid_input);
  }
  SECTION("no stages") { CHECK_THROWS_AS(validate_plan(StagedTransferPlan{}), invalid_input); }
}

TEST_CASE("uniform logits give ln(num_classes) loss") {
  ToyBackbone model = small_model(false, 1);
  for (double& w : model.output.weights.data) w = 0.0;
  model.output.bias.assign(2, 0.0);
  SplitMix64 rng(2);
  auto batch = random_batch(3, 8, 8, 2, rng);
  CHECK(mean_loss(model, batch) == Catch::Approx(std::log(2.0)).margin(1e-12));

  ClassScores scores = forward(model, batch[0].image);
  CHECK(scores.scores[0] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("logit gradient is softmax minus one-hot") {
  ToyBackbone model = small_model(false, 3);
  SplitMix64 rng(4);
  auto batch = random_batch(1, 8, 8, 2, rng);
  batch[0].label = 1;

  ClassScores probs = forward(model, batch[0].image);
  Gradients grads = Gradients::zeros_like(model);
  backward(model, batch[0].image, batch[0].label, grads);
  CHECK(grads.output_b[0] == Catch::Approx(probs.scores[0]).margin(1e-12));
  CHECK(grads.output_b[1] == Catch::Approx(probs.scores[1] - 1.0).margin(1e-12));
}

TEST_CASE("analytic gradients match central differences") {
  SplitMix64 rng(5);
  auto batch = random_batch(2, 8, 8, 2, rng);
  SECTION("plain adapter") {
    ToyBackbone model = small_model(false, 6);
    CHECK(max_gradcheck_error(model, batch) <= 1e-4);
  }
  SECTION("with the normalization stage") {
    ToyBackbone model = small_model(true, 7);
    CHECK(max_gradcheck_error(model, batch) <= 1e-4);
  }
}

TEST_CASE("backward rejects unknown labels and wrong shapes") {
  ToyBackbone model = small_model(false, 8);
  Gradients grads = Gradients::zeros_like(model);
  CHECK_THROWS_AS(backward(model, ImageGrid::zeros(8, 8, 1), 9, grads), invalid_input);
  CHECK_THROWS_AS(backward(model, ImageGrid::zeros(4, 8, 1), 0, grads), invalid_input);
}

TEST_CASE("adam_step mechanics") {
  SECTION("zero gradient is a fixed point") {
    ToyBackbone model = small_model(false, 9);
    const ToyBackbone before = model;
    AdamState state;
    Gradients zero = Gradients::zeros_like(model);
    adam_step(state, model, zero, {{ParamGroup::output_head, 0.1}});
    CHECK(parameter_distance(before, model) == 0.0);
  }
  SECTION("first step moves by about the learning rate") {
    ToyBackbone model = small_model(false, 10);
    const double old_value = model.output.bias[0];
    AdamState state;
    Gradients grads = Gradients::zeros_like(model);
    grads.output_b[0] = 0.37;  // positive gradient, arbitrary magnitude
    adam_step(state, model, grads, {{ParamGroup::output_head, 0.01}});
    CHECK(model.output.bias[0] == Catch::Approx(old_value - 0.01).epsilon(1e-6));
  }
  SECTION("three steps on a quadratic match a hand-stepped trace") {
    ToyBackbone model = small_model(false, 11);
    model.output.bias[0] = 1.0;
    AdamState state;
    const double lr = 0.1;

    double theta = 1.0, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
      Gradients grads = Gradients::zeros_like(model);
      grads.output_b[0] = model.output.bias[0];  // gradient of 0.5 * theta^2
      adam_step(state, model, grads, {{ParamGroup::output_head, lr}});

      const double g = theta;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mhat = m / (1.0 - std::pow(0.9, t));
      const double vhat = v / (1.0 - std::pow(0.999, t));
      theta -= lr * mhat / (std::sqrt(vhat) + 1e-8);
      REQUIRE(model.output.bias[0] == Catch::Approx(theta).margin(1e-15));
    }
  }
  SECTION("groups outside the rate map stay bitwise frozen") {
    ToyBackbone model = small_model(false, 12);
    const Vector trunk_before = model.hidden.weights.data;
    const std::vector<double> conv_before = model.adapter.weights;
    AdamState state;
    Gradients grads = Gradients::zeros_like(model);
    for (double& g : grads.hidden_w.data) g = 1.0;
    for (double& g : grads.conv_w) g = 1.0;
    for (double& g : grads.output_w.data) g = 1.0;
    adam_step(state, model, grads, {{ParamGroup::output_head, 0.1}});
    CHECK(model.hidden.weights.data == trunk_before);
    CHECK(model.adapter.weights == conv_before);
    CHECK(state.groups.count(ParamGroup::trunk) == 0);
  }
}

TEST_CASE("run_plan freezes untrained groups and responds to training") {
  const auto intermediate = fixtures::unit_scaled(fixtures::toy_intermediate());
  const auto target = fixtures::unit_scaled(fixtures::toy_target_train());

  BackboneConfig cfg;
  cfg.input_h = 16;
  cfg.input_w = 16;
  cfg.class_ids = {0, 1, 2};
  SplitMix64 rng(13);
  ToyBackbone model = make_toy_backbone(cfg, rng);
  const Vector trunk_before = model.hidden.weights.data;

  StagedTransferPlan plan;
  TrainingStage stage;
  stage.name = "warmup";
  stage.role = DatasetRole::intermediate;
  stage.trainable = {ParamGroup::new_input, ParamGroup::output_head};
  stage.learning_rate = 1e-3;
  stage.epochs = 4;
  plan.stages.push_back(stage);

  TrainResult result = run_plan(model, plan, intermediate, target, 99);
  CHECK(result.model.hidden.weights.data == trunk_before);  // trunk untouched
  REQUIRE(result.trace.size() == 4);
  CHECK(result.trace.front().stage_name == "warmup");
  CHECK(result.trace.back().eval_loss < result.trace.front().eval_loss);

  ClassScores probs = forward(result.model, intermediate.front().image);
  double sum = 0.0;
  for (double p : probs.scores) sum += p;
  CHECK(std::abs(sum - 1.0) <= 1e-9);
}

TEST_CASE("run_plan with a vanishing learning rate leaves parameters in place") {
  const auto intermediate = fixtures::unit_scaled(fixtures::toy_intermediate());
  const auto target = fixtures::unit_scaled(fixtures::toy_target_train());
  BackboneConfig cfg;
  cfg.input_h = 16;
  cfg.input_w = 16;
  cfg.class_ids = {0, 1, 2};
  SplitMix64 rng(14);
  ToyBackbone model = make_toy_backbone(cfg, rng);

  StagedTransferPlan plan;
  TrainingStage stage;
  stage.name = "frozen";
  stage.role = DatasetRole::intermediate;
  stage.trainable = {ParamGroup::new_input, ParamGroup::trunk, ParamGroup::output_head};
  stage.learning_rate = 1e-30;
  stage.epochs = 3;
  plan.stages.push_back(stage);

  TrainResult result = run_plan(model, plan, intermediate, target, 99);
  CHECK(parameter_distance(model, result.model) <= 1e-12);
}

TEST_CASE("run_plan is deterministic for a fixed seed") {
  const auto intermediate = fixtures::unit_scaled(fixtures::toy_intermediate());
  const auto target = fixtures::unit_scaled(fixtures::toy_target_train());
  BackboneConfig cfg;
  cfg.input_h = 16;
  cfg.input_w = 16;
  cfg.class_ids = {0, 1, 2};

  auto run_once = [&]() {
    SplitMix64 rng(15);
    ToyBackbone model = make_toy_backbone(cfg, rng);
    return run_plan(model, paper_default_plan(), intermediate, target, 9000);
  };
  TrainResult a = run_once();
  TrainResult b = run_once();
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    REQUIRE(a.trace[i].train_loss == b.trace[i].train_loss);
    REQUIRE(a.trace[i].eval_loss == b.trace[i].eval_loss);
  }
  CHECK(parameter_distance(a.model, b.model) == 0.0);
}

TEST_CASE("run_plan reinitializes the head when the class set changes") {
  const auto intermediate = fixtures::unit_scaled(fixtures::toy_intermediate());  // 3 classes
  const auto target = fixtures::unit_scaled(fixtures::toy_target_train());        // 2 classes
  BackboneConfig cfg;
  cfg.input_h = 16;
  cfg.input_w = 16;
  cfg.class_ids = {0, 1, 2};
  SplitMix64 rng(16);
  ToyBackbone model = make_toy_backbone(cfg, rng);
  REQUIRE(model.output.weights.rows == 3);

  TrainResult result = run_plan(model, paper_default_plan(), intermediate, target, 77);
  CHECK(result.model.class_ids == std::vector<int>{0, 1});
  CHECK(result.model.output.weights.rows == 2);
}

TEST_CASE("run_plan propagates empty datasets as errors") {
  BackboneConfig cfg;
  cfg.input_h = 16;
  cfg.input_w = 16;
  cfg.class_ids = {0, 1, 2};
  SplitMix64 rng(17);
  ToyBackbone model = make_toy_backbone(cfg, rng);
  const auto intermediate = fixtures::unit_scaled(fixtures::toy_intermediate());
  CHECK_THROWS_AS(run_plan(model, paper_default_plan(), intermediate, {}, 1), invalid_input);
}

TEST_CASE("each stage of the default plan reduces its training loss") {
  const TrainResult result = fixtures::run_default_plan();
  const auto& trace = result.trace;
  REQUIRE(trace.size() == 21);  // 5 + 5 + 5 + 6
  for (std::size_t stage = 0; stage < 4; ++stage) {
    double first = 0.0, last = 0.0;
    bool seen = false;
    for (const EpochRecord& r : trace) {
      if (r.stage_index != stage) continue;
      if (!seen) {
        first = r.eval_loss;
        seen = true;
      }
      last = r.eval_loss;
    }
    REQUIRE(seen);
    CHECK(last < first);
  }
}

TEST_CASE("staged transfer beats direct training on the held-out target set") {
  fixtures::HeadToHead h = fixtures::run_head_to_head();
  CHECK(h.staged_final_eval < h.direct_final_eval);

  // pinned against the recorded run
  const auto lines = io::read_lines(std::string(FIXTURE_DIR) + "/golden/head_to_head.txt");
  REQUIRE(lines.size() >= 2);
  const double golden_staged = io::parse_double(io::split_tokens(lines[0])[1]);
  const double golden_direct = io::parse_double(io::split_tokens(lines[1])[1]);
  CHECK(h.staged_final_eval == Catch::Approx(golden_staged).epsilon(1e-4));
  CHECK(h.direct_final_eval == Catch::Approx(golden_direct).epsilon(1e-4));
}

TEST_CASE("backbone construction validates its geometry") {
  SplitMix64 rng(18);
  BackboneConfig cfg;
  cfg.input_h = 9;  // odd
  cfg.input_w = 8;
  CHECK_THROWS_AS(make_toy_backbone(cfg, rng), invalid_input);
  cfg.input_h = 8;
  cfg.stride = 5;  // cannot halve 8 with any padding below the kernel
  CHECK_THROWS_AS(make_toy_backbone(cfg, rng), invalid_input);
  cfg.stride = 2;
  cfg.class_ids = {0};
  CHECK_THROWS_AS(make_toy_backbone(cfg, rng), invalid_input);
}
