// Command line surface: build-dict, encode, predict, evaluate, split, plan,
// train-toy. Exit codes: 0 ok, 2 usage, 3 data, 4 numeric.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "modelaug/coders.hpp"
#include "modelaug/dictionary.hpp"
#include "modelaug/errors.hpp"
#include "modelaug/io/checkpoint.hpp"
#include "modelaug/io/feature.hpp"
#include "modelaug/io/plan.hpp"
#include "modelaug/io/pnm.hpp"
#include "modelaug/io/report.hpp"
#include "modelaug/io/text.hpp"
#include "modelaug/predictor.hpp"
#include "modelaug/trainer.hpp"

namespace fs = std::filesystem;
using namespace modelaug;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonParams {
  std::size_t k = 50;
  double lambda = 2.0;
  std::string fusion_norm = "l2";
  double pooled_weight = 1.0;
  int positive_class = 1;
  bool no_normalize = false;

  PipelineParams pipeline() const {
    PipelineParams p;
    p.k = k;
    p.lambda = lambda;
    p.fusion_norm = fusion_norm_from_string(fusion_norm);
    p.pooled_weight = pooled_weight;
    p.positive_class = positive_class;
    p.dict_options.normalize = !no_normalize;
    return p;
  }
};

void add_coding_flags(CLI::App* cmd, CommonParams& p) {
  cmd->add_option("--k", p.k, "Sparsity threshold for the greedy pursuit")->capture_default_str();
  cmd->add_option("--lambda", p.lambda, "Ridge weight for the dense representation")
      ->capture_default_str();
  cmd->add_option("--fusion-norm", p.fusion_norm, "Normalization used when fusing codes")
      ->check(CLI::IsMember({"l2", "l1", "max-abs"}))
      ->capture_default_str();
}

void cmd_build_dict(const std::string& features_path, const std::string& out_path,
                    bool no_normalize) {
  const io::FeatureDataset ds = io::read_feature_file(features_path);
  BuildOptions options;
  options.normalize = !no_normalize;
  options.declared_classes = ds.classes;
  const Dictionary dict = build_dictionary(ds.samples, options);
  io::write_dictionary_file(out_path, dict);
  std::cout << "dictionary: " << dict.dim() << "x" << dict.size() << " over "
            << dict.class_spans.size() << " classes -> " << out_path << "\n";
}

void cmd_encode(const std::string& dict_path, const std::string& features_path,
                const std::string& out_path, const CommonParams& params,
                const std::string& emit) {
  const Dictionary dict = io::read_dictionary_file(dict_path);
  const io::FeatureDataset ds = io::read_feature_file(features_path);
  const PipelineParams p = params.pipeline();
  std::vector<Vector> rows;
  rows.reserve(ds.samples.size());
  for (const LabeledFeature& s : ds.samples) {
    if (emit == "sparse") {
      rows.push_back(omp_encode(dict, s.features, p.k).expand());
    } else if (emit == "dense") {
      rows.push_back(dense_encode(dict, s.features, p.lambda).coefficients);
    } else {
      const SparseCode sparse = omp_encode(dict, s.features, p.k);
      const DenseCode dense = dense_encode(dict, s.features, p.lambda);
      rows.push_back(fuse(sparse, dense, p.fusion_norm).coefficients);
    }
  }
  io::write_codes_file(out_path, dict.size(), rows);
  std::cout << "encoded " << rows.size() << " sample(s) -> " << out_path << "\n";
}

void cmd_predict(const std::string& dict_path, const std::string& test_path,
                 const std::string& out_path, const CommonParams& params) {
  const Dictionary dict = io::read_dictionary_file(dict_path);
  const io::FeatureDataset ds = io::read_feature_file(test_path);
  if (!ds.has_softmax) throw io_error(test_path + ": predict needs softmax columns");
  if (ds.classes != dict.class_ids())
    throw io_error(test_path + ": class set does not match the dictionary");
  const PipelineParams p = params.pipeline();
  std::vector<io::PredictionRow> rows;
  rows.reserve(ds.samples.size());
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    ClassScores softmax{ds.classes, ds.softmax[i]};
    const AugmentedPrediction pred = predict_augmented(dict, ds.samples[i].features, softmax, p);
    io::PredictionRow row;
    row.has_label = true;
    row.label = ds.samples[i].label;
    row.predicted = pred.predicted;
    row.augmented = pred.augmented.scores;
    rows.push_back(std::move(row));
  }
  io::write_predictions_file(out_path, ds.classes, rows);
  std::cout << "predicted " << rows.size() << " sample(s) -> " << out_path << "\n";
}

void cmd_evaluate(const std::string& train_path, const std::string& test_path,
                  const std::string& data_path, const std::string& out_prefix,
                  const CommonParams& params, const SplitSpec& split_spec) {
  const PipelineParams p = params.pipeline();
  EvalReport report;
  if (!data_path.empty()) {
    const io::FeatureDataset ds = io::read_feature_file(data_path);
    if (!ds.has_softmax) throw io_error(data_path + ": evaluate needs softmax columns");
    SplitSpec spec = split_spec;
    spec.total = ds.samples.size();
    report = evaluate_draws(io::scored_samples(ds), spec, p);
  } else {
    const io::FeatureDataset train = io::read_feature_file(train_path);
    const io::FeatureDataset test = io::read_feature_file(test_path);
    if (!test.has_softmax) throw io_error(test_path + ": evaluate needs softmax columns");
    if (train.classes != test.classes)
      throw io_error("train and test class sets differ");
    std::vector<DrawResult> draws = {evaluate_pipeline(train.samples, io::scored_samples(test), p)};
    report = make_report(std::move(draws));
  }
  const fs::path table = out_prefix + ".tsv";
  const fs::path text = out_prefix + ".txt";
  io::write_report_table(table, report);
  io::write_report_text(text, report);
  std::cout << io::read_file(text);
  std::cout << "wrote " << text.string() << " and " << table.string() << "\n";
}

void cmd_split(const SplitSpec& spec, const std::string& out_path) {
  const std::vector<DrawSplit> splits = chunk_splits(spec);
  io::write_split_manifest(out_path, spec, splits);
  std::cout << "wrote " << splits.size() << " draw(s) -> " << out_path << "\n";
}

void cmd_plan(const std::string& out_path) {
  io::write_plan_file(out_path, paper_default_plan());
  std::cout << "wrote default plan -> " << out_path << "\n";
}

std::vector<LabeledImage> load_labeled_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw io_error(dir.string() + ": not a directory");
  std::vector<std::pair<int, fs::path>> class_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    try {
      class_dirs.emplace_back(static_cast<int>(io::parse_int(name)), entry.path());
    } catch (const io_error&) {
      throw io_error(entry.path().string() + ": class directory name must be an integer");
    }
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  std::vector<LabeledImage> out;
  for (const auto& [label, class_dir] : class_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dir))
      if (entry.is_regular_file()) files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
      ImageGrid img = io::read_pnm(file);
      if (img.channels != 1)
        throw io_error(file.string() + ": training images must be grayscale");
      for (double& v : img.data) v /= 255.0;
      out.push_back({label, std::move(img)});
    }
  }
  if (out.empty()) throw io_error(dir.string() + ": no images found");
  return out;
}

void cmd_train_toy(const std::string& plan_path, const std::string& data_dir,
                   const std::string& out_prefix, std::uint64_t seed, std::size_t hidden,
                   std::size_t kernel, std::size_t stride, bool adapter_norm) {
  const StagedTransferPlan plan = io::read_plan_file(plan_path);

  std::vector<LabeledImage> intermediate, target;
  bool needs_intermediate = false, needs_target = false;
  for (const TrainingStage& s : plan.stages)
    (s.role == DatasetRole::intermediate ? needs_intermediate : needs_target) = true;
  if (needs_intermediate) intermediate = load_labeled_images(fs::path(data_dir) / "intermediate");
  if (needs_target) target = load_labeled_images(fs::path(data_dir) / "target");

  const std::vector<LabeledImage>& first_data =
      plan.stages.front().role == DatasetRole::intermediate ? intermediate : target;
  const ImageGrid& probe = first_data.front().image;

  BackboneConfig cfg;
  cfg.input_h = probe.height;
  cfg.input_w = probe.width;
  cfg.kernel = kernel;
  cfg.stride = stride;
  cfg.hidden_units = hidden;
  cfg.adapter_norm = adapter_norm;
  cfg.class_ids = collect_class_ids(first_data);

  for (const auto& set : {std::cref(intermediate), std::cref(target)})
    for (const LabeledImage& s : set.get())
      if (s.image.height != probe.height || s.image.width != probe.width)
        throw io_error("training images disagree on dimensions");

  // weight init consumes the seed stream first; the plan run continues it
  SplitMix64 rng(seed);
  ToyBackbone model = make_toy_backbone(cfg, rng);
  TrainResult result = run_plan(std::move(model), plan, intermediate, target, rng.next());

  const fs::path ckpt = out_prefix + ".checkpoint.txt";
  const fs::path trace = out_prefix + ".trace.csv";
  io::write_checkpoint(ckpt, result.model);
  io::write_trace_csv(trace, result.trace);
  std::cout << "trained " << plan.stages.size() << " stage(s), final eval loss "
            << io::format_double(result.trace.back().eval_loss) << "\n";
  std::cout << "wrote " << ckpt.string() << " and " << trace.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dictionary-augmented classification and staged transfer tools"};
  app.require_subcommand(1);

  // build-dict
  std::string features_path, out_path;
  bool no_normalize = false;
  CLI::App* build = app.add_subcommand("build-dict", "Build a class-arranged dictionary");
  build->add_option("--features", features_path, "Labeled feature file")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--out", out_path, "Output dictionary file")->required();
  build->add_flag("--no-normalize", no_normalize, "Keep raw column norms");
  build->callback([&]() { cmd_build_dict(features_path, out_path, no_normalize); });

  // encode
  CommonParams encode_params;
  std::string encode_dict, encode_features, encode_out, emit = "fused";
  CLI::App* encode = app.add_subcommand("encode", "Encode samples against a dictionary");
  encode->add_option("--dict", encode_dict, "Dictionary file")->required()->check(CLI::ExistingFile);
  encode->add_option("--features", encode_features, "Feature file")
      ->required()
      ->check(CLI::ExistingFile);
  encode->add_option("--out", encode_out, "Output codes file")->required();
  encode->add_option("--emit", emit, "Which representation to write")
      ->check(CLI::IsMember({"fused", "sparse", "dense"}))
      ->capture_default_str();
  add_coding_flags(encode, encode_params);
  encode->callback(
      [&]() { cmd_encode(encode_dict, encode_features, encode_out, encode_params, emit); });

  // predict
  CommonParams predict_params;
  std::string predict_dict, predict_test, predict_out;
  CLI::App* predict = app.add_subcommand("predict", "Predict labels for scored test samples");
  predict->add_option("--dict", predict_dict, "Dictionary file")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--test", predict_test, "Feature file with softmax columns")
      ->required()
      ->check(CLI::ExistingFile);
  predict->add_option("--out", predict_out, "Output predictions file")->required();
  add_coding_flags(predict, predict_params);
  predict->add_option("--pooled-weight", predict_params.pooled_weight,
                      "Weight on pooled scores before adding to softmax")
      ->capture_default_str();
  predict->callback([&]() { cmd_predict(predict_dict, predict_test, predict_out, predict_params); });

  // evaluate
  CommonParams eval_params;
  std::string eval_train, eval_test, eval_data, eval_prefix;
  SplitSpec eval_split;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Run the full pipeline and report metrics");
  CLI::Option* opt_train =
      evaluate->add_option("--train", eval_train, "Training feature file")->check(CLI::ExistingFile);
  CLI::Option* opt_test = evaluate->add_option("--test", eval_test, "Test file with softmax columns")
                              ->check(CLI::ExistingFile)
                              ->needs(opt_train);
  evaluate->add_option("--data", eval_data, "Combined scored dataset for the split protocol")
      ->check(CLI::ExistingFile)
      ->excludes(opt_train);
  opt_train->needs(opt_test);
  evaluate->add_option("--out-prefix", eval_prefix, "Prefix for .txt and .tsv reports")->required();
  add_coding_flags(evaluate, eval_params);
  evaluate->add_option("--pooled-weight", eval_params.pooled_weight,
                       "Weight on pooled scores before adding to softmax")
      ->capture_default_str();
  evaluate->add_option("--positive-class", eval_params.positive_class,
                       "Class id counted as positive")
      ->capture_default_str();
  evaluate->add_flag("--no-normalize", eval_params.no_normalize, "Keep raw dictionary norms");
  evaluate->add_option("--draws", eval_split.draws, "Number of split draws")->capture_default_str();
  evaluate->add_option("--test-fraction", eval_split.test_fraction, "Held-out chunk fraction")
      ->capture_default_str();
  evaluate->add_option("--seed", eval_split.seed, "Split seed")->capture_default_str();
  evaluate->callback([&]() {
    if (eval_data.empty() && (eval_train.empty() || eval_test.empty()))
      throw CLI::ValidationError("evaluate", "need either --train/--test or --data");
    cmd_evaluate(eval_train, eval_test, eval_data, eval_prefix, eval_params, eval_split);
  });

  // split
  SplitSpec split_spec;
  std::string split_out;
  CLI::App* split = app.add_subcommand("split", "Generate contiguous-chunk evaluation splits");
  split->add_option("--total", split_spec.total, "Dataset size")->required();
  split->add_option("--test-fraction", split_spec.test_fraction, "Held-out chunk fraction")
      ->capture_default_str();
  split->add_option("--draws", split_spec.draws, "Number of draws")->capture_default_str();
  split->add_option("--seed", split_spec.seed, "Seed")->capture_default_str();
  split->add_option("--out", split_out, "Output manifest")->required();
  split->callback([&]() { cmd_split(split_spec, split_out); });

  // plan
  std::string plan_out;
  CLI::App* plan = app.add_subcommand("plan", "Write the default staged transfer plan");
  plan->add_option("--out", plan_out, "Output plan file")->required();
  plan->callback([&]() { cmd_plan(plan_out); });

  // train-toy
  std::string toy_plan, toy_data, toy_prefix;
  std::uint64_t toy_seed = 0;
  std::size_t toy_hidden = 16, toy_kernel = 3, toy_stride = 2;
  bool toy_norm = false;
  CLI::App* train = app.add_subcommand("train-toy", "Run a staged plan on a toy backbone");
  train->add_option("--plan", toy_plan, "Plan file")->required()->check(CLI::ExistingFile);
  train->add_option("--data", toy_data, "Data directory with intermediate/ and target/")
      ->required()
      ->check(CLI::ExistingDirectory);
  train->add_option("--out-prefix", toy_prefix, "Prefix for checkpoint and trace outputs")
      ->required();
  train->add_option("--seed", toy_seed, "Seed")->capture_default_str();
  train->add_option("--hidden", toy_hidden, "Hidden layer width")->capture_default_str();
  train->add_option("--kernel", toy_kernel, "Adapter kernel size")->capture_default_str();
  train->add_option("--stride", toy_stride, "Adapter stride")->capture_default_str();
  train->add_flag("--adapter-norm", toy_norm, "Enable the adapter normalization stage");
  train->callback([&]() {
    cmd_train_toy(toy_plan, toy_data, toy_prefix, toy_seed, toy_hidden, toy_kernel, toy_stride,
                  toy_norm);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  } catch (const factorization_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const io_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const invalid_input& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
