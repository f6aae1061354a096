#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "modelaug/coders.hpp"
#include "modelaug/dictionary.hpp"
#include "modelaug/errors.hpp"
#include "modelaug/numeric.hpp"
#include "modelaug/rng.hpp"

namespace modelaug {

struct ClassScores {
  std::vector<int> class_ids;  // ascending
  Vector scores;
};

inline void validate_softmax(const ClassScores& s) {
  if (s.class_ids.size() != s.scores.size())
    throw invalid_input("class scores: id/score size mismatch");
  double sum = 0.0;
  for (double v : s.scores) {
    if (!std::isfinite(v) || v < 0.0) throw invalid_input("softmax scores must be finite and nonnegative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw invalid_input("softmax scores sum to " + std::to_string(sum) + ", expected 1");
}

// score[c] = sum of fused coefficients whose column belongs to class c.
inline ClassScores pool_by_class(const FusedCode& code, const Dictionary& d) {
  if (code.coefficients.size() != d.size())
    throw invalid_input("pool_by_class: code length " + std::to_string(code.coefficients.size()) +
                        " vs dictionary size " + std::to_string(d.size()));
  ClassScores out;
  out.class_ids = d.class_ids();
  out.scores.assign(out.class_ids.size(), 0.0);
  for (std::size_t c = 0; c < d.class_spans.size(); ++c) {
    const ClassSpan& span = d.class_spans[c];
    double s = 0.0;
    for (std::size_t j = span.begin; j < span.end; ++j) s += code.coefficients[j];
    out.scores[c] = s;
  }
  return out;
}

// argmax over softmax + pooled; exact ties go to the lower class id.
inline int predict(const ClassScores& softmax, const ClassScores& pooled) {
  if (softmax.class_ids != pooled.class_ids)
    throw invalid_input("predict: class sets differ");
  if (softmax.class_ids.empty()) throw invalid_input("predict: empty class set");
  std::size_t best = 0;
  double best_score = softmax.scores[0] + pooled.scores[0];
  for (std::size_t c = 1; c < softmax.class_ids.size(); ++c) {
    double v = softmax.scores[c] + pooled.scores[c];
    if (v > best_score) {
      best_score = v;
      best = c;
    }
  }
  return softmax.class_ids[best];
}

struct ConfusionCounts {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
};

// A rate that may be undefined (0/0); undefined values carry 0 plus a flag
// rather than being silently coerced.
struct MetricValue {
  double value = 0.0;
  bool defined = false;
};

struct Metrics {
  MetricValue accuracy, sensitivity, specificity, precision, f1;
};

inline Metrics compute_metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.fp < 0 || c.tn < 0 || c.fn < 0)
    throw invalid_input("compute_metrics: negative counts");
  Metrics m;
  const long n = c.total();
  if (n > 0) m.accuracy = {static_cast<double>(c.tp + c.tn) / n, true};
  if (c.tp + c.fn > 0) m.sensitivity = {static_cast<double>(c.tp) / (c.tp + c.fn), true};
  if (c.tn + c.fp > 0) m.specificity = {static_cast<double>(c.tn) / (c.tn + c.fp), true};
  if (c.tp + c.fp > 0) m.precision = {static_cast<double>(c.tp) / (c.tp + c.fp), true};
  if (m.precision.defined && m.sensitivity.defined &&
      m.precision.value + m.sensitivity.value > 0.0) {
    m.f1 = {2.0 * m.precision.value * m.sensitivity.value /
                (m.precision.value + m.sensitivity.value),
            true};
  }
  return m;
}

struct SplitSpec {
  std::size_t total = 0;
  double test_fraction = 0.1;
  std::size_t draws = 5;
  std::uint64_t seed = 0;
};

struct DrawSplit {
  std::size_t test_begin = 0;
  std::size_t test_end = 0;  // exclusive; train set is the complement
};

inline std::size_t chunk_length(std::size_t total, double fraction) {
  return static_cast<std::size_t>(std::lround(static_cast<double>(total) * fraction));
}

// One contiguous test interval per draw, start uniform over the valid range:
// start_d = splitmix64_output_d mod (total - len + 1), draws consumed in order.
inline std::vector<DrawSplit> chunk_splits(const SplitSpec& spec) {
  if (spec.total < 10) throw invalid_input("chunk_splits: total must be at least 10");
  if (spec.draws < 1) throw invalid_input("chunk_splits: draws must be at least 1");
  if (!(spec.test_fraction > 0.0 && spec.test_fraction < 1.0))
    throw invalid_input("chunk_splits: test fraction must lie in (0, 1)");
  const std::size_t len = chunk_length(spec.total, spec.test_fraction);
  if (len < 1 || len >= spec.total)
    throw invalid_input("chunk_splits: chunk length " + std::to_string(len) +
                        " invalid for total " + std::to_string(spec.total));
  SplitMix64 rng(spec.seed);
  std::vector<DrawSplit> out;
  out.reserve(spec.draws);
  for (std::size_t i = 0; i < spec.draws; ++i) {
    std::size_t start = rng.below(spec.total - len + 1);
    out.push_back({start, start + len});
  }
  return out;
}

struct PipelineParams {
  std::size_t k = 50;
  double lambda = 2.0;
  FusionNorm fusion_norm = FusionNorm::l2;
  double pooled_weight = 1.0;
  int positive_class = 1;
  BuildOptions dict_options = {};
};

// A test sample carrying the backbone's softmax activations, aligned with
// the dataset's ascending class order.
struct ScoredSample {
  int label = 0;
  Vector features;
  Vector softmax;
};

struct AugmentedPrediction {
  int predicted = 0;
  ClassScores augmented;
  ClassScores pooled;
};

inline AugmentedPrediction predict_augmented(const Dictionary& d, const Vector& features,
                                             const ClassScores& softmax,
                                             const PipelineParams& params) {
  validate_softmax(softmax);
  const SparseCode sparse = omp_encode(d, features, params.k);
  const DenseCode dense = dense_encode(d, features, params.lambda);
  const FusedCode fused = fuse(sparse, dense, params.fusion_norm);
  ClassScores pooled = pool_by_class(fused, d);
  ClassScores weighted = pooled;
  for (double& v : weighted.scores) v *= params.pooled_weight;
  AugmentedPrediction out;
  out.predicted = predict(softmax, weighted);
  out.pooled = pooled;
  out.augmented.class_ids = softmax.class_ids;
  out.augmented.scores.resize(softmax.scores.size());
  for (std::size_t c = 0; c < softmax.scores.size(); ++c)
    out.augmented.scores[c] = softmax.scores[c] + weighted.scores[c];
  return out;
}

struct DrawResult {
  ConfusionCounts counts;
  Metrics metrics;
};

// Builds the dictionary from the training half, encodes every test sample,
// augments its softmax and accumulates binary confusion counts.
inline DrawResult evaluate_pipeline(const std::vector<LabeledFeature>& train,
                                    const std::vector<ScoredSample>& test,
                                    const PipelineParams& params) {
  const Dictionary d = build_dictionary(train, params.dict_options);
  const std::vector<int> classes = d.class_ids();
  if (classes.size() != 2)
    throw invalid_input("evaluate_pipeline: expected exactly 2 classes, got " +
                        std::to_string(classes.size()));
  if (classes[0] != params.positive_class && classes[1] != params.positive_class)
    throw invalid_input("evaluate_pipeline: positive class " +
                        std::to_string(params.positive_class) + " not in the class set");

  DrawResult result;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const ScoredSample& sample = test[i];
    if (sample.label != classes[0] && sample.label != classes[1])
      throw invalid_input("evaluate_pipeline: test sample " + std::to_string(i) +
                          " has unknown label " + std::to_string(sample.label));
    if (sample.softmax.size() != classes.size())
      throw invalid_input("evaluate_pipeline: test sample " + std::to_string(i) +
                          " has wrong softmax length");
    ClassScores softmax{classes, sample.softmax};
    const AugmentedPrediction pred = predict_augmented(d, sample.features, softmax, params);
    const bool truth_pos = sample.label == params.positive_class;
    const bool pred_pos = pred.predicted == params.positive_class;
    if (truth_pos && pred_pos) ++result.counts.tp;
    else if (truth_pos && !pred_pos) ++result.counts.fn;
    else if (!truth_pos && pred_pos) ++result.counts.fp;
    else ++result.counts.tn;
  }
  result.metrics = compute_metrics(result.counts);
  return result;
}

struct AggregateMetric {
  MetricValue mean;
  MetricValue stddev;  // sample standard deviation; needs >= 2 defined draws
  std::size_t defined_draws = 0;
};

struct EvalReport {
  std::vector<DrawResult> draws;
  AggregateMetric accuracy, sensitivity, specificity, f1;
};

inline AggregateMetric aggregate_metric(const std::vector<DrawResult>& draws,
                                        MetricValue Metrics::* field) {
  AggregateMetric agg;
  double sum = 0.0;
  for (const auto& d : draws) {
    const MetricValue& v = d.metrics.*field;
    if (v.defined) {
      sum += v.value;
      ++agg.defined_draws;
    }
  }
  if (agg.defined_draws >= 1) agg.mean = {sum / agg.defined_draws, true};
  if (agg.defined_draws >= 2) {
    double ss = 0.0;
    for (const auto& d : draws) {
      const MetricValue& v = d.metrics.*field;
      if (v.defined) {
        double diff = v.value - agg.mean.value;
        ss += diff * diff;
      }
    }
    agg.stddev = {std::sqrt(ss / (agg.defined_draws - 1)), true};
  }
  return agg;
}

inline EvalReport make_report(std::vector<DrawResult> draws) {
  EvalReport r;
  r.draws = std::move(draws);
  r.accuracy = aggregate_metric(r.draws, &Metrics::accuracy);
  r.sensitivity = aggregate_metric(r.draws, &Metrics::sensitivity);
  r.specificity = aggregate_metric(r.draws, &Metrics::specificity);
  r.f1 = aggregate_metric(r.draws, &Metrics::f1);
  return r;
}

// Full split protocol: one contiguous test chunk per draw, train on the
// complement, metrics per draw plus the aggregate.
inline EvalReport evaluate_draws(const std::vector<ScoredSample>& data, const SplitSpec& spec,
                                 const PipelineParams& params) {
  if (spec.total != data.size())
    throw invalid_input("evaluate_draws: split total " + std::to_string(spec.total) +
                        " does not match dataset size " + std::to_string(data.size()));
  const std::vector<DrawSplit> splits = chunk_splits(spec);
  std::vector<DrawResult> results;
  results.reserve(splits.size());
  for (const DrawSplit& split : splits) {
    std::vector<LabeledFeature> train;
    std::vector<ScoredSample> test;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (i >= split.test_begin && i < split.test_end) test.push_back(data[i]);
      else train.push_back({data[i].label, data[i].features});
    }
    results.push_back(evaluate_pipeline(train, test, params));
  }
  return make_report(std::move(results));
}

}  // namespace modelaug
