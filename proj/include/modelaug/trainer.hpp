#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "modelaug/errors.hpp"
#include "modelaug/image.hpp"
#include "modelaug/numeric.hpp"
#include "modelaug/predictor.hpp"
#include "modelaug/rng.hpp"

namespace modelaug {

enum class ParamGroup { new_input, trunk, output_head };
enum class DatasetRole { intermediate, target };

inline std::string to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::new_input: return "new_input";
    case ParamGroup::trunk: return "trunk";
    default: return "output_head";
  }
}

inline ParamGroup param_group_from_string(const std::string& s) {
  if (s == "new_input") return ParamGroup::new_input;
  if (s == "trunk") return ParamGroup::trunk;
  if (s == "output_head") return ParamGroup::output_head;
  throw invalid_input("unknown parameter group '" + s + "'");
}

inline std::string to_string(DatasetRole r) {
  return r == DatasetRole::intermediate ? "intermediate" : "target";
}

inline DatasetRole dataset_role_from_string(const std::string& s) {
  if (s == "intermediate") return DatasetRole::intermediate;
  if (s == "target") return DatasetRole::target;
  throw invalid_input("unknown dataset role '" + s + "'");
}

// Per-stage augmentation knobs. Absent knobs are off. Application (and draw)
// order: rotate, horizontal flip, central crop + resize back, scale,
// translate.
struct AugmentationPolicy {
  std::optional<double> rotation_deg;                     // angle uniform in [-r, r]
  bool horizontal_flip = false;                           // coin flip
  std::optional<double> crop_fraction;                    // central crop of min-dim fraction
  std::optional<std::pair<double, double>> scale_range;   // factor uniform in [lo, hi]
  std::optional<int> translate_px;                        // dx, dy uniform ints in [-t, t]

  bool any() const {
    return rotation_deg || horizontal_flip || crop_fraction || scale_range || translate_px;
  }
};

struct TrainingStage {
  std::string name;
  DatasetRole role = DatasetRole::intermediate;
  std::vector<ParamGroup> trainable;
  double learning_rate = 0.0;
  std::map<ParamGroup, double> lr_multipliers;  // default 1 for absent groups
  std::size_t epochs = 0;
  AugmentationPolicy augment;
};

struct StagedTransferPlan {
  std::vector<TrainingStage> stages;
};

inline void validate_plan(const StagedTransferPlan& plan) {
  if (plan.stages.empty()) throw invalid_input("plan: needs at least one stage");
  for (const TrainingStage& s : plan.stages) {
    if (s.epochs < 1) throw invalid_input("plan stage '" + s.name + "': epochs must be >= 1");
    if (!(s.learning_rate > 0.0))
      throw invalid_input("plan stage '" + s.name + "': learning rate must be positive");
    if (s.trainable.empty())
      throw invalid_input("plan stage '" + s.name + "': no trainable groups");
    for (const auto& [g, m] : s.lr_multipliers)
      if (!(m > 0.0)) throw invalid_input("plan stage '" + s.name + "': multiplier must be positive");
    const AugmentationPolicy& a = s.augment;
    if (a.rotation_deg && !(*a.rotation_deg >= 0.0))
      throw invalid_input("plan stage '" + s.name + "': rotation must be nonnegative");
    if (a.crop_fraction && !(*a.crop_fraction > 0.0 && *a.crop_fraction <= 1.0))
      throw invalid_input("plan stage '" + s.name + "': crop fraction must lie in (0, 1]");
    if (a.scale_range && !(a.scale_range->first > 0.0 && a.scale_range->second >= a.scale_range->first))
      throw invalid_input("plan stage '" + s.name + "': bad scale range");
    if (a.translate_px && *a.translate_px < 0)
      throw invalid_input("plan stage '" + s.name + "': translation must be nonnegative");
  }
}

// The two-hop transfer recipe: warm up the new input and output layers on the
// intermediate domain, fine-tune them with augmentation at a tenth of the
// rate, open up the whole network at a hundredth, then fine-tune everything
// on the target domain with the output head running ten times hotter.
inline StagedTransferPlan paper_default_plan() {
  StagedTransferPlan plan;

  AugmentationPolicy intermediate_aug;
  intermediate_aug.rotation_deg = 7.0;
  intermediate_aug.horizontal_flip = true;
  intermediate_aug.crop_fraction = 850.0 / 1024.0;

  AugmentationPolicy target_aug;
  target_aug.scale_range = {0.9, 1.1};
  target_aug.translate_px = 5;
  target_aug.horizontal_flip = true;

  TrainingStage s1;
  s1.name = "intermediate-new-layers";
  s1.role = DatasetRole::intermediate;
  s1.trainable = {ParamGroup::new_input, ParamGroup::output_head};
  s1.learning_rate = 1e-3;
  s1.epochs = 5;
  plan.stages.push_back(s1);

  TrainingStage s2 = s1;
  s2.name = "intermediate-new-layers-augmented";
  s2.learning_rate = 1e-4;
  s2.augment = intermediate_aug;
  plan.stages.push_back(s2);

  TrainingStage s3;
  s3.name = "intermediate-full-model";
  s3.role = DatasetRole::intermediate;
  s3.trainable = {ParamGroup::new_input, ParamGroup::trunk, ParamGroup::output_head};
  s3.learning_rate = 1e-5;
  s3.epochs = 5;
  s3.augment = intermediate_aug;
  plan.stages.push_back(s3);

  TrainingStage s4;
  s4.name = "target-finetune";
  s4.role = DatasetRole::target;
  s4.trainable = {ParamGroup::new_input, ParamGroup::trunk, ParamGroup::output_head};
  s4.learning_rate = 5e-4;
  s4.lr_multipliers[ParamGroup::output_head] = 10.0;
  s4.epochs = 6;
  s4.augment = target_aug;
  plan.stages.push_back(s4);

  return plan;
}

struct DenseLayer {
  Matrix weights;  // out x in
  Vector bias;
};

struct LabeledImage {
  int label = 0;
  ImageGrid image;
};

// Small differentiable stand-in for a transferred classifier: grayscale
// adapter convolution (group new_input, with an optional per-channel
// normalization+affine stage), one tanh dense layer (trunk) and a softmax
// head (output_head).
struct ToyBackbone {
  std::size_t input_h = 0, input_w = 0;
  ConvSpec adapter;
  bool adapter_norm = false;
  Vector norm_gamma, norm_beta;  // per adapter output channel
  DenseLayer hidden;
  DenseLayer output;
  std::vector<int> class_ids;  // ascending; aligned with output rows
  std::size_t conv_out_h = 0, conv_out_w = 0;

  std::size_t feature_len() const { return conv_out_h * conv_out_w * adapter.out_channels; }
};

inline constexpr double kNormEps = 1e-5;

struct BackboneConfig {
  std::size_t input_h = 8, input_w = 8;
  std::size_t kernel = 3, stride = 2;
  std::size_t hidden_units = 16;
  bool adapter_norm = false;
  std::vector<int> class_ids = {0, 1};
};

inline void he_uniform_init(DenseLayer& layer, SplitMix64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(layer.weights.cols));
  for (double& w : layer.weights.data) w = rng.uniform(-limit, limit);
  layer.bias.assign(layer.weights.rows, 0.0);
}

// Weight init draw order: adapter, hidden, output.
inline ToyBackbone make_toy_backbone(const BackboneConfig& cfg, SplitMix64& rng) {
  if (cfg.class_ids.size() < 2) throw invalid_input("backbone: needs at least two classes");
  if (!std::is_sorted(cfg.class_ids.begin(), cfg.class_ids.end()))
    throw invalid_input("backbone: class ids must be ascending");
  ToyBackbone m;
  m.input_h = cfg.input_h;
  m.input_w = cfg.input_w;
  m.adapter.kernel_size = cfg.kernel;
  m.adapter.stride = cfg.stride;
  m.adapter.in_channels = 1;
  m.adapter.out_channels = 3;

  // the adapter halves the spatial resolution, so a common padding must map
  // both dims onto their halves
  if (cfg.input_h % 2 != 0 || cfg.input_w % 2 != 0)
    throw invalid_input("backbone: input dims must be even");
  auto pad_h = conv_padding_for(cfg.input_h, cfg.input_h / 2, cfg.kernel, cfg.stride);
  auto pad_w = conv_padding_for(cfg.input_w, cfg.input_w / 2, cfg.kernel, cfg.stride);
  if (!pad_h || !pad_w || *pad_h != *pad_w)
    throw invalid_input("backbone: kernel/stride cannot halve the input resolution");
  m.adapter.padding = *pad_h;
  m.conv_out_h = cfg.input_h / 2;
  m.conv_out_w = cfg.input_w / 2;

  he_uniform_init(m.adapter, rng);
  m.adapter_norm = cfg.adapter_norm;
  if (m.adapter_norm) {
    m.norm_gamma.assign(m.adapter.out_channels, 1.0);
    m.norm_beta.assign(m.adapter.out_channels, 0.0);
  }

  m.hidden.weights = Matrix(cfg.hidden_units, m.feature_len());
  he_uniform_init(m.hidden, rng);
  m.output.weights = Matrix(cfg.class_ids.size(), cfg.hidden_units);
  he_uniform_init(m.output, rng);
  m.class_ids = cfg.class_ids;
  return m;
}

namespace detail {

struct ForwardCache {
  ImageGrid conv_out;
  Vector mean, var;   // per channel, when normalization is on
  Vector xhat;        // standardized conv activations, conv_out layout
  Vector features;    // flattened adapter output fed to the trunk
  Vector hidden_act;  // tanh activations
  Vector probs;
};

inline void forward_cached(const ToyBackbone& m, const ImageGrid& img, ForwardCache& c) {
  if (img.height != m.input_h || img.width != m.input_w || img.channels != 1)
    throw invalid_input("backbone forward: image is " + std::to_string(img.height) + "x" +
                        std::to_string(img.width) + "x" + std::to_string(img.channels) +
                        ", model expects " + std::to_string(m.input_h) + "x" +
                        std::to_string(m.input_w) + "x1");
  c.conv_out = conv_forward(img, m.adapter);
  const std::size_t spatial = m.conv_out_h * m.conv_out_w;
  const std::size_t channels = m.adapter.out_channels;

  if (m.adapter_norm) {
    c.mean.assign(channels, 0.0);
    c.var.assign(channels, 0.0);
    for (std::size_t ch = 0; ch < channels; ++ch) {
      double mu = 0.0;
      for (std::size_t i = 0; i < spatial; ++i) mu += c.conv_out.data[i * channels + ch];
      mu /= static_cast<double>(spatial);
      double v = 0.0;
      for (std::size_t i = 0; i < spatial; ++i) {
        double diff = c.conv_out.data[i * channels + ch] - mu;
        v += diff * diff;
      }
      v /= static_cast<double>(spatial);
      c.mean[ch] = mu;
      c.var[ch] = v;
    }
    c.xhat.resize(spatial * channels);
    c.features.resize(spatial * channels);
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const double inv_sigma = 1.0 / std::sqrt(c.var[ch] + kNormEps);
      for (std::size_t i = 0; i < spatial; ++i) {
        const std::size_t idx = i * channels + ch;
        c.xhat[idx] = (c.conv_out.data[idx] - c.mean[ch]) * inv_sigma;
        c.features[idx] = m.norm_gamma[ch] * c.xhat[idx] + m.norm_beta[ch];
      }
    }
  } else {
    c.features = c.conv_out.data;
  }

  const Vector pre = matvec(m.hidden.weights, c.features);
  c.hidden_act.resize(pre.size());
  for (std::size_t i = 0; i < pre.size(); ++i) c.hidden_act[i] = std::tanh(pre[i] + m.hidden.bias[i]);

  Vector logits = matvec(m.output.weights, c.hidden_act);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += m.output.bias[i];

  const double peak = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  c.probs.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    c.probs[i] = std::exp(logits[i] - peak);
    z += c.probs[i];
  }
  for (double& p : c.probs) p /= z;
}

}  // namespace detail

inline ClassScores forward(const ToyBackbone& m, const ImageGrid& img) {
  detail::ForwardCache cache;
  detail::forward_cached(m, img, cache);
  return ClassScores{m.class_ids, cache.probs};
}

// Gradient buffers mirroring the backbone's parameters.
struct Gradients {
  std::vector<double> conv_w;
  Vector conv_b;
  Vector norm_gamma, norm_beta;
  Matrix hidden_w;
  Vector hidden_b;
  Matrix output_w;
  Vector output_b;

  static Gradients zeros_like(const ToyBackbone& m) {
    Gradients g;
    g.conv_w.assign(m.adapter.weights.size(), 0.0);
    g.conv_b.assign(m.adapter.bias.size(), 0.0);
    if (m.adapter_norm) {
      g.norm_gamma.assign(m.norm_gamma.size(), 0.0);
      g.norm_beta.assign(m.norm_beta.size(), 0.0);
    }
    g.hidden_w = Matrix(m.hidden.weights.rows, m.hidden.weights.cols);
    g.hidden_b.assign(m.hidden.bias.size(), 0.0);
    g.output_w = Matrix(m.output.weights.rows, m.output.weights.cols);
    g.output_b.assign(m.output.bias.size(), 0.0);
    return g;
  }

  void scale(double f) {
    for (double& x : conv_w) x *= f;
    for (double& x : conv_b) x *= f;
    for (double& x : norm_gamma) x *= f;
    for (double& x : norm_beta) x *= f;
    for (double& x : hidden_w.data) x *= f;
    for (double& x : hidden_b) x *= f;
    for (double& x : output_w.data) x *= f;
    for (double& x : output_b) x *= f;
  }
};

// Cross-entropy backward for one sample; accumulates into `g`, returns the
// sample loss. Gradients are computed for every group; freezing happens at
// the update step.
inline double backward(const ToyBackbone& m, const ImageGrid& img, int label, Gradients& g) {
  auto it = std::find(m.class_ids.begin(), m.class_ids.end(), label);
  if (it == m.class_ids.end())
    throw invalid_input("backward: label " + std::to_string(label) + " not among model classes");
  const std::size_t target = static_cast<std::size_t>(it - m.class_ids.begin());

  detail::ForwardCache c;
  detail::forward_cached(m, img, c);
  const double loss = -std::log(std::max(c.probs[target], 1e-300));

  Vector dlogits = c.probs;
  dlogits[target] -= 1.0;

  for (std::size_t i = 0; i < m.output.weights.rows; ++i) {
    for (std::size_t j = 0; j < m.output.weights.cols; ++j)
      g.output_w(i, j) += dlogits[i] * c.hidden_act[j];
    g.output_b[i] += dlogits[i];
  }

  Vector dhidden(m.output.weights.cols, 0.0);
  for (std::size_t i = 0; i < m.output.weights.rows; ++i)
    for (std::size_t j = 0; j < m.output.weights.cols; ++j)
      dhidden[j] += m.output.weights(i, j) * dlogits[i];
  for (std::size_t j = 0; j < dhidden.size(); ++j)
    dhidden[j] *= 1.0 - c.hidden_act[j] * c.hidden_act[j];  // tanh'

  for (std::size_t i = 0; i < m.hidden.weights.rows; ++i) {
    for (std::size_t j = 0; j < m.hidden.weights.cols; ++j)
      g.hidden_w(i, j) += dhidden[i] * c.features[j];
    g.hidden_b[i] += dhidden[i];
  }

  Vector dfeat(m.hidden.weights.cols, 0.0);
  for (std::size_t i = 0; i < m.hidden.weights.rows; ++i)
    for (std::size_t j = 0; j < m.hidden.weights.cols; ++j)
      dfeat[j] += m.hidden.weights(i, j) * dhidden[i];

  const std::size_t channels = m.adapter.out_channels;
  const std::size_t spatial = m.conv_out_h * m.conv_out_w;
  Vector dconv(spatial * channels, 0.0);
  if (m.adapter_norm) {
    for (std::size_t ch = 0; ch < channels; ++ch) {
      double dgamma = 0.0, dbeta = 0.0;
      for (std::size_t i = 0; i < spatial; ++i) {
        const std::size_t idx = i * channels + ch;
        dgamma += dfeat[idx] * c.xhat[idx];
        dbeta += dfeat[idx];
      }
      g.norm_gamma[ch] += dgamma;
      g.norm_beta[ch] += dbeta;

      const double inv_sigma = 1.0 / std::sqrt(c.var[ch] + kNormEps);
      double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
      for (std::size_t i = 0; i < spatial; ++i) {
        const std::size_t idx = i * channels + ch;
        const double dxhat = dfeat[idx] * m.norm_gamma[ch];
        mean_dxhat += dxhat;
        mean_dxhat_xhat += dxhat * c.xhat[idx];
      }
      mean_dxhat /= static_cast<double>(spatial);
      mean_dxhat_xhat /= static_cast<double>(spatial);
      for (std::size_t i = 0; i < spatial; ++i) {
        const std::size_t idx = i * channels + ch;
        const double dxhat = dfeat[idx] * m.norm_gamma[ch];
        dconv[idx] = inv_sigma * (dxhat - mean_dxhat - c.xhat[idx] * mean_dxhat_xhat);
      }
    }
  } else {
    dconv = dfeat;
  }

  const long p = static_cast<long>(m.adapter.padding);
  for (std::size_t oy = 0; oy < m.conv_out_h; ++oy)
    for (std::size_t ox = 0; ox < m.conv_out_w; ++ox)
      for (std::size_t oc = 0; oc < channels; ++oc) {
        const double gout = dconv[(oy * m.conv_out_w + ox) * channels + oc];
        g.conv_b[oc] += gout;
        for (std::size_t ky = 0; ky < m.adapter.kernel_size; ++ky)
          for (std::size_t kx = 0; kx < m.adapter.kernel_size; ++kx) {
            const long iy = static_cast<long>(oy * m.adapter.stride + ky) - p;
            const long ix = static_cast<long>(ox * m.adapter.stride + kx) - p;
            if (iy < 0 || iy >= static_cast<long>(img.height) || ix < 0 ||
                ix >= static_cast<long>(img.width))
              continue;
            g.conv_w[((oc * m.adapter.in_channels) * m.adapter.kernel_size + ky) *
                         m.adapter.kernel_size +
                     kx] +=
                gout * img.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), 0);
          }
      }

  return loss;
}

// Mean loss + mean gradients over the whole batch.
inline double batch_gradients(const ToyBackbone& m, const std::vector<LabeledImage>& batch,
                              Gradients& g) {
  if (batch.empty()) throw invalid_input("batch_gradients: empty batch");
  double loss = 0.0;
  for (const LabeledImage& sample : batch) loss += backward(m, sample.image, sample.label, g);
  const double inv = 1.0 / static_cast<double>(batch.size());
  g.scale(inv);
  return loss * inv;
}

inline double mean_loss(const ToyBackbone& m, const std::vector<LabeledImage>& data) {
  if (data.empty()) throw invalid_input("mean_loss: empty dataset");
  double loss = 0.0;
  for (const LabeledImage& sample : data) {
    detail::ForwardCache c;
    detail::forward_cached(m, sample.image, c);
    auto it = std::find(m.class_ids.begin(), m.class_ids.end(), sample.label);
    if (it == m.class_ids.end())
      throw invalid_input("mean_loss: label " + std::to_string(sample.label) + " unknown");
    loss += -std::log(std::max(c.probs[static_cast<std::size_t>(it - m.class_ids.begin())], 1e-300));
  }
  return loss / static_cast<double>(data.size());
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  struct Moments {
    Vector m, v;
    std::uint64_t step = 0;
  };
  std::map<ParamGroup, Moments> groups;
};

namespace detail {

inline std::vector<double*> group_params(ToyBackbone& m, ParamGroup g) {
  std::vector<double*> out;
  auto push = [&out](std::vector<double>& v) {
    for (double& x : v) out.push_back(&x);
  };
  switch (g) {
    case ParamGroup::new_input:
      push(m.adapter.weights);
      push(m.adapter.bias);
      if (m.adapter_norm) {
        push(m.norm_gamma);
        push(m.norm_beta);
      }
      break;
    case ParamGroup::trunk:
      push(m.hidden.weights.data);
      push(m.hidden.bias);
      break;
    case ParamGroup::output_head:
      push(m.output.weights.data);
      push(m.output.bias);
      break;
  }
  return out;
}

inline std::vector<const double*> group_grads(const Gradients& g, ParamGroup group, bool norm) {
  std::vector<const double*> out;
  auto push = [&out](const std::vector<double>& v) {
    for (const double& x : v) out.push_back(&x);
  };
  switch (group) {
    case ParamGroup::new_input:
      push(g.conv_w);
      push(g.conv_b);
      if (norm) {
        push(g.norm_gamma);
        push(g.norm_beta);
      }
      break;
    case ParamGroup::trunk:
      push(g.hidden_w.data);
      push(g.hidden_b);
      break;
    case ParamGroup::output_head:
      push(g.output_w.data);
      push(g.output_b);
      break;
  }
  return out;
}

}  // namespace detail

// Bias-corrected Adam on exactly the groups present in `lr_by_group`.
// Parameters of absent groups are untouched and their moments do not advance.
inline void adam_step(AdamState& state, ToyBackbone& m, const Gradients& g,
                      const std::map<ParamGroup, double>& lr_by_group) {
  for (const auto& [group, lr] : lr_by_group) {
    if (!(lr > 0.0)) throw invalid_input("adam_step: learning rate must be positive");
    std::vector<double*> params = detail::group_params(m, group);
    std::vector<const double*> grads = detail::group_grads(g, group, m.adapter_norm);
    AdamState::Moments& mom = state.groups[group];
    if (mom.m.empty()) {
      mom.m.assign(params.size(), 0.0);
      mom.v.assign(params.size(), 0.0);
    }
    if (mom.m.size() != params.size())
      throw invalid_input("adam_step: moment size mismatch (parameter group changed shape)");
    mom.step += 1;
    const AdamConfig& c = state.config;
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(mom.step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(mom.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double grad = *grads[i];
      mom.m[i] = c.beta1 * mom.m[i] + (1.0 - c.beta1) * grad;
      mom.v[i] = c.beta2 * mom.v[i] + (1.0 - c.beta2) * grad * grad;
      const double mhat = mom.m[i] / bc1;
      const double vhat = mom.v[i] / bc2;
      *params[i] -= lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

// One augmented copy of the image; draws in application order.
inline ImageGrid augment_image(const ImageGrid& img, const AugmentationPolicy& policy,
                               SplitMix64& rng) {
  ImageGrid out = img;
  if (policy.rotation_deg) {
    const double angle = rng.uniform(-*policy.rotation_deg, *policy.rotation_deg);
    out = rotate(out, angle);
  }
  if (policy.horizontal_flip && rng.below(2) == 1) out = flip_horizontal(out);
  if (policy.crop_fraction) {
    const std::size_t base = std::min(out.height, out.width);
    std::size_t side = static_cast<std::size_t>(
        std::lround(*policy.crop_fraction * static_cast<double>(base)));
    side = std::clamp<std::size_t>(side, 1, base);
    const std::size_t h = out.height, w = out.width;
    out = resize_to(center_crop(out, side), h, w);
  }
  if (policy.scale_range)
    out = scale_about_center(out, rng.uniform(policy.scale_range->first, policy.scale_range->second));
  if (policy.translate_px) {
    const long dx = rng.uniform_int(-*policy.translate_px, *policy.translate_px);
    const long dy = rng.uniform_int(-*policy.translate_px, *policy.translate_px);
    out = translate(out, dx, dy);
  }
  return out;
}

struct EpochRecord {
  std::size_t stage_index = 0;
  std::string stage_name;
  std::size_t epoch = 0;    // 1-based within the stage
  double train_loss = 0.0;  // on the (possibly augmented) batch, before the update
  double eval_loss = 0.0;   // on the raw stage dataset, after the update
};

struct TrainResult {
  ToyBackbone model;
  std::vector<EpochRecord> trace;
};

inline std::vector<int> collect_class_ids(const std::vector<LabeledImage>& data) {
  std::vector<int> ids;
  for (const LabeledImage& s : data)
    if (std::find(ids.begin(), ids.end(), s.label) == ids.end()) ids.push_back(s.label);
  std::sort(ids.begin(), ids.end());
  return ids;
}

// Executes the stages in order: full-batch gradients, Adam on the trainable
// groups only, per-stage augmentation. When a stage switches to a dataset
// with a different class set, the output head is re-initialized for it (and
// its optimizer moments reset). Deterministic for a fixed seed.
inline TrainResult run_plan(ToyBackbone model, const StagedTransferPlan& plan,
                            const std::vector<LabeledImage>& intermediate_data,
                            const std::vector<LabeledImage>& target_data, std::uint64_t seed) {
  validate_plan(plan);
  SplitMix64 rng(seed);
  AdamState state;
  TrainResult result;

  for (std::size_t si = 0; si < plan.stages.size(); ++si) {
    const TrainingStage& stage = plan.stages[si];
    const std::vector<LabeledImage>& data =
        stage.role == DatasetRole::intermediate ? intermediate_data : target_data;
    if (data.empty())
      throw invalid_input("run_plan: stage '" + stage.name + "' has no " +
                          to_string(stage.role) + " data");

    const std::vector<int> classes = collect_class_ids(data);
    if (classes != model.class_ids) {
      model.output.weights = Matrix(classes.size(), model.hidden.weights.rows);
      he_uniform_init(model.output, rng);
      model.class_ids = classes;
      state.groups.erase(ParamGroup::output_head);
    }

    std::map<ParamGroup, double> lr_by_group;
    for (ParamGroup g : stage.trainable) {
      auto it = stage.lr_multipliers.find(g);
      lr_by_group[g] = stage.learning_rate * (it == stage.lr_multipliers.end() ? 1.0 : it->second);
    }

    for (std::size_t epoch = 1; epoch <= stage.epochs; ++epoch) {
      std::vector<LabeledImage> batch;
      const std::vector<LabeledImage>* batch_ptr = &data;
      if (stage.augment.any()) {
        batch.reserve(data.size());
        for (const LabeledImage& s : data)
          batch.push_back({s.label, augment_image(s.image, stage.augment, rng)});
        batch_ptr = &batch;
      }
      Gradients grads = Gradients::zeros_like(model);
      const double train_loss = batch_gradients(model, *batch_ptr, grads);
      adam_step(state, model, grads, lr_by_group);
      const double eval_loss = mean_loss(model, data);
      result.trace.push_back({si, stage.name, epoch, train_loss, eval_loss});
    }
  }

  result.model = std::move(model);
  return result;
}

// L2 distance between two parameter vectors of identical architecture.
// Diagnostic only.
inline double parameter_distance(const ToyBackbone& a, const ToyBackbone& b) {
  double sum = 0.0;
  auto accumulate = [&sum](const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw invalid_input("parameter_distance: architecture mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double diff = x[i] - y[i];
      sum += diff * diff;
    }
  };
  accumulate(a.adapter.weights, b.adapter.weights);
  accumulate(a.adapter.bias, b.adapter.bias);
  accumulate(a.norm_gamma, b.norm_gamma);
  accumulate(a.norm_beta, b.norm_beta);
  accumulate(a.hidden.weights.data, b.hidden.weights.data);
  accumulate(a.hidden.bias, b.hidden.bias);
  accumulate(a.output.weights.data, b.output.weights.data);
  accumulate(a.output.bias, b.output.bias);
  return std::sqrt(sum);
}

}  // namespace modelaug
