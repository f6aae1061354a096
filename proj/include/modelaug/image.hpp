#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "modelaug/errors.hpp"
#include "modelaug/numeric.hpp"
#include "modelaug/rng.hpp"

namespace modelaug {

// Channel-last pixel grid; index (y, x, c) maps to data[(y*w + x)*channels + c].
struct ImageGrid {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<double> data;

  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return data[(y * width + x) * channels + c];
  }
  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return data[(y * width + x) * channels + c];
  }

  static ImageGrid zeros(std::size_t h, std::size_t w, std::size_t c) {
    ImageGrid g;
    g.height = h;
    g.width = w;
    g.channels = c;
    g.data.assign(h * w * c, 0.0);
    return g;
  }
};

struct ConvSpec {
  std::size_t kernel_size = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::vector<double> weights;  // [out][in][ky][kx]
  Vector bias;                  // [out]
  bool stride_overridden = false;

  double weight_at(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) const {
    return weights[((o * in_channels + i) * kernel_size + ky) * kernel_size + kx];
  }
  double& weight_at(std::size_t o, std::size_t i, std::size_t ky, std::size_t kx) {
    return weights[((o * in_channels + i) * kernel_size + ky) * kernel_size + kx];
  }

  std::size_t weight_count() const {
    return out_channels * in_channels * kernel_size * kernel_size;
  }

  std::size_t output_size(std::size_t in) const {
    if (in + 2 * padding < kernel_size)
      throw invalid_input("conv: input size " + std::to_string(in) +
                          " smaller than kernel " + std::to_string(kernel_size));
    return (in + 2 * padding - kernel_size) / stride + 1;
  }
};

// Fan-in scaled uniform init; bias starts at zero.
inline void he_uniform_init(ConvSpec& spec, SplitMix64& rng) {
  const double fan_in = static_cast<double>(spec.in_channels * spec.kernel_size * spec.kernel_size);
  const double limit = std::sqrt(6.0 / fan_in);
  spec.weights.resize(spec.weight_count());
  for (double& w : spec.weights) w = rng.uniform(-limit, limit);
  spec.bias.assign(spec.out_channels, 0.0);
}

// Cross-correlation with zero padding (no kernel flip).
inline ImageGrid conv_forward(const ImageGrid& img, const ConvSpec& spec) {
  if (img.channels != spec.in_channels)
    throw invalid_input("conv_forward: image has " + std::to_string(img.channels) +
                        " channels, spec expects " + std::to_string(spec.in_channels));
  if (spec.stride == 0) throw invalid_input("conv_forward: zero stride");
  if (spec.weights.size() != spec.weight_count() || spec.bias.size() != spec.out_channels)
    throw invalid_input("conv_forward: weights not initialized for this spec");
  const std::size_t oh = spec.output_size(img.height);
  const std::size_t ow = spec.output_size(img.width);
  const long p = static_cast<long>(spec.padding);

  ImageGrid out = ImageGrid::zeros(oh, ow, spec.out_channels);
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox)
      for (std::size_t oc = 0; oc < spec.out_channels; ++oc) {
        double acc = 0.0;
        for (std::size_t ky = 0; ky < spec.kernel_size; ++ky)
          for (std::size_t kx = 0; kx < spec.kernel_size; ++kx) {
            const long iy = static_cast<long>(oy * spec.stride + ky) - p;
            const long ix = static_cast<long>(ox * spec.stride + kx) - p;
            if (iy < 0 || iy >= static_cast<long>(img.height) || ix < 0 ||
                ix >= static_cast<long>(img.width))
              continue;  // zero padding contributes nothing
            for (std::size_t ic = 0; ic < spec.in_channels; ++ic)
              acc += spec.weight_at(oc, ic, ky, kx) *
                     img.at(static_cast<std::size_t>(iy), static_cast<std::size_t>(ix), ic);
          }
        acc += spec.bias[oc];
        out.at(oy, ox, oc) = acc;
      }
  return out;
}

// Smallest padding in [0, kernel) that maps `in` to exactly `out`, if any.
inline std::optional<std::size_t> conv_padding_for(std::size_t in, std::size_t out,
                                                   std::size_t kernel, std::size_t stride) {
  for (std::size_t pad = 0; pad < kernel; ++pad) {
    if (in + 2 * pad < kernel) continue;
    if ((in + 2 * pad - kernel) / stride + 1 == out) return pad;
  }
  return std::nullopt;
}

// Single-channel input adapter producing a 3-channel map at half resolution
// (448x448x1 -> 224x224x3). Kernel size and stride follow the original
// model's first convolution; if that stride cannot reach 224, stride 2 is
// forced and flagged.
inline ConvSpec adapter_spec_for(const ConvSpec& first_layer) {
  constexpr std::size_t kIn = 448, kOut = 224;
  if (first_layer.kernel_size == 0) throw invalid_input("adapter_spec_for: zero kernel size");
  ConvSpec spec;
  spec.kernel_size = first_layer.kernel_size;
  spec.in_channels = 1;
  spec.out_channels = 3;

  if (first_layer.stride > 0) {
    if (auto pad = conv_padding_for(kIn, kOut, spec.kernel_size, first_layer.stride)) {
      spec.stride = first_layer.stride;
      spec.padding = *pad;
      return spec;
    }
  }
  if (auto pad = conv_padding_for(kIn, kOut, spec.kernel_size, 2)) {
    spec.stride = 2;
    spec.padding = *pad;
    spec.stride_overridden = true;
    return spec;
  }
  throw invalid_input("adapter_spec_for: no padding in [0, kernel) reaches a 224x224 output");
}

namespace detail {
inline double bilinear_sample(const ImageGrid& img, double sy, double sx, std::size_t c) {
  const double fy0 = std::floor(sy);
  const double fx0 = std::floor(sx);
  const long y0 = static_cast<long>(fy0);
  const long x0 = static_cast<long>(fx0);
  const double dy = sy - fy0;
  const double dx = sx - fx0;
  auto pixel = [&](long y, long x) -> double {
    if (y < 0 || y >= static_cast<long>(img.height) || x < 0 || x >= static_cast<long>(img.width))
      return 0.0;
    return img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c);
  };
  const double v00 = pixel(y0, x0), v01 = pixel(y0, x0 + 1);
  const double v10 = pixel(y0 + 1, x0), v11 = pixel(y0 + 1, x0 + 1);
  return (1.0 - dy) * ((1.0 - dx) * v00 + dx * v01) + dy * ((1.0 - dx) * v10 + dx * v11);
}
}  // namespace detail

// Rotation about the image centre, bilinear, zero fill outside the support.
inline ImageGrid rotate(const ImageGrid& img, double degrees) {
  if (!std::isfinite(degrees)) throw invalid_input("rotate: non-finite angle");
  const double rad = degrees * M_PI / 180.0;
  const double c = std::cos(rad), s = std::sin(rad);
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  ImageGrid out = ImageGrid::zeros(img.height, img.width, img.channels);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      const double sx = cx + c * dx + s * dy;
      const double sy = cy - s * dx + c * dy;
      for (std::size_t ch = 0; ch < img.channels; ++ch)
        out.at(y, x, ch) = detail::bilinear_sample(img, sy, sx, ch);
    }
  return out;
}

inline ImageGrid flip_horizontal(const ImageGrid& img) {
  ImageGrid out = ImageGrid::zeros(img.height, img.width, img.channels);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x)
      for (std::size_t c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
  return out;
}

inline ImageGrid center_crop(const ImageGrid& img, std::size_t size) {
  if (size == 0 || size > img.height || size > img.width)
    throw invalid_input("center_crop: size " + std::to_string(size) + " exceeds image " +
                        std::to_string(img.height) + "x" + std::to_string(img.width));
  const std::size_t oy = (img.height - size) / 2;
  const std::size_t ox = (img.width - size) / 2;
  ImageGrid out = ImageGrid::zeros(size, size, img.channels);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x)
      for (std::size_t c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(oy + y, ox + x, c);
  return out;
}

// Resamples about the centre keeping dimensions; factor > 1 zooms in.
inline ImageGrid scale_about_center(const ImageGrid& img, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor))
    throw invalid_input("scale: factor must be positive and finite");
  const double cy = (static_cast<double>(img.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(img.width) - 1.0) / 2.0;
  ImageGrid out = ImageGrid::zeros(img.height, img.width, img.channels);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const double sy = cy + (static_cast<double>(y) - cy) / factor;
      const double sx = cx + (static_cast<double>(x) - cx) / factor;
      for (std::size_t c = 0; c < img.channels; ++c)
        out.at(y, x, c) = detail::bilinear_sample(img, sy, sx, c);
    }
  return out;
}

// Integer pixel shift: +dx moves content right, +dy moves it down.
inline ImageGrid translate(const ImageGrid& img, long dx, long dy) {
  ImageGrid out = ImageGrid::zeros(img.height, img.width, img.channels);
  for (std::size_t y = 0; y < img.height; ++y)
    for (std::size_t x = 0; x < img.width; ++x) {
      const long sy = static_cast<long>(y) - dy;
      const long sx = static_cast<long>(x) - dx;
      if (sy < 0 || sy >= static_cast<long>(img.height) || sx < 0 ||
          sx >= static_cast<long>(img.width))
        continue;
      for (std::size_t c = 0; c < img.channels; ++c)
        out.at(y, x, c) = img.at(static_cast<std::size_t>(sy), static_cast<std::size_t>(sx), c);
    }
  return out;
}

// Bilinear resize with corner alignment, so resizing to the same dims is the
// identity and constant images stay constant.
inline ImageGrid resize_to(const ImageGrid& img, std::size_t h, std::size_t w) {
  if (h == 0 || w == 0) throw invalid_input("resize_to: target dims must be positive");
  ImageGrid out = ImageGrid::zeros(h, w, img.channels);
  for (std::size_t y = 0; y < h; ++y) {
    const double sy = (h == 1) ? (static_cast<double>(img.height) - 1.0) / 2.0
                               : static_cast<double>(y) * (static_cast<double>(img.height) - 1.0) /
                                     (static_cast<double>(h) - 1.0);
    for (std::size_t x = 0; x < w; ++x) {
      const double sx = (w == 1) ? (static_cast<double>(img.width) - 1.0) / 2.0
                                 : static_cast<double>(x) *
                                       (static_cast<double>(img.width) - 1.0) /
                                       (static_cast<double>(w) - 1.0);
      for (std::size_t c = 0; c < img.channels; ++c)
        out.at(y, x, c) = detail::bilinear_sample(img, sy, sx, c);
    }
  }
  return out;
}

}  // namespace modelaug
