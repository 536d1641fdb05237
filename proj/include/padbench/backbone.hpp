#pragma once

// MobileNetV2-style backbone with exactly 28 convolution layers, indexed 1..28
// for freeze plans:
//
//   1        3x3 stem conv, stride 2, 32 channels
//   2-3      bottleneck t=1 -> 16 (depthwise, projection)
//   4-27     eight bottlenecks t=6 (expand, depthwise, projection):
//              24/s2, 32/s2, 32, 64/s2, 64, 96, 160/s2, 320
//   28       1x1 conv -> 1280
//
// followed by global average pooling. Stride-1 bottlenecks with equal in/out
// width carry a residual connection.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "padbench/nn.hpp"
#include "padbench/rng.hpp"

namespace padbench {

inline constexpr int backbone_layer_count = 28;
inline constexpr int backbone_output_width = 1280;
inline constexpr const char* backbone_architecture = "mobilenetv2-28";

struct Stage {
  int first = 0;  // 0-based unit index
  int count = 0;
  bool residual = false;

  bool operator==(const Stage&) const = default;
};

struct Backbone {
  std::string architecture = backbone_architecture;
  std::vector<nn::ConvUnit> units;
  std::vector<Stage> stages;

  int output_width() const { return units.empty() ? 0 : units.back().cout; }

  // Stage holding the 0-based unit index.
  std::size_t stage_of(int unit) const {
    for (std::size_t s = 0; s < stages.size(); ++s)
      if (unit >= stages[s].first && unit < stages[s].first + stages[s].count) return s;
    throw domain_error("unit index " + std::to_string(unit) + " outside backbone");
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& u : units) n += u.trainable_count();
    return n;
  }

  bool operator==(const Backbone&) const = default;
};

// Layer shapes only; weights zero, batch norm identity.
inline Backbone mobilenet_v2_28() {
  using nn::ConvKind;
  using nn::ConvUnit;
  Backbone b;
  auto add_stage = [&](std::vector<ConvUnit> units, bool residual) {
    b.stages.push_back({static_cast<int>(b.units.size()), static_cast<int>(units.size()), residual});
    for (auto& u : units) b.units.push_back(std::move(u));
  };
  add_stage({ConvUnit::make(ConvKind::standard, 3, 2, 3, 32, true)}, false);
  add_stage({ConvUnit::make(ConvKind::depthwise, 3, 1, 32, 32, true),
             ConvUnit::make(ConvKind::pointwise, 1, 1, 32, 16, false)},
            false);

  struct Bottleneck {
    int out, stride;
  };
  constexpr Bottleneck blocks[] = {{24, 2}, {32, 2}, {32, 1}, {64, 2}, {64, 1}, {96, 1}, {160, 2}, {320, 1}};
  int width = 16;
  for (const auto& blk : blocks) {
    const int hidden = width * 6;
    add_stage({ConvUnit::make(ConvKind::pointwise, 1, 1, width, hidden, true),
               ConvUnit::make(ConvKind::depthwise, 3, blk.stride, hidden, hidden, true),
               ConvUnit::make(ConvKind::pointwise, 1, 1, hidden, blk.out, false)},
              blk.stride == 1 && width == blk.out);
    width = blk.out;
  }
  add_stage({ConvUnit::make(ConvKind::pointwise, 1, 1, width, backbone_output_width, true)}, false);
  return b;
}

// Runs stages [first_stage, last_stage). When `caches` is non-null, units with
// index >= cache_from get their forward state recorded.
inline nn::Tensor3 run_stages(const Backbone& b, nn::Tensor3 x, std::size_t first_stage, std::size_t last_stage,
                              std::vector<nn::UnitCache>* caches = nullptr, int cache_from = 0) {
  for (std::size_t s = first_stage; s < last_stage; ++s) {
    const auto& st = b.stages[s];
    nn::Tensor3 skip;
    if (st.residual) skip = x;
    for (int u = st.first; u < st.first + st.count; ++u) {
      nn::UnitCache* cache = caches && u >= cache_from ? &(*caches)[u] : nullptr;
      x = nn::forward(b.units[u], x, cache);
    }
    if (st.residual)
      for (std::size_t i = 0; i < x.data.size(); ++i) x.data[i] += skip.data[i];
  }
  return x;
}

inline std::vector<double> global_average_pool(const nn::Tensor3& t) {
  std::vector<double> out(t.c, 0.0);
  for (std::size_t i = 0; i < t.data.size(); i += t.c)
    for (int ch = 0; ch < t.c; ++ch) out[ch] += t.data[i + ch];
  for (auto& v : out) v /= t.pixels();
  return out;
}

// Backpropagates through stages [first_stage, last_stage) in reverse, stopping
// below unit `first_trainable`. `d_out` is the gradient of the last stage's
// output. Requires caches for every unit >= first_trainable.
inline void backprop_stages(const Backbone& b, const std::vector<nn::UnitCache>& caches, nn::Tensor3 d_out,
                            std::size_t first_stage, std::size_t last_stage, int first_trainable,
                            std::vector<nn::ConvGrad>& grads) {
  for (std::size_t s = last_stage; s-- > first_stage;) {
    const auto& st = b.stages[s];
    nn::Tensor3 d_skip;
    if (st.residual) d_skip = d_out;
    for (int u = st.first + st.count; u-- > st.first;) {
      if (u < first_trainable) return;
      const bool need_input = u > first_trainable;
      d_out = nn::backward(b.units[u], caches[u], d_out, grads[u], need_input);
      if (!need_input) return;
    }
    if (st.residual)
      for (std::size_t i = 0; i < d_out.data.size(); ++i) d_out.data[i] += d_skip.data[i];
  }
}

namespace detail {

// Smooth random RGB fields in [-1, 1] used to calibrate batch-norm statistics.
inline nn::Tensor3 calibration_image(Rng& rng, int size) {
  nn::Tensor3 img(size, size, 3);
  struct Wave {
    double fx, fy, phase, amp;
  };
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<Wave> waves;
    for (int k = 0; k < 6; ++k)
      waves.push_back({rng.uniform(-0.15, 0.15), rng.uniform(-0.15, 0.15), rng.uniform(0.0, 2 * std::numbers::pi),
                       rng.uniform(0.1, 0.3)});
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        double v = 0.0;
        for (const auto& w : waves) v += w.amp * std::sin(w.fx * x + w.fy * y + w.phase);
        v += 0.1 * rng.normal();
        img.at(y, x, ch) = std::clamp(v, -1.0, 1.0);
      }
  }
  return img;
}

}  // namespace detail

// Stand-in for pretrained weights: He-normal convolutions whose batch-norm
// running statistics are calibrated layer by layer on procedural images, so
// every unit sees roughly standardized activations. Deterministic per seed.
inline Backbone init_backbone(std::uint64_t seed, int calibration_images = 4, int calibration_size = 224) {
  Backbone b = mobilenet_v2_28();
  Rng rng(mix_seed(seed, 0xbac4b07e));
  for (auto& u : b.units) {
    const double stddev = std::sqrt((u.relu6 ? 2.0 : 1.0) / u.fan_in());
    for (auto& w : u.weight) w = rng.normal(0.0, stddev);
  }

  std::vector<nn::Tensor3> batch;
  for (int i = 0; i < calibration_images; ++i) batch.push_back(detail::calibration_image(rng, calibration_size));

  for (const auto& st : b.stages) {
    std::vector<nn::Tensor3> skips;
    if (st.residual) skips = batch;
    for (int ui = st.first; ui < st.first + st.count; ++ui) {
      auto& u = b.units[ui];
      std::vector<double> sum(u.cout, 0.0), sum_sq(u.cout, 0.0);
      double n = 0.0;
      for (auto& t : batch) {
        t = nn::convolve(u, t);
        for (std::size_t i = 0; i < t.data.size(); i += u.cout)
          for (int ch = 0; ch < u.cout; ++ch) {
            sum[ch] += t.data[i + ch];
            sum_sq[ch] += t.data[i + ch] * t.data[i + ch];
          }
        n += t.pixels();
      }
      for (int ch = 0; ch < u.cout; ++ch) {
        u.mean[ch] = sum[ch] / n;
        u.var[ch] = std::max(sum_sq[ch] / n - u.mean[ch] * u.mean[ch], 1e-6);
      }
      for (auto& t : batch) nn::batch_norm_activate(u, t);
    }
    if (st.residual)
      for (std::size_t k = 0; k < batch.size(); ++k)
        for (std::size_t i = 0; i < batch[k].data.size(); ++i) batch[k].data[i] += skips[k].data[i];
  }
  return b;
}

}  // namespace padbench
