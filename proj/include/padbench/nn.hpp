#pragma once

// Minimal CPU building blocks for fine-tuning a MobileNetV2-style backbone:
// HWC tensors, convolution + batch-norm units, dense layers and optimizers.
// Everything is double precision so finite-difference checks are meaningful.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "padbench/error.hpp"
#include "padbench/rng.hpp"

namespace padbench::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

struct Tensor3 {
  int h = 0, w = 0, c = 0;
  std::vector<double> data;  // row-major H x W x C

  Tensor3() = default;
  Tensor3(int h_, int w_, int c_, double fill = 0.0)
      : h(h_), w(w_), c(c_), data(static_cast<std::size_t>(h_) * w_ * c_, fill) {}

  double& at(int y, int x, int ch) { return data[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
  double at(int y, int x, int ch) const { return data[(static_cast<std::size_t>(y) * w + x) * c + ch]; }
  int pixels() const { return h * w; }

  ConstMatrixMap as_matrix() const { return {data.data(), pixels(), c}; }
  MatrixMap as_matrix() { return {data.data(), pixels(), c}; }

  bool operator==(const Tensor3&) const = default;
};

enum class ConvKind { standard, depthwise, pointwise };

// Convolution (no bias) followed by inference-mode batch norm and an optional
// ReLU6. Running statistics are buffers and never trained.
struct ConvUnit {
  static constexpr double bn_eps = 1e-3;

  ConvKind kind = ConvKind::pointwise;
  int kernel = 1;
  int stride = 1;
  int cin = 0, cout = 0;
  bool relu6 = true;
  std::vector<double> weight;  // standard [k][k][cin][cout], depthwise [k][k][c], pointwise [cin][cout]
  std::vector<double> gamma, beta;
  std::vector<double> mean, var;

  static ConvUnit make(ConvKind kind, int kernel, int stride, int cin, int cout, bool relu6) {
    ConvUnit u;
    u.kind = kind;
    u.kernel = kernel;
    u.stride = stride;
    u.cin = cin;
    u.cout = kind == ConvKind::depthwise ? cin : cout;
    u.relu6 = relu6;
    std::size_t n = 0;
    switch (kind) {
      case ConvKind::standard: n = static_cast<std::size_t>(kernel) * kernel * cin * cout; break;
      case ConvKind::depthwise: n = static_cast<std::size_t>(kernel) * kernel * cin; break;
      case ConvKind::pointwise: n = static_cast<std::size_t>(cin) * cout; break;
    }
    u.weight.assign(n, 0.0);
    u.gamma.assign(u.cout, 1.0);
    u.beta.assign(u.cout, 0.0);
    u.mean.assign(u.cout, 0.0);
    u.var.assign(u.cout, 1.0);
    return u;
  }

  int fan_in() const {
    switch (kind) {
      case ConvKind::standard: return kernel * kernel * cin;
      case ConvKind::depthwise: return kernel * kernel;
      case ConvKind::pointwise: return cin;
    }
    return 1;
  }

  int out_size(int in) const { return (in + 2 * (kernel / 2) - kernel) / stride + 1; }

  std::size_t trainable_count() const { return weight.size() + gamma.size() + beta.size(); }
  std::size_t buffer_count() const { return mean.size() + var.size(); }

  bool operator==(const ConvUnit&) const = default;
};

struct ConvGrad {
  std::vector<double> weight, gamma, beta;

  ConvGrad() = default;
  explicit ConvGrad(const ConvUnit& u)
      : weight(u.weight.size(), 0.0), gamma(u.gamma.size(), 0.0), beta(u.beta.size(), 0.0) {}
};

// Forward state a unit needs for backpropagation.
struct UnitCache {
  Tensor3 input;
  Tensor3 conv_out;  // before batch norm
};

namespace detail {

inline Matrix im2col(const Tensor3& in, int k, int stride, int oh, int ow) {
  const int pad = k / 2;
  Matrix col = Matrix::Zero(static_cast<Eigen::Index>(oh) * ow, static_cast<Eigen::Index>(k) * k * in.c);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      double* row = col.data() + (static_cast<std::size_t>(oy) * ow + ox) * col.cols();
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= in.h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= in.w) continue;
          std::copy_n(&in.data[(static_cast<std::size_t>(iy) * in.w + ix) * in.c], in.c,
                      row + (ky * k + kx) * in.c);
        }
      }
    }
  return col;
}

inline void col2im(const Matrix& col, Tensor3& out, int k, int stride, int oh, int ow) {
  const int pad = k / 2;
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox) {
      const double* row = col.data() + (static_cast<std::size_t>(oy) * ow + ox) * col.cols();
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * stride + ky - pad;
        if (iy < 0 || iy >= out.h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (ix < 0 || ix >= out.w) continue;
          double* dst = &out.data[(static_cast<std::size_t>(iy) * out.w + ix) * out.c];
          const double* src = row + (ky * k + kx) * out.c;
          for (int ch = 0; ch < out.c; ++ch) dst[ch] += src[ch];
        }
      }
    }
}

}  // namespace detail

inline Tensor3 convolve(const ConvUnit& u, const Tensor3& in) {
  if (in.c != u.cin)
    throw domain_error("conv expects " + std::to_string(u.cin) + " channels, got " + std::to_string(in.c));
  const int oh = u.out_size(in.h), ow = u.out_size(in.w);
  Tensor3 out(oh, ow, u.cout);
  switch (u.kind) {
    case ConvKind::pointwise: {
      if (u.stride != 1) throw domain_error("strided pointwise convolution is not supported");
      ConstMatrixMap w(u.weight.data(), u.cin, u.cout);
      out.as_matrix().noalias() = in.as_matrix() * w;
      break;
    }
    case ConvKind::standard: {
      ConstMatrixMap w(u.weight.data(), static_cast<Eigen::Index>(u.kernel) * u.kernel * u.cin, u.cout);
      out.as_matrix().noalias() = detail::im2col(in, u.kernel, u.stride, oh, ow) * w;
      break;
    }
    case ConvKind::depthwise: {
      const int k = u.kernel, pad = k / 2, c = u.cin;
      for (int oy = 0; oy < oh; ++oy)
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * u.stride + ky - pad;
          if (iy < 0 || iy >= in.h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            double* dst = &out.data[(static_cast<std::size_t>(oy) * ow + ox) * c];
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * u.stride + kx - pad;
              if (ix < 0 || ix >= in.w) continue;
              const double* src = &in.data[(static_cast<std::size_t>(iy) * in.w + ix) * c];
              const double* wk = &u.weight[static_cast<std::size_t>(ky * k + kx) * c];
              for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch] * wk[ch];
            }
          }
        }
      break;
    }
  }
  return out;
}

inline void batch_norm_activate(const ConvUnit& u, Tensor3& t) {
  const int c = u.cout;
  std::vector<double> scale(c), shift(c);
  for (int ch = 0; ch < c; ++ch) {
    scale[ch] = u.gamma[ch] / std::sqrt(u.var[ch] + ConvUnit::bn_eps);
    shift[ch] = u.beta[ch] - scale[ch] * u.mean[ch];
  }
  for (std::size_t i = 0; i < t.data.size(); i += c)
    for (int ch = 0; ch < c; ++ch) {
      double v = t.data[i + ch] * scale[ch] + shift[ch];
      if (u.relu6) v = std::clamp(v, 0.0, 6.0);
      t.data[i + ch] = v;
    }
}

inline Tensor3 forward(const ConvUnit& u, const Tensor3& in, UnitCache* cache = nullptr) {
  Tensor3 z = convolve(u, in);
  if (cache) {
    cache->input = in;
    cache->conv_out = z;
  }
  batch_norm_activate(u, z);
  return z;
}

// Accumulates parameter gradients into `g`; returns d(loss)/d(input) when
// `want_input_grad`, else an empty tensor.
inline Tensor3 backward(const ConvUnit& u, const UnitCache& cache, const Tensor3& d_out, ConvGrad& g,
                        bool want_input_grad) {
  const int c = u.cout;
  const Tensor3& z = cache.conv_out;
  Tensor3 dz(z.h, z.w, c);
  std::vector<double> inv_std(c), scale(c);
  for (int ch = 0; ch < c; ++ch) {
    inv_std[ch] = 1.0 / std::sqrt(u.var[ch] + ConvUnit::bn_eps);
    scale[ch] = u.gamma[ch] * inv_std[ch];
  }
  for (std::size_t i = 0; i < z.data.size(); i += c)
    for (int ch = 0; ch < c; ++ch) {
      const double xhat = (z.data[i + ch] - u.mean[ch]) * inv_std[ch];
      double d = d_out.data[i + ch];
      if (u.relu6) {
        const double y = u.gamma[ch] * xhat + u.beta[ch];
        if (y <= 0.0 || y >= 6.0) d = 0.0;
      }
      g.gamma[ch] += d * xhat;
      g.beta[ch] += d;
      dz.data[i + ch] = d * scale[ch];
    }

  const Tensor3& in = cache.input;
  Tensor3 d_in;
  switch (u.kind) {
    case ConvKind::pointwise: {
      MatrixMap gw(g.weight.data(), u.cin, u.cout);
      gw.noalias() += in.as_matrix().transpose() * dz.as_matrix();
      if (want_input_grad) {
        d_in = Tensor3(in.h, in.w, in.c);
        ConstMatrixMap w(u.weight.data(), u.cin, u.cout);
        d_in.as_matrix().noalias() = dz.as_matrix() * w.transpose();
      }
      break;
    }
    case ConvKind::standard: {
      const auto rows = static_cast<Eigen::Index>(u.kernel) * u.kernel * u.cin;
      const Matrix col = detail::im2col(in, u.kernel, u.stride, z.h, z.w);
      MatrixMap gw(g.weight.data(), rows, u.cout);
      gw.noalias() += col.transpose() * dz.as_matrix();
      if (want_input_grad) {
        ConstMatrixMap w(u.weight.data(), rows, u.cout);
        const Matrix dcol = dz.as_matrix() * w.transpose();
        d_in = Tensor3(in.h, in.w, in.c);
        detail::col2im(dcol, d_in, u.kernel, u.stride, z.h, z.w);
      }
      break;
    }
    case ConvKind::depthwise: {
      const int k = u.kernel, pad = k / 2, ch_n = u.cin;
      if (want_input_grad) d_in = Tensor3(in.h, in.w, in.c);
      for (int oy = 0; oy < z.h; ++oy)
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * u.stride + ky - pad;
          if (iy < 0 || iy >= in.h) continue;
          for (int ox = 0; ox < z.w; ++ox) {
            const double* d = &dz.data[(static_cast<std::size_t>(oy) * z.w + ox) * ch_n];
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox * u.stride + kx - pad;
              if (ix < 0 || ix >= in.w) continue;
              const std::size_t at = (static_cast<std::size_t>(iy) * in.w + ix) * ch_n;
              const std::size_t wk = static_cast<std::size_t>(ky * k + kx) * ch_n;
              const double* src = &in.data[at];
              double* gw = &g.weight[wk];
              for (int ch = 0; ch < ch_n; ++ch) gw[ch] += d[ch] * src[ch];
              if (want_input_grad) {
                double* di = &d_in.data[at];
                const double* w = &u.weight[wk];
                for (int ch = 0; ch < ch_n; ++ch) di[ch] += d[ch] * w[ch];
              }
            }
          }
        }
      break;
    }
  }
  return d_in;
}

enum class Activation { relu, sigmoid, linear };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "linear") return Activation::linear;
  throw domain_error("unknown activation '" + s + "'");
}

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct DenseLayer {
  int in = 0, out = 0;
  Activation activation = Activation::relu;
  std::vector<double> weight;  // [in][out]
  std::vector<double> bias;

  static DenseLayer make(int in, int out, Activation a) {
    return {in, out, a, std::vector<double>(static_cast<std::size_t>(in) * out, 0.0),
            std::vector<double>(out, 0.0)};
  }

  // Glorot-uniform weights, zero bias.
  void init(Rng& rng) {
    const double limit = std::sqrt(6.0 / (in + out));
    for (auto& w : weight) w = rng.uniform(-limit, limit);
    std::fill(bias.begin(), bias.end(), 0.0);
  }

  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  bool operator==(const DenseLayer&) const = default;
};

struct DenseGrad {
  std::vector<double> weight, bias;
  explicit DenseGrad(const DenseLayer& l) : weight(l.weight.size(), 0.0), bias(l.bias.size(), 0.0) {}
};

// Per-layer inputs and pre-activations of one batch.
struct DenseCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
};

// Returns the final pre-activations (logits); hidden activations are applied.
inline Matrix dense_forward(std::span<const DenseLayer> layers, const Matrix& x, DenseCache* cache = nullptr) {
  Matrix a = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (a.cols() != l.in) throw domain_error("dense layer expects " + std::to_string(l.in) + " inputs");
    ConstMatrixMap w(l.weight.data(), l.in, l.out);
    Eigen::Map<const Eigen::RowVectorXd> b(l.bias.data(), l.out);
    Matrix z = a * w;
    z.rowwise() += b;
    if (cache) {
      cache->inputs.push_back(a);
      cache->pre.push_back(z);
    }
    if (i + 1 == layers.size()) return z;
    switch (l.activation) {
      case Activation::relu: a = z.cwiseMax(0.0); break;
      case Activation::sigmoid: a = z.unaryExpr([](double v) { return sigmoid(v); }); break;
      case Activation::linear: a = std::move(z); break;
    }
  }
  return a;
}

// `d_logits` is d(loss)/d(final pre-activation). Returns d(loss)/d(x).
inline Matrix dense_backward(std::span<const DenseLayer> layers, const DenseCache& cache, Matrix d_logits,
                             std::span<DenseGrad> grads) {
  Matrix dz = std::move(d_logits);
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& l = layers[k];
    if (k + 1 < layers.size()) {
      const Matrix& z = cache.pre[k];
      switch (l.activation) {
        case Activation::relu: dz = dz.cwiseProduct((z.array() > 0.0).cast<double>().matrix()); break;
        case Activation::sigmoid:
          dz = dz.cwiseProduct(z.unaryExpr([](double v) {
            const double s = sigmoid(v);
            return s * (1.0 - s);
          }));
          break;
        case Activation::linear: break;
      }
    }
    MatrixMap gw(grads[k].weight.data(), l.in, l.out);
    gw.noalias() += cache.inputs[k].transpose() * dz;
    Eigen::Map<Eigen::RowVectorXd> gb(grads[k].bias.data(), l.out);
    gb += dz.colwise().sum();
    ConstMatrixMap w(l.weight.data(), l.in, l.out);
    Matrix dx = dz * w.transpose();
    dz = std::move(dx);
  }
  return dz;
}

// Binary cross-entropy summed over output units, averaged over rows, computed
// from logits. Writes d(loss)/d(logits) when `d_logits` is given.
inline double bce_with_logits(const Matrix& logits, const Matrix& targets, Matrix* d_logits = nullptr) {
  const auto n = static_cast<double>(logits.rows());
  double loss = 0.0;
  if (d_logits) d_logits->resize(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r)
    for (Eigen::Index c = 0; c < logits.cols(); ++c) {
      const double z = logits(r, c), y = targets(r, c);
      loss += softplus(z) - y * z;
      if (d_logits) (*d_logits)(r, c) = (sigmoid(z) - y) / n;
    }
  return loss / n;
}

// A trainable tensor and its gradient, in a fixed order shared with optimizers.
struct ParamSlot {
  std::span<double> value;
  std::span<const double> grad;
};

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

class Adam {
 public:
  explicit Adam(AdamOptions o = {}) : o_(o) {}

  void step(std::span<const ParamSlot> slots) {
    if (m_.empty()) {
      for (const auto& s : slots) {
        m_.emplace_back(s.value.size(), 0.0);
        v_.emplace_back(s.value.size(), 0.0);
      }
    }
    if (m_.size() != slots.size()) throw domain_error("optimizer parameter layout changed");
    ++t_;
    const double lr_t = o_.learning_rate * std::sqrt(1.0 - std::pow(o_.beta2, static_cast<double>(t_))) /
                        (1.0 - std::pow(o_.beta1, static_cast<double>(t_)));
    for (std::size_t k = 0; k < slots.size(); ++k) {
      auto& m = m_[k];
      auto& v = v_[k];
      const auto& s = slots[k];
      for (std::size_t i = 0; i < s.value.size(); ++i) {
        const double g = s.grad[i];
        m[i] = o_.beta1 * m[i] + (1.0 - o_.beta1) * g;
        v[i] = o_.beta2 * v[i] + (1.0 - o_.beta2) * g * g;
        s.value[i] -= lr_t * m[i] / (std::sqrt(v[i]) + o_.epsilon);
      }
    }
  }

 private:
  AdamOptions o_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum) : lr_(learning_rate), momentum_(momentum) {}

  void step(std::span<const ParamSlot> slots) {
    if (velocity_.empty())
      for (const auto& s : slots) velocity_.emplace_back(s.value.size(), 0.0);
    if (velocity_.size() != slots.size()) throw domain_error("optimizer parameter layout changed");
    for (std::size_t k = 0; k < slots.size(); ++k) {
      auto& vel = velocity_[k];
      const auto& s = slots[k];
      for (std::size_t i = 0; i < s.value.size(); ++i) {
        vel[i] = momentum_ * vel[i] - lr_ * s.grad[i];
        s.value[i] += vel[i];
      }
    }
  }

 private:
  double lr_, momentum_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace padbench::nn
