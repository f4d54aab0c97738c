#pragma once

// Minimal layer library for the encoder/decoder networks: parameters are
// owned by a ParameterSet, layers only hold indices into it, and every
// forward pass records what its backward pass needs in a caller-owned Cache.
// A frozen ParameterSet can therefore be shared by concurrent inference calls.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "tvae/tensor.hpp"

namespace tvae::nn {

template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
  };

  std::size_t add(std::string name, Shape shape);
  std::size_t count() const { return entries_.size(); }
  std::size_t total_size() const;
  std::size_t index_of(const std::string& name) const;

  Tensor<T>& operator[](std::size_t i) { return entries_[i].value; }
  const Tensor<T>& operator[](std::size_t i) const { return entries_[i].value; }
  const std::string& name(std::size_t i) const { return entries_[i].name; }
  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }

  ParameterSet zeros_like() const;
  void set_zero();

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& e : entries_) {
      std::size_t i = out.add(e.name, e.value.shape);
      out[i] = tensor_cast<U>(e.value);
    }
    return out;
  }

 private:
  std::vector<Entry> entries_;
};

template <typename T>
struct Cache {
  std::vector<Tensor<T>> saved;
  std::vector<Cache> children;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const = 0;
  // Returns dL/dx. Parameter gradients are accumulated into `grads` when it is non-null.
  virtual Tensor<T> backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                             ParameterSet<T>* grads) const = 0;
  virtual void initialize(ParameterSet<T>& p, std::mt19937_64& rng) const { (void)p, (void)rng; }
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(ParameterSet<T>& layout, const std::string& name, int in_channels, int out_channels, int kernel, int stride,
         int padding);
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                     ParameterSet<T>* grads) const override;
  void initialize(ParameterSet<T>& p, std::mt19937_64& rng) const override;

 private:
  int in_, out_, k_, stride_, pad_;
  std::size_t weight_, bias_;
};

/// Transposed convolution; weight layout is (in, out, k, k).
template <typename T>
class ConvTranspose2d final : public Layer<T> {
 public:
  ConvTranspose2d(ParameterSet<T>& layout, const std::string& name, int in_channels, int out_channels, int kernel,
                  int stride, int padding);
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                     ParameterSet<T>* grads) const override;
  void initialize(ParameterSet<T>& p, std::mt19937_64& rng) const override;

 private:
  int in_, out_, k_, stride_, pad_;
  std::size_t weight_, bias_;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(ParameterSet<T>& layout, const std::string& name, int in_features, int out_features);
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                     ParameterSet<T>* grads) const override;
  void initialize(ParameterSet<T>& p, std::mt19937_64& rng) const override;
  std::size_t bias_index() const { return bias_; }
  std::size_t weight_index() const { return weight_; }

 private:
  int in_, out_;
  std::size_t weight_, bias_;
};

/// Normalizes each sample over (C, H, W) with a per-channel affine.
template <typename T>
class LayerNorm final : public Layer<T> {
 public:
  LayerNorm(ParameterSet<T>& layout, const std::string& name, int channels, T eps = T(1e-5));
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                     ParameterSet<T>* grads) const override;
  void initialize(ParameterSet<T>& p, std::mt19937_64& rng) const override;

 private:
  int channels_;
  T eps_;
  std::size_t gamma_, beta_;
};

template <typename T>
class SiLU final : public Layer<T> {
 public:
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                     ParameterSet<T>* grads) const override;
};

template <typename T>
class Sigmoid final : public Layer<T> {
 public:
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                     ParameterSet<T>* grads) const override;
};

/// Pure reshape between (n, c*h*w, 1, 1) and (n, c, h, w).
template <typename T>
class Reshape final : public Layer<T> {
 public:
  Reshape(int c, int h, int w) : c_(c), h_(h), w_(w) {}
  Shape output_shape(const Shape& in) const override { return {in.n, c_, h_, w_}; }
  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                     ParameterSet<T>* grads) const override;

 private:
  int c_, h_, w_;
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  Sequential() = default;
  Sequential& add(LayerPtr<T> layer) {
    layers_.push_back(std::move(layer));
    return *this;
  }
  std::size_t size() const { return layers_.size(); }
  Shape output_shape(const Shape& in) const override;
  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                     ParameterSet<T>* grads) const override;
  void initialize(ParameterSet<T>& p, std::mt19937_64& rng) const override;

 private:
  std::vector<LayerPtr<T>> layers_;
};

/// conv -> norm -> SiLU -> conv -> norm, plus identity skip, then SiLU.
template <typename T>
class ResidualBlock final : public Layer<T> {
 public:
  ResidualBlock(ParameterSet<T>& layout, const std::string& name, int channels);
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const override;
  Tensor<T> backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                     ParameterSet<T>* grads) const override;
  void initialize(ParameterSet<T>& p, std::mt19937_64& rng) const override { body_.initialize(p, rng); }

 private:
  Sequential<T> body_;
  SiLU<T> act_;
};

/// Adam moments for one flat parameter vector.
template <typename T>
class AdamState {
 public:
  struct Settings {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
  };

  AdamState() = default;
  explicit AdamState(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  // Descends along `grad` (minimization).
  void step(std::span<T> x, std::span<const T> grad, const Settings& s);
  std::int64_t steps() const { return t_; }

 private:
  std::vector<double> m_, v_;
  std::int64_t t_ = 0;
};

template <typename T>
class Adam {
 public:
  using Settings = typename AdamState<T>::Settings;
  Adam() = default;
  Adam(const ParameterSet<T>& params, Settings settings);
  void step(ParameterSet<T>& params, const ParameterSet<T>& grads);
  std::int64_t steps() const { return states_.empty() ? 0 : states_.front().steps(); }

 private:
  Settings settings_;
  std::vector<AdamState<T>> states_;
};

}  // namespace tvae::nn
