#include "tvae/nn.hpp"

#include <Eigen/Core>
#include <cmath>

namespace tvae::nn {
namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMatrix<T>>;
template <typename T>
using MapConstMat = Eigen::Map<const RowMatrix<T>>;

// Output columns [lo, hi) whose input column ox * s - p + kj lies inside [0, w).
inline void valid_columns(int w, int s, int p, int kj, int wo, int& lo, int& hi) {
  lo = 0;
  while (lo < wo && lo * s - p + kj < 0) ++lo;
  hi = wo;
  while (hi > lo && (hi - 1) * s - p + kj >= w) --hi;
}

// col has c*k*k rows and ho*wo columns.
template <typename T>
void im2col(const T* x, int c, int h, int w, int k, int s, int p, int ho, int wo, T* col) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* row = col + (static_cast<std::size_t>(ch) * k * k + ki * k + kj) * ho * wo;
        int lo, hi;
        valid_columns(w, s, p, kj, wo, lo, hi);
        for (int oy = 0; oy < ho; ++oy) {
          T* out = row + oy * wo;
          const int iy = oy * s - p + ki;
          if (iy < 0 || iy >= h) {
            std::fill(out, out + wo, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(ch) * h + iy) * w - p + kj;
          std::fill(out, out + lo, T(0));
          if (s == 1) {
            std::copy(src + lo, src + hi, out + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) out[ox] = src[ox * s];
          }
          std::fill(out + hi, out + wo, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int c, int h, int w, int k, int s, int p, int ho, int wo, T* x) {
  for (int ch = 0; ch < c; ++ch) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* row = col + (static_cast<std::size_t>(ch) * k * k + ki * k + kj) * ho * wo;
        int lo, hi;
        valid_columns(w, s, p, kj, wo, lo, hi);
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * s - p + ki;
          if (iy < 0 || iy >= h) continue;
          T* dst = x + (static_cast<std::size_t>(ch) * h + iy) * w - p + kj;
          const T* in = row + oy * wo;
          if (s == 1) {
            for (int ox = lo; ox < hi; ++ox) dst[ox] += in[ox];
          } else {
            for (int ox = lo; ox < hi; ++ox) dst[ox * s] += in[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void fill_normal(Tensor<T>& t, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.data) v = static_cast<T>(dist(rng));
}

template <typename T>
Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> array_of(Tensor<T>& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.data.size())};
}

template <typename T>
Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> array_of(const Tensor<T>& t) {
  return {t.data.data(), static_cast<Eigen::Index>(t.data.size())};
}

template <typename T>
T sigmoid(T x) {
  return x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

}  // namespace

// ---------------------------------------------------------------------------
// ParameterSet

template <typename T>
std::size_t ParameterSet<T>::add(std::string name, Shape shape) {
  entries_.push_back({std::move(name), Tensor<T>(shape)});
  return entries_.size() - 1;
}

template <typename T>
std::size_t ParameterSet<T>::total_size() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

template <typename T>
std::size_t ParameterSet<T>::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].name == name) return i;
  throw std::out_of_range("no parameter named " + name);
}

template <typename T>
ParameterSet<T> ParameterSet<T>::zeros_like() const {
  ParameterSet out;
  for (const auto& e : entries_) out.add(e.name, e.value.shape);
  return out;
}

template <typename T>
void ParameterSet<T>::set_zero() {
  for (auto& e : entries_) std::fill(e.value.data.begin(), e.value.data.end(), T(0));
}

// ---------------------------------------------------------------------------
// Conv2d

template <typename T>
Conv2d<T>::Conv2d(ParameterSet<T>& layout, const std::string& name, int in_channels, int out_channels, int kernel,
                  int stride, int padding)
    : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(padding) {
  weight_ = layout.add(name + ".weight", {out_, in_, k_, k_});
  bias_ = layout.add(name + ".bias", {1, out_, 1, 1});
}

template <typename T>
Shape Conv2d<T>::output_shape(const Shape& in) const {
  if (in.c != in_) throw std::invalid_argument("conv2d channel mismatch: " + in.str());
  return {in.n, out_, (in.h + 2 * pad_ - k_) / stride_ + 1, (in.w + 2 * pad_ - k_) / stride_ + 1};
}

template <typename T>
Tensor<T> Conv2d<T>::forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const {
  const Shape os = output_shape(x.shape);
  Tensor<T> y(os);
  const int cols = os.h * os.w;
  const int rows = in_ * k_ * k_;
  AlignedVector<T> col(static_cast<std::size_t>(rows) * cols);
  MapConstMat<T> weight(p[weight_].data.data(), out_, rows);
  const T* bias = p[bias_].data.data();
  for (int n = 0; n < x.shape.n; ++n) {
    im2col(x.sample(n), in_, x.shape.h, x.shape.w, k_, stride_, pad_, os.h, os.w, col.data());
    MapMat<T> out(y.sample(n), out_, cols);
    out.noalias() = weight * MapConstMat<T>(col.data(), rows, cols);
    for (int o = 0; o < out_; ++o) out.row(o).array() += bias[o];
  }
  if (cache) cache->saved = {x};
  return y;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                              ParameterSet<T>* grads) const {
  const Tensor<T>& x = cache.saved.at(0);
  const Shape os = dy.shape;
  const int cols = os.h * os.w;
  const int rows = in_ * k_ * k_;
  Tensor<T> dx(x.shape);
  AlignedVector<T> col(static_cast<std::size_t>(rows) * cols);
  AlignedVector<T> dcol(static_cast<std::size_t>(rows) * cols);
  MapConstMat<T> weight(p[weight_].data.data(), out_, rows);
  for (int n = 0; n < x.shape.n; ++n) {
    MapConstMat<T> g(dy.sample(n), out_, cols);
    if (grads) {
      im2col(x.sample(n), in_, x.shape.h, x.shape.w, k_, stride_, pad_, os.h, os.w, col.data());
      MapMat<T> dw((*grads)[weight_].data.data(), out_, rows);
      dw.noalias() += g * MapConstMat<T>(col.data(), rows, cols).transpose();
      T* db = (*grads)[bias_].data.data();
      for (int o = 0; o < out_; ++o) db[o] += g.row(o).sum();
    }
    MapMat<T>(dcol.data(), rows, cols).noalias() = weight.transpose() * g;
    col2im(dcol.data(), in_, x.shape.h, x.shape.w, k_, stride_, pad_, os.h, os.w, dx.sample(n));
  }
  return dx;
}

template <typename T>
void Conv2d<T>::initialize(ParameterSet<T>& p, std::mt19937_64& rng) const {
  fill_normal(p[weight_], std::sqrt(2.0 / (in_ * k_ * k_)), rng);
  p[bias_].data.assign(p[bias_].size(), T(0));
}

// ---------------------------------------------------------------------------
// ConvTranspose2d: the adjoint of a strided convolution whose "image" is the
// output of this layer.

template <typename T>
ConvTranspose2d<T>::ConvTranspose2d(ParameterSet<T>& layout, const std::string& name, int in_channels,
                                    int out_channels, int kernel, int stride, int padding)
    : in_(in_channels), out_(out_channels), k_(kernel), stride_(stride), pad_(padding) {
  weight_ = layout.add(name + ".weight", {in_, out_, k_, k_});
  bias_ = layout.add(name + ".bias", {1, out_, 1, 1});
}

template <typename T>
Shape ConvTranspose2d<T>::output_shape(const Shape& in) const {
  if (in.c != in_) throw std::invalid_argument("conv_transpose2d channel mismatch: " + in.str());
  return {in.n, out_, (in.h - 1) * stride_ - 2 * pad_ + k_, (in.w - 1) * stride_ - 2 * pad_ + k_};
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const {
  const Shape os = output_shape(x.shape);
  Tensor<T> y(os);
  const int cols = x.shape.h * x.shape.w;
  const int rows = out_ * k_ * k_;
  AlignedVector<T> col(static_cast<std::size_t>(rows) * cols);
  MapConstMat<T> weight(p[weight_].data.data(), in_, rows);
  const T* bias = p[bias_].data.data();
  const std::size_t plane = static_cast<std::size_t>(os.h) * os.w;
  for (int n = 0; n < x.shape.n; ++n) {
    MapMat<T>(col.data(), rows, cols).noalias() = weight.transpose() * MapConstMat<T>(x.sample(n), in_, cols);
    T* out = y.sample(n);
    for (int o = 0; o < out_; ++o) std::fill(out + o * plane, out + (o + 1) * plane, bias[o]);
    col2im(col.data(), out_, os.h, os.w, k_, stride_, pad_, x.shape.h, x.shape.w, out);
  }
  if (cache) cache->saved = {x};
  return y;
}

template <typename T>
Tensor<T> ConvTranspose2d<T>::backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                                       ParameterSet<T>* grads) const {
  const Tensor<T>& x = cache.saved.at(0);
  const Shape os = dy.shape;
  const int cols = x.shape.h * x.shape.w;
  const int rows = out_ * k_ * k_;
  const std::size_t plane = static_cast<std::size_t>(os.h) * os.w;
  Tensor<T> dx(x.shape);
  AlignedVector<T> dcol(static_cast<std::size_t>(rows) * cols);
  MapConstMat<T> weight(p[weight_].data.data(), in_, rows);
  for (int n = 0; n < x.shape.n; ++n) {
    im2col(dy.sample(n), out_, os.h, os.w, k_, stride_, pad_, x.shape.h, x.shape.w, dcol.data());
    MapConstMat<T> dc(dcol.data(), rows, cols);
    MapMat<T>(dx.sample(n), in_, cols).noalias() = weight * dc;
    if (grads) {
      MapMat<T> dw((*grads)[weight_].data.data(), in_, rows);
      dw.noalias() += MapConstMat<T>(x.sample(n), in_, cols) * dc.transpose();
      T* db = (*grads)[bias_].data.data();
      const T* g = dy.sample(n);
      for (int o = 0; o < out_; ++o) {
        T acc = 0;
        for (std::size_t i = 0; i < plane; ++i) acc += g[o * plane + i];
        db[o] += acc;
      }
    }
  }
  return dx;
}

template <typename T>
void ConvTranspose2d<T>::initialize(ParameterSet<T>& p, std::mt19937_64& rng) const {
  const double fan_in = static_cast<double>(in_) * k_ * k_ / (stride_ * stride_);
  fill_normal(p[weight_], std::sqrt(2.0 / fan_in), rng);
  p[bias_].data.assign(p[bias_].size(), T(0));
}

// ---------------------------------------------------------------------------
// Linear

template <typename T>
Linear<T>::Linear(ParameterSet<T>& layout, const std::string& name, int in_features, int out_features)
    : in_(in_features), out_(out_features) {
  weight_ = layout.add(name + ".weight", {out_, in_, 1, 1});
  bias_ = layout.add(name + ".bias", {1, out_, 1, 1});
}

template <typename T>
Shape Linear<T>::output_shape(const Shape& in) const {
  if (static_cast<int>(in.per_sample()) != in_) throw std::invalid_argument("linear input mismatch: " + in.str());
  return {in.n, out_, 1, 1};
}

template <typename T>
Tensor<T> Linear<T>::forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const {
  const Shape os = output_shape(x.shape);
  Tensor<T> y(os);
  MapMat<T> out(y.data.data(), os.n, out_);
  out.noalias() = MapConstMat<T>(x.data.data(), os.n, in_) * MapConstMat<T>(p[weight_].data.data(), out_, in_).transpose();
  out.rowwise() += Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>>(p[bias_].data.data(), out_);
  if (cache) cache->saved = {x};
  return y;
}

template <typename T>
Tensor<T> Linear<T>::backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                              ParameterSet<T>* grads) const {
  const Tensor<T>& x = cache.saved.at(0);
  const int n = x.shape.n;
  MapConstMat<T> g(dy.data.data(), n, out_);
  if (grads) {
    MapMat<T>((*grads)[weight_].data.data(), out_, in_).noalias() += g.transpose() * MapConstMat<T>(x.data.data(), n, in_);
    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>>((*grads)[bias_].data.data(), out_) += g.colwise().sum();
  }
  Tensor<T> dx(x.shape);
  MapMat<T>(dx.data.data(), n, in_).noalias() = g * MapConstMat<T>(p[weight_].data.data(), out_, in_);
  return dx;
}

template <typename T>
void Linear<T>::initialize(ParameterSet<T>& p, std::mt19937_64& rng) const {
  fill_normal(p[weight_], std::sqrt(1.0 / in_), rng);
  p[bias_].data.assign(p[bias_].size(), T(0));
}

// ---------------------------------------------------------------------------
// LayerNorm

template <typename T>
LayerNorm<T>::LayerNorm(ParameterSet<T>& layout, const std::string& name, int channels, T eps)
    : channels_(channels), eps_(eps) {
  gamma_ = layout.add(name + ".gamma", {1, channels_, 1, 1});
  beta_ = layout.add(name + ".beta", {1, channels_, 1, 1});
}

template <typename T>
Tensor<T> LayerNorm<T>::forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const {
  if (x.shape.c != channels_) throw std::invalid_argument("layer norm channel mismatch: " + x.shape.str());
  const std::size_t m = x.shape.per_sample();
  const std::size_t plane = static_cast<std::size_t>(x.shape.h) * x.shape.w;
  Tensor<T> y(x.shape);
  Tensor<T> xhat(x.shape);
  Tensor<T> rstd({x.shape.n, 1, 1, 1});
  const T* gamma = p[gamma_].data.data();
  const T* beta = p[beta_].data.data();
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  for (int n = 0; n < x.shape.n; ++n) {
    const Eigen::Map<const Arr> src(x.sample(n), static_cast<Eigen::Index>(m));
    const double mean = src.template cast<double>().mean();
    const double var = (src.template cast<double>() - mean).square().mean();
    const T r = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps_)));
    rstd.data[n] = r;
    Eigen::Map<Arr> xh(xhat.sample(n), static_cast<Eigen::Index>(m));
    xh = (src - static_cast<T>(mean)) * r;
    for (int c = 0; c < channels_; ++c) {
      Eigen::Map<Arr> dst(y.sample(n) + c * plane, static_cast<Eigen::Index>(plane));
      dst = gamma[c] * xh.segment(c * plane, plane) + beta[c];
    }
  }
  if (cache) cache->saved = {std::move(xhat), std::move(rstd)};
  return y;
}

template <typename T>
Tensor<T> LayerNorm<T>::backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                                 ParameterSet<T>* grads) const {
  const Tensor<T>& xhat = cache.saved.at(0);
  const Tensor<T>& rstd = cache.saved.at(1);
  const std::size_t m = xhat.shape.per_sample();
  const std::size_t plane = static_cast<std::size_t>(xhat.shape.h) * xhat.shape.w;
  const T* gamma = p[gamma_].data.data();
  Tensor<T> dx(xhat.shape);
  using Arr = Eigen::Array<T, Eigen::Dynamic, 1>;
  Arr dxhat(m);
  for (int n = 0; n < xhat.shape.n; ++n) {
    const Eigen::Map<const Arr> g(dy.sample(n), static_cast<Eigen::Index>(m));
    const Eigen::Map<const Arr> xh(xhat.sample(n), static_cast<Eigen::Index>(m));
    for (int c = 0; c < channels_; ++c) {
      const auto gc = g.segment(c * plane, plane);
      dxhat.segment(c * plane, plane) = gc * gamma[c];
      if (grads) {
        (*grads)[gamma_].data[c] += (gc * xh.segment(c * plane, plane)).sum();
        (*grads)[beta_].data[c] += gc.sum();
      }
    }
    const T mean_d = static_cast<T>(dxhat.template cast<double>().mean());
    const T mean_dx = static_cast<T>((dxhat * xh).template cast<double>().mean());
    Eigen::Map<Arr> out(dx.sample(n), static_cast<Eigen::Index>(m));
    out = rstd.data[n] * (dxhat - mean_d - xh * mean_dx);
  }
  return dx;
}

template <typename T>
void LayerNorm<T>::initialize(ParameterSet<T>& p, std::mt19937_64&) const {
  p[gamma_].data.assign(p[gamma_].size(), T(1));
  p[beta_].data.assign(p[beta_].size(), T(0));
}

// ---------------------------------------------------------------------------
// Activations

template <typename T>
Tensor<T> SiLU<T>::forward(const ParameterSet<T>&, const Tensor<T>& x, Cache<T>* cache) const {
  Tensor<T> y(x.shape);
  const auto xa = array_of(x);
  array_of(y) = xa / (T(1) + (-xa).exp());
  if (cache) cache->saved = {x};
  return y;
}

template <typename T>
Tensor<T> SiLU<T>::backward(const ParameterSet<T>&, const Cache<T>& cache, const Tensor<T>& dy,
                            ParameterSet<T>*) const {
  const Tensor<T>& x = cache.saved.at(0);
  Tensor<T> dx(x.shape);
  const auto xa = array_of(x);
  const auto sig = (T(1) / (T(1) + (-xa).exp())).eval();
  array_of(dx) = array_of(dy) * sig * (T(1) + xa * (T(1) - sig));
  return dx;
}

template <typename T>
Tensor<T> Sigmoid<T>::forward(const ParameterSet<T>&, const Tensor<T>& x, Cache<T>* cache) const {
  Tensor<T> y(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] = sigmoid(x.data[i]);
  if (cache) cache->saved = {y};
  return y;
}

template <typename T>
Tensor<T> Sigmoid<T>::backward(const ParameterSet<T>&, const Cache<T>& cache, const Tensor<T>& dy,
                               ParameterSet<T>*) const {
  const Tensor<T>& y = cache.saved.at(0);
  Tensor<T> dx(y.shape);
  for (std::size_t i = 0; i < y.size(); ++i) dx.data[i] = dy.data[i] * y.data[i] * (T(1) - y.data[i]);
  return dx;
}

template <typename T>
Tensor<T> Reshape<T>::forward(const ParameterSet<T>&, const Tensor<T>& x, Cache<T>* cache) const {
  if (cache) {
    Tensor<T> marker;
    marker.shape = x.shape;
    cache->saved = {std::move(marker)};
  }
  return x.reshaped(output_shape(x.shape));
}

template <typename T>
Tensor<T> Reshape<T>::backward(const ParameterSet<T>&, const Cache<T>& cache, const Tensor<T>& dy,
                               ParameterSet<T>*) const {
  return dy.reshaped(cache.saved.at(0).shape);
}

// ---------------------------------------------------------------------------
// Composites

template <typename T>
Shape Sequential<T>::output_shape(const Shape& in) const {
  Shape s = in;
  for (const auto& l : layers_) s = l->output_shape(s);
  return s;
}

template <typename T>
Tensor<T> Sequential<T>::forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const {
  if (cache) cache->children.assign(layers_.size(), Cache<T>{});
  Tensor<T> h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i)
    h = layers_[i]->forward(p, h, cache ? &cache->children[i] : nullptr);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                                  ParameterSet<T>* grads) const {
  Tensor<T> g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(p, cache.children.at(i), g, grads);
  return g;
}

template <typename T>
void Sequential<T>::initialize(ParameterSet<T>& p, std::mt19937_64& rng) const {
  for (const auto& l : layers_) l->initialize(p, rng);
}

template <typename T>
ResidualBlock<T>::ResidualBlock(ParameterSet<T>& layout, const std::string& name, int channels) {
  body_.add(std::make_unique<Conv2d<T>>(layout, name + ".conv1", channels, channels, 3, 1, 1))
      .add(std::make_unique<LayerNorm<T>>(layout, name + ".norm1", channels))
      .add(std::make_unique<SiLU<T>>())
      .add(std::make_unique<Conv2d<T>>(layout, name + ".conv2", channels, channels, 3, 1, 1))
      .add(std::make_unique<LayerNorm<T>>(layout, name + ".norm2", channels));
}

template <typename T>
Tensor<T> ResidualBlock<T>::forward(const ParameterSet<T>& p, const Tensor<T>& x, Cache<T>* cache) const {
  if (cache) cache->children.assign(2, Cache<T>{});
  Tensor<T> h = body_.forward(p, x, cache ? &cache->children[0] : nullptr);
  for (std::size_t i = 0; i < h.size(); ++i) h.data[i] += x.data[i];
  return act_.forward(p, h, cache ? &cache->children[1] : nullptr);
}

template <typename T>
Tensor<T> ResidualBlock<T>::backward(const ParameterSet<T>& p, const Cache<T>& cache, const Tensor<T>& dy,
                                     ParameterSet<T>* grads) const {
  Tensor<T> ds = act_.backward(p, cache.children.at(1), dy, grads);
  Tensor<T> dx = body_.backward(p, cache.children.at(0), ds, grads);
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += ds.data[i];
  return dx;
}

// ---------------------------------------------------------------------------
// Adam

template <typename T>
void AdamState<T>::step(std::span<T> x, std::span<const T> grad, const Settings& s) {
  if (m_.size() != x.size()) {
    m_.assign(x.size(), 0.0);
    v_.assign(x.size(), 0.0);
  }
  ++t_;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double g = grad[i];
    m_[i] = s.beta1 * m_[i] + (1.0 - s.beta1) * g;
    v_[i] = s.beta2 * v_[i] + (1.0 - s.beta2) * g * g;
    const double update = s.learning_rate * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + s.epsilon);
    x[i] = static_cast<T>(x[i] - update);
  }
}

template <typename T>
Adam<T>::Adam(const ParameterSet<T>& params, Settings settings) : settings_(settings) {
  for (const auto& e : params.entries()) states_.emplace_back(e.value.size());
}

template <typename T>
void Adam<T>::step(ParameterSet<T>& params, const ParameterSet<T>& grads) {
  for (std::size_t i = 0; i < states_.size(); ++i)
    states_[i].step(params[i].span(), grads[i].span(), settings_);
}

#define TVAE_INSTANTIATE(T)           \
  template class ParameterSet<T>;     \
  template class Conv2d<T>;           \
  template class ConvTranspose2d<T>;  \
  template class Linear<T>;           \
  template class LayerNorm<T>;        \
  template class SiLU<T>;             \
  template class Sigmoid<T>;          \
  template class Reshape<T>;          \
  template class Sequential<T>;       \
  template class ResidualBlock<T>;    \
  template class AdamState<T>;        \
  template class Adam<T>;

TVAE_INSTANTIATE(float)
TVAE_INSTANTIATE(double)

#undef TVAE_INSTANTIATE

}  // namespace tvae::nn
