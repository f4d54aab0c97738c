#pragma once

#include <cstddef>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvae {

/// Cache-line aligned storage. Vectorized kernels pick their code path from
/// pointer alignment, so fixing it keeps results independent of where the heap put a buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, kAlign); }
  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const { return true; }
};

template <typename T>
using AlignedVector = std::vector<T, AlignedAllocator<T>>;

/// NCHW extent. Fully connected activations use h = w = 1.
struct Shape {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const { return static_cast<std::size_t>(n) * c * h * w; }
  std::size_t per_sample() const { return static_cast<std::size_t>(c) * h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

template <typename T>
struct Tensor {
  Shape shape;
  AlignedVector<T> data;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), data(s.size(), fill) {}
  Tensor(Shape s, AlignedVector<T> values) : shape(s), data(std::move(values)) {
    if (data.size() != shape.size()) throw std::invalid_argument("tensor data does not match shape " + shape.str());
  }
  Tensor(Shape s, const std::vector<T>& values) : shape(s), data(values.begin(), values.end()) {
    if (data.size() != shape.size()) throw std::invalid_argument("tensor data does not match shape " + shape.str());
  }

  std::size_t size() const { return data.size(); }
  T* sample(int i) { return data.data() + static_cast<std::size_t>(i) * shape.per_sample(); }
  const T* sample(int i) const { return data.data() + static_cast<std::size_t>(i) * shape.per_sample(); }
  std::span<T> span() { return data; }
  std::span<const T> span() const { return data; }

  Tensor reshaped(Shape s) const& {
    if (s.size() != shape.size()) throw std::invalid_argument("reshape " + shape.str() + " -> " + s.str());
    return Tensor(s, data);
  }
  Tensor reshaped(Shape s) && {
    if (s.size() != shape.size()) throw std::invalid_argument("reshape " + shape.str() + " -> " + s.str());
    return Tensor(s, std::move(data));
  }
};

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  Tensor<To> out(src.shape);
  for (std::size_t i = 0; i < src.size(); ++i) out.data[i] = static_cast<To>(src.data[i]);
  return out;
}

inline std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
}

}  // namespace tvae
