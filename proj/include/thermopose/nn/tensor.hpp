#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "thermopose/common.hpp"
#include "thermopose/rng.hpp"

namespace thermopose::nn {

/// Dense float tensor, row-major, rank <= 4.
struct Tensor {
  std::vector<int> shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), 0.f) {}

  static size_t numel_of(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) n *= size_t(d);
    return n;
  }
  size_t numel() const { return data.size(); }
  int dim(int i) const { return shape[size_t(i)]; }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, float v) {
    Tensor t(std::move(s));
    std::fill(t.data.begin(), t.data.end(), v);
    return t;
  }
};

inline void he_normal_init(Tensor& t, int fan_in, std::mt19937_64& rng) {
  const double std = std::sqrt(2.0 / std::max(1, fan_in));
  for (auto& v : t.data) v = float(normal(rng, 0.0, std));
}

/// Trainable tensor plus its gradient accumulator and Adam state.
struct Parameter {
  Tensor value;
  Tensor grad;
  Tensor m, v;  // optimizer moments, sized on first step
  std::string name;

  explicit Parameter(std::vector<int> shape, std::string name_ = "")
      : value(shape), grad(shape), name(std::move(name_)) {}
  Parameter() = default;

  void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.f); }
};

}  // namespace thermopose::nn
