#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace monobev::nn {

struct ShapeMismatchError : std::runtime_error {
  explicit ShapeMismatchError(const std::string& what) : std::runtime_error(what) {}
};
struct NoForwardCacheError : std::runtime_error {
  explicit NoForwardCacheError(const std::string& what) : std::runtime_error(what) {}
};

// Dense n-d value container with an optional same-shape gradient buffer.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty when absent

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    values.assign(numel(), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> v)
      : shape(std::move(s)), values(std::move(v)) {
    if (static_cast<std::int64_t>(values.size()) != numel()) {
      throw ShapeMismatchError("value count does not match shape");
    }
  }

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (int d : shape) n *= d;
    return n;
  }

  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

inline void require_shape(const Tensor& t, const std::vector<int>& shape,
                          const char* where) {
  if (t.shape != shape) {
    throw ShapeMismatchError(std::string(where) + ": unexpected tensor shape");
  }
}

}  // namespace monobev::nn
