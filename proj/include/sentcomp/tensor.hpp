#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sentcomp {

#ifdef SENTCOMP_SINGLE_PRECISION
using real = float;
#else
using real = double;
#endif

/// Dense tensor of rank 0 (scalar), 1 (vector) or 2 (matrix).
struct Tensor {
  std::vector<int> shape;
  std::vector<real> v;

  Tensor() = default;
  Tensor(std::vector<int> s, std::vector<real> values) : shape(std::move(s)), v(std::move(values)) {
    if (static_cast<long>(v.size()) != numel_of(shape))
      throw std::invalid_argument("tensor: " + std::to_string(v.size()) +
                                  " values for shape " + shape_str(shape));
  }

  static long numel_of(const std::vector<int>& s) {
    long n = 1;
    for (int d : s) {
      if (d < 0) throw std::invalid_argument("tensor: negative dimension");
      n *= d;
    }
    return n;
  }

  static Tensor zeros(std::vector<int> s) {
    long n = numel_of(s);
    return Tensor(std::move(s), std::vector<real>(static_cast<size_t>(n), real(0)));
  }
  static Tensor scalar(real x) { return Tensor({}, {x}); }
  static Tensor vec(std::vector<real> values) {
    int n = static_cast<int>(values.size());
    return Tensor({n}, std::move(values));
  }
  static Tensor mat(int r, int c, std::vector<real> values) { return Tensor({r, c}, std::move(values)); }

  int rank() const { return static_cast<int>(shape.size()); }
  long numel() const { return static_cast<long>(v.size()); }
  int rows() const { return shape.at(0); }
  int cols() const { return shape.at(1); }

  real& at(int i) { return v[static_cast<size_t>(i)]; }
  real at(int i) const { return v[static_cast<size_t>(i)]; }
  real& at(int i, int j) { return v[static_cast<size_t>(i) * cols() + j]; }
  real at(int i, int j) const { return v[static_cast<size_t>(i) * cols() + j]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (real x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }

  void fill(real x) { std::fill(v.begin(), v.end(), x); }

  static std::string shape_str(const std::vector<int>& s) {
    std::ostringstream out;
    out << '[';
    for (size_t i = 0; i < s.size(); ++i) {
      if (i) out << ',';
      out << s[i];
    }
    out << ']';
    return out.str();
  }
};

inline std::string shape_str(const Tensor& t) { return Tensor::shape_str(t.shape); }

}  // namespace sentcomp
