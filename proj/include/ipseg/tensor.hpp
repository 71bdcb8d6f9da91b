#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipseg {

// Contract checks throw; training code treats them as programmer/config errors.
#define IPSEG_CHECK(cond, msg)                    \
  do {                                            \
    if (!(cond)) {                                \
      std::ostringstream oss_;                    \
      oss_ << msg;                                \
      throw std::invalid_argument(oss_.str());    \
    }                                             \
  } while (0)

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

// Dense row-major tensor. `grad` is allocated only when the value
// participates in differentiation (needs_grad). requires_grad marks
// trainable leaves; needs_grad additionally covers intermediates that
// sit between a leaf and the loss.
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  bool needs_grad = false;

  Tensor() = default;
  Tensor(Shape s, bool req)
      : shape(std::move(s)), value(static_cast<size_t>(ipseg::numel(shape)), T(0)),
        requires_grad(req), needs_grad(req) {
    if (needs_grad) grad.assign(value.size(), T(0));
  }

  int64_t numel() const { return static_cast<int64_t>(value.size()); }
  int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

template <typename T>
using Var = std::shared_ptr<Tensor<T>>;

template <typename T>
Var<T> make_leaf(Shape shape, bool requires_grad = false) {
  return std::make_shared<Tensor<T>>(std::move(shape), requires_grad);
}

template <typename T>
Var<T> make_const(Shape shape, std::vector<T> values) {
  IPSEG_CHECK(numel(shape) == static_cast<int64_t>(values.size()),
              "tensor values length " << values.size() << " does not match shape " << shape_str(shape));
  auto v = make_leaf<T>(std::move(shape), false);
  v->value = std::move(values);
  return v;
}

template <typename T>
Var<T> make_scalar(T x) {
  auto v = make_leaf<T>(Shape{1}, false);
  v->value[0] = x;
  return v;
}

// NCHW helpers used by every spatial kernel.
template <typename T>
void expect_nchw(const Var<T>& x, const char* who) {
  IPSEG_CHECK(x->shape.size() == 4, who << ": expected NCHW tensor, got " << shape_str(x->shape));
}

}  // namespace ipseg
