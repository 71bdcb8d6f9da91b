#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "ipseg/tensor.hpp"

namespace ipseg {

// Reverse-mode tape. Forward ops append one backward closure per node in
// execution order; backward() replays them in exact reverse order.
// A tape may be consumed once; reset() rearms it and drops the graph.
template <typename T>
class Tape {
 public:
  bool recording() const { return no_grad_depth_ == 0; }

  // Output node for an op over the given inputs. Grad storage is allocated
  // up front when the node participates in differentiation.
  template <typename... Vars>
  Var<T> node(Shape shape, const Vars&... inputs) {
    bool needs = recording() && (... || inputs->needs_grad);
    auto out = std::make_shared<Tensor<T>>();
    out->shape = std::move(shape);
    out->value.assign(static_cast<size_t>(numel(out->shape)), T(0));
    out->needs_grad = needs;
    if (needs) out->grad.assign(out->value.size(), T(0));
    return out;
  }

  void record(std::function<void()> backward_fn) {
    if (recording()) ops_.push_back(std::move(backward_fn));
  }

  void backward(const Var<T>& loss) {
    IPSEG_CHECK(loss->numel() == 1, "backward: loss must be scalar, got " << shape_str(loss->shape));
    IPSEG_CHECK(!consumed_, "backward: tape already consumed; reset() before backing up again");
    consumed_ = true;
    if (loss->needs_grad) loss->grad[0] = T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  void reset() {
    ops_.clear();
    consumed_ = false;
  }

  size_t size() const { return ops_.size(); }

  // RAII scope that turns recording off; values computed inside are
  // constants as far as any later backward pass is concerned.
  class NoGrad {
   public:
    explicit NoGrad(Tape& t) : tape_(t) { ++tape_.no_grad_depth_; }
    ~NoGrad() { --tape_.no_grad_depth_; }
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

   private:
    Tape& tape_;
  };

 private:
  std::vector<std::function<void()>> ops_;
  int no_grad_depth_ = 0;
  bool consumed_ = false;
};

template <typename T>
void accumulate(std::vector<T>& dst, const std::vector<T>& src) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace ipseg
