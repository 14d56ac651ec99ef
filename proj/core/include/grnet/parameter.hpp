#pragma once

#include <string>
#include <utility>

#include "grnet/tensor.hpp"

namespace grnet {

// Learnable tensor with its accumulated gradient. Gradients are summed in by
// tape backward passes and cleared by zero_grad() or the optimizer step.
template <typename S>
struct Parameter {
  std::string name;
  Tensor<S> value;
  Tensor<S> gradient;
  bool decay_exempt = false;  // biases are exempt from weight decay

  Parameter() = default;

  Parameter(std::string n, Tensor<S> v, bool exempt = false)
      : name(std::move(n)),
        value(std::move(v)),
        gradient(Tensor<S>::zeros(value.shape())),
        decay_exempt(exempt) {}

  void zero_grad() { gradient.fill(S(0)); }
};

}  // namespace grnet
