#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rdmd/tensor.hpp"

namespace rdmd {

struct AdamState {
  std::uint64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Lazily sizes the moment buffers on the first call.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state, double lr);

}  // namespace rdmd
