#pragma once

#include <cstdint>
#include <vector>

#include "ahgcn/model.hpp"

namespace ahgcn {

// First/second moment estimates for every trainable tensor, in
// trainable_tensors() order.
struct AdamState {
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    std::uint64_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState for_params(const ModelParams& params);
};

// One bias-corrected Adam update of every trainable tensor.
void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr);

}  // namespace ahgcn
