#include "ahgcn/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace ahgcn {

AdamState AdamState::for_params(const ModelParams& params) {
    AdamState state;
    for (const ConstTensorRef& t : named_tensors(params)) {
        if (!t.trainable) continue;
        state.first_moment.emplace_back(t.value->rows(), t.value->cols());
        state.second_moment.emplace_back(t.value->rows(), t.value->cols());
    }
    return state;
}

void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr) {
    auto targets = trainable_tensors(params);
    std::vector<ConstTensorRef> sources;
    for (ConstTensorRef& t : named_tensors(grads)) {
        if (t.trainable) sources.push_back(std::move(t));
    }
    if (targets.size() != sources.size() || targets.size() != state.first_moment.size() ||
        targets.size() != state.second_moment.size()) {
        throw std::invalid_argument("adam_step: parameter, gradient and state tensor counts differ");
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (!targets[i].value->same_shape(*sources[i].value) ||
            !targets[i].value->same_shape(state.first_moment[i]) ||
            !targets[i].value->same_shape(state.second_moment[i])) {
            throw std::invalid_argument("adam_step: shape mismatch for " + targets[i].name);
        }
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < targets.size(); ++i) {
        Matrix& p = *targets[i].value;
        const Matrix& g = *sources[i].value;
        Matrix& m = state.first_moment[i];
        Matrix& v = state.second_moment[i];
        for (std::size_t e = 0; e < p.size(); ++e) {
            m[e] = state.beta1 * m[e] + (1.0 - state.beta1) * g[e];
            v[e] = state.beta2 * v[e] + (1.0 - state.beta2) * g[e] * g[e];
            const double m_hat = m[e] / correction1;
            const double v_hat = v[e] / correction2;
            p[e] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
    }
}

}  // namespace ahgcn
