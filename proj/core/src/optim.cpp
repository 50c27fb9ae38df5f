#include "timeemb/optim.hpp"

#include "timeemb/error.hpp"

#include <cmath>

namespace timeemb {

void AdamState::initialize(std::span<Parameter* const> params) {
    first_moment.clear();
    second_moment.clear();
    for (const Parameter* p : params) {
        first_moment.emplace_back(p->value.shape());
        second_moment.emplace_back(p->value.shape());
    }
    step = 0;
    initialized_ = true;
}

void adam_step(std::span<Parameter* const> params, AdamState& state) {
    if (!state.initialized()) throw ContractError("adam_step: optimizer state is not initialized");
    if (state.first_moment.size() != params.size()) {
        throw ContractError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                            " parameters, got " + std::to_string(params.size()));
    }
    const auto& opt = state.options;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(opt.beta1, t);
    const double correction2 = 1.0 - std::pow(opt.beta2, t);

    for (std::size_t j = 0; j < params.size(); ++j) {
        Parameter& p = *params[j];
        RealArray& m = state.first_moment[j];
        RealArray& v = state.second_moment[j];
        require_same_shape(m.shape(), p.value.shape(), "adam_step moment");
        require_same_shape(p.grad.shape(), p.value.shape(), "adam_step gradient");
        for (std::size_t i = 0; i < p.value.size(); ++i) {
            const double g = p.grad[i];
            m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
            v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
            const double m_hat = m[i] / correction1;
            const double v_hat = v[i] / correction2;
            p.value[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.eps);
        }
        p.zero_grad();
    }
}

} // namespace timeemb
