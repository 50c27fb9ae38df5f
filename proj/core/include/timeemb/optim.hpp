#pragma once

#include "timeemb/array.hpp"
#include "timeemb/autodiff.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace timeemb {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moment buffers and step counter for Adam. Must be initialized against the
/// parameter list it will update.
struct AdamState {
    AdamOptions options;
    std::uint64_t step = 0;
    std::vector<RealArray> first_moment;
    std::vector<RealArray> second_moment;

    bool initialized() const noexcept { return initialized_; }
    void initialize(std::span<Parameter* const> params);

private:
    bool initialized_ = false;
};

/// One bias-corrected Adam update, then zeroes every gradient.
void adam_step(std::span<Parameter* const> params, AdamState& state);

} // namespace timeemb
