#pragma once

#include "timeemb/array.hpp"

#include <cmath>
#include <random>

namespace timeemb::test {

// Same closed form as tests/oracles/make_oracles.py.
inline RealArray pattern(Shape shape, double phase, double scale = 1.0) {
    RealArray a(std::move(shape));
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = scale * std::sin(0.37 * static_cast<double>(i) + phase);
    return a;
}

inline RealArray gaussian(Shape shape, std::uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, scale);
    RealArray a(std::move(shape));
    for (double& v : a.storage()) v = dist(rng);
    return a;
}

} // namespace timeemb::test
