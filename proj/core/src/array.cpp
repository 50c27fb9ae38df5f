#include "timeemb/array.hpp"

#include "timeemb/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace timeemb {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

RealArray::RealArray(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

RealArray::RealArray(Shape shape, std::vector<double> data)
    : RealArray(std::move(shape), Storage(data.begin(), data.end())) {}

RealArray::RealArray(Shape shape, Storage data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
        throw DimensionError("RealArray: shape " + shape_string(shape_) + " does not match " +
                             std::to_string(data_.size()) + " values");
    }
}

void RealArray::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void RealArray::reshape(Shape shape) {
    if (shape_size(shape) != data_.size()) {
        throw DimensionError("reshape: " + shape_string(shape_) + " -> " + shape_string(shape));
    }
    shape_ = std::move(shape);
}

bool RealArray::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

ComplexArray::ComplexArray(Shape shape) : re_(shape), im_(std::move(shape)) {}

ComplexArray::ComplexArray(RealArray re, RealArray im) : re_(std::move(re)), im_(std::move(im)) {
    require_same_shape(re_.shape(), im_.shape(), "ComplexArray re/im");
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (a != b) {
        throw DimensionError(std::string(what) + ": shape mismatch " + shape_string(a) + " vs " +
                             shape_string(b));
    }
}

double max_abs_diff(const RealArray& a, const RealArray& b) {
    require_same_shape(a.shape(), b.shape(), "max_abs_diff");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

} // namespace timeemb
