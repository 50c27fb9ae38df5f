#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace timeemb {

using Shape = std::vector<std::size_t>;

// Vectorized reductions peel a prefix that depends on pointer alignment, so a
// fixed alignment is needed for run-to-run bitwise reproducibility.
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
    using value_type = T;
    template <class U>
    struct rebind {
        using other = AlignedAllocator<U, Align>;
    };
    AlignedAllocator() noexcept = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U, Align>&) noexcept {}
    T* allocate(std::size_t n) {
        return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{Align}));
    }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{Align}); }
    template <class U>
    bool operator==(const AlignedAllocator<U, Align>&) const noexcept { return true; }
};

using Storage = std::vector<double, AlignedAllocator<double>>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
class RealArray {
public:
    RealArray() = default;
    explicit RealArray(Shape shape, double fill = 0.0);
    RealArray(Shape shape, std::vector<double> data);
    RealArray(Shape shape, Storage data);

    static RealArray scalar(double v) { return RealArray({1}, std::vector<double>{v}); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }
    Storage& storage() noexcept { return data_; }
    const Storage& storage() const noexcept { return data_; }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }

    // 2-D element access, row-major.
    double& at(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

    void fill(double v);
    // Changes the logical shape; the element count must not change.
    void reshape(Shape shape);
    bool all_finite() const noexcept;

    friend bool operator==(const RealArray&, const RealArray&) = default;

private:
    Shape shape_;
    Storage data_;
};

/// Split-storage complex array; re and im always share a shape.
class ComplexArray {
public:
    ComplexArray() = default;
    explicit ComplexArray(Shape shape);
    ComplexArray(RealArray re, RealArray im);

    const Shape& shape() const noexcept { return re_.shape(); }
    std::size_t size() const noexcept { return re_.size(); }

    RealArray& re() noexcept { return re_; }
    const RealArray& re() const noexcept { return re_; }
    RealArray& im() noexcept { return im_; }
    const RealArray& im() const noexcept { return im_; }

    friend bool operator==(const ComplexArray&, const ComplexArray&) = default;

private:
    RealArray re_;
    RealArray im_;
};

// Throws DimensionError naming `what` when the shapes differ.
void require_same_shape(const Shape& a, const Shape& b, const char* what);

double max_abs_diff(const RealArray& a, const RealArray& b);

} // namespace timeemb
