#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace laneid::num {

/// Raised when operand shapes or dimensions disagree.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

/// 64-byte aligned storage. Eigen's vectorized kernels peel unaligned heads,
/// so the summation order (and the last bits of a result) would otherwise
/// depend on where malloc happened to put the buffer.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};
    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
    template <class U>
    bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::string to_string(const Shape& shape);
std::size_t element_count(const Shape& shape);

/// Dense row-major array of doubles.
///
/// A Tensor is a plain value: copying it copies the data. Shapes must be
/// non-empty lists of positive sizes, except for the default-constructed
/// empty tensor which has no shape and no data.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);
    static Tensor vector(std::initializer_list<double> values);
    static Tensor vector(std::vector<double> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    double operator[](std::size_t i) const noexcept { return data_[i]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }

    // [C,H,W] accessors.
    double at(std::size_t c, std::size_t y, std::size_t x) const;
    double& at(std::size_t c, std::size_t y, std::size_t x);

    double item() const;
    bool all_finite() const noexcept;

    void fill(double value) noexcept;
    Tensor reshaped(Shape shape) const;

    bool operator==(const Tensor& other) const = default;

private:
    Shape shape_;
    Buffer data_;
};

/// Throws ShapeError naming `what` unless the two shapes agree.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

} // namespace laneid::num
