#include "laneid/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace laneid::num {

std::string to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t element_count(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] == 0) {
            throw ShapeError("tensor dimension " + std::to_string(i) + " is zero in shape " +
                             to_string(shape));
        }
    }
}

} // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(data.begin(), data.end()) {
    validate_shape(shape_);
    if (data_.size() != element_count(shape_)) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + to_string(shape_));
    }
}

Tensor Tensor::scalar(double value) { return Tensor({1}, std::vector<double>{value}); }

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::vector(std::vector<double> values) {
    auto n = values.size();
    return Tensor({n}, std::move(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                         to_string(shape_));
    }
    return shape_[axis];
}

double Tensor::at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
}

double& Tensor::at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const {
    if (element_count(shape) != data_.size()) {
        throw ShapeError("cannot reshape " + to_string(shape_) + " to " + to_string(shape));
    }
    Tensor out = *this;
    out.shape_ = std::move(shape);
    return out;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                         to_string(b.shape()));
    }
}

} // namespace laneid::num
