#include "core/tensor.hpp"

#include <cmath>
#include <sstream>

#include "core/error.hpp"

namespace semshift {

static size_t shape_product(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
        throw ShapeError("tensor shape " + semshift::shape_str(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
    }
    cols_ = shape_.empty() ? 1 : shape_.back();
}

Tensor Tensor::zeros(std::vector<size_t> shape) {
    size_t n = shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<size_t> shape, double value) {
    size_t n = shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
    size_t n = values.size();
    return Tensor({1, n}, std::move(values));
}

Tensor Tensor::matrix(size_t rows, size_t cols, std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
}

double Tensor::scalar_value() const {
    if (!is_scalar()) {
        throw ShapeError("expected scalar, got shape " + semshift::shape_str(shape_));
    }
    return data_[0];
}

size_t Tensor::rows() const {
    if (rank() != 2) throw ShapeError("rows() on shape " + semshift::shape_str(shape_));
    return shape_[0];
}

size_t Tensor::cols() const {
    if (rank() != 2) throw ShapeError("cols() on shape " + semshift::shape_str(shape_));
    return shape_[1];
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::require_finite(const char* where) const {
    if (!all_finite()) {
        throw NumericError(std::string(where) + " produced a non-finite value");
    }
}

std::string Tensor::shape_str() const { return semshift::shape_str(shape_); }

std::string shape_str(const std::vector<size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

}  // namespace semshift
