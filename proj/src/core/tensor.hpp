#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace semshift {

// Dense row-major tensor of 64-bit floats. Immutable by convention once it
// enters a tape; the few mutating call sites (optimizer, Langevin update)
// own their tensors outright.
class Tensor {
public:
    Tensor() = default;
    Tensor(std::vector<size_t> shape, std::vector<double> data);

    static Tensor zeros(std::vector<size_t> shape);
    static Tensor full(std::vector<size_t> shape, double value);
    static Tensor scalar(double value);
    static Tensor row(std::vector<double> values);                    // 1 x n
    static Tensor matrix(size_t rows, size_t cols, std::vector<double> data);

    const std::vector<size_t>& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t dim(size_t i) const { return shape_[i]; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    // scalar = rank 0, or any single-element tensor
    bool is_scalar() const { return data_.size() == 1; }
    double scalar_value() const;

    size_t rows() const;  // rank-2 only
    size_t cols() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& at(size_t i) { return data_[i]; }
    double at(size_t i) const { return data_[i]; }
    double& at(size_t r, size_t c) { return data_[r * cols_ + c]; }
    double at(size_t r, size_t c) const { return data_[r * cols_ + c]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;

    // throws NumericError naming `where` if any entry is NaN/Inf
    void require_finite(const char* where) const;

    std::string shape_str() const;

private:
    std::vector<size_t> shape_;
    std::vector<double> data_;
    size_t cols_ = 0;  // cached trailing dim for at(r,c)
};

std::string shape_str(const std::vector<size_t>& shape);

}  // namespace semshift
