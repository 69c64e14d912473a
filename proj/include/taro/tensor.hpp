#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "taro/common.hpp"

namespace taro {

// Dense row-major tensor of 64-bit floats. The sole value carrier through
// the autodiff tape. Non-finite entries are rejected at construction.
class Tensor {
public:
    Tensor() = default;

    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (numel_of(shape_) != data_.size()) {
            throw ShapeError("tensor: shape " + shape_string() + " does not match data size " +
                             std::to_string(data_.size()));
        }
        check_finite();
    }

    static Tensor zeros(std::vector<std::size_t> shape) {
        std::size_t n = numel_of(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0));
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor vector(std::vector<double> v) {
        std::size_t n = v.size();
        return Tensor({n}, std::move(v));
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }
    std::size_t size() const { return data_.size(); }
    std::size_t ndim() const { return shape_.size(); }

    double operator[](std::size_t i) const { return data_[i]; }
    double& operator[](std::size_t i) { return data_[i]; }

    bool is_scalar() const { return data_.size() == 1; }
    double scalar_value() const {
        if (!is_scalar()) throw ShapeError("tensor: expected a scalar, got " + shape_string());
        return data_[0];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    double dot(const Tensor& other) const {
        if (!same_shape(other)) {
            throw ShapeError("dot: shape mismatch " + shape_string() + " vs " +
                             other.shape_string());
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < data_.size(); ++i) acc += data_[i] * other.data_[i];
        return acc;
    }

    double norm2() const { return std::sqrt(dot(*this)); }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    void check_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) throw NumericError("tensor: non-finite entry");
        }
    }

    std::string shape_string() const {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
        os << "]";
        return os.str();
    }

private:
    static std::size_t numel_of(const std::vector<std::size_t>& shape) {
        return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               std::multiplies<std::size_t>());
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && a.data() == b.data();
}

}  // namespace taro
