#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mtl/error.hpp"

namespace mtl {

using Real = double;

// Dense row-major tensor of doubles. Rank is 1 or 2 in practice; the storage
// is generic. Values are validated for finiteness at op boundaries by the
// tape, not here.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
        data_.assign(compute_numel(shape_), 0.0);
    }

    Tensor(std::vector<int> shape, std::vector<Real> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (compute_numel(shape_) != data_.size())
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    static Tensor scalar(Real v) { return Tensor({1}, {v}); }

    static Tensor row(std::vector<Real> v) {
        int n = static_cast<int>(v.size());
        return Tensor({1, n}, std::move(v));
    }

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::size_t numel() const { return data_.size(); }

    Real* data() { return data_.data(); }
    const Real* data() const { return data_.data(); }
    std::vector<Real>& vec() { return data_; }
    const std::vector<Real>& vec() const { return data_; }

    Real& operator[](std::size_t i) { return data_[i]; }
    Real operator[](std::size_t i) const { return data_[i]; }

    Real& at(int r, int c) { return data_[static_cast<std::size_t>(r) * dim(1) + c]; }
    Real at(int r, int c) const { return data_[static_cast<std::size_t>(r) * dim(1) + c]; }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    void fill(Real v) { data_.assign(data_.size(), v); }

    bool all_finite() const {
        for (Real v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::string out = "[";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out += "x";
            out += std::to_string(s[i]);
        }
        return out + "]";
    }

    std::string shape_str() const { return shape_str(shape_); }

private:
    static std::size_t compute_numel(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (int d : shape) {
            if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
            n *= static_cast<std::size_t>(d);
        }
        if (shape.empty()) n = 0;
        return n;
    }

    std::vector<int> shape_;
    std::vector<Real> data_;
};

}  // namespace mtl
