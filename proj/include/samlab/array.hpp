#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace samlab::ad {

// Dense row-major array of 64-bit floats. Ranks 0 (scalar), 1 and 2 are used.
class Array {
public:
    Array() = default;

    explicit Array(std::vector<std::size_t> shape);
    Array(std::vector<std::size_t> shape, std::vector<double> data);

    static Array scalar(double v);
    static Array from_vector(std::vector<double> v);
    static Array matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    static Array zeros_like(const Array& other);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }

    // Row/column view of rank <= 2 arrays: scalars are 1x1, vectors 1xN.
    std::size_t rows() const;
    std::size_t cols() const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }

    bool same_shape(const Array& other) const { return shape_ == other.shape_; }
    std::string shape_string() const;

    bool all_finite() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

}  // namespace samlab::ad
