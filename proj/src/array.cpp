#include "samlab/array.hpp"

#include <cmath>
#include <sstream>

#include "samlab/errors.hpp"

namespace samlab::ad {

namespace {
std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}
}  // namespace

Array::Array(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Array::Array(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size()) {
        throw StateError("Array: shape product " + std::to_string(shape_product(shape_)) +
                         " != data length " + std::to_string(data_.size()));
    }
}

Array Array::scalar(double v) { return Array({}, {v}); }

Array Array::from_vector(std::vector<double> v) {
    std::size_t n = v.size();
    return Array({n}, std::move(v));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
    return Array({rows, cols}, std::move(data));
}

Array Array::zeros_like(const Array& other) { return Array(other.shape_); }

std::size_t Array::rows() const { return rank() == 2 ? shape_[0] : 1; }

std::size_t Array::cols() const {
    if (rank() == 2) return shape_[1];
    if (rank() == 1) return shape_[0];
    return 1;
}

std::string Array::shape_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << 'x';
        os << shape_[i];
    }
    os << ')';
    return os.str();
}

bool Array::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace samlab::ad
