#include "samlab/param_vector.hpp"

#include <cmath>

#include "samlab/errors.hpp"

namespace samlab {

std::size_t ParamLayout::add(const std::string& name, std::vector<std::size_t> shape) {
    ParamSegment seg;
    seg.name = name;
    seg.offset = total_;
    seg.size = 1;
    for (std::size_t d : shape) seg.size *= d;
    seg.shape = std::move(shape);
    total_ += seg.size;
    segments_.push_back(std::move(seg));
    return segments_.size() - 1;
}

bool ParamLayout::operator==(const ParamLayout& other) const {
    if (total_ != other.total_ || segments_.size() != other.segments_.size()) return false;
    for (std::size_t i = 0; i < segments_.size(); ++i) {
        const auto& a = segments_[i];
        const auto& b = other.segments_[i];
        if (a.name != b.name || a.offset != b.offset || a.shape != b.shape) return false;
    }
    return true;
}

ParamVector::ParamVector(LayoutPtr layout)
    : layout_(std::move(layout)), values_(layout_->total(), 0.0) {}

ParamVector::ParamVector(LayoutPtr layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
    if (values_.size() != layout_->total()) {
        throw StateError("ParamVector: value count " + std::to_string(values_.size()) +
                         " != layout total " + std::to_string(layout_->total()));
    }
}

std::span<double> ParamVector::segment_span(std::size_t i) {
    const auto& s = layout_->segment(i);
    return {values_.data() + s.offset, s.size};
}

std::span<const double> ParamVector::segment_span(std::size_t i) const {
    const auto& s = layout_->segment(i);
    return {values_.data() + s.offset, s.size};
}

ad::Array ParamVector::segment_array(std::size_t i) const {
    const auto& s = layout_->segment(i);
    return ad::Array(s.shape, std::vector<double>(values_.begin() + static_cast<std::ptrdiff_t>(s.offset),
                                                  values_.begin() + static_cast<std::ptrdiff_t>(s.offset + s.size)));
}

bool ParamVector::same_layout(const ParamVector& other) const {
    if (layout_ == other.layout_) return true;
    return layout_ && other.layout_ && *layout_ == *other.layout_;
}

double ParamVector::l2_norm() const { return samlab::l2_norm(values_); }

GradientResult::GradientResult(LayoutPtr layout)
    : layout_(std::move(layout)), flat_(layout_->total(), 0.0) {}

std::span<const double> GradientResult::segment_span(std::size_t i) const {
    const auto& s = layout_->segment(i);
    return {flat_.data() + s.offset, s.size};
}

ad::Array GradientResult::segment_array(std::size_t i) const {
    const auto& s = layout_->segment(i);
    return ad::Array(s.shape, std::vector<double>(flat_.begin() + static_cast<std::ptrdiff_t>(s.offset),
                                                  flat_.begin() + static_cast<std::ptrdiff_t>(s.offset + s.size)));
}

double GradientResult::l2_norm() const { return samlab::l2_norm(flat_); }

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace samlab
