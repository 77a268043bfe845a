#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "samlab/array.hpp"

namespace samlab {

struct ParamSegment {
    std::string name;
    std::size_t offset = 0;
    std::vector<std::size_t> shape;
    std::size_t size = 0;
};

// Layout table mapping named parameter segments to (offset, shape). Segments
// are contiguous, disjoint and cover the whole flat vector by construction.
class ParamLayout {
public:
    std::size_t add(const std::string& name, std::vector<std::size_t> shape);

    std::size_t total() const { return total_; }
    std::size_t segment_count() const { return segments_.size(); }
    const ParamSegment& segment(std::size_t i) const { return segments_[i]; }
    const std::vector<ParamSegment>& segments() const { return segments_; }

    bool operator==(const ParamLayout& other) const;

private:
    std::vector<ParamSegment> segments_;
    std::size_t total_ = 0;
};

using LayoutPtr = std::shared_ptr<const ParamLayout>;

// Flat array of model parameters with an attached layout.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(LayoutPtr layout);
    ParamVector(LayoutPtr layout, std::vector<double> values);

    const ParamLayout& layout() const { return *layout_; }
    const LayoutPtr& layout_ptr() const { return layout_; }

    std::size_t size() const { return values_.size(); }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    std::span<double> segment_span(std::size_t i);
    std::span<const double> segment_span(std::size_t i) const;
    ad::Array segment_array(std::size_t i) const;

    bool same_layout(const ParamVector& other) const;

    double l2_norm() const;

private:
    LayoutPtr layout_;
    std::vector<double> values_;
};

// Per-parameter gradients aligned with a ParamVector layout.
class GradientResult {
public:
    GradientResult() = default;
    explicit GradientResult(LayoutPtr layout);

    const ParamLayout& layout() const { return *layout_; }
    const LayoutPtr& layout_ptr() const { return layout_; }

    std::size_t size() const { return flat_.size(); }
    double& operator[](std::size_t i) { return flat_[i]; }
    double operator[](std::size_t i) const { return flat_[i]; }

    std::vector<double>& flat() { return flat_; }
    const std::vector<double>& flat() const { return flat_; }

    std::span<const double> segment_span(std::size_t i) const;
    ad::Array segment_array(std::size_t i) const;

    ParamVector as_param_vector() const { return ParamVector(layout_, flat_); }

    double l2_norm() const;

private:
    LayoutPtr layout_;
    std::vector<double> flat_;
};

double l2_norm(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace samlab
