#pragma once

#include <span>
#include <string>
#include <vector>

#include "samlab/param_vector.hpp"

namespace samlab {

enum class Granularity { Model, Layer, Element };

const char* granularity_name(Granularity g);
Granularity parse_granularity(const std::string& s);

struct Group {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::string name;
    std::size_t size() const { return end - begin; }
};

// Partition of the flat parameter vector into contiguous groups. Model-wise is
// a single group covering everything, layer-wise one group per named segment,
// element-wise one group per coordinate.
class GroupPartition {
public:
    static GroupPartition model_wise(const ParamLayout& layout);
    static GroupPartition layer_wise(const ParamLayout& layout);
    static GroupPartition element_wise(const ParamLayout& layout);
    static GroupPartition make(Granularity g, const ParamLayout& layout);

    GroupPartition(Granularity granularity, std::vector<Group> groups, std::size_t total);

    Granularity granularity() const { return granularity_; }
    std::size_t group_count() const { return groups_.size(); }
    const Group& group(std::size_t i) const { return groups_[i]; }
    const std::vector<Group>& groups() const { return groups_; }
    std::size_t total() const { return total_; }

private:
    void validate() const;

    Granularity granularity_;
    std::vector<Group> groups_;
    std::size_t total_;
};

enum class ScaleRule {
    FixedOne,    // T_(i) = 1
    GaSam,       // T_(i) = sqrt(n_i) / (||g_i|| * sqrt(n))
    AsamW,       // T_(i) = |w_i| element-wise
    LayerWG,     // T_(i) = ||w_i|| / ||g_i||
    InvG,        // T_(i) = 1 / ||g_i||
    WOverSqrtN,  // T_(i) = ||w_i|| / sqrt(n_i)
    WNorm,       // T_(i) = ||w_i||
};

// Exact strings accepted by the CLI config.
const char* scale_rule_name(ScaleRule r);
ScaleRule parse_scale_rule(const std::string& s);

// Per-group positive scales together with their per-coordinate expansion
// (the diagonal of the transformation applied to corruptions).
class ScaleVector {
public:
    ScaleVector() = default;
    ScaleVector(const GroupPartition& partition, std::vector<double> per_group);

    static ScaleVector identity(std::size_t n);

    const std::vector<double>& per_group() const { return per_group_; }
    std::span<const double> diagonal() const { return per_coordinate_; }
    std::size_t dimension() const { return per_coordinate_.size(); }

private:
    std::vector<double> per_group_;
    std::vector<double> per_coordinate_;
};

// Corruption scales per group. Gradient norms are floored at tau so dead
// groups stay finite; weight-norm rules are floored the same way so every
// scale is strictly positive.
ScaleVector compute_scales(ScaleRule rule, const GroupPartition& partition, const ParamVector& params,
                           std::span<const double> grad, double tau);

struct GradientStrengths {
    std::vector<double> per_group;  // G_(i)
    double global = 0.0;            // G
};

// Average gradient strengths: G_(i) = mean_z ||grad_i(z)|| / sqrt(n_i).
GradientStrengths gradient_strengths(const GroupPartition& partition,
                                     const std::vector<GradientResult>& per_sample);

}  // namespace samlab
