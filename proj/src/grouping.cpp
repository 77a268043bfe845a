#include "samlab/grouping.hpp"

#include <cmath>
#include <stdexcept>

#include "samlab/errors.hpp"

namespace samlab {

const char* granularity_name(Granularity g) {
    switch (g) {
        case Granularity::Model: return "model";
        case Granularity::Layer: return "layer";
        case Granularity::Element: return "element";
    }
    return "?";
}

Granularity parse_granularity(const std::string& s) {
    if (s == "model") return Granularity::Model;
    if (s == "layer") return Granularity::Layer;
    if (s == "element") return Granularity::Element;
    throw ConfigError("unknown granularity '" + s + "' (expected model|layer|element)");
}

GroupPartition::GroupPartition(Granularity granularity, std::vector<Group> groups, std::size_t total)
    : granularity_(granularity), groups_(std::move(groups)), total_(total) {
    validate();
}

void GroupPartition::validate() const {
    std::size_t pos = 0;
    for (const Group& g : groups_) {
        if (g.begin != pos || g.end <= g.begin)
            throw StateError("GroupPartition: groups must be contiguous, disjoint and non-empty");
        pos = g.end;
    }
    if (pos != total_) throw StateError("GroupPartition: groups do not cover all indices");
    if (granularity_ == Granularity::Model && groups_.size() != 1)
        throw StateError("GroupPartition: model-wise partition must have a single group");
    if (granularity_ == Granularity::Element)
        for (const Group& g : groups_)
            if (g.size() != 1) throw StateError("GroupPartition: element-wise groups must be singletons");
}

GroupPartition GroupPartition::model_wise(const ParamLayout& layout) {
    return GroupPartition(Granularity::Model, {Group{0, layout.total(), "model"}}, layout.total());
}

GroupPartition GroupPartition::layer_wise(const ParamLayout& layout) {
    std::vector<Group> groups;
    groups.reserve(layout.segment_count());
    for (const auto& seg : layout.segments())
        groups.push_back(Group{seg.offset, seg.offset + seg.size, seg.name});
    return GroupPartition(Granularity::Layer, std::move(groups), layout.total());
}

GroupPartition GroupPartition::element_wise(const ParamLayout& layout) {
    std::vector<Group> groups;
    groups.reserve(layout.total());
    for (std::size_t i = 0; i < layout.total(); ++i) groups.push_back(Group{i, i + 1, ""});
    return GroupPartition(Granularity::Element, std::move(groups), layout.total());
}

GroupPartition GroupPartition::make(Granularity g, const ParamLayout& layout) {
    switch (g) {
        case Granularity::Model: return model_wise(layout);
        case Granularity::Layer: return layer_wise(layout);
        case Granularity::Element: return element_wise(layout);
    }
    throw StateError("GroupPartition::make: bad granularity");
}

const char* scale_rule_name(ScaleRule r) {
    switch (r) {
        case ScaleRule::FixedOne: return "FIXED_ONE";
        case ScaleRule::GaSam: return "GA_SAM";
        case ScaleRule::AsamW: return "ASAM_W";
        case ScaleRule::LayerWG: return "LAYER_WG";
        case ScaleRule::InvG: return "INV_G";
        case ScaleRule::WOverSqrtN: return "W_OVER_SQRT_N";
        case ScaleRule::WNorm: return "W_NORM";
    }
    return "?";
}

ScaleRule parse_scale_rule(const std::string& s) {
    if (s == "FIXED_ONE") return ScaleRule::FixedOne;
    if (s == "GA_SAM") return ScaleRule::GaSam;
    if (s == "ASAM_W") return ScaleRule::AsamW;
    if (s == "LAYER_WG") return ScaleRule::LayerWG;
    if (s == "INV_G") return ScaleRule::InvG;
    if (s == "W_OVER_SQRT_N") return ScaleRule::WOverSqrtN;
    if (s == "W_NORM") return ScaleRule::WNorm;
    throw ConfigError("unknown scale rule '" + s + "'");
}

ScaleVector::ScaleVector(const GroupPartition& partition, std::vector<double> per_group)
    : per_group_(std::move(per_group)) {
    if (per_group_.size() != partition.group_count())
        throw StateError("ScaleVector: one scale per group required");
    per_coordinate_.resize(partition.total());
    for (std::size_t i = 0; i < per_group_.size(); ++i) {
        const double t = per_group_[i];
        if (!(t > 0.0) || !std::isfinite(t))
            throw NumericError("ScaleVector: scale " + std::to_string(t) + " for group " +
                               std::to_string(i) + " must be positive and finite");
        const Group& g = partition.group(i);
        for (std::size_t j = g.begin; j < g.end; ++j) per_coordinate_[j] = t;
    }
}

ScaleVector ScaleVector::identity(std::size_t n) {
    ScaleVector sv;
    sv.per_group_.assign(1, 1.0);
    sv.per_coordinate_.assign(n, 1.0);
    return sv;
}

namespace {

double segment_norm(std::span<const double> v, std::size_t begin, std::size_t end) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += v[i] * v[i];
    return std::sqrt(s);
}

}  // namespace

ScaleVector compute_scales(ScaleRule rule, const GroupPartition& partition, const ParamVector& params,
                           std::span<const double> grad, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("compute_scales: tau must be positive");
    if (params.size() != partition.total() || grad.size() != partition.total())
        throw StateError("compute_scales: params/grad do not share the partition layout");
    if (rule == ScaleRule::AsamW && partition.granularity() != Granularity::Element)
        throw std::invalid_argument("compute_scales: ASAM_W is defined element-wise");

    const std::size_t l = partition.group_count();
    const double sqrt_n = std::sqrt(static_cast<double>(partition.total()));
    std::vector<double> scales(l);
    std::span<const double> w = params.values();

    for (std::size_t i = 0; i < l; ++i) {
        const Group& g = partition.group(i);
        const double n_i = static_cast<double>(g.size());
        double t = 1.0;
        switch (rule) {
            case ScaleRule::FixedOne: t = 1.0; break;
            case ScaleRule::GaSam: {
                double gn = std::max(segment_norm(grad, g.begin, g.end), tau);
                t = std::sqrt(n_i) / (gn * sqrt_n);
                break;
            }
            case ScaleRule::AsamW: t = std::max(std::abs(w[g.begin]), tau); break;
            case ScaleRule::LayerWG: {
                double gn = std::max(segment_norm(grad, g.begin, g.end), tau);
                t = std::max(segment_norm(w, g.begin, g.end) / gn, tau);
                break;
            }
            case ScaleRule::InvG: t = 1.0 / std::max(segment_norm(grad, g.begin, g.end), tau); break;
            case ScaleRule::WOverSqrtN:
                t = std::max(segment_norm(w, g.begin, g.end) / std::sqrt(n_i), tau);
                break;
            case ScaleRule::WNorm: t = std::max(segment_norm(w, g.begin, g.end), tau); break;
        }
        scales[i] = t;
    }
    return ScaleVector(partition, std::move(scales));
}

GradientStrengths gradient_strengths(const GroupPartition& partition,
                                     const std::vector<GradientResult>& per_sample) {
    if (per_sample.empty()) throw std::invalid_argument("gradient_strengths: empty gradient list");
    GradientStrengths out;
    out.per_group.assign(partition.group_count(), 0.0);
    const double m = static_cast<double>(per_sample.size());
    for (const GradientResult& gr : per_sample) {
        if (gr.size() != partition.total())
            throw StateError("gradient_strengths: gradient does not match partition size");
        for (std::size_t i = 0; i < partition.group_count(); ++i) {
            const Group& g = partition.group(i);
            out.per_group[i] += segment_norm(gr.flat(), g.begin, g.end);
        }
        out.global += l2_norm(gr.flat());
    }
    for (std::size_t i = 0; i < partition.group_count(); ++i)
        out.per_group[i] /= m * std::sqrt(static_cast<double>(partition.group(i).size()));
    out.global /= m * std::sqrt(static_cast<double>(partition.total()));
    return out;
}

}  // namespace samlab
