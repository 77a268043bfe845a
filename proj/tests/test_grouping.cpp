#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "samlab/errors.hpp"
#include "samlab/grouping.hpp"

using namespace samlab;

namespace {

LayoutPtr two_segment_layout() {
    auto layout = std::make_shared<ParamLayout>();
    layout->add("a", {4});
    layout->add("b", {9});
    return layout;
}

}  // namespace

TEST_CASE("partitions: coverage, disjointness, cardinality per granularity") {
    auto layout = two_segment_layout();
    GroupPartition model = GroupPartition::model_wise(*layout);
    CHECK(model.group_count() == 1);
    CHECK(model.group(0).size() == 13);

    GroupPartition layer = GroupPartition::layer_wise(*layout);
    CHECK(layer.group_count() == 2);
    CHECK(layer.group(0).name == "a");
    CHECK(layer.group(1).size() == 9);

    GroupPartition elem = GroupPartition::element_wise(*layout);
    CHECK(elem.group_count() == 13);
    for (const auto& g : elem.groups()) CHECK(g.size() == 1);

    // structural validation rejects holes, overlaps, and empty groups
    CHECK_THROWS_AS(GroupPartition(Granularity::Layer, {Group{0, 4, ""}, Group{5, 13, ""}}, 13),
                    StateError);
    CHECK_THROWS_AS(GroupPartition(Granularity::Layer, {Group{0, 4, ""}, Group{3, 13, ""}}, 13),
                    StateError);
    CHECK_THROWS_AS(GroupPartition(Granularity::Layer, {Group{0, 13, ""}}, 14), StateError);
}

TEST_CASE("GA_SAM scales: two-group worked example") {
    auto layout = two_segment_layout();
    GroupPartition part = GroupPartition::layer_wise(*layout);
    ParamVector params(layout);
    std::vector<double> grad(13, 0.0);
    for (int i = 0; i < 4; ++i) grad[i] = 1.0;                    // ||g_1|| = 2
    for (int i = 4; i < 13; ++i) grad[i] = 1.0 / 3.0;             // ||g_2|| = 1

    ScaleVector t = compute_scales(ScaleRule::GaSam, part, params, grad, 1e-12);
    CHECK(t.per_group()[0] == doctest::Approx(1.0 / std::sqrt(13.0)).epsilon(1e-12));
    CHECK(t.per_group()[1] == doctest::Approx(3.0 / std::sqrt(13.0)).epsilon(1e-12));
    // diagonal expansion mirrors the groups
    CHECK(t.diagonal()[0] == t.per_group()[0]);
    CHECK(t.diagonal()[12] == t.per_group()[1]);
}

TEST_CASE("FIXED_ONE gives all ones") {
    auto layout = two_segment_layout();
    GroupPartition part = GroupPartition::layer_wise(*layout);
    ParamVector params(layout);
    std::vector<double> grad(13, 0.5);
    ScaleVector t = compute_scales(ScaleRule::FixedOne, part, params, grad, 1e-12);
    for (double v : t.diagonal()) CHECK(v == 1.0);
}

TEST_CASE("GA_SAM with uniform per-coordinate gradient magnitude is flat across groups") {
    auto layout = std::make_shared<ParamLayout>();
    layout->add("a", {4});
    layout->add("b", {9});
    layout->add("c", {3});
    GroupPartition part = GroupPartition::layer_wise(*layout);
    ParamVector params(layout);
    const double c = 0.7;
    std::vector<double> grad(16, c);  // ||g_i|| = c sqrt(n_i) => T_i = 1/(c sqrt(n))

    ScaleVector t = compute_scales(ScaleRule::GaSam, part, params, grad, 1e-12);
    double mn = t.per_group()[0], mx = t.per_group()[0];
    for (double v : t.per_group()) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    CHECK(mx - mn < 1e-12);
    CHECK(t.per_group()[0] == doctest::Approx(1.0 / (c * 4.0)).epsilon(1e-12));
}

TEST_CASE("GA_SAM post-property: T_i ||g_i|| / sqrt(n_i) == 1/sqrt(n) above the floor") {
    auto layout = std::make_shared<ParamLayout>();
    layout->add("a", {6});
    layout->add("b", {11});
    layout->add("c", {2});
    GroupPartition part = GroupPartition::layer_wise(*layout);
    ParamVector params(layout);
    Rng rng(8);
    std::vector<double> grad(19);
    for (double& v : grad) v = rng.normal();

    ScaleVector t = compute_scales(ScaleRule::GaSam, part, params, grad, 1e-12);
    for (std::size_t i = 0; i < part.group_count(); ++i) {
        const Group& g = part.group(i);
        double gn = 0.0;
        for (std::size_t j = g.begin; j < g.end; ++j) gn += grad[j] * grad[j];
        gn = std::sqrt(gn);
        REQUIRE(gn > 1e-12);
        CHECK(t.per_group()[i] * gn / std::sqrt(static_cast<double>(g.size())) ==
              doctest::Approx(1.0 / std::sqrt(19.0)).epsilon(1e-12));
    }
}

TEST_CASE("all rules stay positive and finite on zero gradients and zero weights") {
    auto layout = two_segment_layout();
    ParamVector params(layout);  // all-zero weights
    std::vector<double> grad(13, 0.0);

    GroupPartition layer = GroupPartition::layer_wise(*layout);
    GroupPartition elem = GroupPartition::element_wise(*layout);
    const double tau = 1e-12;

    for (ScaleRule rule : {ScaleRule::FixedOne, ScaleRule::GaSam, ScaleRule::LayerWG, ScaleRule::InvG,
                           ScaleRule::WOverSqrtN, ScaleRule::WNorm}) {
        CAPTURE(scale_rule_name(rule));
        ScaleVector t = compute_scales(rule, layer, params, grad, tau);
        for (double v : t.per_group()) {
            CHECK(v > 0.0);
            CHECK(std::isfinite(v));
        }
    }
    ScaleVector asam = compute_scales(ScaleRule::AsamW, elem, params, grad, tau);
    for (double v : asam.per_group()) CHECK(v == tau);

    // ASAM is element-wise by definition
    CHECK_THROWS_AS(compute_scales(ScaleRule::AsamW, layer, params, grad, tau),
                    std::invalid_argument);
}

TEST_CASE("ASAM_W takes per-coordinate |w| with the floor") {
    auto layout = std::make_shared<ParamLayout>();
    layout->add("w", {3});
    GroupPartition elem = GroupPartition::element_wise(*layout);
    ParamVector params(layout, {0.5, -2.0, 0.0});
    std::vector<double> grad(3, 1.0);
    ScaleVector t = compute_scales(ScaleRule::AsamW, elem, params, grad, 1e-12);
    CHECK(t.per_group()[0] == 0.5);
    CHECK(t.per_group()[1] == 2.0);
    CHECK(t.per_group()[2] == 1e-12);
}

TEST_CASE("GA_SAM homogeneity: scaling gradients by c scales T by 1/c") {
    auto layout = two_segment_layout();
    GroupPartition part = GroupPartition::layer_wise(*layout);
    ParamVector params(layout);
    Rng rng(15);
    std::vector<double> grad(13);
    for (double& v : grad) v = rng.normal();

    ScaleVector base = compute_scales(ScaleRule::GaSam, part, params, grad, 1e-12);

    // power-of-two factor: exact, bit-comparable
    std::vector<double> doubled = grad;
    for (double& v : doubled) v *= 2.0;
    ScaleVector half = compute_scales(ScaleRule::GaSam, part, params, doubled, 1e-12);
    for (std::size_t i = 0; i < base.per_group().size(); ++i)
        CHECK(half.per_group()[i] == base.per_group()[i] / 2.0);

    // general positive factor within rounding
    std::vector<double> tripled = grad;
    for (double& v : tripled) v *= 3.0;
    ScaleVector third = compute_scales(ScaleRule::GaSam, part, params, tripled, 1e-12);
    for (std::size_t i = 0; i < base.per_group().size(); ++i)
        CHECK(third.per_group()[i] == doctest::Approx(base.per_group()[i] / 3.0).epsilon(1e-14));
}

TEST_CASE("LAYER_WG / INV_G / W_* rules match their formulas") {
    auto layout = std::make_shared<ParamLayout>();
    layout->add("a", {4});
    GroupPartition part = GroupPartition::layer_wise(*layout);
    ParamVector params(layout, {2.0, 0.0, 0.0, 0.0});       // ||w|| = 2
    std::vector<double> grad = {0.0, 0.5, 0.0, 0.0};        // ||g|| = 0.5

    CHECK(compute_scales(ScaleRule::LayerWG, part, params, grad, 1e-12).per_group()[0] ==
          doctest::Approx(4.0));
    CHECK(compute_scales(ScaleRule::InvG, part, params, grad, 1e-12).per_group()[0] ==
          doctest::Approx(2.0));
    CHECK(compute_scales(ScaleRule::WOverSqrtN, part, params, grad, 1e-12).per_group()[0] ==
          doctest::Approx(1.0));
    CHECK(compute_scales(ScaleRule::WNorm, part, params, grad, 1e-12).per_group()[0] ==
          doctest::Approx(2.0));
}

TEST_CASE("gradient_strengths: worked examples and independent accumulation") {
    auto layout = std::make_shared<ParamLayout>();
    layout->add("w", {2});
    GroupPartition part = GroupPartition::model_wise(*layout);

    GradientResult g(layout);
    g[0] = 3.0;
    g[1] = 4.0;
    auto gs = gradient_strengths(part, {g});
    CHECK(gs.global == doctest::Approx(5.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(gs.per_group[0] == doctest::Approx(5.0 / std::sqrt(2.0)).epsilon(1e-12));

    GradientResult zero(layout);
    auto zs = gradient_strengths(part, {zero});
    CHECK(zs.global == 0.0);

    CHECK_THROWS_AS(gradient_strengths(part, {}), std::invalid_argument);

    // 10 random samples vs a second accumulation path
    auto big_layout = std::make_shared<ParamLayout>();
    big_layout->add("a", {5});
    big_layout->add("b", {7});
    GroupPartition layer = GroupPartition::layer_wise(*big_layout);
    Rng rng(77);
    std::vector<GradientResult> samples;
    for (int s = 0; s < 10; ++s) {
        GradientResult gr(big_layout);
        for (std::size_t i = 0; i < gr.size(); ++i) gr[i] = rng.normal();
        samples.push_back(std::move(gr));
    }
    auto strengths = gradient_strengths(layer, samples);
    for (std::size_t gi = 0; gi < layer.group_count(); ++gi) {
        const Group& grp = layer.group(gi);
        double acc = 0.0;
        for (const auto& s : samples) {
            long double sq = 0.0L;  // independent route: long-double accumulation
            for (std::size_t j = grp.begin; j < grp.end; ++j)
                sq += static_cast<long double>(s[j]) * static_cast<long double>(s[j]);
            acc += static_cast<double>(std::sqrt(static_cast<double>(sq)));
        }
        acc /= 10.0 * std::sqrt(static_cast<double>(grp.size()));
        CHECK(strengths.per_group[gi] == doctest::Approx(acc).epsilon(1e-12));
    }
}

TEST_CASE("rule and granularity names round-trip through the CLI strings") {
    for (ScaleRule r : {ScaleRule::FixedOne, ScaleRule::GaSam, ScaleRule::AsamW, ScaleRule::LayerWG,
                        ScaleRule::InvG, ScaleRule::WOverSqrtN, ScaleRule::WNorm})
        CHECK(parse_scale_rule(scale_rule_name(r)) == r);
    for (Granularity g : {Granularity::Model, Granularity::Layer, Granularity::Element})
        CHECK(parse_granularity(granularity_name(g)) == g);
    CHECK_THROWS_AS(parse_scale_rule("WOBBLE"), ConfigError);
}
