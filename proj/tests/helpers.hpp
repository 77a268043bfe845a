#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "samlab/dataset.hpp"
#include "samlab/models.hpp"
#include "samlab/param_vector.hpp"
#include "samlab/rng.hpp"
#include "samlab/tape.hpp"

namespace samlab::test {

// ---- finite-difference oracle -----------------------------------------------
//
// Central differences with step h against the tape gradient; relative error
// uses a floored denominator. Lives here so it stays independent of the
// adjoint code it checks.

struct FdReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

// `build` assembles a scalar graph from one Param var per entry of `init`.
inline FdReport fd_check(const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& build,
                         std::vector<ad::Array> init, std::size_t coord_samples, Rng& rng,
                         double h = 1e-5, double denom_floor = 1e-8) {
    auto layout = std::make_shared<ParamLayout>();
    for (std::size_t i = 0; i < init.size(); ++i)
        layout->add("p" + std::to_string(i), init[i].shape());

    auto eval = [&](const std::vector<ad::Array>& params, GradientResult* grad_out) {
        ad::Tape tape;
        std::vector<ad::Var> vars;
        for (std::size_t i = 0; i < params.size(); ++i)
            vars.push_back(tape.param(params[i], static_cast<int>(i)));
        ad::Var out = build(tape, vars);
        if (grad_out) *grad_out = tape.backward(out, layout);
        return tape.scalar(out);
    };

    GradientResult grad;
    eval(init, &grad);

    FdReport report;
    std::size_t total = 0;
    for (const auto& a : init) total += a.numel();
    for (std::size_t s = 0; s < coord_samples; ++s) {
        std::size_t flat = static_cast<std::size_t>(rng.below(total));
        std::size_t seg = 0, off = flat;
        while (off >= init[seg].numel()) {
            off -= init[seg].numel();
            ++seg;
        }
        std::vector<ad::Array> plus = init, minus = init;
        plus[seg][off] += h;
        minus[seg][off] -= h;
        const double fd = (eval(plus, nullptr) - eval(minus, nullptr)) / (2.0 * h);
        const double ad_g = grad[layout->segment(seg).offset + off];
        const double rel = std::abs(ad_g - fd) / std::max(std::abs(fd), denom_floor);
        report.max_rel_error = std::max(report.max_rel_error, rel);
        ++report.checked;
    }
    return report;
}

// FD check of a full model loss at sampled parameter coordinates.
inline FdReport fd_check_model(const Model& model, const ParamVector& params,
                               const io::BatchView& batch, std::size_t coord_samples, Rng& rng,
                               double h = 1e-5, double denom_floor = 1e-8) {
    LossGraph g = model.build_loss(params, nullptr, batch);
    GradientResult grad = g.tape.backward(g.loss, model.layout());

    FdReport report;
    for (std::size_t s = 0; s < coord_samples; ++s) {
        std::size_t j = static_cast<std::size_t>(rng.below(params.size()));
        ParamVector plus = params, minus = params;
        plus[j] += h;
        minus[j] -= h;
        const double fd = (model.build_loss(plus, nullptr, batch).value() -
                           model.build_loss(minus, nullptr, batch).value()) /
                          (2.0 * h);
        const double rel = std::abs(grad[j] - fd) / std::max(std::abs(fd), denom_floor);
        report.max_rel_error = std::max(report.max_rel_error, rel);
        ++report.checked;
    }
    return report;
}

// ---- toy models / datasets ---------------------------------------------------

// L(w) = 0.5 ||w + a||^2, independent of the batch contents. Exercises the
// engine contracts where a closed form is wanted.
class QuadraticTestModel final : public Model {
public:
    explicit QuadraticTestModel(std::size_t n) : n_(n) {
        auto layout = std::make_shared<ParamLayout>();
        layout->add("w", {n});
        layout_ = layout;
    }

    const LayoutPtr& layout() const override { return layout_; }
    std::string descriptor() const override { return "quadratic:" + std::to_string(n_); }
    MetricKind metric_kind() const override { return MetricKind::Accuracy; }

    ParamVector init_params(std::uint64_t seed) const override {
        ParamVector p(layout_);
        Rng rng(seed);
        for (std::size_t i = 0; i < n_; ++i) p[i] = rng.uniform(-1.0, 1.0);
        return p;
    }

    LossGraph build_loss(const ParamVector& params, const double* corruption,
                         const io::BatchView&) const override {
        std::vector<double> w(params.values());
        if (corruption)
            for (std::size_t i = 0; i < w.size(); ++i) w[i] += corruption[i];
        LossGraph g;
        ad::Var wv = g.tape.param(ad::Array::from_vector(std::move(w)), 0);
        ad::Var sq = g.tape.mul(wv, wv);
        ad::Var mean = g.tape.mean_all(sq);
        ad::Var half_n = g.tape.constant(ad::Array::scalar(0.5 * static_cast<double>(n_)));
        g.loss = g.tape.mul(mean, half_n);
        return g;
    }

private:
    std::size_t n_;
    LayoutPtr layout_;
};

inline io::Dataset dummy_classification_dataset(std::size_t rows = 4, std::size_t dim = 2) {
    io::Dataset ds;
    ds.kind = io::DatasetKind::Classification;
    ds.feature_dim = dim;
    ds.num_classes = 2;
    ds.features.assign(rows * dim, 0.5);
    ds.labels.assign(rows, 0);
    return ds;
}

inline io::Dataset random_classification_dataset(std::size_t rows, std::size_t dim,
                                                 std::size_t classes, std::uint64_t seed) {
    io::Dataset ds;
    ds.kind = io::DatasetKind::Classification;
    ds.feature_dim = dim;
    ds.num_classes = classes;
    ds.features.resize(rows * dim);
    ds.labels.resize(rows);
    Rng rng(seed);
    for (double& v : ds.features) v = rng.normal();
    for (auto& l : ds.labels) l = static_cast<std::int32_t>(rng.below(classes));
    return ds;
}

inline io::Dataset random_sequence_dataset(std::size_t rows, std::size_t window, std::size_t vocab,
                                           std::uint64_t seed) {
    io::Dataset ds;
    ds.kind = io::DatasetKind::Sequence;
    ds.vocab_size = vocab;
    ds.window = window;
    ds.tokens.resize(rows * window);
    ds.targets.resize(rows * window);
    Rng rng(seed);
    for (auto& t : ds.tokens) t = static_cast<std::int32_t>(rng.below(vocab));
    for (auto& t : ds.targets) t = static_cast<std::int32_t>(rng.below(vocab));
    return ds;
}

}  // namespace samlab::test
