#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "helpers.hpp"
#include "samlab/data_io.hpp"
#include "samlab/landscape.hpp"

using namespace samlab;
using test::QuadraticTestModel;

namespace {

// loss(w; z) = w . x, so the per-sample gradient is the feature vector itself.
class LinearProbeModel final : public Model {
public:
    explicit LinearProbeModel(std::size_t n) : n_(n) {
        auto layout = std::make_shared<ParamLayout>();
        layout->add("w", {n});
        layout_ = layout;
    }
    const LayoutPtr& layout() const override { return layout_; }
    std::string descriptor() const override { return "probe:" + std::to_string(n_); }
    MetricKind metric_kind() const override { return MetricKind::Accuracy; }
    ParamVector init_params(std::uint64_t) const override { return ParamVector(layout_); }
    LossGraph build_loss(const ParamVector& params, const double* corruption,
                         const io::BatchView& batch) const override {
        const std::size_t b = batch.size();
        std::vector<double> x(b * n_);
        for (std::size_t r = 0; r < b; ++r) {
            auto row = batch.data->feature_row(batch.indices[r]);
            std::copy(row.begin(), row.end(), x.begin() + static_cast<std::ptrdiff_t>(r * n_));
        }
        std::vector<double> w(params.values());
        if (corruption)
            for (std::size_t i = 0; i < n_; ++i) w[i] += corruption[i];
        LossGraph g;
        ad::Var feats = g.tape.constant(ad::Array::matrix(b, n_, std::move(x)));
        ad::Var wv = g.tape.param(ad::Array::from_vector(std::move(w)), 0);
        g.loss = g.tape.mean_all(g.tape.matmul(feats, wv));
        return g;
    }

private:
    std::size_t n_;
    LayoutPtr layout_;
};

io::Dataset features_dataset(std::vector<std::vector<double>> rows) {
    io::Dataset ds;
    ds.kind = io::DatasetKind::Classification;
    ds.feature_dim = rows[0].size();
    ds.num_classes = 2;
    for (const auto& r : rows) {
        ds.features.insert(ds.features.end(), r.begin(), r.end());
        ds.labels.push_back(0);
    }
    return ds;
}

}  // namespace

TEST_CASE("attack: zero radius leaves the metric untouched") {
    QuadraticTestModel model(3);
    ParamVector params = model.init_params(3);
    io::Dataset ds = test::dummy_classification_dataset();
    AttackReport rep = corruption_attack(model, params, ds, NormOrder::L2, 0.0, 5);
    CHECK(rep.corrupted_loss == rep.clean_loss);
    CHECK(rep.metric_drop() == 0.0);
    CHECK(rep.loss_increase() == 0.0);
}

TEST_CASE("attack: closed-form worst case on the 1-D quadratic") {
    QuadraticTestModel model(1);
    ParamVector params(model.layout(), {1.0});
    io::Dataset ds = test::dummy_classification_dataset();
    AttackReport rep = corruption_attack(model, params, ds, NormOrder::L2, 0.5, 8);
    CHECK(rep.clean_loss == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.corrupted_loss == doctest::Approx(0.5 * 1.5 * 1.5).epsilon(1e-9));
    CHECK(rep.corrupted_loss >= rep.clean_loss - 1e-9);

    CHECK_THROWS_AS(corruption_attack(model, params, ds, NormOrder::L2, -1.0, 5),
                    std::invalid_argument);
    CHECK_THROWS_AS(corruption_attack(model, params, ds, NormOrder::L2, 0.5, 0),
                    std::invalid_argument);
}

TEST_CASE("attack monotonicity in epsilon on a convex toy loss") {
    QuadraticTestModel model(4);
    ParamVector params = model.init_params(11);
    io::Dataset ds = test::dummy_classification_dataset();
    double last = -1.0;
    for (double eps : {0.05, 0.1, 0.2, 0.4}) {
        AttackReport rep = corruption_attack(model, params, ds, NormOrder::L2, eps, 6);
        CHECK(rep.corrupted_loss >= last - 1e-9);
        last = rep.corrupted_loss;
    }
}

TEST_CASE("fisher: two orthogonal gradients with norms 2 and 1") {
    LinearProbeModel model(4);
    ParamVector params = model.init_params(0);
    io::Dataset ds = features_dataset({{2, 0, 0, 0}, {0, 1, 0, 0}});
    SpectrumOptions opts;
    opts.k = 2;
    opts.sample_count = 2;
    SpectrumReport rep = fisher_spectrum(model, params, ds, opts);
    REQUIRE(rep.eigenvalues.size() == 2);
    CHECK(rep.eigenvalues[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(rep.eigenvalues[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(rep.trace == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("fisher: identical gradients collapse to a single nonzero eigenvalue") {
    LinearProbeModel model(3);
    ParamVector params = model.init_params(0);
    io::Dataset ds = features_dataset({{1, 2, 2}, {1, 2, 2}, {1, 2, 2}});
    SpectrumOptions opts;
    opts.k = 3;
    opts.sample_count = 3;
    SpectrumReport rep = fisher_spectrum(model, params, ds, opts);
    CHECK(rep.eigenvalues[0] == doctest::Approx(9.0).epsilon(1e-12));  // ||g||^2 = 1+4+4
    CHECK(rep.eigenvalues[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(rep.eigenvalues[2] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("fisher: Gram route matches a dense eigendecomposition on a tiny MLP") {
    MlpModel model({4, 6, 3});  // 57 parameters
    ParamVector params = model.init_params(19);
    io::Dataset ds = test::random_classification_dataset(50, 4, 3, 20);

    SpectrumOptions opts;
    opts.k = 10;
    opts.sample_count = 50;
    SpectrumReport rep = fisher_spectrum(model, params, ds, opts);

    // dense oracle: explicitly form the n x n Fisher estimate
    auto idx = io::all_indices(ds);
    auto grads = per_sample_gradients(model, params, {&ds, idx});
    const auto n = static_cast<Eigen::Index>(params.size());
    Eigen::MatrixXd fisher = Eigen::MatrixXd::Zero(n, n);
    for (const auto& g : grads) {
        Eigen::Map<const Eigen::VectorXd> v(g.flat().data(), n);
        fisher += v * v.transpose();
    }
    fisher /= static_cast<double>(grads.size());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fisher);
    Eigen::VectorXd all = es.eigenvalues().reverse();

    for (int i = 0; i < opts.k; ++i)
        CHECK(rep.eigenvalues[static_cast<std::size_t>(i)] ==
              doctest::Approx(std::max(all[i], 0.0)).epsilon(1e-8));
    CHECK(rep.trace == doctest::Approx(fisher.trace()).epsilon(1e-10));
}

TEST_CASE("fisher: Lanczos route agrees with the Gram route") {
    MlpModel model({5, 8, 2});
    ParamVector params = model.init_params(23);
    io::Dataset ds = test::random_classification_dataset(40, 5, 2, 29);

    SpectrumOptions gram;
    gram.k = 8;
    gram.sample_count = 40;
    SpectrumReport a = fisher_spectrum(model, params, ds, gram);

    SpectrumOptions lanczos = gram;
    lanczos.gram_limit = 0;  // force the iterative route
    SpectrumReport b = fisher_spectrum(model, params, ds, lanczos);

    for (int i = 0; i < gram.k; ++i) {
        CAPTURE(i);
        CHECK(b.eigenvalues[static_cast<std::size_t>(i)] ==
              doctest::Approx(a.eigenvalues[static_cast<std::size_t>(i)]).epsilon(1e-8));
    }
}

TEST_CASE("fisher: spectrum invariant under permutation of the sample set") {
    MlpModel model({4, 5, 2});
    ParamVector params = model.init_params(31);
    io::Dataset ds = test::random_classification_dataset(30, 4, 2, 37);

    SpectrumOptions opts;
    opts.k = 6;
    opts.sample_count = 30;
    SpectrumReport a = fisher_spectrum(model, params, ds, opts);

    io::Dataset shuffled = ds;
    Rng rng(5);
    std::vector<std::size_t> perm = io::all_indices(ds);
    rng.shuffle(perm);
    for (std::size_t r = 0; r < perm.size(); ++r) {
        for (std::size_t c = 0; c < ds.feature_dim; ++c)
            shuffled.features[r * ds.feature_dim + c] = ds.features[perm[r] * ds.feature_dim + c];
        shuffled.labels[r] = ds.labels[perm[r]];
    }
    SpectrumReport b = fisher_spectrum(model, params, ds, opts);
    SpectrumReport c = fisher_spectrum(model, params, shuffled, opts);
    for (int i = 0; i < opts.k; ++i) {
        CHECK(b.eigenvalues[static_cast<std::size_t>(i)] == a.eigenvalues[static_cast<std::size_t>(i)]);
        CHECK(c.eigenvalues[static_cast<std::size_t>(i)] ==
              doctest::Approx(a.eigenvalues[static_cast<std::size_t>(i)]).epsilon(1e-9));
    }
}

TEST_CASE("fisher: k beyond the rank pads with zeros; preconditions enforced") {
    LinearProbeModel model(5);
    ParamVector params = model.init_params(0);
    io::Dataset ds = features_dataset({{1, 0, 0, 0, 0}, {0, 2, 0, 0, 0}});
    SpectrumOptions opts;
    opts.k = 2;
    opts.sample_count = 2;
    auto rep = fisher_spectrum(model, params, ds, opts);
    CHECK(rep.eigenvalues[0] > 0.0);

    opts.k = 0;
    CHECK_THROWS_AS(fisher_spectrum(model, params, ds, opts), std::invalid_argument);
    opts.k = 5;
    opts.sample_count = 2;
    CHECK_THROWS_AS(fisher_spectrum(model, params, ds, opts), std::invalid_argument);
}

TEST_CASE("lanczos: exact on a small explicit PSD matrix") {
    const std::size_t n = 12;
    Rng rng(41);
    Eigen::MatrixXd b(n, n);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.normal();
    Eigen::MatrixXd m = b * b.transpose();

    auto matvec = [&](const std::vector<double>& x, std::vector<double>& y) {
        Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(n));
        Eigen::Map<Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
        yv = m * xv;
    };
    auto top = lanczos_top_eigenvalues(matvec, n, 4, 7);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd dense = es.eigenvalues().reverse();
    for (int i = 0; i < 4; ++i)
        CHECK(top[static_cast<std::size_t>(i)] == doctest::Approx(dense[i]).epsilon(1e-9));
}
