#include "samlab/landscape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "samlab/errors.hpp"
#include "samlab/rng.hpp"

namespace samlab {

namespace {

// Full-dataset gradient (mean over instances), evaluated in chunks.
std::vector<double> dataset_gradient(const Model& model, const ParamVector& params,
                                     const double* corruption, const io::Dataset& data,
                                     double* loss_out, std::size_t chunk = 256) {
    const std::size_t n = data.size();
    auto idx = io::all_indices(data);
    std::vector<double> grad(params.size(), 0.0);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t len = std::min(chunk, n - start);
        io::BatchView view{&data, {idx.data() + start, len}};
        LossGraph g = model.build_loss(params, corruption, view);
        GradientResult gr = g.tape.backward(g.loss, model.layout());
        const double w = static_cast<double>(len);
        loss_sum += g.value() * w;
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += gr[i] * w;
    }
    for (double& v : grad) v /= static_cast<double>(n);
    if (loss_out) *loss_out = loss_sum / static_cast<double>(n);
    return grad;
}

Evaluation evaluate_corrupted(const Model& model, const ParamVector& params,
                              const std::vector<double>& corruption, const io::Dataset& data) {
    ParamVector shifted = params;
    for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += corruption[i];
    return model.evaluate(shifted, data);
}

}  // namespace

AttackReport corruption_attack(const Model& model, const ParamVector& params, const io::Dataset& data,
                               NormOrder p, double epsilon, int steps) {
    if (epsilon < 0.0) throw std::invalid_argument("corruption_attack: epsilon must be >= 0");
    if (steps < 1) throw std::invalid_argument("corruption_attack: steps must be >= 1");

    AttackReport report;
    report.p = p;
    report.epsilon = epsilon;
    report.steps = steps;

    Evaluation clean = model.evaluate(params, data);
    report.clean_loss = clean.loss;
    report.clean_metric = clean.metric;

    std::vector<double> ones(params.size(), 1.0);
    std::vector<double> a(params.size(), 0.0);
    std::vector<double> u(params.size(), 0.0);
    const double eta = epsilon > 0.0 ? 1.5 * epsilon / static_cast<double>(steps) : 0.0;

    if (epsilon > 0.0) {
        for (int k = 0; k < steps; ++k) {
            std::vector<double> g = dataset_gradient(model, params, a.data(), data, nullptr);
            ascent_step_span(g, ones, eta, p, u);
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += u[i];
            project_span(a, ones, epsilon, p);
        }
    }

    Evaluation corrupted = evaluate_corrupted(model, params, a, data);
    report.corrupted_loss = corrupted.loss;
    report.corrupted_metric = corrupted.metric;
    return report;
}

std::vector<double> lanczos_top_eigenvalues(
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& matvec,
    std::size_t dim, int k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("lanczos: k must be >= 1");
    const int iters = static_cast<int>(std::min<std::size_t>(dim, static_cast<std::size_t>(k) + 24));

    std::vector<std::vector<double>> basis;
    std::vector<double> alpha, beta;
    std::vector<double> v(dim), w(dim);

    Rng rng(seed);
    for (double& x : v) x = rng.normal();
    double nv = l2_norm(v);
    for (double& x : v) x /= nv;
    basis.push_back(v);

    for (int j = 0; j < iters; ++j) {
        matvec(basis.back(), w);
        double a_j = dot(w, basis.back());
        alpha.push_back(a_j);
        for (std::size_t i = 0; i < dim; ++i) w[i] -= a_j * basis.back()[i];
        if (basis.size() > 1) {
            const auto& prev = basis[basis.size() - 2];
            const double b_prev = beta.back();
            for (std::size_t i = 0; i < dim; ++i) w[i] -= b_prev * prev[i];
        }
        // full reorthogonalization
        for (const auto& q : basis) {
            double c = dot(w, q);
            for (std::size_t i = 0; i < dim; ++i) w[i] -= c * q[i];
        }
        double b_j = l2_norm(w);
        if (b_j < 1e-13 || basis.size() == dim) break;  // invariant subspace reached
        beta.push_back(b_j);
        for (double& x : w) x /= b_j;
        basis.push_back(w);
    }

    const int m = static_cast<int>(alpha.size());
    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        tri(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < m) {
            tri(i, i + 1) = beta[static_cast<std::size_t>(i)];
            tri(i + 1, i) = beta[static_cast<std::size_t>(i)];
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
    std::vector<double> evals(es.eigenvalues().data(), es.eigenvalues().data() + m);
    std::sort(evals.rbegin(), evals.rend());
    evals.resize(static_cast<std::size_t>(k), 0.0);
    for (double& e : evals) e = std::max(e, 0.0);
    return evals;
}

SpectrumReport fisher_spectrum(const Model& model, const ParamVector& params, const io::Dataset& data,
                               const SpectrumOptions& opts) {
    if (opts.k < 1) throw std::invalid_argument("fisher_spectrum: k must be >= 1");
    if (opts.sample_count < static_cast<std::size_t>(opts.k))
        throw std::invalid_argument("fisher_spectrum: sample_count must be >= k");
    const std::size_t n_data = data.size();
    if (n_data == 0) throw std::invalid_argument("fisher_spectrum: empty dataset");

    // deterministic sample subset
    std::vector<std::size_t> idx = io::all_indices(data);
    if (opts.sample_count < n_data) {
        Rng rng(opts.seed);
        rng.shuffle(idx);
        idx.resize(opts.sample_count);
        std::sort(idx.begin(), idx.end());
    }
    const std::size_t m = idx.size();

    io::BatchView view{&data, idx};
    std::vector<GradientResult> grads = per_sample_gradients(model, params, view);
    const std::size_t n = params.size();

    SpectrumReport report;
    report.samples_used = m;

    double trace = 0.0;
    for (const auto& g : grads) {
        double nrm = g.l2_norm();
        trace += nrm * nrm;
    }
    report.trace = trace / static_cast<double>(m);

    if (m <= opts.gram_limit) {
        // eigenvalues of (1/m) M M^T from the m x m Gram matrix M^T M / m
        Eigen::MatrixXd gram(m, m);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i; j < m; ++j) {
                double d = dot(grads[i].flat(), grads[j].flat()) / static_cast<double>(m);
                gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d;
                gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = d;
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
        std::vector<double> evals(es.eigenvalues().data(), es.eigenvalues().data() + m);
        std::sort(evals.rbegin(), evals.rend());
        evals.resize(static_cast<std::size_t>(opts.k), 0.0);
        for (double& e : evals) e = std::max(e, 0.0);
        report.eigenvalues = std::move(evals);
        return report;
    }

    auto matvec = [&](const std::vector<double>& x, std::vector<double>& y) {
        std::fill(y.begin(), y.end(), 0.0);
        for (const auto& g : grads) {
            const double c = dot(g.flat(), x) / static_cast<double>(m);
            const auto& flat = g.flat();
            for (std::size_t i = 0; i < n; ++i) y[i] += c * flat[i];
        }
    };
    report.eigenvalues = lanczos_top_eigenvalues(matvec, n, opts.k, opts.seed);
    return report;
}

}  // namespace samlab
