#include "samlab/shift_lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "samlab/errors.hpp"
#include "samlab/rng.hpp"

namespace samlab::shift {

void QuadraticShiftProblem::validate() const {
    if (instances.empty()) throw std::invalid_argument("quadratic problem: no instances");
    const auto m = static_cast<Eigen::Index>(instances.size());
    if (base_weights.size() != m || shifted_weights.size() != m)
        throw std::invalid_argument("quadratic problem: weight counts differ from instance count");
    double ps = 0.0, qs = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!(base_weights[i] > 0.0))
            throw std::invalid_argument("quadratic problem: base weights must be strictly positive");
        if (shifted_weights[i] < 0.0)
            throw std::invalid_argument("quadratic problem: shifted weights must be non-negative");
        ps += base_weights[i];
        qs += shifted_weights[i];
    }
    if (std::abs(ps - 1.0) > 1e-9 || std::abs(qs - 1.0) > 1e-9)
        throw std::invalid_argument("quadratic problem: weights must sum to 1");
    const auto d = instances[0].center.size();
    for (const auto& inst : instances) {
        if (inst.center.size() != d || inst.hessian.rows() != d || inst.hessian.cols() != d)
            throw std::invalid_argument("quadratic problem: inconsistent dimensions");
    }
}

Eigen::MatrixXd QuadraticShiftProblem::weighted_hessian(const Eigen::VectorXd& weights) const {
    const auto d = static_cast<Eigen::Index>(dimension());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < instances.size(); ++i)
        h += weights[static_cast<Eigen::Index>(i)] * instances[i].hessian;
    return h;
}

Eigen::VectorXd QuadraticShiftProblem::loss_gradient(const Eigen::VectorXd& w,
                                                     const Eigen::VectorXd& weights) const {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(w.size());
    for (std::size_t i = 0; i < instances.size(); ++i)
        g += weights[static_cast<Eigen::Index>(i)] * (instances[i].hessian * (w - instances[i].center));
    return g;
}

double QuadraticShiftProblem::loss(const Eigen::VectorXd& w, const Eigen::VectorXd& weights) const {
    double s = 0.0;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        Eigen::VectorXd d = w - instances[i].center;
        s += weights[static_cast<Eigen::Index>(i)] * 0.5 * d.dot(instances[i].hessian * d);
    }
    return s;
}

Eigen::VectorXd QuadraticShiftProblem::instance_gradient(const Eigen::VectorXd& w, std::size_t i) const {
    return instances[i].hessian * (w - instances[i].center);
}

Eigen::VectorXd QuadraticShiftProblem::ratio_residuals() const {
    Eigen::VectorXd r(base_weights.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = shifted_weights[i] / base_weights[i] - 1.0;
    return r;
}

Eigen::VectorXd QuadraticShiftProblem::mixed_weights(double eta_mix) const {
    return (1.0 - eta_mix) * base_weights + eta_mix * shifted_weights;
}

double QuadraticShiftProblem::mu() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(weighted_hessian(base_weights));
    return es.eigenvalues().minCoeff();
}

Eigen::VectorXd exact_minimizer(const QuadraticShiftProblem& problem, const Eigen::VectorXd& weights) {
    Eigen::MatrixXd h = problem.weighted_hessian(weights);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(h.rows());
    for (std::size_t i = 0; i < problem.instances.size(); ++i)
        rhs += weights[static_cast<Eigen::Index>(i)] *
               (problem.instances[i].hessian * problem.instances[i].center);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || !std::isfinite(lo))
        throw NumericError("exact_minimizer: weighted Hessian is singular (lambda_min = " +
                           std::to_string(lo) + ", condition = " +
                           std::to_string(lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity()) +
                           ")");
    return h.ldlt().solve(rhs);
}

Eigen::VectorXd delta_first_order(const QuadraticShiftProblem& problem) {
    problem.validate();
    Eigen::VectorXd theta = exact_minimizer(problem, problem.base_weights);
    Eigen::VectorXd r = problem.ratio_residuals();
    Eigen::VectorXd moment = Eigen::VectorXd::Zero(theta.size());
    for (std::size_t i = 0; i < problem.instances.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        moment += problem.base_weights[ii] * r[ii] * problem.instance_gradient(theta, i);
    }
    Eigen::MatrixXd h = problem.weighted_hessian(problem.base_weights);
    return -h.ldlt().solve(moment);
}

FDivergenceSpec FDivergenceSpec::kl() {
    FDivergenceSpec spec;
    spec.f = [](double t) { return t <= 0.0 ? 0.0 : t * std::log(t); };
    spec.a1 = 1.0;
    spec.a2 = 0.5;
    return spec;
}

double f_divergence(const QuadraticShiftProblem& problem, const FDivergenceSpec& spec) {
    double c = 0.0;
    for (Eigen::Index i = 0; i < problem.base_weights.size(); ++i)
        c += problem.base_weights[i] * spec.f(problem.shifted_weights[i] / problem.base_weights[i]);
    return c;
}

double delta_bound(const QuadraticShiftProblem& problem, const FDivergenceSpec& spec) {
    if (spec.a2 == 0.0) throw std::invalid_argument("delta_bound: generator must have a2 != 0");
    const double mu = problem.mu();
    if (!(mu > 0.0)) throw std::invalid_argument("delta_bound: mu must be positive");
    const double cf = f_divergence(problem, spec);
    Eigen::VectorXd theta = exact_minimizer(problem, problem.base_weights);
    double grad_sq = 0.0;
    for (std::size_t i = 0; i < problem.instances.size(); ++i)
        grad_sq += problem.base_weights[static_cast<Eigen::Index>(i)] *
                   problem.instance_gradient(theta, i).squaredNorm();
    return std::sqrt(std::max(cf, 0.0) / spec.a2 * grad_sq) / mu;
}

QuadraticShiftProblem random_quadratic_problem(std::size_t dim, std::size_t instances,
                                               double shift_scale, bool shared_hessian,
                                               std::uint64_t seed) {
    Rng rng(seed);
    QuadraticShiftProblem problem;
    problem.instances.resize(instances);

    auto random_spd = [&]() {
        Eigen::MatrixXd q(dim, dim);
        for (Eigen::Index i = 0; i < q.size(); ++i) q(i) = rng.normal();
        Eigen::MatrixXd a = q * q.transpose() / static_cast<double>(dim);
        a += Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim)) * 0.5;
        return a;
    };

    Eigen::MatrixXd shared;
    if (shared_hessian) shared = random_spd();
    for (auto& inst : problem.instances) {
        inst.hessian = shared_hessian ? shared : random_spd();
        inst.center.resize(static_cast<Eigen::Index>(dim));
        for (Eigen::Index i = 0; i < inst.center.size(); ++i) inst.center[i] = rng.normal();
    }

    const auto m = static_cast<Eigen::Index>(instances);
    problem.base_weights.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) problem.base_weights[i] = rng.uniform(0.5, 1.5);
    problem.base_weights /= problem.base_weights.sum();

    problem.shifted_weights.resize(m);
    for (Eigen::Index i = 0; i < m; ++i)
        problem.shifted_weights[i] = problem.base_weights[i] * (1.0 + shift_scale * rng.uniform(-1.0, 1.0));
    problem.shifted_weights /= problem.shifted_weights.sum();

    problem.validate();
    return problem;
}

io::Dataset mix_datasets(const io::Dataset& d, const io::Dataset& d_star, const MixSpec& spec,
                         std::uint64_t seed) {
    if (spec.eta_mix < 0.0 || spec.eta_mix > 1.0)
        throw std::invalid_argument("mix_datasets: eta_mix must lie in [0, 1]");
    if (d.kind != d_star.kind) throw std::invalid_argument("mix_datasets: dataset kinds differ");

    const std::size_t n = d.size();
    const std::size_t from_train = static_cast<std::size_t>(
        std::floor((1.0 - spec.eta_mix) * static_cast<double>(n)));
    const std::size_t from_test = n - from_train;
    if (from_train > d.size())
        throw std::invalid_argument("mix_datasets: train quota exceeds source size");
    if (from_test > d_star.size())
        throw std::invalid_argument("mix_datasets: test quota " + std::to_string(from_test) +
                                    " exceeds source size " + std::to_string(d_star.size()));

    Rng rng(seed);
    auto pick = [&rng](std::size_t avail, std::size_t want) {
        std::vector<std::size_t> idx(avail);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        rng.shuffle(idx);
        idx.resize(want);
        return idx;
    };
    std::vector<std::size_t> train_idx = pick(d.size(), from_train);
    std::vector<std::size_t> test_idx = pick(d_star.size(), from_test);

    io::Dataset out;
    out.kind = d.kind;
    out.split_tag = "mixed";
    if (d.kind == io::DatasetKind::Classification) {
        out.feature_dim = d.feature_dim;
        out.num_classes = d.num_classes;
        out.features.reserve(n * d.feature_dim);
        out.labels.reserve(n);
        auto append = [&](const io::Dataset& src, std::size_t row) {
            auto f = src.feature_row(row);
            out.features.insert(out.features.end(), f.begin(), f.end());
            out.labels.push_back(src.labels[row]);
        };
        for (std::size_t i : train_idx) append(d, i);
        for (std::size_t i : test_idx) append(d_star, i);
    } else {
        out.vocab_size = std::max(d.vocab_size, d_star.vocab_size);
        out.window = d.window;
        auto append = [&](const io::Dataset& src, std::size_t row) {
            auto t = src.token_row(row);
            auto g = src.target_row(row);
            out.tokens.insert(out.tokens.end(), t.begin(), t.end());
            out.targets.insert(out.targets.end(), g.begin(), g.end());
        };
        for (std::size_t i : train_idx) append(d, i);
        for (std::size_t i : test_idx) append(d_star, i);
    }
    out.validate();
    return out;
}

LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    LinearFit fit;
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("fit_line: need at least two points");
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += e * e;
    }
    fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    fit.used = static_cast<int>(n);
    return fit;
}

std::pair<std::vector<ShiftTrialRecord>, LinearFit> run_quadratic_shift_trials(
    const QuadraticShiftProblem& problem, std::span<const double> eta_grid) {
    problem.validate();
    Eigen::VectorXd theta = exact_minimizer(problem, problem.base_weights);
    std::vector<ShiftTrialRecord> records;
    std::vector<double> xs, ys;
    for (double eta : eta_grid) {
        Eigen::VectorXd theta_mix = exact_minimizer(problem, problem.mixed_weights(eta));
        ShiftTrialRecord rec;
        rec.eta_mix = eta;
        rec.delta_norm = (theta_mix - theta).norm();
        rec.final_loss = problem.loss(theta_mix, problem.mixed_weights(eta));
        records.push_back(rec);
        xs.push_back(eta);
        ys.push_back(rec.delta_norm);
    }
    LinearFit fit = fit_line(xs, ys);
    return {std::move(records), fit};
}

FinetuneResult finetune(const Model& model, const ParamVector& theta, const io::Dataset& data,
                        const FinetuneConfig& cfg, std::uint64_t seed) {
    FinetuneResult res;
    res.params = theta;
    Sgd opt(cfg.lr);
    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    double best_loss = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(epoch) + 1));
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t len = std::min(cfg.batch_size, n - start);
            io::BatchView batch{&data, {order.data() + start, len}};
            LossGraph g = model.build_loss(res.params, nullptr, batch);
            GradientResult gr = g.tape.backward(g.loss, model.layout());
            loss_sum += g.value() * static_cast<double>(len);
            opt.step(res.params, gr.flat());
        }
        const double epoch_loss = loss_sum / static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) {
            res.converged = false;
            res.final_loss = epoch_loss;
            return res;
        }
        if (epoch_loss > best_loss * (1.0 + 1e-6)) {
            if (++bad_epochs >= cfg.patience) {
                res.converged = false;
                res.final_loss = epoch_loss;
                return res;
            }
        } else {
            bad_epochs = 0;
            best_loss = std::min(best_loss, epoch_loss);
        }
        res.final_loss = epoch_loss;

        // cheap full-set gradient-norm stop
        std::vector<double> grad(theta.size(), 0.0);
        auto idx = io::all_indices(data);
        for (std::size_t start = 0; start < n; start += 256) {
            const std::size_t len = std::min<std::size_t>(256, n - start);
            io::BatchView view{&data, {idx.data() + start, len}};
            LossGraph g = model.build_loss(res.params, nullptr, view);
            GradientResult gr = g.tape.backward(g.loss, model.layout());
            for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += gr[i] * static_cast<double>(len);
        }
        for (double& v : grad) v /= static_cast<double>(n);
        res.final_grad_norm = l2_norm(grad);
        if (res.final_grad_norm < cfg.grad_tol) break;
    }
    return res;
}

std::pair<std::vector<ShiftTrialRecord>, LinearFit> run_shift_trials(
    const Model& model, const ParamVector& theta, const io::Dataset& d, const io::Dataset& d_star,
    std::span<const double> eta_grid, const FinetuneConfig& cfg, std::uint64_t seed, int jobs) {
    std::vector<ShiftTrialRecord> records(eta_grid.size());

    auto run_trial = [&](std::size_t t) {
        const double eta = eta_grid[t];
        const std::uint64_t trial_seed = Rng::mix(seed, 1000 + t);
        io::Dataset mixed = mix_datasets(d, d_star, MixSpec{eta}, trial_seed);
        FinetuneResult ft = finetune(model, theta, mixed, cfg, trial_seed);
        ShiftTrialRecord rec;
        rec.eta_mix = eta;
        rec.converged = ft.converged;
        rec.final_loss = ft.final_loss;
        rec.final_grad_norm = ft.final_grad_norm;
        double s = 0.0;
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double diff = ft.params[i] - theta[i];
            s += diff * diff;
        }
        rec.delta_norm = std::sqrt(s);
        records[t] = std::move(rec);
    };

    if (jobs <= 1) {
        for (std::size_t t = 0; t < eta_grid.size(); ++t) run_trial(t);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (int j = 0; j < jobs; ++j)
            pool.emplace_back([&] {
                for (std::size_t t = next.fetch_add(1); t < eta_grid.size(); t = next.fetch_add(1))
                    run_trial(t);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<double> xs, ys;
    int failed = 0;
    for (const auto& rec : records) {
        if (!rec.converged) {
            ++failed;
            continue;
        }
        xs.push_back(rec.eta_mix);
        ys.push_back(rec.delta_norm);
    }
    LinearFit fit = fit_line(xs, ys);
    fit.failed = failed;
    return {std::move(records), fit};
}

std::vector<CurveSample> interpolation_curve(const Model& model, const ParamVector& theta,
                                             const ParamVector& theta_star, const io::Dataset& d,
                                             const io::Dataset& d_star, std::span<const double> alphas) {
    if (!theta.same_layout(theta_star))
        throw std::invalid_argument("interpolation_curve: theta and theta* layouts differ");
    const double constant =
        model.dataset_loss(theta_star, d_star) - model.dataset_loss(theta, d);

    std::vector<double> delta(theta.size());
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = theta_star[i] - theta[i];

    std::vector<CurveSample> out;
    out.reserve(alphas.size());
    ParamVector w = theta;
    for (double alpha : alphas) {
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] = alpha * theta[i] + (1.0 - alpha) * theta_star[i];
        CurveSample s;
        s.alpha = alpha;
        s.train_loss = model.dataset_loss(w, d);
        s.test_loss = model.dataset_loss(w, d_star);
        ParamVector shifted = w;
        for (std::size_t i = 0; i < w.size(); ++i) shifted[i] = w[i] - delta[i];
        s.shifted_train_loss = model.dataset_loss(shifted, d) + constant;
        out.push_back(s);
    }
    return out;
}

std::vector<CurveSample> quadratic_interpolation_curve(const QuadraticShiftProblem& problem,
                                                       std::span<const double> alphas) {
    problem.validate();
    Eigen::VectorXd theta = exact_minimizer(problem, problem.base_weights);
    Eigen::VectorXd theta_star = exact_minimizer(problem, problem.shifted_weights);
    Eigen::VectorXd delta = theta_star - theta;
    const double constant = problem.loss(theta_star, problem.shifted_weights) -
                            problem.loss(theta, problem.base_weights);
    std::vector<CurveSample> out;
    out.reserve(alphas.size());
    for (double alpha : alphas) {
        Eigen::VectorXd w = alpha * theta + (1.0 - alpha) * theta_star;
        CurveSample s;
        s.alpha = alpha;
        s.train_loss = problem.loss(w, problem.base_weights);
        s.test_loss = problem.loss(w, problem.shifted_weights);
        s.shifted_train_loss = problem.loss(w - delta, problem.base_weights) + constant;
        out.push_back(s);
    }
    return out;
}

std::vector<double> alpha_grid(double lo, double hi, std::size_t points) {
    if (points < 2) throw std::invalid_argument("alpha_grid: need at least two points");
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i)
        grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    return grid;
}

double pearson_correlation(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    if (n != b.size() || n < 2) throw std::invalid_argument("pearson_correlation: length mismatch");
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

}  // namespace samlab::shift
