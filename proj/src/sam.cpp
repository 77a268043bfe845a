#include "samlab/sam.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "samlab/errors.hpp"
#include "samlab/rng.hpp"

namespace samlab {

const char* norm_order_name(NormOrder p) { return p == NormOrder::L2 ? "2" : "inf"; }

NormOrder parse_norm_order(const std::string& s) {
    if (s == "2") return NormOrder::L2;
    if (s == "inf" || s == "+inf" || s == "Linf") return NormOrder::LInf;
    throw ConfigError("unknown norm order '" + s + "' (expected 2|inf)");
}

double SamConfig::resolved_eta() const {
    if (eta > 0.0) return eta;
    if (impl == SamImpl::SingleStep) return epsilon;
    return K >= 1 ? 1.5 * epsilon / static_cast<double>(K) : 0.0;
}

void SamConfig::validate() const {
    if (K < 0) throw ConfigError("sam.K must be >= 0");
    if (epsilon < 0.0) throw ConfigError("sam.epsilon must be >= 0");
    if (eta < 0.0) throw ConfigError("sam.eta must be >= 0");
    if (tau <= 0.0) throw ConfigError("sam.tau must be > 0");
    if (start_epoch < 0) throw ConfigError("sam.start_epoch must be >= 0");
    if (corruption_enabled() && !(resolved_eta() > 0.0))
        throw ConfigError("sam.eta must be positive when K >= 1 and epsilon > 0");
}

void ascent_step_span(std::span<const double> grad, std::span<const double> t_diag, double eta,
                      NormOrder p, std::span<double> out) {
    if (eta < 0.0) throw std::invalid_argument("ascent_step: eta must be >= 0");
    const std::size_t n = grad.size();
    if (p == NormOrder::LInf) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = grad[i] > 0.0 ? 1.0 : (grad[i] < 0.0 ? -1.0 : 0.0);
            out[i] = eta * t_diag[i] * s;
        }
        return;
    }
    // p = 2: u = eta T (Tg) / ||Tg||
    double ntg = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double tg = t_diag[i] * grad[i];
        ntg += tg * tg;
    }
    ntg = std::sqrt(ntg);
    if (ntg == 0.0) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = eta * t_diag[i] * (t_diag[i] * grad[i]) / ntg;
}

ParamVector ascent_step(const ParamVector& grad, const ScaleVector& T, double eta, NormOrder p) {
    ParamVector out(grad.layout_ptr());
    ascent_step_span(grad.values(), T.diagonal(), eta, p, out.values());
    return out;
}

double transformed_norm(std::span<const double> v, std::span<const double> t_diag, NormOrder p) {
    if (p == NormOrder::LInf) {
        double mx = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) mx = std::max(mx, std::abs(v[i] / t_diag[i]));
        return mx;
    }
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        double x = v[i] / t_diag[i];
        s += x * x;
    }
    return std::sqrt(s);
}

void project_span(std::span<double> v, std::span<const double> t_diag, double eps, NormOrder p) {
    if (eps < 0.0) throw std::invalid_argument("project: eps must be >= 0");
    if (p == NormOrder::LInf) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double bound = eps * t_diag[i];
            v[i] = std::clamp(v[i], -bound, bound);
        }
        return;
    }
    const double norm = transformed_norm(v, t_diag, NormOrder::L2);
    // feasible points pass through untouched so projecting twice is a no-op
    if (norm <= eps * (1.0 + 1e-10)) return;
    const double scale = eps / norm;
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= scale;
}

ParamVector project(const ParamVector& v, const ScaleVector& T, double eps, NormOrder p) {
    ParamVector out = v;
    project_span(out.values(), T.diagonal(), eps, p);
    return out;
}

namespace {

struct PassEval {
    double loss;
    std::vector<double> grad;
};

PassEval one_pass(const Model& model, const ParamVector& params, const double* corruption,
                  const io::BatchView& batch) {
    LossGraph g = corruption ? model.build_loss(params, corruption, batch)
                             : model.build_loss(params, nullptr, batch);
    GradientResult gr = g.tape.backward(g.loss, model.layout());
    return {g.value(), std::move(gr.flat())};
}

void add_into(std::vector<double>& acc, const std::vector<double>& v) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
}

}  // namespace

ObjectiveResult multi_step_objective(const Model& model, const ParamVector& params,
                                     const io::BatchView& batch, const SamConfig& cfg,
                                     const GroupPartition& partition) {
    if (cfg.K < 1) throw std::invalid_argument("multi_step_objective: K must be >= 1");
    ObjectiveResult res;

    PassEval p0 = one_pass(model, params, nullptr, batch);
    res.passes = 1;
    res.clean_loss = p0.loss;
    res.clean_grad = p0.grad;

    ScaleVector T = compute_scales(cfg.rule, partition, params, p0.grad, cfg.tau);
    std::vector<double> a(params.size(), 0.0);

    double loss_sum = p0.loss;
    std::vector<double> grad_sum = p0.grad;
    std::vector<double> g_prev = std::move(p0.grad);
    std::vector<double> u(params.size());

    const double eta = cfg.resolved_eta();
    for (int k = 1; k <= cfg.K; ++k) {
        if (cfg.epsilon > 0.0) {
            ascent_step_span(g_prev, T.diagonal(), eta, cfg.p, u);
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += u[i];
            project_span(a, T.diagonal(), cfg.epsilon, cfg.p);
        }
        PassEval pk = one_pass(model, params, a.data(), batch);
        ++res.passes;
        loss_sum += pk.loss;
        add_into(grad_sum, pk.grad);
        g_prev = std::move(pk.grad);
    }

    const double inv = 1.0 / static_cast<double>(cfg.K + 1);
    res.loss = loss_sum * inv;
    for (double& v : grad_sum) v *= inv;
    res.grad = std::move(grad_sum);
    res.state = CorruptionState{std::move(a), std::move(T), cfg.K};
    return res;
}

ObjectiveResult single_step_objective(const Model& model, const ParamVector& params,
                                      const io::BatchView& batch, const SamConfig& cfg,
                                      const GroupPartition& partition) {
    ObjectiveResult res;
    PassEval p0 = one_pass(model, params, nullptr, batch);
    res.passes = 1;
    res.clean_loss = p0.loss;
    res.clean_grad = p0.grad;

    ScaleVector T = compute_scales(cfg.rule, partition, params, p0.grad, cfg.tau);
    std::vector<double> a(params.size(), 0.0);
    if (cfg.epsilon > 0.0) {
        SamConfig single = cfg;
        single.impl = SamImpl::SingleStep;
        ascent_step_span(p0.grad, T.diagonal(), single.resolved_eta(), cfg.p, a);
        project_span(a, T.diagonal(), cfg.epsilon, cfg.p);
    }
    PassEval p1 = one_pass(model, params, a.data(), batch);
    ++res.passes;
    res.loss = p1.loss;
    res.grad = std::move(p1.grad);
    res.state = CorruptionState{std::move(a), std::move(T), 1};
    return res;
}

TrainResult train(const Model& model, const io::Dataset& train_data, const io::Dataset* eval_data,
                  const OptimizerSpec& optimizer, const SamConfig& cfg, const TrainOptions& opts) {
    if (opts.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (opts.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    cfg.validate();

    const std::size_t n = train_data.size();
    if (n == 0) throw std::invalid_argument("train: empty dataset");

    ParamVector params = model.init_params(opts.seed);
    auto opt = optimizer.make();

    GroupPartition sam_partition = GroupPartition::make(cfg.granularity, *model.layout());
    GroupPartition metric_partition = GroupPartition::layer_wise(*model.layout());

    TrainMetrics metrics;
    for (const Group& g : metric_partition.groups()) metrics.group_names.push_back(g.name);

    long passes = 0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        Rng rng(Rng::mix(opts.seed, static_cast<std::uint64_t>(epoch) + 1));
        rng.shuffle(order);

        const bool sam_on = cfg.corruption_enabled() && epoch >= cfg.start_epoch;
        double loss_sum = 0.0;
        double norm_sum = 0.0;
        std::vector<double> group_norm_sum(metric_partition.group_count(), 0.0);
        std::size_t batches = 0;

        for (std::size_t start = 0; start < n; start += opts.batch_size) {
            const std::size_t len = std::min(opts.batch_size, n - start);
            io::BatchView batch{&train_data, {order.data() + start, len}};

            double loss;
            std::vector<double> grad;
            std::vector<double> g0;
            if (sam_on) {
                ObjectiveResult res = cfg.impl == SamImpl::MultiStep
                                          ? multi_step_objective(model, params, batch, cfg, sam_partition)
                                          : single_step_objective(model, params, batch, cfg, sam_partition);
                loss = res.loss;
                grad = std::move(res.grad);
                g0 = std::move(res.clean_grad);
                passes += res.passes;
            } else {
                PassEval pe = one_pass(model, params, nullptr, batch);
                loss = pe.loss;
                grad = std::move(pe.grad);
                g0 = grad;
                passes += 1;
            }
            if (!std::isfinite(loss))
                throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                   std::to_string(batches));

            loss_sum += loss * static_cast<double>(len);
            norm_sum += l2_norm(g0);
            for (std::size_t gi = 0; gi < metric_partition.group_count(); ++gi) {
                const Group& grp = metric_partition.group(gi);
                double s = 0.0;
                for (std::size_t i = grp.begin; i < grp.end; ++i) s += g0[i] * g0[i];
                group_norm_sum[gi] += std::sqrt(s);
            }
            ++batches;

            opt->step(params, grad);
        }

        EpochRow row;
        row.epoch = epoch;
        row.phase = !cfg.corruption_enabled() ? "plain" : (sam_on ? "sam" : "warmup");
        row.train_loss = loss_sum / static_cast<double>(n);
        if (eval_data) {
            Evaluation ev = model.evaluate(params, *eval_data);
            row.eval_loss = ev.loss;
            row.eval_metric = ev.metric;
        } else {
            row.eval_loss = std::numeric_limits<double>::quiet_NaN();
            row.eval_metric = std::numeric_limits<double>::quiet_NaN();
        }
        row.grad_norm = norm_sum / static_cast<double>(batches);
        row.group_grad_norms.resize(group_norm_sum.size());
        for (std::size_t gi = 0; gi < group_norm_sum.size(); ++gi)
            row.group_grad_norms[gi] = group_norm_sum[gi] / static_cast<double>(batches);
        row.passes = passes;
        metrics.rows.push_back(std::move(row));
    }

    metrics.total_passes = passes;
    return TrainResult{std::move(params), std::move(metrics)};
}

}  // namespace samlab
