#include "samlab/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "samlab/errors.hpp"
#include "samlab/rng.hpp"

namespace samlab {

Activation parse_activation(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "tanh") return Activation::Tanh;
    throw ConfigError("unknown activation '" + s + "'");
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
    }
    return "?";
}

LossGraph Model::perturbed_loss(const ParamVector& params, const ParamVector& corruption,
                                const io::BatchView& batch) const {
    if (!params.same_layout(corruption))
        throw std::invalid_argument("perturbed_loss: corruption layout differs from params layout");
    return build_loss(params, corruption.values().data(), batch);
}

Evaluation Model::evaluate(const ParamVector& params, const io::Dataset& data, std::size_t chunk) const {
    Evaluation ev;
    const std::size_t n = data.size();
    if (n == 0) throw std::invalid_argument("evaluate: empty dataset");
    auto idx = io::all_indices(data);
    std::size_t correct = 0;
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += chunk) {
        std::size_t len = std::min(chunk, n - start);
        io::BatchView view{&data, {idx.data() + start, len}};
        LossGraph g = build_loss(params, nullptr, view);
        loss_sum += g.value() * static_cast<double>(len);
        if (metric_kind() == MetricKind::Accuracy && g.logits.valid()) {
            const ad::Array& logits = g.tape.value(g.logits);
            const std::size_t classes = logits.shape()[1];
            for (std::size_t r = 0; r < len; ++r) {
                const double* row = logits.data() + r * classes;
                std::size_t best = 0;
                for (std::size_t c = 1; c < classes; ++c)
                    if (row[c] > row[best]) best = c;
                if (static_cast<std::int32_t>(best) == data.labels[idx[start + r]]) ++correct;
            }
        }
    }
    ev.loss = loss_sum / static_cast<double>(n);
    ev.metric = metric_kind() == MetricKind::Accuracy ? static_cast<double>(correct) / static_cast<double>(n)
                                                      : std::exp(ev.loss);
    return ev;
}

double Model::dataset_loss(const ParamVector& params, const io::Dataset& data, const double* corruption,
                           std::size_t chunk) const {
    const std::size_t n = data.size();
    if (n == 0) throw std::invalid_argument("dataset_loss: empty dataset");
    auto idx = io::all_indices(data);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += chunk) {
        std::size_t len = std::min(chunk, n - start);
        io::BatchView view{&data, {idx.data() + start, len}};
        loss_sum += build_loss(params, corruption, view).value() * static_cast<double>(len);
    }
    return loss_sum / static_cast<double>(n);
}

namespace {

// uniform +-1/sqrt(fan_in), fan_in = last shape dimension's partner for
// matrices, segment-specific for vectors (passed in by the caller).
void fill_uniform(std::span<double> dst, double bound, Rng& rng) {
    for (double& v : dst) v = rng.uniform(-bound, bound);
}

ad::Array gather_params(const ParamVector& params, const double* corruption, const ParamSegment& seg) {
    std::vector<double> vals(seg.size);
    const double* base = params.values().data() + seg.offset;
    if (corruption) {
        const double* c = corruption + seg.offset;
        for (std::size_t i = 0; i < seg.size; ++i) vals[i] = base[i] + c[i];
    } else {
        std::copy(base, base + seg.size, vals.begin());
    }
    return ad::Array(seg.shape, std::move(vals));
}

}  // namespace

MlpModel::MlpModel(std::vector<std::size_t> layer_sizes, Activation act)
    : sizes_(std::move(layer_sizes)), act_(act) {
    if (sizes_.size() < 2) throw std::invalid_argument("MlpModel: need at least 2 layer sizes");
    for (std::size_t s : sizes_)
        if (s == 0) throw std::invalid_argument("MlpModel: layer sizes must be positive");
    auto layout = std::make_shared<ParamLayout>();
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        layout->add("L" + std::to_string(l) + ".W", {sizes_[l], sizes_[l + 1]});
        layout->add("L" + std::to_string(l) + ".b", {sizes_[l + 1]});
    }
    layout_ = layout;
}

std::string MlpModel::descriptor() const {
    std::ostringstream os;
    os << "mlp:" << activation_name(act_) << ':';
    for (std::size_t i = 0; i < sizes_.size(); ++i) {
        if (i) os << ',';
        os << sizes_[i];
    }
    return os.str();
}

ParamVector MlpModel::init_params(std::uint64_t seed) const {
    ParamVector params(layout_);
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
        fill_uniform(params.segment_span(2 * l), bound, rng);
        fill_uniform(params.segment_span(2 * l + 1), bound, rng);
    }
    return params;
}

LossGraph MlpModel::build_loss(const ParamVector& params, const double* corruption,
                               const io::BatchView& batch) const {
    const io::Dataset& ds = *batch.data;
    if (ds.kind != io::DatasetKind::Classification)
        throw std::invalid_argument("MlpModel: classification batches only");
    if (ds.feature_dim != sizes_.front())
        throw std::invalid_argument("MlpModel: batch feature dim " + std::to_string(ds.feature_dim) +
                                    " != input size " + std::to_string(sizes_.front()));
    if (batch.size() == 0) throw std::invalid_argument("MlpModel: empty batch");
    if (params.size() != layout_->total()) throw StateError("MlpModel: params do not match layout");

    const std::size_t b = batch.size();
    std::vector<double> x(b * ds.feature_dim);
    std::vector<std::int32_t> labels(b);
    for (std::size_t r = 0; r < b; ++r) {
        auto row = ds.feature_row(batch.indices[r]);
        std::copy(row.begin(), row.end(), x.begin() + static_cast<std::ptrdiff_t>(r * ds.feature_dim));
        labels[r] = ds.labels[batch.indices[r]];
    }

    LossGraph g;
    ad::Var h = g.tape.constant(ad::Array::matrix(b, ds.feature_dim, std::move(x)));
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
        ad::Var w = g.tape.param(gather_params(params, corruption, layout_->segment(2 * l)),
                                 static_cast<int>(2 * l));
        ad::Var bias = g.tape.param(gather_params(params, corruption, layout_->segment(2 * l + 1)),
                                    static_cast<int>(2 * l + 1));
        h = g.tape.bias_add(g.tape.matmul(h, w), bias);
        if (l + 2 < sizes_.size()) {
            switch (act_) {
                case Activation::Relu: h = g.tape.relu(h); break;
                case Activation::Sigmoid: h = g.tape.sigmoid(h); break;
                case Activation::Tanh: h = g.tape.tanh(h); break;
            }
        }
    }
    g.logits = h;
    g.loss = g.tape.mean_all(g.tape.softmax_xent(h, std::move(labels)));
    return g;
}

RnnLmModel::RnnLmModel(std::size_t vocab, std::size_t embed, std::size_t hidden, bool tied)
    : vocab_(vocab), embed_(embed), hidden_(hidden), tied_(tied) {
    if (vocab_ == 0 || embed_ == 0 || hidden_ == 0)
        throw std::invalid_argument("RnnLmModel: sizes must be positive");
    if (tied_ && embed_ != hidden_)
        throw std::invalid_argument("RnnLmModel: tied projection requires embed == hidden");
    auto layout = std::make_shared<ParamLayout>();
    layout->add("embed", {vocab_, embed_});
    layout->add("gate.W", {embed_ + hidden_, hidden_});
    layout->add("gate.b", {hidden_});
    layout->add("cand.W", {embed_ + hidden_, hidden_});
    layout->add("cand.b", {hidden_});
    if (!tied_) {
        layout->add("out.W", {hidden_, vocab_});
        layout->add("out.b", {vocab_});
    }
    layout_ = layout;
}

std::string RnnLmModel::descriptor() const {
    std::ostringstream os;
    os << "rnnlm:v" << vocab_ << ":e" << embed_ << ":h" << hidden_ << ":tied" << (tied_ ? 1 : 0);
    return os.str();
}

ParamVector RnnLmModel::init_params(std::uint64_t seed) const {
    ParamVector params(layout_);
    Rng rng(seed);
    for (std::size_t i = 0; i < layout_->segment_count(); ++i) {
        const auto& seg = layout_->segment(i);
        std::size_t fan_in = seg.shape.size() == 2 ? seg.shape[0] : hidden_;
        if (seg.name == "embed") fan_in = embed_;
        fill_uniform(params.segment_span(i), 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
    }
    return params;
}

LossGraph RnnLmModel::build_loss(const ParamVector& params, const double* corruption,
                                 const io::BatchView& batch) const {
    const io::Dataset& ds = *batch.data;
    if (ds.kind != io::DatasetKind::Sequence)
        throw std::invalid_argument("RnnLmModel: sequence batches only");
    if (ds.vocab_size > vocab_)
        throw DataError("RnnLmModel: dataset vocabulary " + std::to_string(ds.vocab_size) +
                        " exceeds model vocabulary " + std::to_string(vocab_));
    if (batch.size() == 0) throw std::invalid_argument("RnnLmModel: empty batch");

    const std::size_t b = batch.size();
    const std::size_t steps = ds.window;
    LossGraph g;

    ad::Var table = g.tape.param(gather_params(params, corruption, layout_->segment(0)), 0);
    ad::Var gate_w = g.tape.param(gather_params(params, corruption, layout_->segment(1)), 1);
    ad::Var gate_b = g.tape.param(gather_params(params, corruption, layout_->segment(2)), 2);
    ad::Var cand_w = g.tape.param(gather_params(params, corruption, layout_->segment(3)), 3);
    ad::Var cand_b = g.tape.param(gather_params(params, corruption, layout_->segment(4)), 4);
    ad::Var out_w, out_b;
    if (!tied_) {
        out_w = g.tape.param(gather_params(params, corruption, layout_->segment(5)), 5);
        out_b = g.tape.param(gather_params(params, corruption, layout_->segment(6)), 6);
    }

    // hidden state resets at every window
    ad::Var h = g.tape.constant(ad::Array({b, hidden_}));
    std::vector<ad::Var> step_losses;
    step_losses.reserve(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        std::vector<std::int32_t> ids(b), labels(b);
        for (std::size_t r = 0; r < b; ++r) {
            ids[r] = ds.tokens[batch.indices[r] * steps + t];
            labels[r] = ds.targets[batch.indices[r] * steps + t];
        }
        ad::Var x = g.tape.embed(table, std::move(ids));
        ad::Var u = g.tape.concat({x, h}, 1);
        ad::Var f = g.tape.sigmoid(g.tape.bias_add(g.tape.matmul(u, gate_w), gate_b));
        ad::Var c = g.tape.tanh(g.tape.bias_add(g.tape.matmul(u, cand_w), cand_b));
        // h = f (.) (h - c) + c
        h = g.tape.add(g.tape.mul(f, g.tape.sub(h, c)), c);
        ad::Var logits = tied_ ? g.tape.matmul_nt(h, table)
                               : g.tape.bias_add(g.tape.matmul(h, out_w), out_b);
        step_losses.push_back(g.tape.softmax_xent(logits, std::move(labels)));
    }
    ad::Var all = steps == 1 ? step_losses[0] : g.tape.concat(step_losses, 0);
    g.loss = g.tape.mean_all(all);
    return g;
}

std::shared_ptr<MlpModel> build_mlp(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed,
                                    ParamVector* params_out, Activation act) {
    auto model = std::make_shared<MlpModel>(layer_sizes, act);
    if (params_out) *params_out = model->init_params(seed);
    return model;
}

std::shared_ptr<Model> model_from_descriptor(const std::string& descriptor) {
    std::istringstream is(descriptor);
    std::string kind;
    std::getline(is, kind, ':');
    if (kind == "mlp") {
        std::string act, sizes;
        std::getline(is, act, ':');
        std::getline(is, sizes);
        std::vector<std::size_t> layer_sizes;
        std::istringstream ss(sizes);
        std::string tok;
        while (std::getline(ss, tok, ',')) layer_sizes.push_back(std::stoul(tok));
        return std::make_shared<MlpModel>(layer_sizes, parse_activation(act));
    }
    if (kind == "rnnlm") {
        std::size_t v = 0, e = 0, h = 0;
        int tied = 0;
        std::string tok;
        while (std::getline(is, tok, ':')) {
            if (tok.rfind('v', 0) == 0) v = std::stoul(tok.substr(1));
            else if (tok.rfind('e', 0) == 0) e = std::stoul(tok.substr(1));
            else if (tok.rfind('h', 0) == 0) h = std::stoul(tok.substr(1));
            else if (tok.rfind("tied", 0) == 0) tied = std::stoi(tok.substr(4));
        }
        return std::make_shared<RnnLmModel>(v, e, h, tied != 0);
    }
    throw FormatError("model_from_descriptor: unknown descriptor '" + descriptor + "'");
}

std::vector<GradientResult> per_sample_gradients(const Model& model, const ParamVector& params,
                                                 const io::BatchView& batch) {
    if (batch.size() == 0) throw std::invalid_argument("per_sample_gradients: empty batch");
    std::vector<GradientResult> out;
    out.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        io::BatchView single{batch.data, {batch.indices.data() + i, 1}};
        LossGraph g = model.build_loss(params, nullptr, single);
        out.push_back(g.tape.backward(g.loss, model.layout()));
    }
    return out;
}

}  // namespace samlab
