#include "samlab/optim.hpp"

#include <cmath>

#include "samlab/errors.hpp"

namespace samlab {

void Sgd::step(ParamVector& params, std::span<const double> grad) {
    double scale = 1.0;
    if (clip_ > 0.0) {
        double norm = l2_norm(grad);
        if (norm > clip_) scale = clip_ / norm;
    }
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * scale * grad[i];
}

void Adam::step(ParamVector& params, std::span<const double> grad) {
    if (m_.empty()) {
        m_.assign(params.size(), 0.0);
        v_.assign(params.size(), 0.0);
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        const double mhat = m_[i] / bc1;
        const double vhat = v_[i] / bc2;
        params[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
}

std::unique_ptr<Optimizer> OptimizerSpec::make() const {
    if (kind == "sgd") return std::make_unique<Sgd>(lr, clip);
    if (kind == "adam") return std::make_unique<Adam>(lr);
    throw ConfigError("unknown optimizer '" + kind + "' (expected sgd|adam)");
}

}  // namespace samlab
