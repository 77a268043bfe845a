#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "samlab/param_vector.hpp"

namespace samlab {

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(ParamVector& params, std::span<const double> grad) = 0;
    virtual std::unique_ptr<Optimizer> clone() const = 0;
};

class Sgd final : public Optimizer {
public:
    explicit Sgd(double lr, double clip = 0.0) : lr_(lr), clip_(clip) {}
    void step(ParamVector& params, std::span<const double> grad) override;
    std::unique_ptr<Optimizer> clone() const override { return std::make_unique<Sgd>(*this); }

private:
    double lr_;
    double clip_;  // global-norm clip threshold; 0 disables
};

class Adam final : public Optimizer {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(ParamVector& params, std::span<const double> grad) override;
    std::unique_ptr<Optimizer> clone() const override { return std::make_unique<Adam>(*this); }

private:
    double lr_, beta1_, beta2_, eps_;
    std::vector<double> m_, v_;
    long t_ = 0;
};

struct OptimizerSpec {
    std::string kind = "sgd";  // sgd | adam
    double lr = 0.1;
    double clip = 0.0;
    std::unique_ptr<Optimizer> make() const;
};

}  // namespace samlab
