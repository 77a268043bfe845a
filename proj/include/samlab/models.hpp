#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "samlab/dataset.hpp"
#include "samlab/param_vector.hpp"
#include "samlab/tape.hpp"

namespace samlab {

// A recorded loss evaluation: the tape plus handles into it.
struct LossGraph {
    ad::Tape tape;
    ad::Var loss;
    ad::Var logits;  // only set by classifiers

    double value() const { return tape.scalar(loss); }
};

enum class MetricKind { Accuracy, Perplexity };

struct Evaluation {
    double loss = 0.0;
    double metric = 0.0;  // accuracy in [0,1] or perplexity
};

enum class Activation { Relu, Sigmoid, Tanh };
Activation parse_activation(const std::string& s);
const char* activation_name(Activation a);

// Interface shared by every trainable model in the lab.
class Model {
public:
    virtual ~Model() = default;

    virtual const LayoutPtr& layout() const = 0;
    virtual std::string descriptor() const = 0;
    virtual MetricKind metric_kind() const = 0;

    // Deterministic initialization: uniform in +-1/sqrt(fan_in) per segment.
    virtual ParamVector init_params(std::uint64_t seed) const = 0;

    // Mean loss over the batch; `corruption` (same layout) is added to the
    // parameters as a constant, so gradients are taken at w + a.
    virtual LossGraph build_loss(const ParamVector& params, const double* corruption,
                                 const io::BatchView& batch) const = 0;

    LossGraph loss(const ParamVector& params, const io::BatchView& batch) const {
        return build_loss(params, nullptr, batch);
    }
    LossGraph perturbed_loss(const ParamVector& params, const ParamVector& corruption,
                             const io::BatchView& batch) const;

    // Full-dataset loss and task metric, evaluated in chunks.
    Evaluation evaluate(const ParamVector& params, const io::Dataset& data,
                        std::size_t chunk = 256) const;
    double dataset_loss(const ParamVector& params, const io::Dataset& data,
                        const double* corruption = nullptr, std::size_t chunk = 256) const;
};

// Fully connected classifier with a configurable activation.
class MlpModel final : public Model {
public:
    MlpModel(std::vector<std::size_t> layer_sizes, Activation act = Activation::Relu);

    const LayoutPtr& layout() const override { return layout_; }
    std::string descriptor() const override;
    MetricKind metric_kind() const override { return MetricKind::Accuracy; }
    ParamVector init_params(std::uint64_t seed) const override;
    LossGraph build_loss(const ParamVector& params, const double* corruption,
                         const io::BatchView& batch) const override;

    const std::vector<std::size_t>& layer_sizes() const { return sizes_; }

private:
    std::vector<std::size_t> sizes_;
    Activation act_;
    LayoutPtr layout_;
};

// Character-level language model around a single gated recurrent cell:
//   f_t = sigmoid([x_t, h_{t-1}] Wf + bf)
//   c_t = tanh   ([x_t, h_{t-1}] Wc + bc)
//   h_t = f_t (.) (h_{t-1} - c_t) + c_t
// Stands in at desk scale for a full LSTM stack.
class RnnLmModel final : public Model {
public:
    RnnLmModel(std::size_t vocab, std::size_t embed, std::size_t hidden, bool tied = false);

    const LayoutPtr& layout() const override { return layout_; }
    std::string descriptor() const override;
    MetricKind metric_kind() const override { return MetricKind::Perplexity; }
    ParamVector init_params(std::uint64_t seed) const override;
    LossGraph build_loss(const ParamVector& params, const double* corruption,
                         const io::BatchView& batch) const override;

    std::size_t vocab() const { return vocab_; }

private:
    std::size_t vocab_, embed_, hidden_;
    bool tied_;
    LayoutPtr layout_;
};

// build_mlp/parse helpers
std::shared_ptr<MlpModel> build_mlp(const std::vector<std::size_t>& layer_sizes, std::uint64_t seed,
                                    ParamVector* params_out, Activation act = Activation::Relu);
std::shared_ptr<Model> model_from_descriptor(const std::string& descriptor);

// One gradient per batch instance (gradient of that instance's own loss).
std::vector<GradientResult> per_sample_gradients(const Model& model, const ParamVector& params,
                                                 const io::BatchView& batch);

}  // namespace samlab
