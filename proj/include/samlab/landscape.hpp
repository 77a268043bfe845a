#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "samlab/models.hpp"
#include "samlab/sam.hpp"

namespace samlab {

struct AttackReport {
    NormOrder p = NormOrder::L2;
    double epsilon = 0.0;
    int steps = 0;
    double clean_loss = 0.0;
    double corrupted_loss = 0.0;
    double clean_metric = 0.0;
    double corrupted_metric = 0.0;
    double loss_increase() const { return corrupted_loss - clean_loss; }
    double metric_drop() const { return clean_metric - corrupted_metric; }
};

// Multi-step adversarial parameter corruption under uniform strengths
// (T = identity): projected ascent on the dataset loss, metric evaluated at
// w + a_steps. Never mutates `params`.
AttackReport corruption_attack(const Model& model, const ParamVector& params, const io::Dataset& data,
                               NormOrder p, double epsilon, int steps);

struct SpectrumOptions {
    int k = 50;
    std::size_t sample_count = 512;
    std::size_t gram_limit = 4096;  // use the exact Gram route up to this many samples
    std::uint64_t seed = 1;
};

struct SpectrumReport {
    std::vector<double> eigenvalues;  // top-k, descending, non-negative
    std::size_t samples_used = 0;
    double trace = 0.0;
};

// Top-k eigenvalues of the Fisher estimate (1/m) sum_i grad_i grad_i^T.
// Exact m x m Gram eigendecomposition when m <= gram_limit, otherwise Lanczos
// with full reorthogonalization on implicit matrix-vector products.
SpectrumReport fisher_spectrum(const Model& model, const ParamVector& params, const io::Dataset& data,
                               const SpectrumOptions& opts);

// Lanczos with full reorthogonalization for symmetric PSD operators; exposed
// for direct verification against dense solvers.
std::vector<double> lanczos_top_eigenvalues(const std::function<void(const std::vector<double>&, std::vector<double>&)>& matvec,
                                            std::size_t dim, int k, std::uint64_t seed);

}  // namespace samlab
