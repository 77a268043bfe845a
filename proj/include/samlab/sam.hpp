#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "samlab/grouping.hpp"
#include "samlab/models.hpp"
#include "samlab/optim.hpp"
#include "samlab/param_vector.hpp"

namespace samlab {

enum class NormOrder { L2, LInf };
const char* norm_order_name(NormOrder p);
NormOrder parse_norm_order(const std::string& s);

enum class SamImpl { MultiStep, SingleStep };

// Corruption hyperparameters. K = 0 disables the corruption machinery.
struct SamConfig {
    int K = 1;
    double epsilon = 0.0;
    NormOrder p = NormOrder::L2;
    double eta = 0.0;  // 0 => 1.5*epsilon/K multi-step, epsilon single-step
    SamImpl impl = SamImpl::MultiStep;
    ScaleRule rule = ScaleRule::FixedOne;
    Granularity granularity = Granularity::Layer;
    int start_epoch = 0;
    double tau = 1e-12;

    double resolved_eta() const;
    bool corruption_enabled() const { return K >= 1 && epsilon > 0.0; }
    void validate() const;
};

// Current corruption a_k with its scales; constraint ||T^-1 a||_p <= eps holds
// after every projection.
struct CorruptionState {
    std::vector<double> a;
    ScaleVector T;
    int k = 0;
};

// Closed-form maximizer of u^T g over ||T^-1 u||_p <= eta.
// p=2: u = eta T^2 g / ||Tg||_2;  p=inf: u = eta T sgn(g).  Zero g gives zero u.
void ascent_step_span(std::span<const double> grad, std::span<const double> t_diag, double eta,
                      NormOrder p, std::span<double> out);
ParamVector ascent_step(const ParamVector& grad, const ScaleVector& T, double eta, NormOrder p);

// Projection onto {v : ||T^-1 v||_p <= eps}. Feasible inputs are returned
// unchanged (bit-exactly), so the projection is idempotent.
void project_span(std::span<double> v, std::span<const double> t_diag, double eps, NormOrder p);
ParamVector project(const ParamVector& v, const ScaleVector& T, double eps, NormOrder p);

double transformed_norm(std::span<const double> v, std::span<const double> t_diag, NormOrder p);

struct ObjectiveResult {
    double loss = 0.0;               // average of the K+1 losses (multi) or the corrupted loss (single)
    std::vector<double> grad;        // matching averaged / corrupted gradient
    CorruptionState state;
    int passes = 0;                  // forward/backward pairs consumed
    double clean_loss = 0.0;         // loss at a_0 = 0 (multi) or at w (single)
    std::vector<double> clean_grad;  // g_0, used for per-group norm logging
};

// Multi-step averaged risk: a_0 = 0, K ascent/projection steps, mean of the
// K+1 losses and gradients. Exactly K+1 forward/backward passes.
ObjectiveResult multi_step_objective(const Model& model, const ParamVector& params,
                                     const io::BatchView& batch, const SamConfig& cfg,
                                     const GroupPartition& partition);

// Single ascent to a_1, then loss/gradient at w + a_1 only. Exactly 2 passes.
ObjectiveResult single_step_objective(const Model& model, const ParamVector& params,
                                      const io::BatchView& batch, const SamConfig& cfg,
                                      const GroupPartition& partition);

struct TrainOptions {
    int epochs = 10;
    std::size_t batch_size = 64;
    std::uint64_t seed = 1;
};

struct EpochRow {
    int epoch = 0;
    std::string phase;  // plain | warmup | sam
    double train_loss = 0.0;
    double eval_loss = 0.0;
    double eval_metric = 0.0;
    double grad_norm = 0.0;               // mean over batches of ||g_0||
    std::vector<double> group_grad_norms;  // per layer segment, mean over batches
    long passes = 0;                       // cumulative forward/backward pairs
};

struct TrainMetrics {
    std::vector<std::string> group_names;
    std::vector<EpochRow> rows;
    long total_passes = 0;
};

struct TrainResult {
    ParamVector params;
    TrainMetrics metrics;
};

// Algorithm driver: plain steps before cfg.start_epoch, the configured SAM
// objective afterwards. Scales are recomputed once per batch from the
// uncorrupted gradient and held fixed across the K inner steps. Deterministic
// for a fixed seed. Aborts with a NumericError naming epoch/batch if the loss
// goes non-finite.
TrainResult train(const Model& model, const io::Dataset& train_data, const io::Dataset* eval_data,
                  const OptimizerSpec& optimizer, const SamConfig& cfg, const TrainOptions& opts);

}  // namespace samlab
