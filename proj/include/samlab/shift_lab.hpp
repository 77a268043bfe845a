#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "samlab/dataset.hpp"
#include "samlab/models.hpp"
#include "samlab/optim.hpp"

namespace samlab::shift {

// Weighted pool of quadratic instance losses l(w; z_i) = 1/2 (w-c_i)^T A_i (w-c_i)
// with base weights p and shifted weights p*. Everything about these problems
// is available in closed form, so the theory checks carry no training noise.
struct QuadraticInstance {
    Eigen::MatrixXd hessian;  // symmetric positive definite
    Eigen::VectorXd center;
};

struct QuadraticShiftProblem {
    std::vector<QuadraticInstance> instances;
    Eigen::VectorXd base_weights;     // p, positive, sums to 1
    Eigen::VectorXd shifted_weights;  // p*, non-negative, sums to 1

    std::size_t dimension() const { return instances.empty() ? 0 : static_cast<std::size_t>(instances[0].center.size()); }
    void validate() const;

    Eigen::MatrixXd weighted_hessian(const Eigen::VectorXd& weights) const;
    Eigen::VectorXd loss_gradient(const Eigen::VectorXd& w, const Eigen::VectorXd& weights) const;
    double loss(const Eigen::VectorXd& w, const Eigen::VectorXd& weights) const;
    Eigen::VectorXd instance_gradient(const Eigen::VectorXd& w, std::size_t i) const;

    // likelihood ratio residuals r(z_i) = p*_i / p_i - 1
    Eigen::VectorXd ratio_residuals() const;
    Eigen::VectorXd mixed_weights(double eta_mix) const;  // (1-eta) p + eta p*

    // strong-convexity constant: smallest eigenvalue of the weighted Hessian
    double mu() const;
};

// Closed-form minimizer of the weighted loss; throws NumericError with a
// condition-number diagnostic if the weighted Hessian is singular.
Eigen::VectorXd exact_minimizer(const QuadraticShiftProblem& problem, const Eigen::VectorXd& weights);

// First-order parameter-shift estimate -H^{-1} E_p[r(z) grad l(theta; z)].
Eigen::VectorXd delta_first_order(const QuadraticShiftProblem& problem);

// f-divergence generator; KL uses f(t) = t log t, so a2 = 1/2.
struct FDivergenceSpec {
    std::function<double(double)> f;
    double a1 = 0.0;
    double a2 = 0.0;
    static FDivergenceSpec kl();
};

double f_divergence(const QuadraticShiftProblem& problem, const FDivergenceSpec& spec);

// Parameter-shift bound C_delta = (1/mu) sqrt(C_f / a2 * E_p ||grad l(theta;z)||^2).
double delta_bound(const QuadraticShiftProblem& problem, const FDivergenceSpec& spec);

QuadraticShiftProblem random_quadratic_problem(std::size_t dim, std::size_t instances,
                                               double shift_scale, bool shared_hessian,
                                               std::uint64_t seed);

// ---- mixed datasets & trials ----

struct MixSpec {
    double eta_mix = 0.0;  // fraction of instances drawn from D*
};

// floor((1-eta) N) instances of D plus the remainder from D*; |result| = |D|.
io::Dataset mix_datasets(const io::Dataset& d, const io::Dataset& d_star, const MixSpec& spec,
                         std::uint64_t seed);

struct CurveSample {
    double alpha = 0.0;
    double train_loss = 0.0;
    double test_loss = 0.0;
    double shifted_train_loss = 0.0;
};

struct ShiftTrialRecord {
    double eta_mix = 0.0;
    double delta_norm = 0.0;
    bool converged = true;
    double final_loss = 0.0;
    double final_grad_norm = 0.0;
    std::vector<CurveSample> curve;  // optional interpolation samples
};

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    int used = 0;
    int failed = 0;
};

LinearFit fit_line(std::span<const double> x, std::span<const double> y);

// Oracle trials: theta^mix from closed-form minimizers over the mixed weighting.
std::pair<std::vector<ShiftTrialRecord>, LinearFit> run_quadratic_shift_trials(
    const QuadraticShiftProblem& problem, std::span<const double> eta_grid);

struct FinetuneConfig {
    int epochs = 3;
    double lr = 0.05;
    std::size_t batch_size = 64;
    double grad_tol = 1e-4;   // stop early once the full-set gradient norm drops below
    int patience = 2;         // epochs of loss increase before a trial counts as diverged
};

// Neural trials: fine-tune theta on each mixed dataset, record ||theta^mix - theta||.
// Failed (diverged) trials are excluded from the fit but counted in it.
std::pair<std::vector<ShiftTrialRecord>, LinearFit> run_shift_trials(
    const Model& model, const ParamVector& theta, const io::Dataset& d, const io::Dataset& d_star,
    std::span<const double> eta_grid, const FinetuneConfig& cfg, std::uint64_t seed, int jobs = 1);

// Fine-tune from theta on `data`; reports convergence diagnostics.
struct FinetuneResult {
    ParamVector params;
    bool converged = true;
    double final_loss = 0.0;
    double final_grad_norm = 0.0;
};
FinetuneResult finetune(const Model& model, const ParamVector& theta, const io::Dataset& data,
                        const FinetuneConfig& cfg, std::uint64_t seed);

// Loss curves along w(alpha) = alpha theta + (1-alpha) theta*:
// train loss on D, test loss on D*, and the shifted train loss
// L(w - delta; D) + C with delta = theta* - theta and
// C = L(theta*; D*) - L(theta; D).
std::vector<CurveSample> interpolation_curve(const Model& model, const ParamVector& theta,
                                             const ParamVector& theta_star, const io::Dataset& d,
                                             const io::Dataset& d_star, std::span<const double> alphas);

// Same three curves for a quadratic problem, all in closed form.
std::vector<CurveSample> quadratic_interpolation_curve(const QuadraticShiftProblem& problem,
                                                       std::span<const double> alphas);

std::vector<double> alpha_grid(double lo, double hi, std::size_t points);

double pearson_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace samlab::shift
