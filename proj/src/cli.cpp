#include "samlab/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>

#include "samlab/config.hpp"
#include "samlab/csv.hpp"
#include "samlab/data_io.hpp"
#include "samlab/errors.hpp"
#include "samlab/landscape.hpp"
#include "samlab/rng.hpp"
#include "samlab/shift_lab.hpp"

namespace samlab::cli {

namespace {

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string fd(double v) { return io::format_double(v); }

struct CommonFlags {
    std::string config_path;
    std::optional<long> seed;
    std::string out_dir;
    int jobs = 1;
    bool dry_run = false;
};

ExperimentConfig load_config(const CommonFlags& flags) {
    ExperimentConfig cfg = ExperimentConfig::from_file(flags.config_path);
    if (flags.seed) cfg.model.seed = static_cast<std::uint64_t>(*flags.seed);
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    return cfg;
}

std::string out_path(const ExperimentConfig& cfg, const std::string& suffix) {
    std::filesystem::create_directories(cfg.out_dir);
    return cfg.out_dir + "/" + cfg.run_id + "_" + suffix;
}

int cmd_train(const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(flags);
    DataBundle data = build_datasets(cfg.data);
    auto model = build_model(cfg.model, data);
    if (flags.dry_run) {
        std::cout << "config ok: train " << model->descriptor() << " on " << data.train.size()
                  << " instances, " << cfg.epochs << " epochs\n";
        return 0;
    }

    TrainOptions opts;
    opts.epochs = cfg.epochs;
    opts.batch_size = cfg.batch_size;
    opts.seed = cfg.model.seed;
    TrainResult result = train(*model, data.train, &data.eval, cfg.optimizer, cfg.sam, opts);

    std::vector<std::string> header = {"run_id",    "epoch",      "phase",  "train_loss",
                                       "eval_loss", "eval_metric", "grad_norm"};
    for (const std::string& name : result.metrics.group_names) header.push_back("grad_norm_" + name);
    header.push_back("passes");
    header.push_back("timestamp");

    io::MetricsSink sink(out_path(cfg, "metrics.csv"), header);
    for (const EpochRow& row : result.metrics.rows) {
        std::vector<std::string> fields = {cfg.run_id,          std::to_string(row.epoch),
                                           row.phase,           fd(row.train_loss),
                                           fd(row.eval_loss),   fd(row.eval_metric),
                                           fd(row.grad_norm)};
        for (double gn : row.group_grad_norms) fields.push_back(fd(gn));
        fields.push_back(std::to_string(row.passes));
        fields.push_back(timestamp_utc());
        sink.write_row(fields);
    }

    io::Checkpoint ckpt;
    ckpt.descriptor = model->descriptor();
    ckpt.seed = cfg.model.seed;
    ckpt.config_digest = cfg.digest;
    ckpt.params = result.params.values();
    io::save_checkpoint(out_path(cfg, "checkpoint.bin"), ckpt);

    const EpochRow& last = result.metrics.rows.back();
    std::cout << "trained " << model->descriptor() << ": train_loss=" << last.train_loss
              << " eval_metric=" << last.eval_metric << " passes=" << last.passes << "\n";
    return 0;
}

std::pair<std::shared_ptr<Model>, ParamVector> load_model_checkpoint(const std::string& path,
                                                                     const ExperimentConfig& cfg,
                                                                     const DataBundle& data) {
    io::Checkpoint ckpt = io::load_checkpoint(path);
    auto model = model_from_descriptor(ckpt.descriptor);
    // cross-check against the config's model when both are present
    auto configured = build_model(cfg.model, data);
    if (configured->descriptor() != ckpt.descriptor)
        throw FormatError("checkpoint descriptor '" + ckpt.descriptor +
                          "' does not match configured model '" + configured->descriptor() + "'");
    if (ckpt.params.size() != model->layout()->total())
        throw FormatError("checkpoint parameter count " + std::to_string(ckpt.params.size()) +
                          " does not match model layout " + std::to_string(model->layout()->total()));
    return {model, ParamVector(model->layout(), std::move(ckpt.params))};
}

int cmd_attack(const CommonFlags& flags, const std::string& checkpoint, std::optional<std::string> p_str,
               const std::vector<double>& eps_override, std::optional<int> steps_override) {
    ExperimentConfig cfg = load_config(flags);
    DataBundle data = build_datasets(cfg.data);
    if (flags.dry_run) {
        std::cout << "config ok: attack\n";
        return 0;
    }
    auto [model, params] = load_model_checkpoint(checkpoint, cfg, data);

    NormOrder p = p_str ? parse_norm_order(*p_str) : cfg.attack.p;
    std::vector<double> ladder = eps_override.empty() ? cfg.attack.eps : eps_override;
    int steps = steps_override.value_or(cfg.attack.steps);
    const io::Dataset& target = cfg.attack.data == "train" ? data.train : data.eval;

    std::vector<std::string> header = {"run_id",       "p",           "epsilon",       "steps",
                                       "clean_loss",   "corrupted_loss", "loss_increase",
                                       "clean_metric", "corrupted_metric", "metric_drop", "timestamp"};
    io::MetricsSink sink(out_path(cfg, "attack.csv"), header);
    for (double eps : ladder) {
        AttackReport rep = corruption_attack(*model, params, target, p, eps, steps);
        sink.write_row({cfg.run_id, norm_order_name(p), fd(eps), std::to_string(steps),
                        fd(rep.clean_loss), fd(rep.corrupted_loss), fd(rep.loss_increase()),
                        fd(rep.clean_metric), fd(rep.corrupted_metric), fd(rep.metric_drop()),
                        timestamp_utc()});
        std::cout << "attack p=" << norm_order_name(p) << " eps=" << eps
                  << ": loss " << rep.clean_loss << " -> " << rep.corrupted_loss << "\n";
    }
    return 0;
}

int cmd_spectrum(const CommonFlags& flags, const std::string& checkpoint, std::optional<int> k_override,
                 std::optional<long> samples_override) {
    ExperimentConfig cfg = load_config(flags);
    DataBundle data = build_datasets(cfg.data);
    if (flags.dry_run) {
        std::cout << "config ok: spectrum\n";
        return 0;
    }
    auto [model, params] = load_model_checkpoint(checkpoint, cfg, data);

    SpectrumOptions opts;
    opts.k = k_override.value_or(cfg.spectrum.k);
    opts.sample_count = samples_override ? static_cast<std::size_t>(*samples_override) : cfg.spectrum.samples;
    opts.seed = cfg.spectrum.seed;
    const io::Dataset& target = cfg.spectrum.data == "test" ? data.eval : data.train;
    opts.sample_count = std::min(opts.sample_count, target.size());

    SpectrumReport rep = fisher_spectrum(*model, params, target, opts);
    std::vector<std::string> header = {"run_id", "index", "eigenvalue", "samples", "trace", "timestamp"};
    io::MetricsSink sink(out_path(cfg, "spectrum.csv"), header);
    for (std::size_t i = 0; i < rep.eigenvalues.size(); ++i)
        sink.write_row({cfg.run_id, std::to_string(i), fd(rep.eigenvalues[i]),
                        std::to_string(rep.samples_used), fd(rep.trace), timestamp_utc()});
    std::cout << "spectrum: top eigenvalue " << rep.eigenvalues.front() << ", trace " << rep.trace
              << "\n";
    return 0;
}

// D* for the neural trials: the eval split, optionally pushed further by the
// configured intensity bias / label-conditional noise.
io::Dataset shifted_counterpart(const ExperimentConfig& cfg, const DataBundle& data) {
    if (cfg.shift.intensity_bias != 0.0 || cfg.shift.shift_label_noise != 0.0)
        return io::make_shifted_variant(data.eval, cfg.shift.intensity_bias,
                                        cfg.shift.shift_label_noise, Rng::mix(cfg.data.seed, 77));
    return data.eval;
}

int cmd_shift_trial(const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(flags);

    std::vector<std::string> header = {"run_id",    "eta",        "delta_norm", "converged",
                                       "final_loss", "final_grad_norm", "timestamp"};
    std::vector<std::string> fit_header = {"run_id", "mode",  "slope",  "intercept",
                                           "r2",     "used",  "failed", "delta_at_1", "timestamp"};

    if (cfg.shift.mode == "quadratic") {
        std::vector<double> grid = cfg.shift.eta_grid;
        if (grid.empty())
            for (int i = 1; i <= 100; ++i) grid.push_back(0.01 * i);
        if (flags.dry_run) {
            std::cout << "config ok: shift-trial quadratic, " << grid.size() << " trials\n";
            return 0;
        }
        auto problem = shift::random_quadratic_problem(cfg.shift.dim, cfg.shift.instances,
                                                       cfg.shift.shift_scale, cfg.shift.shared_hessian,
                                                       cfg.shift.problem_seed);
        auto [records, fit] = shift::run_quadratic_shift_trials(problem, grid);

        io::MetricsSink sink(out_path(cfg, "shift_trials.csv"), header);
        for (const auto& rec : records)
            sink.write_row({cfg.run_id, fd(rec.eta_mix), fd(rec.delta_norm),
                            rec.converged ? "1" : "0", fd(rec.final_loss), fd(rec.final_grad_norm),
                            timestamp_utc()});
        Eigen::VectorXd theta = shift::exact_minimizer(problem, problem.base_weights);
        Eigen::VectorXd theta_star = shift::exact_minimizer(problem, problem.shifted_weights);
        io::MetricsSink fit_sink(out_path(cfg, "shift_fit.csv"), fit_header);
        fit_sink.write_row({cfg.run_id, "quadratic", fd(fit.slope), fd(fit.intercept), fd(fit.r2),
                            std::to_string(fit.used), std::to_string(fit.failed),
                            fd((theta_star - theta).norm()), timestamp_utc()});
        std::cout << "shift-trial quadratic: slope=" << fit.slope << " r2=" << fit.r2 << "\n";
        return 0;
    }

    if (cfg.shift.mode != "neural")
        throw ConfigError("config: 'shift.mode' must be quadratic|neural");

    std::vector<double> grid = cfg.shift.eta_grid;
    if (grid.empty())
        for (int i = 1; i <= 20; ++i) grid.push_back(0.05 * i);

    DataBundle data = build_datasets(cfg.data);
    auto model = build_model(cfg.model, data);
    if (flags.dry_run) {
        std::cout << "config ok: shift-trial neural, " << grid.size() << " trials\n";
        return 0;
    }
    io::Dataset d_star = shifted_counterpart(cfg, data);

    TrainOptions opts;
    opts.epochs = cfg.epochs;
    opts.batch_size = cfg.batch_size;
    opts.seed = cfg.model.seed;
    SamConfig plain;  // theta comes from plain training
    plain.K = 0;
    TrainResult base = train(*model, data.train, nullptr, cfg.optimizer, plain, opts);

    auto [records, fit] = shift::run_shift_trials(*model, base.params, data.train, d_star, grid,
                                                  cfg.shift.finetune, cfg.model.seed, flags.jobs);

    io::MetricsSink sink(out_path(cfg, "shift_trials.csv"), header);
    for (const auto& rec : records)
        sink.write_row({cfg.run_id, fd(rec.eta_mix), fd(rec.delta_norm), rec.converged ? "1" : "0",
                        fd(rec.final_loss), fd(rec.final_grad_norm), timestamp_utc()});
    io::MetricsSink fit_sink(out_path(cfg, "shift_fit.csv"), fit_header);
    const double delta1 = records.empty() ? 0.0 : records.back().delta_norm;
    fit_sink.write_row({cfg.run_id, "neural", fd(fit.slope), fd(fit.intercept), fd(fit.r2),
                        std::to_string(fit.used), std::to_string(fit.failed), fd(delta1),
                        timestamp_utc()});
    std::cout << "shift-trial neural: slope=" << fit.slope << " r2=" << fit.r2
              << " failed=" << fit.failed << "\n";
    return 0;
}

int cmd_interp_curve(const CommonFlags& flags) {
    ExperimentConfig cfg = load_config(flags);
    DataBundle data = build_datasets(cfg.data);
    auto model = build_model(cfg.model, data);
    if (flags.dry_run) {
        std::cout << "config ok: interp-curve\n";
        return 0;
    }
    io::Dataset d_star = shifted_counterpart(cfg, data);

    TrainOptions opts;
    opts.epochs = cfg.epochs;
    opts.batch_size = cfg.batch_size;
    opts.seed = cfg.model.seed;
    SamConfig plain;
    plain.K = 0;
    TrainResult base = train(*model, data.train, nullptr, cfg.optimizer, plain, opts);
    shift::FinetuneResult ft =
        shift::finetune(*model, base.params, d_star, cfg.shift.finetune, Rng::mix(cfg.model.seed, 3));

    std::vector<double> alphas =
        shift::alpha_grid(cfg.shift.alpha_lo, cfg.shift.alpha_hi, cfg.shift.alpha_points);
    auto curve = shift::interpolation_curve(*model, base.params, ft.params, data.train, d_star, alphas);

    std::vector<std::string> header = {"run_id",   "alpha",     "train_loss",
                                       "test_loss", "shifted_train_loss", "timestamp"};
    io::MetricsSink sink(out_path(cfg, "interp_curve.csv"), header);
    for (const auto& s : curve)
        sink.write_row({cfg.run_id, fd(s.alpha), fd(s.train_loss), fd(s.test_loss),
                        fd(s.shifted_train_loss), timestamp_utc()});
    std::cout << "interp-curve: " << curve.size() << " samples written\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"sharpness-aware minimization laboratory"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string checkpoint;
    std::optional<std::string> attack_p;
    std::vector<double> attack_eps;
    std::optional<int> attack_steps;
    std::optional<int> spec_k;
    std::optional<long> spec_samples;

    auto add_common = [&](CLI::App* cmd, bool needs_config = true) {
        auto* opt = cmd->add_option("--config", flags.config_path, "experiment config file");
        if (needs_config) opt->required();
        cmd->add_option("--seed", flags.seed, "override the training seed");
        cmd->add_option("--out", flags.out_dir, "override the output directory");
        cmd->add_option("--jobs", flags.jobs, "parallel trials")->check(CLI::PositiveNumber);
        cmd->add_flag("--dry-run", flags.dry_run, "validate the config without side effects");
    };

    CLI::App* train_cmd = app.add_subcommand("train", "train a model per the config");
    add_common(train_cmd);

    CLI::App* attack_cmd = app.add_subcommand("attack", "parameter-corruption robustness of a checkpoint");
    add_common(attack_cmd);
    attack_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    attack_cmd->add_option("--p", attack_p, "norm order (2|inf)");
    attack_cmd->add_option("--eps", attack_eps, "corruption radii (repeatable)");
    attack_cmd->add_option("--steps", attack_steps, "ascent steps");

    CLI::App* spectrum_cmd = app.add_subcommand("spectrum", "top Fisher eigenvalues of a checkpoint");
    add_common(spectrum_cmd);
    spectrum_cmd->add_option("--checkpoint", checkpoint, "model checkpoint")->required();
    spectrum_cmd->add_option("--k", spec_k, "number of eigenvalues");
    spectrum_cmd->add_option("--samples", spec_samples, "per-sample gradient count");

    CLI::App* shift_cmd = app.add_subcommand("shift-trial", "distribution-shift trials and linear fit");
    add_common(shift_cmd);

    CLI::App* interp_cmd = app.add_subcommand("interp-curve", "loss curves between the two minima");
    add_common(interp_cmd);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (train_cmd->parsed()) return cmd_train(flags);
        if (attack_cmd->parsed()) return cmd_attack(flags, checkpoint, attack_p, attack_eps, attack_steps);
        if (spectrum_cmd->parsed()) return cmd_spectrum(flags, checkpoint, spec_k, spec_samples);
        if (shift_cmd->parsed()) return cmd_shift_trial(flags);
        if (interp_cmd->parsed()) return cmd_interp_curve(flags);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace samlab::cli
