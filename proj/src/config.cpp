#include "samlab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "samlab/errors.hpp"

namespace samlab::cli {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

const std::map<std::string, std::set<std::string>>& allowed_keys() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"model", {"kind", "layer_sizes", "activation", "embed", "hidden", "tied", "seed"}},
        {"data",
         {"source", "dir", "path", "classes", "dim", "per_class", "shift", "separation", "noise",
          "label_noise", "window", "eval_fraction", "seed"}},
        {"optimizer", {"kind", "lr", "clip", "epochs", "batch_size"}},
        {"sam",
         {"K", "epsilon", "p", "eta", "impl", "rule", "granularity", "start_epoch", "tau"}},
        {"output", {"dir", "run_id"}},
        {"shift",
         {"mode", "eta_grid", "dim", "instances", "shift_scale", "shared_hessian", "problem_seed",
          "finetune_epochs", "finetune_lr", "finetune_batch", "grad_tol", "patience",
          "intensity_bias", "shift_label_noise", "alpha_lo", "alpha_hi", "alpha_points"}},
        {"attack", {"p", "eps", "steps", "data"}},
        {"spectrum", {"k", "samples", "data", "seed"}},
    };
    return keys;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> parts;
    std::istringstream is(value);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) parts.push_back(tok);
    }
    return parts;
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open '" + path + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_text(text, path);
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    cfg.origin_ = origin;
    cfg.raw_ = text;
    std::istringstream is(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            cfg.sections_[section];
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        if (section.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": key outside any section");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (cfg.sections_[section].count(key))
            throw ConfigError(origin + ": duplicate key '" + section + "." + key + "'");
        cfg.sections_[section][key] = value;
    }
    cfg.validate_keys();
    return cfg;
}

void ConfigFile::validate_keys() const {
    const auto& allowed = allowed_keys();
    for (const auto& [section, kv] : sections_) {
        auto it = allowed.find(section);
        if (it == allowed.end()) throw ConfigError(origin_ + ": unknown section '" + section + "'");
        for (const auto& [key, value] : kv) {
            (void)value;
            if (!it->second.count(key))
                throw ConfigError(origin_ + ": unknown key '" + section + "." + key + "'");
        }
    }
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
    auto it = sections_.find(section);
    if (it == sections_.end()) return fallback;
    auto kv = it->second.find(key);
    return kv == it->second.end() ? fallback : kv->second;
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get_string(section, key, "");
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + section + "." + key + "' is not a number: '" + v + "'");
    }
}

long ConfigFile::get_long(const std::string& section, const std::string& key, long fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get_string(section, key, "");
    try {
        std::size_t pos = 0;
        long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + section + "." + key + "' is not an integer: '" + v + "'");
    }
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get_string(section, key, "");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: '" + section + "." + key + "' is not a boolean: '" + v + "'");
}

std::vector<double> ConfigFile::get_double_list(const std::string& section, const std::string& key,
                                                const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get_string(section, key, "");
    // range syntax lo:step:hi (inclusive)
    if (v.find(':') != std::string::npos) {
        std::istringstream is(v);
        std::string lo_s, step_s, hi_s;
        std::getline(is, lo_s, ':');
        std::getline(is, step_s, ':');
        std::getline(is, hi_s, ':');
        try {
            double lo = std::stod(lo_s), step = std::stod(step_s), hi = std::stod(hi_s);
            if (step <= 0.0 || hi < lo) throw std::invalid_argument(v);
            std::vector<double> out;
            long count = std::lround((hi - lo) / step);
            for (long i = 0; i <= count; ++i) out.push_back(lo + step * static_cast<double>(i));
            return out;
        } catch (const std::exception&) {
            throw ConfigError("config: '" + section + "." + key + "' bad range '" + v + "'");
        }
    }
    std::vector<double> out;
    for (const std::string& tok : split_list(v)) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError("config: '" + section + "." + key + "' bad list entry '" + tok + "'");
        }
    }
    if (out.empty()) throw ConfigError("config: '" + section + "." + key + "' is empty");
    return out;
}

std::vector<std::size_t> ConfigFile::get_size_list(const std::string& section, const std::string& key,
                                                   const std::vector<std::size_t>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<std::size_t> out;
    for (const std::string& tok : split_list(get_string(section, key, ""))) {
        try {
            out.push_back(static_cast<std::size_t>(std::stoul(tok)));
        } catch (const std::exception&) {
            throw ConfigError("config: '" + section + "." + key + "' bad list entry '" + tok + "'");
        }
    }
    if (out.empty()) throw ConfigError("config: '" + section + "." + key + "' is empty");
    return out;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_config(ConfigFile::parse_file(path));
}

ExperimentConfig ExperimentConfig::from_config(const ConfigFile& f) {
    ExperimentConfig cfg;

    cfg.model.kind = f.get_string("model", "kind", cfg.model.kind);
    cfg.model.layer_sizes = f.get_size_list("model", "layer_sizes", cfg.model.layer_sizes);
    cfg.model.activation = f.get_string("model", "activation", cfg.model.activation);
    cfg.model.embed = static_cast<std::size_t>(f.get_long("model", "embed", static_cast<long>(cfg.model.embed)));
    cfg.model.hidden = static_cast<std::size_t>(f.get_long("model", "hidden", static_cast<long>(cfg.model.hidden)));
    cfg.model.tied = f.get_bool("model", "tied", cfg.model.tied);
    cfg.model.seed = static_cast<std::uint64_t>(f.get_long("model", "seed", 1));

    cfg.data.source = f.get_string("data", "source", cfg.data.source);
    cfg.data.dir = f.get_string("data", "dir", "");
    cfg.data.path = f.get_string("data", "path", "");
    cfg.data.classes = static_cast<std::size_t>(f.get_long("data", "classes", static_cast<long>(cfg.data.classes)));
    cfg.data.dim = static_cast<std::size_t>(f.get_long("data", "dim", static_cast<long>(cfg.data.dim)));
    cfg.data.per_class = static_cast<std::size_t>(f.get_long("data", "per_class", static_cast<long>(cfg.data.per_class)));
    cfg.data.shift = f.get_double_list("data", "shift", cfg.data.shift);
    cfg.data.separation = f.get_double("data", "separation", cfg.data.separation);
    cfg.data.noise = f.get_double("data", "noise", cfg.data.noise);
    cfg.data.label_noise = f.get_double("data", "label_noise", cfg.data.label_noise);
    cfg.data.window = static_cast<std::size_t>(f.get_long("data", "window", static_cast<long>(cfg.data.window)));
    cfg.data.eval_fraction = f.get_double("data", "eval_fraction", cfg.data.eval_fraction);
    cfg.data.seed = static_cast<std::uint64_t>(f.get_long("data", "seed", 7));

    cfg.optimizer.kind = f.get_string("optimizer", "kind", "sgd");
    cfg.optimizer.lr = f.get_double("optimizer", "lr", 0.1);
    cfg.optimizer.clip = f.get_double("optimizer", "clip", 0.0);
    cfg.epochs = static_cast<int>(f.get_long("optimizer", "epochs", 10));
    cfg.batch_size = static_cast<std::size_t>(f.get_long("optimizer", "batch_size", 64));

    cfg.sam.K = static_cast<int>(f.get_long("sam", "K", 1));
    cfg.sam.epsilon = f.get_double("sam", "epsilon", 0.0);
    cfg.sam.p = parse_norm_order(f.get_string("sam", "p", "2"));
    cfg.sam.eta = f.get_double("sam", "eta", 0.0);
    const std::string impl = f.get_string("sam", "impl", "multi");
    if (impl == "multi") cfg.sam.impl = SamImpl::MultiStep;
    else if (impl == "single") cfg.sam.impl = SamImpl::SingleStep;
    else throw ConfigError("config: 'sam.impl' must be multi|single, got '" + impl + "'");
    cfg.sam.rule = parse_scale_rule(f.get_string("sam", "rule", "FIXED_ONE"));
    cfg.sam.granularity = parse_granularity(f.get_string("sam", "granularity", "layer"));
    cfg.sam.start_epoch = static_cast<int>(f.get_long("sam", "start_epoch", 0));
    cfg.sam.tau = f.get_double("sam", "tau", 1e-12);
    cfg.sam.validate();

    cfg.out_dir = f.get_string("output", "dir", cfg.out_dir);
    cfg.run_id = f.get_string("output", "run_id", cfg.run_id);

    cfg.shift.mode = f.get_string("shift", "mode", cfg.shift.mode);
    cfg.shift.eta_grid = f.get_double_list("shift", "eta_grid", cfg.shift.eta_grid);
    cfg.shift.dim = static_cast<std::size_t>(f.get_long("shift", "dim", static_cast<long>(cfg.shift.dim)));
    cfg.shift.instances = static_cast<std::size_t>(f.get_long("shift", "instances", static_cast<long>(cfg.shift.instances)));
    cfg.shift.shift_scale = f.get_double("shift", "shift_scale", cfg.shift.shift_scale);
    cfg.shift.shared_hessian = f.get_bool("shift", "shared_hessian", cfg.shift.shared_hessian);
    cfg.shift.problem_seed = static_cast<std::uint64_t>(f.get_long("shift", "problem_seed", 11));
    cfg.shift.finetune.epochs = static_cast<int>(f.get_long("shift", "finetune_epochs", 3));
    cfg.shift.finetune.lr = f.get_double("shift", "finetune_lr", 0.05);
    cfg.shift.finetune.batch_size = static_cast<std::size_t>(f.get_long("shift", "finetune_batch", 64));
    cfg.shift.finetune.grad_tol = f.get_double("shift", "grad_tol", 1e-4);
    cfg.shift.finetune.patience = static_cast<int>(f.get_long("shift", "patience", 2));
    cfg.shift.intensity_bias = f.get_double("shift", "intensity_bias", 0.0);
    cfg.shift.shift_label_noise = f.get_double("shift", "shift_label_noise", 0.0);
    cfg.shift.alpha_lo = f.get_double("shift", "alpha_lo", cfg.shift.alpha_lo);
    cfg.shift.alpha_hi = f.get_double("shift", "alpha_hi", cfg.shift.alpha_hi);
    cfg.shift.alpha_points = static_cast<std::size_t>(f.get_long("shift", "alpha_points", static_cast<long>(cfg.shift.alpha_points)));

    cfg.attack.p = parse_norm_order(f.get_string("attack", "p", "2"));
    cfg.attack.eps = f.get_double_list("attack", "eps", cfg.attack.eps);
    cfg.attack.steps = static_cast<int>(f.get_long("attack", "steps", 10));
    cfg.attack.data = f.get_string("attack", "data", cfg.attack.data);

    cfg.spectrum.k = static_cast<int>(f.get_long("spectrum", "k", 50));
    cfg.spectrum.samples = static_cast<std::size_t>(f.get_long("spectrum", "samples", 512));
    cfg.spectrum.data = f.get_string("spectrum", "data", cfg.spectrum.data);
    cfg.spectrum.seed = static_cast<std::uint64_t>(f.get_long("spectrum", "seed", 1));

    cfg.digest = io::digest_hex(f.raw_text());
    return cfg;
}

DataBundle build_datasets(const DataConfig& cfg) {
    if (cfg.source == "gaussian") {
        io::GaussianTaskSpec spec;
        spec.classes = cfg.classes;
        spec.dim = cfg.dim;
        spec.per_class = cfg.per_class;
        spec.separation = cfg.separation;
        spec.noise = cfg.noise;
        spec.label_noise = cfg.label_noise;
        spec.shift = cfg.shift;
        if (spec.shift.size() == 1) spec.shift.assign(cfg.dim, cfg.shift[0]);
        auto [train, test] = io::gen_gaussian_task(spec, cfg.seed);
        return DataBundle{std::move(train), std::move(test)};
    }
    if (cfg.source == "mnist") {
        if (cfg.dir.empty()) throw ConfigError("config: 'data.dir' required for source=mnist");
        auto [train, test] = io::load_mnist(cfg.dir);
        return DataBundle{std::move(train), std::move(test)};
    }
    if (cfg.source == "chars") {
        if (cfg.path.empty()) throw ConfigError("config: 'data.path' required for source=chars");
        io::Dataset all = io::load_char_corpus(cfg.path, cfg.window);
        const std::size_t n = all.size();
        const std::size_t eval_count = std::max<std::size_t>(
            1, static_cast<std::size_t>(cfg.eval_fraction * static_cast<double>(n)));
        const std::size_t train_count = n - eval_count;
        io::Dataset train = all, eval = all;
        train.split_tag = "train";
        train.tokens.assign(all.tokens.begin(),
                            all.tokens.begin() + static_cast<std::ptrdiff_t>(train_count * all.window));
        train.targets.assign(all.targets.begin(),
                             all.targets.begin() + static_cast<std::ptrdiff_t>(train_count * all.window));
        eval.split_tag = "eval";
        eval.tokens.assign(all.tokens.begin() + static_cast<std::ptrdiff_t>(train_count * all.window),
                           all.tokens.end());
        eval.targets.assign(all.targets.begin() + static_cast<std::ptrdiff_t>(train_count * all.window),
                            all.targets.end());
        return DataBundle{std::move(train), std::move(eval)};
    }
    throw ConfigError("config: unknown data source '" + cfg.source + "'");
}

std::shared_ptr<Model> build_model(const ModelConfig& cfg, const DataBundle& data) {
    if (cfg.kind == "mlp") {
        if (data.train.kind != io::DatasetKind::Classification)
            throw ConfigError("config: mlp model requires a classification data source");
        std::vector<std::size_t> sizes = cfg.layer_sizes;
        if (sizes.front() != data.train.feature_dim)
            throw ConfigError("config: model input size " + std::to_string(sizes.front()) +
                              " != data feature dim " + std::to_string(data.train.feature_dim));
        if (sizes.back() != data.train.num_classes)
            throw ConfigError("config: model output size " + std::to_string(sizes.back()) +
                              " != class count " + std::to_string(data.train.num_classes));
        return std::make_shared<MlpModel>(sizes, parse_activation(cfg.activation));
    }
    if (cfg.kind == "rnnlm") {
        if (data.train.kind != io::DatasetKind::Sequence)
            throw ConfigError("config: rnnlm model requires a sequence data source");
        return std::make_shared<RnnLmModel>(std::max(data.train.vocab_size, data.eval.vocab_size),
                                            cfg.embed, cfg.hidden, cfg.tied);
    }
    throw ConfigError("config: unknown model kind '" + cfg.kind + "'");
}

}  // namespace samlab::cli
