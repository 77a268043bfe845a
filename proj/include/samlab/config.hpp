#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "samlab/data_io.hpp"
#include "samlab/models.hpp"
#include "samlab/optim.hpp"
#include "samlab/sam.hpp"
#include "samlab/shift_lab.hpp"

namespace samlab::cli {

// Flat-sectioned key/value config. Grammar: `[section]` headers, `key = value`
// lines, `#`/`;` comments, blank lines. Unknown sections or keys are rejected.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_text(const std::string& text, const std::string& origin = "<inline>");

    bool has(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long get_long(const std::string& section, const std::string& key, long fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const;
    std::vector<std::size_t> get_size_list(const std::string& section, const std::string& key,
                                           const std::vector<std::size_t>& fallback) const;

    const std::string& raw_text() const { return raw_; }

private:
    void validate_keys() const;

    std::string origin_;
    std::string raw_;
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

struct DataConfig {
    std::string source = "gaussian";  // gaussian | mnist | chars
    std::string dir;                  // mnist
    std::string path;                 // chars
    std::size_t classes = 2, dim = 16, per_class = 200;
    std::vector<double> shift;  // broadcast when a single value is given
    double separation = 3.0, noise = 1.0, label_noise = 0.0;
    std::size_t window = 32;
    double eval_fraction = 0.2;  // chars: tail fraction held out
    std::uint64_t seed = 7;
};

struct ModelConfig {
    std::string kind = "mlp";  // mlp | rnnlm
    std::vector<std::size_t> layer_sizes = {16, 32, 2};
    std::string activation = "relu";
    std::size_t embed = 32, hidden = 64;
    bool tied = false;
    std::uint64_t seed = 1;
};

struct ShiftSectionConfig {
    std::string mode = "neural";  // neural | quadratic
    std::vector<double> eta_grid;
    // quadratic problems
    std::size_t dim = 8, instances = 12;
    double shift_scale = 0.05;
    bool shared_hessian = true;
    std::uint64_t problem_seed = 11;
    // neural fine-tuning
    shift::FinetuneConfig finetune;
    double intensity_bias = 0.0;
    double shift_label_noise = 0.0;
    // interpolation grid
    double alpha_lo = -0.25, alpha_hi = 1.25;
    std::size_t alpha_points = 41;
};

struct AttackSectionConfig {
    NormOrder p = NormOrder::L2;
    std::vector<double> eps = {0.05, 0.1, 0.2};
    int steps = 10;
    std::string data = "test";  // train | test
};

struct SpectrumSectionConfig {
    int k = 50;
    std::size_t samples = 512;
    std::string data = "train";  // train | test
    std::uint64_t seed = 1;
};

struct ExperimentConfig {
    ModelConfig model;
    DataConfig data;
    OptimizerSpec optimizer;
    int epochs = 10;
    std::size_t batch_size = 64;
    SamConfig sam;
    std::string out_dir = "out";
    std::string run_id = "run";
    ShiftSectionConfig shift;
    AttackSectionConfig attack;
    SpectrumSectionConfig spectrum;
    std::string digest;  // of the raw config text

    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_config(const ConfigFile& file);
};

struct DataBundle {
    io::Dataset train;
    io::Dataset eval;
};

DataBundle build_datasets(const DataConfig& cfg);
std::shared_ptr<Model> build_model(const ModelConfig& cfg, const DataBundle& data);

}  // namespace samlab::cli
