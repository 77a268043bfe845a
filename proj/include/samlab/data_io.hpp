#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "samlab/dataset.hpp"

namespace samlab::io {

// ---- loaders / generators ----

// Standard IDX files (train/t10k images+labels) from `dir`; pixels scaled to [0,1].
std::pair<Dataset, Dataset> load_mnist(const std::string& dir);

struct GaussianTaskSpec {
    std::size_t classes = 2;
    std::size_t dim = 16;
    std::size_t per_class = 100;
    std::vector<double> shift;  // empty or all-zero => test drawn from the train distribution
    double separation = 3.0;    // scale of class-mean placement
    double noise = 1.0;         // within-class standard deviation
    double label_noise = 0.0;   // fraction of labels resampled uniformly (both splits)
};

std::pair<Dataset, Dataset> gen_gaussian_task(const GaussianTaskSpec& spec, std::uint64_t seed);

Dataset load_char_corpus(const std::string& path, std::size_t window);

// Derived split with a fixed pixel-intensity bias and label-conditional noise;
// used as the synthetic "shifted" counterpart of an image-like dataset.
Dataset make_shifted_variant(const Dataset& base, double intensity_bias, double label_noise,
                             std::uint64_t seed);

// Writes a classification dataset as a pair of IDX files (images+labels).
// Features are quantized to bytes; intended for fixtures and interop checks.
void write_idx_pair(const std::string& image_path, const std::string& label_path,
                    const Dataset& ds, std::size_t rows, std::size_t cols);

// ---- checkpoints ----

struct Checkpoint {
    std::uint32_t version = 1;
    std::string descriptor;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::vector<double> params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// FNV-1a 64-bit digest rendered as 16 hex chars; used to stamp configs into checkpoints.
std::string digest_hex(const std::string& text);

}  // namespace samlab::io
