#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace samlab::io {

enum class DatasetKind { Classification, Sequence };

// Instance container for both task families. Classification rows are dense
// feature vectors with integer labels; sequence rows are fixed-length token
// windows with next-token targets.
struct Dataset {
    DatasetKind kind = DatasetKind::Classification;
    std::string split_tag;

    // classification
    std::size_t feature_dim = 0;
    std::size_t num_classes = 0;
    std::vector<double> features;  // row-major size x feature_dim
    std::vector<std::int32_t> labels;

    // sequence
    std::size_t vocab_size = 0;
    std::size_t window = 0;
    std::vector<std::int32_t> tokens;   // row-major size x window
    std::vector<std::int32_t> targets;  // row-major size x window

    std::size_t size() const {
        return kind == DatasetKind::Classification ? labels.size()
                                                   : (window ? tokens.size() / window : 0);
    }

    std::span<const double> feature_row(std::size_t i) const {
        return {features.data() + i * feature_dim, feature_dim};
    }
    std::span<const std::int32_t> token_row(std::size_t i) const {
        return {tokens.data() + i * window, window};
    }
    std::span<const std::int32_t> target_row(std::size_t i) const {
        return {targets.data() + i * window, window};
    }

    void validate() const;
};

// Borrowed view over a subset of dataset rows.
struct BatchView {
    const Dataset* data = nullptr;
    std::span<const std::size_t> indices;

    std::size_t size() const { return indices.size(); }
};

// Full-dataset view helper; returns indices 0..n-1.
std::vector<std::size_t> all_indices(const Dataset& ds);

}  // namespace samlab::io
