#include "samlab/dataset.hpp"

#include <numeric>

#include "samlab/errors.hpp"

namespace samlab::io {

void Dataset::validate() const {
    if (kind == DatasetKind::Classification) {
        if (labels.size() * feature_dim != features.size())
            throw DataError("dataset: feature/label counts disagree (" +
                            std::to_string(features.size()) + " features for " +
                            std::to_string(labels.size()) + " labels of dim " +
                            std::to_string(feature_dim) + ")");
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
                throw DataError("dataset: label " + std::to_string(labels[i]) + " at row " +
                                std::to_string(i) + " outside [0, " + std::to_string(num_classes) + ")");
    } else {
        if (window == 0) throw DataError("dataset: sequence window must be positive");
        if (tokens.size() != targets.size() || tokens.size() % window != 0)
            throw DataError("dataset: token/target streams must be equal multiples of the window");
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (tokens[i] < 0 || static_cast<std::size_t>(tokens[i]) >= vocab_size ||
                targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= vocab_size)
                throw DataError("dataset: token outside vocabulary at position " + std::to_string(i));
        }
    }
}

std::vector<std::size_t> all_indices(const Dataset& ds) {
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

}  // namespace samlab::io
