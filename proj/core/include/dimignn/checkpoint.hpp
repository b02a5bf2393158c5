#pragma once

#include "dimignn/model.hpp"

#include <string>

namespace dimignn {

/// Everything needed to reload and run a trained model: configuration,
/// dataset dimensions, named parameters with shapes, normalization stats
/// and the training seed, as one self-describing JSON document.
struct Checkpoint {
    ModelConfig cfg;
    int n_vars = 0;
    int c_attrs = 0;
    std::vector<std::string> variable_names;
    NormStats norm;
};

void save_checkpoint(const Model& model, const NormStats& norm,
                     const std::vector<std::string>& variable_names, const std::string& path);

/// Rebuilds the model from the stored configuration and restores every
/// parameter by name, auditing shapes along the way.
std::pair<Model, Checkpoint> load_checkpoint(const std::string& path);

} // namespace dimignn
