#pragma once

#include <map>
#include <string>
#include <vector>

#include "floq/model.hpp"

namespace floq {

// Checkpoint file: a magic line, a JSON manifest line (format version,
// hyperparameters, tensor names/shapes/byte offsets, free-form metadata),
// then raw little-endian 32-bit floats. Model tensors follow the parameter
// layout; extra tensors (e.g. optimizer moments) ride along by name.
struct Checkpoint {
    ModelParameters<float> params;
    std::map<std::string, std::vector<float>> extra;
    std::map<std::string, double> metadata;
};

void save_checkpoint(const std::string& path, const ModelParameters<float>& params,
                     const std::map<std::string, std::vector<float>>& extra = {},
                     const std::map<std::string, double>& metadata = {});

// Validates the manifest's tensor names, shapes and offsets against the
// layout implied by its hyperparameters.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace floq
