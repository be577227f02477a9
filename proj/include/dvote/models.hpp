#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dvote/digest.hpp"
#include "dvote/program.hpp"
#include "dvote/tensor.hpp"

namespace dvote::models {

struct LayerSpec {
    std::string kind;  // "linear" | "relu" | "sigmoid"
    uint32_t rows = 0;
    uint32_t cols = 0;
};

struct ModelSpec {
    std::vector<LayerSpec> layers;
    uint64_t seed = 0;

    uint32_t input_dim() const { return layers.front().rows; }
    uint32_t output_dim() const { return layers.back().cols; }
    size_t param_count() const;

    std::string to_json() const;
    static ModelSpec from_json(const std::string& text);
};

// Parameter tensors keyed w0, b0, w1, b1, ... exactly as the graphs expect.
using Params = std::map<std::string, FixedTensor>;

// Seeded uniform init in [-scale, scale); bit-stable across platforms.
Params init_params(const ModelSpec& spec, FixedPoint scale);

// Model identity: digest over the canonical serialization of the parameter
// tensors in layer order.
Digest params_hash(const ModelSpec& spec, const Params& params);

std::vector<std::string> param_names(const ModelSpec& spec);

// Inference graph: input "x" (1 x d) -> output "out".
vm::CompGraph mlp_graph(const ModelSpec& spec);

// Signature check: embeds "xa" and "xb" through the same parameters and
// emits "distance", the sum of squared embedding differences.
vm::CompGraph distance_graph(const ModelSpec& spec);

// Vote reading: mlp followed by argmax; output "class".
vm::CompGraph vote_reader_graph(const ModelSpec& spec);

// One SGD step on squared-error loss, entirely as graph nodes: forward pass,
// closed-form backward pass, parameter update. Inputs: parameters, "x"
// (batch x d), "y" (batch x out), "ones" (1 x batch). Outputs: "<p>_next"
// per parameter and "loss". Sigmoid layers are not trainable here.
vm::CompGraph train_step_graph(const ModelSpec& spec, FixedPoint eta, uint32_t batch);

// Input map helpers.
std::map<std::string, FixedTensor> distance_inputs(const Params& params, const FixedTensor& xa,
                                                   const FixedTensor& xb);
std::map<std::string, FixedTensor> reader_inputs(const Params& params, const FixedTensor& x);
std::map<std::string, FixedTensor> train_inputs(const Params& params, const FixedTensor& x,
                                                const FixedTensor& y);

// Extracts the updated parameters from a train-step output set (task output
// order: params then loss).
Params updated_params(const ModelSpec& spec, const std::vector<FixedTensor>& outputs);

}  // namespace dvote::models
