#pragma once

#include <string>
#include <utility>
#include <vector>

#include "navseg/backbone.hpp"
#include "navseg/head.hpp"
#include "navseg/labelmap.hpp"
#include "navseg/losses.hpp"

namespace navseg {

inline constexpr int kBackboneChannelSum = 32 + 64 + 160 + 256;

struct ModelConfig {
    HeadConfig head;
    int aux_hidden = 64;
    std::uint64_t seed = 1;
};

// Backbone + group-wise attention head + auxiliary decoder as one trainable
// unit.
struct Model {
    ModelConfig cfg;
    BackboneParams backbone;
    HeadParams head;
    AuxParams aux;

    static Model init(const ModelConfig& cfg);

    // Stable parameter enumeration shared by the optimizer, the gradient
    // checker and the checkpoint format.
    std::vector<std::pair<std::string, Tensor*>> named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
};

struct BoundModel {
    BoundBackbone backbone;
    BoundHead head;
    BoundAux aux;
    std::vector<ValueId> all;  // same order as Model::named_tensors()
};

BoundModel bind(Tape& t, const Model& m);

struct ModelOutputs {
    ValueId probs;                   // [G x H x W]
    std::vector<ValueId> diag_maps;  // train mode only
    std::array<ValueId, 4> features;
};

ModelOutputs model_forward(Tape& t, ValueId image, const BoundModel& bm, const Model& m,
                           bool train_mode);

// Inference convenience: argmax group map, attention branch skipped.
LabelMap infer_labels(const Model& m, const Tensor& image, Tensor* probs_out = nullptr);

void save_checkpoint(const std::string& dir, const Model& m);
Model load_checkpoint(const std::string& dir);

LabelMap argmax_channels(const Tensor& probs);

}  // namespace navseg
