#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "navseg/model.hpp"

namespace navseg {

struct DynamicWeighting {
    bool enabled = false;
    double momentum = 0.9;
    int interval_epochs = 5;             // apply the update every this many epochs
    std::vector<double> init_weights;    // empty = all ones
};

struct TrainConfig {
    double base_lr = 0.01;
    double weight_decay = 0.0005;
    double poly_power = 0.9;
    double momentum = 0.9;
    int max_iters = 500;
    int batch_size = 4;
    int crop_h = 64, crop_w = 64;
    std::uint64_t seed = 1;
    int image_h = 64, image_w = 64;
    int dataset_size = 16;
    bool hflip = true;
    LossWeights loss;
    bool full_bce = false;
    DynamicWeighting dynamic;
    HeadConfig head;
    int aux_hidden = 64;

    void validate() const;
};

TrainConfig parse_train_config(const nlohmann::json& j);
nlohmann::json train_config_json(const TrainConfig& cfg);

// base_lr * (1 - iter/max_iters)^power.
double poly_lr(int iter, int max_iters, double base_lr, double power);

// Classic momentum SGD with decoupled-from-nothing weight decay folded into
// the gradient: v = momentum*v + grad + wd*param; param -= lr*v.
void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum,
              double weight_decay);

struct TrainRecord {
    int iter = 0;
    double lr = 0.0;
    double total = 0.0;
    double ce = 0.0;
    double ga = 0.0;  // summed over groups
    double aux = 0.0;
    double train_miou = 0.0;  // over the epoch accumulated so far
};

struct TrainResult {
    std::vector<TrainRecord> history;
    Model model;
};

TrainResult train_toy(const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

// max-normalized relative error with a small absolute floor.
double grad_rel_error(double analytic, double numeric);

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    int checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;

    bool pass(double threshold) const { return max_rel_err < threshold; }
    std::vector<std::string> offenders(double threshold) const;
    void absorb(const GradCheckReport& other);
};

// Central-difference check of an arbitrary scalar function of several input
// tensors. The builder must replay the identical forward graph for any value
// of the inputs.
using LossBuilder = std::function<ValueId(Tape&, const std::vector<ValueId>&)>;

GradCheckEntry fd_check(const std::string& name, std::vector<Tensor> inputs,
                        const LossBuilder& builder, double eps, int max_coords,
                        std::mt19937_64& rng);

// Small randomized scenarios covering every differentiable operation.
GradCheckReport gradcheck_ops(std::uint64_t seed, double eps);

struct GradCheckOptions {
    int h = 32, w = 32;
    HeadConfig head;  // groups 6, reduction 8 by default
    int aux_hidden = 64;
    double lambda_ga = 0.5;
    double lambda_aux = 0.4;
    std::uint64_t seed = 7;
    double eps = 1e-5;
    int coords_per_tensor = 200;
};

// Full-pipeline check: total training loss against central differences for a
// seeded sample of coordinates in every parameter tensor and the input image.
GradCheckReport gradcheck_model(const GradCheckOptions& opt);

}  // namespace navseg
