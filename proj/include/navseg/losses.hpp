#pragma once

#include <cstdint>
#include <vector>

#include "navseg/labelmap.hpp"
#include "navseg/tape.hpp"

namespace navseg {

// Probabilities are clamped to this floor inside every log so hard zeros
// stay finite.
inline constexpr double kLogFloor = 1e-12;

struct LossWeights {
    double lambda_ga = 0.5;
    double lambda_aux = 0.4;
    std::vector<double> class_weights;  // empty = all ones

    void validate(int groups) const;
};

// Class-weighted cross-entropy of a per-pixel probability map against coarse
// labels, averaged over non-ignored pixels.
ValueId ce_loss(Tape& t, ValueId prob_map, const LabelMap& labels,
                const std::vector<double>& class_weights = {});

// Attention-guidance loss tying a diagonal map to a binary group mask.
// Default mode penalizes only -log of the map under the mask, normalized by
// the mask pixel count (0 when the mask is empty). full_bce adds the
// complementary -log(1 - map) term off the mask and normalizes by all pixels.
ValueId ga_loss(Tape& t, ValueId diag_map, const LabelMap& mask, bool full_bce = false);

// Small auxiliary decoder over an intermediate feature map, for deep
// supervision during training only.
struct AuxParams {
    Tensor w1, b1, w2, b2;
    static AuxParams init(int in_channels, int hidden, int groups, std::uint64_t seed);
};

struct BoundAux {
    ValueId w1, b1, w2, b2;
};

BoundAux bind(Tape& t, const AuxParams& p);

ValueId aux_forward(Tape& t, ValueId feature, const BoundAux& a, int h, int w);  // prob map [GxHxW]

ValueId aux_loss(Tape& t, ValueId feature, const BoundAux& a, const LabelMap& labels,
                 const std::vector<double>& class_weights = {});

// ce + lambda_ga * sum(ga) + lambda_aux * aux.
ValueId total_loss(Tape& t, ValueId ce, const std::vector<ValueId>& ga, ValueId aux,
                   const LossWeights& w);

// Momentum update of per-group class weights from a windowed error rate:
// next = m * current + (1 - m) * (initial + error_rate).
std::vector<double> dynamic_weight_update(const std::vector<double>& current,
                                          const std::vector<double>& initial,
                                          const std::vector<double>& error_rate, double momentum);

}  // namespace navseg
