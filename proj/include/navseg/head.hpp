#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "navseg/tape.hpp"

namespace navseg {

// Group-wise attention fusion head configuration. One attention head per
// navigability group; the fusion bottleneck runs at H/reduction x
// W/reduction.
struct HeadConfig {
    int groups = 6;
    int reduction = 8;        // 8, 16 or 32
    int head_width = 64;      // channels per group head
    int fused_channels = 256; // width of the fused output features
    bool scaled_scores = true; // divide scores by sqrt(head_width); false = raw dot products
    bool train_mode = false;   // extract per-group attention diagonal maps

    int attention_channels() const { return groups * head_width; }
    void validate() const;
};

struct HeadParams {
    Tensor in_w, in_b;    // fused multi-scale channels -> attention channels
    Tensor q_w, q_b;      // joint query projection; group g owns columns [g*d_h, (g+1)*d_h)
    Tensor k_w, k_b;
    Tensor v_w, v_b;
    Tensor out_w, out_b;  // attention channels -> fused_channels
    Tensor cls1_w, cls1_b;
    Tensor cls2_w, cls2_b;

    static HeadParams init(const HeadConfig& cfg, int input_channels, std::uint64_t seed);
};

struct BoundHead {
    ValueId in_w, in_b, q_w, q_b, k_w, k_b, v_w, v_b, out_w, out_b;
    ValueId cls1_w, cls1_b, cls2_w, cls2_b;
};

BoundHead bind(Tape& t, const HeadParams& p);

// Resizes every scale to H/reduction x W/reduction and concatenates over
// channels. H and W must be divisible by the reduction.
ValueId spatial_align(Tape& t, const std::array<ValueId, 4>& features, int reduction, int h, int w);

struct FuseResult {
    ValueId fused;                     // [fused_channels x H_f x W_f]
    std::vector<ValueId> scores;       // per-group [L x L] attention, train_mode only
    std::vector<ValueId> diag_maps;    // per-group [H x W] in [0,1], train_mode only
};

// Flattens the aligned features, projects them, runs one attention head per
// group over the token sequence and fuses the heads back into feature maps.
// The diagonal-map branch is only evaluated in train_mode and never feeds the
// main path.
FuseResult mhsa_fuse(Tape& t, ValueId fused_input, const BoundHead& hp, const HeadConfig& cfg,
                     int h, int w);

// Main diagonal of an [L x L] attention matrix laid out as the bottleneck
// grid and resized to H x W. Output clamped into [0, 1].
ValueId diag_to_map(Tape& t, ValueId scores, int h, int w, int reduction);

// Two pointwise convolutions with a GELU between, bilinear upsample to the
// image size, then a per-pixel softmax over the group channel.
ValueId predict(Tape& t, ValueId fused, const BoundHead& hp, const HeadConfig& cfg, int h, int w);

// Analytic multiply-add counts for the inference path (the diagonal branch is
// excluded because inference skips it).
struct FlopCount {
    unsigned long long projections = 0;
    unsigned long long attention = 0;
    unsigned long long classifier = 0;
    unsigned long long total() const { return projections + attention + classifier; }
};

FlopCount head_flops(const HeadConfig& cfg, int h, int w, int input_channels = 512);

}  // namespace navseg
