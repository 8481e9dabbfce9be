#pragma once

#include <array>
#include <cstdint>

#include "navseg/tape.hpp"

namespace navseg {

// One strided patch-embedding stage: windows flattened and linearly
// projected into the stage's channel width.
struct PatchStage {
    int window;
    int stride;
    int pad;
    int in_channels;
    int out_channels;
};

// Four-stage feature extractor. Stage 1 takes 7x7 windows at stride 4
// (pad 3), later stages 2x2 at stride 2 (pad 0), so an H x W image yields
// features at H/4, H/8, H/16, H/32 with channel widths 32, 64, 160, 256.
struct BackboneParams {
    std::array<PatchStage, 4> stages;
    std::array<Tensor, 4> weight;  // [window^2 * in_channels, out_channels]
    std::array<Tensor, 4> bias;

    static std::array<PatchStage, 4> default_stages();
    static BackboneParams init(std::uint64_t seed);
};

struct BoundBackbone {
    std::array<ValueId, 4> weight;
    std::array<ValueId, 4> bias;
};

BoundBackbone bind(Tape& t, const BackboneParams& p);

// Flattened windows projected per position; no nonlinearity of its own.
ValueId patch_embed(Tape& t, ValueId x, int window, int stride, int pad, ValueId w, ValueId b);

// All four stages with a GELU after each projection. H and W must be
// divisible by 32.
std::array<ValueId, 4> backbone_forward(Tape& t, ValueId image, const BoundBackbone& bb,
                                        const BackboneParams& p);

}  // namespace navseg
