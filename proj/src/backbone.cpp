#include "navseg/backbone.hpp"

#include <cmath>

#include "navseg/errors.hpp"

namespace navseg {

std::array<PatchStage, 4> BackboneParams::default_stages() {
    return {{{7, 4, 3, 3, 32}, {2, 2, 0, 32, 64}, {2, 2, 0, 64, 160}, {2, 2, 0, 160, 256}}};
}

BackboneParams BackboneParams::init(std::uint64_t seed) {
    BackboneParams p;
    p.stages = default_stages();
    auto rng = make_rng(seed);
    for (int i = 0; i < 4; ++i) {
        const PatchStage& s = p.stages[static_cast<std::size_t>(i)];
        const int fan_in = s.window * s.window * s.in_channels;
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        p.weight[static_cast<std::size_t>(i)] =
            uniform_tensor({fan_in, s.out_channels}, -bound, bound, rng);
        p.bias[static_cast<std::size_t>(i)] = uniform_tensor({s.out_channels}, -bound, bound, rng);
    }
    return p;
}

BoundBackbone bind(Tape& t, const BackboneParams& p) {
    BoundBackbone bb;
    for (int i = 0; i < 4; ++i) {
        bb.weight[static_cast<std::size_t>(i)] = t.input(p.weight[static_cast<std::size_t>(i)]);
        bb.bias[static_cast<std::size_t>(i)] = t.input(p.bias[static_cast<std::size_t>(i)]);
    }
    return bb;
}

ValueId patch_embed(Tape& t, ValueId x, int window, int stride, int pad, ValueId w, ValueId b) {
    const Tensor& X = t.val(x);
    if (X.ndim() != 3) throw ShapeError("patch_embed: expected [CxHxW] input, got " + X.shape_str());
    const int h = X.dim(1), width = X.dim(2);
    const int oh = (h + 2 * pad - window) / stride + 1;
    const int ow = (width + 2 * pad - window) / stride + 1;
    const ValueId cols = im2col(t, x, window, stride, pad);
    const ValueId projected = linear(t, cols, w, b);
    return lc_to_chw(t, projected, oh, ow);
}

std::array<ValueId, 4> backbone_forward(Tape& t, ValueId image, const BoundBackbone& bb,
                                        const BackboneParams& p) {
    const Tensor& img = t.val(image);
    if (img.ndim() != 3 || img.dim(0) != 3)
        throw ShapeError("backbone_forward: expected [3xHxW] image, got " + img.shape_str());
    const int h = img.dim(1), w = img.dim(2);
    if (h % 32 != 0 || w % 32 != 0)
        throw ConfigError("backbone_forward: image size " + std::to_string(h) + "x" +
                          std::to_string(w) + " must be divisible by 32");
    std::array<ValueId, 4> feats{};
    ValueId cur = image;
    for (int i = 0; i < 4; ++i) {
        const PatchStage& s = p.stages[static_cast<std::size_t>(i)];
        cur = patch_embed(t, cur, s.window, s.stride, s.pad, bb.weight[static_cast<std::size_t>(i)],
                          bb.bias[static_cast<std::size_t>(i)]);
        cur = gelu(t, cur);
        feats[static_cast<std::size_t>(i)] = cur;
    }
    return feats;
}

}  // namespace navseg
