#include "navseg/head.hpp"

#include <cmath>

#include "navseg/errors.hpp"

namespace navseg {

void HeadConfig::validate() const {
    if (groups < 1) throw ConfigError("head: groups must be >= 1");
    if (reduction != 8 && reduction != 16 && reduction != 32)
        throw ConfigError("head: reduction must be 8, 16 or 32, got " + std::to_string(reduction));
    if (head_width < 1) throw ConfigError("head: head_width must be >= 1");
    if (fused_channels < 1) throw ConfigError("head: fused_channels must be >= 1");
}

namespace {

// Variance-preserving bound: without any normalization layers the default
// 1/sqrt(fan_in) scheme shrinks activations at every projection and the
// classifier logits start too flat to train at toy iteration counts.
Tensor fan_in_uniform(int rows, int cols, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(rows));
    return uniform_tensor({rows, cols}, -bound, bound, rng);
}

Tensor fan_in_uniform_vec(int fan_in, int n, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    return uniform_tensor({n}, -bound, bound, rng);
}

}  // namespace

HeadParams HeadParams::init(const HeadConfig& cfg, int input_channels, std::uint64_t seed) {
    cfg.validate();
    auto rng = make_rng(seed);
    const int att = cfg.attention_channels();
    HeadParams p;
    p.in_w = fan_in_uniform(input_channels, att, rng);
    p.in_b = fan_in_uniform_vec(input_channels, att, rng);
    p.q_w = fan_in_uniform(att, att, rng);
    p.q_b = fan_in_uniform_vec(att, att, rng);
    p.k_w = fan_in_uniform(att, att, rng);
    p.k_b = fan_in_uniform_vec(att, att, rng);
    p.v_w = fan_in_uniform(att, att, rng);
    p.v_b = fan_in_uniform_vec(att, att, rng);
    p.out_w = fan_in_uniform(att, cfg.fused_channels, rng);
    p.out_b = fan_in_uniform_vec(att, cfg.fused_channels, rng);
    p.cls1_w = fan_in_uniform(cfg.fused_channels, cfg.fused_channels, rng);
    p.cls1_b = fan_in_uniform_vec(cfg.fused_channels, cfg.fused_channels, rng);
    p.cls2_w = fan_in_uniform(cfg.fused_channels, cfg.groups, rng);
    p.cls2_b = fan_in_uniform_vec(cfg.fused_channels, cfg.groups, rng);
    return p;
}

BoundHead bind(Tape& t, const HeadParams& p) {
    BoundHead b;
    b.in_w = t.input(p.in_w);
    b.in_b = t.input(p.in_b);
    b.q_w = t.input(p.q_w);
    b.q_b = t.input(p.q_b);
    b.k_w = t.input(p.k_w);
    b.k_b = t.input(p.k_b);
    b.v_w = t.input(p.v_w);
    b.v_b = t.input(p.v_b);
    b.out_w = t.input(p.out_w);
    b.out_b = t.input(p.out_b);
    b.cls1_w = t.input(p.cls1_w);
    b.cls1_b = t.input(p.cls1_b);
    b.cls2_w = t.input(p.cls2_w);
    b.cls2_b = t.input(p.cls2_b);
    return b;
}

ValueId spatial_align(Tape& t, const std::array<ValueId, 4>& features, int reduction, int h, int w) {
    if (h % reduction != 0 || w % reduction != 0)
        throw ConfigError("spatial_align: image size " + std::to_string(h) + "x" + std::to_string(w) +
                          " not divisible by reduction " + std::to_string(reduction));
    const int fh = h / reduction, fw = w / reduction;
    std::array<ValueId, 4> resized{};
    for (int i = 0; i < 4; ++i) {
        const Tensor& f = t.val(features[static_cast<std::size_t>(i)]);
        if (f.dim(1) == fh && f.dim(2) == fw)
            resized[static_cast<std::size_t>(i)] = features[static_cast<std::size_t>(i)];
        else
            resized[static_cast<std::size_t>(i)] =
                bilinear_resize(t, features[static_cast<std::size_t>(i)], fh, fw);
    }
    return concat_channels(t, resized);
}

FuseResult mhsa_fuse(Tape& t, ValueId fused_input, const BoundHead& hp, const HeadConfig& cfg,
                     int h, int w) {
    cfg.validate();
    const Tensor& fin = t.val(fused_input);
    if (fin.ndim() != 3)
        throw ShapeError("mhsa_fuse: expected [CxH_fxW_f] input, got " + fin.shape_str());
    const int fh = fin.dim(1), fw = fin.dim(2);
    const double tau = cfg.scaled_scores ? std::sqrt(static_cast<double>(cfg.head_width)) : 1.0;

    const ValueId tokens = chw_to_lc(t, fused_input);          // [L x sum(C_i)]
    const ValueId projected = linear(t, tokens, hp.in_w, hp.in_b);
    const ValueId q = linear(t, projected, hp.q_w, hp.q_b);
    const ValueId k = linear(t, projected, hp.k_w, hp.k_b);
    const ValueId v = linear(t, projected, hp.v_w, hp.v_b);

    FuseResult out;
    std::vector<ValueId> heads;
    heads.reserve(static_cast<std::size_t>(cfg.groups));
    for (int g = 0; g < cfg.groups; ++g) {
        const int c0 = g * cfg.head_width;
        const ValueId qg = slice_cols(t, q, c0, cfg.head_width);
        const ValueId kg = slice_cols(t, k, c0, cfg.head_width);
        const ValueId vg = slice_cols(t, v, c0, cfg.head_width);
        const ValueId scores = softmax_rows(t, scale(t, matmul_nt(t, qg, kg), 1.0 / tau));
        heads.push_back(matmul(t, scores, vg));
        if (cfg.train_mode) {
            out.scores.push_back(scores);
            out.diag_maps.push_back(diag_to_map(t, scores, h, w, cfg.reduction));
        }
    }
    const ValueId merged = concat_cols(t, heads);
    const ValueId residual = add(t, merged, projected);
    const ValueId fused_tokens = linear(t, residual, hp.out_w, hp.out_b);
    out.fused = lc_to_chw(t, fused_tokens, fh, fw);
    return out;
}

ValueId diag_to_map(Tape& t, ValueId scores, int h, int w, int reduction) {
    const Tensor& s = t.val(scores);
    if (s.ndim() != 2 || s.dim(0) != s.dim(1))
        throw ShapeError("diag_to_map: expected square score matrix, got " + s.shape_str());
    const int fh = h / reduction, fw = w / reduction;
    if (s.dim(0) != fh * fw)
        throw ShapeError("diag_to_map: " + s.shape_str() + " does not cover a " + std::to_string(fh) +
                         "x" + std::to_string(fw) + " bottleneck");
    const ValueId d = diag(t, scores);
    const ValueId grid = reshape(t, d, {1, fh, fw});
    const ValueId resized = bilinear_resize(t, grid, h, w);
    return reshape(t, clamp01(t, resized), {h, w});
}

ValueId predict(Tape& t, ValueId fused, const BoundHead& hp, const HeadConfig& cfg, int h, int w) {
    const Tensor& f = t.val(fused);
    if (f.ndim() != 3) throw ShapeError("predict: expected [CxH_fxW_f] input, got " + f.shape_str());
    if (t.val(hp.cls2_w).dim(1) != cfg.groups)
        throw ShapeError("predict: classifier emits " + std::to_string(t.val(hp.cls2_w).dim(1)) +
                         " channels for " + std::to_string(cfg.groups) + " groups");
    const int fh = f.dim(1), fw = f.dim(2);
    const ValueId tokens = chw_to_lc(t, fused);
    const ValueId hidden = gelu(t, linear(t, tokens, hp.cls1_w, hp.cls1_b));
    const ValueId logits = linear(t, hidden, hp.cls2_w, hp.cls2_b);
    const ValueId logit_maps = lc_to_chw(t, logits, fh, fw);
    const ValueId upsampled = bilinear_resize(t, logit_maps, h, w);
    const ValueId pixels = chw_to_lc(t, upsampled);
    const ValueId probs = softmax_rows(t, pixels);
    return lc_to_chw(t, probs, h, w);
}

FlopCount head_flops(const HeadConfig& cfg, int h, int w, int input_channels) {
    cfg.validate();
    if (h % cfg.reduction != 0 || w % cfg.reduction != 0)
        throw ConfigError("head_flops: image size not divisible by reduction");
    const unsigned long long l =
        static_cast<unsigned long long>(h / cfg.reduction) * static_cast<unsigned long long>(w / cfg.reduction);
    const unsigned long long att = static_cast<unsigned long long>(cfg.attention_channels());
    const unsigned long long cout = static_cast<unsigned long long>(cfg.fused_channels);
    const unsigned long long groups = static_cast<unsigned long long>(cfg.groups);
    const unsigned long long dh = static_cast<unsigned long long>(cfg.head_width);

    FlopCount fc;
    fc.projections = l * static_cast<unsigned long long>(input_channels) * att  // input projection
                     + 3ULL * l * att * att                                     // q, k, v
                     + l * att * cout;                                          // output projection
    fc.attention = 2ULL * groups * l * l * dh;  // scores and their application
    fc.classifier = l * cout * cout + l * cout * groups;
    return fc;
}

}  // namespace navseg
