#include "navseg/losses.hpp"

#include <cmath>

#include "navseg/errors.hpp"

namespace navseg {

void LossWeights::validate(int groups) const {
    if (lambda_ga < 0.0 || lambda_aux < 0.0)
        throw ConfigError("loss weights must be non-negative");
    if (!class_weights.empty()) {
        if (static_cast<int>(class_weights.size()) != groups)
            throw ConfigError("class_weights has " + std::to_string(class_weights.size()) +
                              " entries for " + std::to_string(groups) + " groups");
        for (double w : class_weights)
            if (w < 0.0) throw ConfigError("class weights must be non-negative");
    }
}

ValueId ce_loss(Tape& t, ValueId prob_map, const LabelMap& labels,
                const std::vector<double>& class_weights) {
    const Tensor& p = t.val(prob_map);
    if (p.ndim() != 3)
        throw ShapeError("ce_loss: expected [GxHxW] probabilities, got " + p.shape_str());
    const int groups = p.dim(0), h = p.dim(1), w = p.dim(2);
    if (labels.rows != h || labels.cols != w)
        throw ShapeError("ce_loss: label map " + std::to_string(labels.rows) + "x" +
                         std::to_string(labels.cols) + " vs probabilities " + p.shape_str());
    std::vector<double> cw = class_weights;
    if (cw.empty()) cw.assign(static_cast<std::size_t>(groups), 1.0);
    if (static_cast<int>(cw.size()) != groups)
        throw ConfigError("ce_loss: " + std::to_string(cw.size()) + " class weights for " +
                          std::to_string(groups) + " groups");

    long long scored = 0;
    double acc = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::uint8_t label = labels.at(y, x);
            if (label == kIgnoreLabel) continue;
            if (label >= groups)
                throw DataError("ce_loss: label " + std::to_string(label) + " at pixel (" +
                                std::to_string(y) + "," + std::to_string(x) + ") exceeds " +
                                std::to_string(groups) + " groups");
            ++scored;
            acc -= cw[label] * std::log(std::max(p.at(label, y, x), kLogFloor));
        }
    const double value = scored > 0 ? acc / static_cast<double>(scored) : 0.0;
    LabelMap lab = labels;
    return t.emplace(Tensor::scalar(value),
                     [prob_map, lab = std::move(lab), cw, h, w,
                      scored](Tape& tp, const Tensor& up, ValueId) {
                         if (scored == 0) return;
                         const Tensor& pv = tp.val(prob_map);
                         Tensor& dp = tp.grad_buf(prob_map);
                         const double norm = up.data[0] / static_cast<double>(scored);
                         for (int y = 0; y < h; ++y)
                             for (int x = 0; x < w; ++x) {
                                 const std::uint8_t label = lab.at(y, x);
                                 if (label == kIgnoreLabel) continue;
                                 const double pval = pv.at(label, y, x);
                                 if (pval < kLogFloor) continue;  // clamped region, flat
                                 dp.at(label, y, x) -= norm * cw[label] / pval;
                             }
                     },
                     "ce_loss");
}

ValueId ga_loss(Tape& t, ValueId diag_map, const LabelMap& mask, bool full_bce) {
    const Tensor& b = t.val(diag_map);
    if (b.ndim() != 2) throw ShapeError("ga_loss: expected [HxW] map, got " + b.shape_str());
    const int h = b.dim(0), w = b.dim(1);
    if (mask.rows != h || mask.cols != w)
        throw ShapeError("ga_loss: mask " + std::to_string(mask.rows) + "x" +
                         std::to_string(mask.cols) + " vs map " + b.shape_str());

    long long on = 0;
    for (std::uint8_t m : mask.data) on += (m == 1) ? 1 : 0;
    const long long total = static_cast<long long>(mask.size());

    double acc = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = b.at(y, x);
            if (mask.at(y, x) == 1)
                acc -= std::log(std::max(v, kLogFloor));
            else if (full_bce)
                acc -= std::log(std::max(1.0 - v, kLogFloor));
        }
    const long long denom = full_bce ? total : std::max<long long>(on, 1);
    const double value = (on == 0 && !full_bce) ? 0.0 : acc / static_cast<double>(denom);

    LabelMap m = mask;
    return t.emplace(Tensor::scalar(value),
                     [diag_map, m = std::move(m), full_bce, on, denom, h,
                      w](Tape& tp, const Tensor& up, ValueId) {
                         if (on == 0 && !full_bce) return;
                         const Tensor& bv = tp.val(diag_map);
                         Tensor& db = tp.grad_buf(diag_map);
                         const double norm = up.data[0] / static_cast<double>(denom);
                         for (int y = 0; y < h; ++y)
                             for (int x = 0; x < w; ++x) {
                                 const double v = bv.at(y, x);
                                 if (m.at(y, x) == 1) {
                                     if (v >= kLogFloor) db.at(y, x) -= norm / v;
                                 } else if (full_bce) {
                                     if (1.0 - v >= kLogFloor) db.at(y, x) += norm / (1.0 - v);
                                 }
                             }
                     },
                     "ga_loss");
}

AuxParams AuxParams::init(int in_channels, int hidden, int groups, std::uint64_t seed) {
    auto rng = make_rng(seed);
    // Variance-preserving bound, matching the fusion head.
    const double b1 = std::sqrt(6.0 / static_cast<double>(in_channels));
    const double b2 = std::sqrt(6.0 / static_cast<double>(hidden));
    AuxParams p;
    p.w1 = uniform_tensor({in_channels, hidden}, -b1, b1, rng);
    p.b1 = uniform_tensor({hidden}, -b1, b1, rng);
    p.w2 = uniform_tensor({hidden, groups}, -b2, b2, rng);
    p.b2 = uniform_tensor({groups}, -b2, b2, rng);
    return p;
}

BoundAux bind(Tape& t, const AuxParams& p) {
    return BoundAux{t.input(p.w1), t.input(p.b1), t.input(p.w2), t.input(p.b2)};
}

ValueId aux_forward(Tape& t, ValueId feature, const BoundAux& a, int h, int w) {
    const Tensor& f = t.val(feature);
    if (f.ndim() != 3) throw ShapeError("aux_forward: expected [CxHxW] feature, got " + f.shape_str());
    const int fh = f.dim(1), fw = f.dim(2);
    const ValueId tokens = chw_to_lc(t, feature);
    const ValueId hidden = gelu(t, linear(t, tokens, a.w1, a.b1));
    const ValueId logits = linear(t, hidden, a.w2, a.b2);
    const ValueId maps = lc_to_chw(t, logits, fh, fw);
    const ValueId upsampled = bilinear_resize(t, maps, h, w);
    const ValueId pixels = chw_to_lc(t, upsampled);
    return lc_to_chw(t, softmax_rows(t, pixels), h, w);
}

ValueId aux_loss(Tape& t, ValueId feature, const BoundAux& a, const LabelMap& labels,
                 const std::vector<double>& class_weights) {
    const ValueId probs = aux_forward(t, feature, a, labels.rows, labels.cols);
    return ce_loss(t, probs, labels, class_weights);
}

ValueId total_loss(Tape& t, ValueId ce, const std::vector<ValueId>& ga, ValueId aux,
                   const LossWeights& w) {
    std::vector<ValueId> terms;
    std::vector<double> coeffs;
    terms.push_back(ce);
    coeffs.push_back(1.0);
    for (ValueId g : ga) {
        terms.push_back(g);
        coeffs.push_back(w.lambda_ga);
    }
    terms.push_back(aux);
    coeffs.push_back(w.lambda_aux);
    return affine(t, terms, coeffs);
}

std::vector<double> dynamic_weight_update(const std::vector<double>& current,
                                          const std::vector<double>& initial,
                                          const std::vector<double>& error_rate, double momentum) {
    if (momentum < 0.0 || momentum > 1.0)
        throw ConfigError("dynamic_weight_update: momentum " + std::to_string(momentum) +
                          " outside [0,1]");
    if (current.size() != initial.size() || current.size() != error_rate.size())
        throw ConfigError("dynamic_weight_update: weight vectors disagree in length");
    std::vector<double> next(current.size());
    for (std::size_t i = 0; i < current.size(); ++i)
        next[i] = momentum * current[i] + (1.0 - momentum) * (initial[i] + error_rate[i]);
    return next;
}

}  // namespace navseg
