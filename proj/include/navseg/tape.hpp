#pragma once

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "navseg/tensor.hpp"

namespace navseg {

using ValueId = int;

// Record of one forward pass: nodes appended in execution order, each with
// the value it produced and a pull function that routes an upstream gradient
// into the gradients of the nodes it was computed from. backward() walks the
// record once, strictly in reverse order, and then the tape is spent.
class Tape {
public:
    using PullFn = std::function<void(Tape&, const Tensor& upstream, ValueId self)>;

    ValueId input(Tensor value);
    ValueId emplace(Tensor value, PullFn pull, const char* op);

    const Tensor& val(ValueId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Tensor& grad(ValueId id) const;
    bool has_grad(ValueId id) const;

    // Accumulation buffer for a node's gradient, zero-initialized on first use.
    Tensor& grad_buf(ValueId id);

    // Seeds the scalar loss gradient and pulls it back through every node.
    void backward(ValueId loss, double seed = 1.0);

    int size() const { return static_cast<int>(nodes_.size()); }
    bool consumed() const { return consumed_; }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        PullFn pull;
        const char* op;
    };
    // Deque keeps val()/grad() references stable while new nodes are recorded.
    std::deque<Node> nodes_;
    bool consumed_ = false;
};

// ---------------------------------------------------------------------------
// Differentiable operations. Each returns the id of a freshly recorded node.
// ---------------------------------------------------------------------------

ValueId matmul(Tape& t, ValueId a, ValueId b);            // [MxK].[KxN] -> [MxN]
ValueId matmul_nt(Tape& t, ValueId a, ValueId b);         // [MxK].[NxK]^T -> [MxN]
ValueId linear(Tape& t, ValueId x, ValueId w, ValueId b); // x.w + row-broadcast b
ValueId softmax_rows(Tape& t, ValueId x);                 // per-row, max-subtracted
ValueId gelu(Tape& t, ValueId x);                         // exact erf form
ValueId add(Tape& t, ValueId a, ValueId b);               // same shape
ValueId scale(Tape& t, ValueId x, double c);
ValueId sum(Tape& t, ValueId x);                          // -> scalar
ValueId weighted_sum(Tape& t, ValueId x, Tensor coeffs);  // sum(x*coeffs) -> scalar
ValueId affine(Tape& t, std::span<const ValueId> scalars, std::span<const double> coeffs,
               double bias = 0.0);                        // bias + sum c_i * s_i

// Image-shaped ops on [C x H x W].
ValueId bilinear_resize(Tape& t, ValueId x, int out_h, int out_w);
ValueId concat_channels(Tape& t, std::span<const ValueId> parts);
ValueId chw_to_lc(Tape& t, ValueId x);                    // [CxHxW] -> [(H.W)xC]
ValueId lc_to_chw(Tape& t, ValueId x, int h, int w);      // inverse of chw_to_lc
ValueId im2col(Tape& t, ValueId x, int window, int stride, int pad);

// Matrix-shaped helpers for attention heads.
ValueId slice_cols(Tape& t, ValueId x, int col0, int ncols);
ValueId concat_cols(Tape& t, std::span<const ValueId> parts);
ValueId diag(Tape& t, ValueId x);                         // [LxL] -> [L]
ValueId reshape(Tape& t, ValueId x, std::vector<int> shape);
ValueId clamp01(Tape& t, ValueId x);

}  // namespace navseg
