#include "navseg/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "navseg/errors.hpp"

namespace navseg {

namespace {

void require_2d(const Tensor& x, const char* op) {
    if (x.ndim() != 2) throw ShapeError(std::string(op) + ": expected 2-D tensor, got " + x.shape_str());
}

void require_3d(const Tensor& x, const char* op) {
    if (x.ndim() != 3) throw ShapeError(std::string(op) + ": expected 3-D tensor, got " + x.shape_str());
}

// Precomputed 1-D interpolation taps under the half-pixel-centers convention:
// source = (dst + 0.5) * (in / out) - 0.5, clamped into [0, in - 1].
struct ResizeAxis {
    std::vector<int> lo, hi;
    std::vector<double> frac;
};

ResizeAxis resize_axis(int in, int out) {
    ResizeAxis ax;
    ax.lo.resize(static_cast<std::size_t>(out));
    ax.hi.resize(static_cast<std::size_t>(out));
    ax.frac.resize(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (int o = 0; o < out; ++o) {
        double s = (o + 0.5) * scale - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(in - 1));
        const int lo = static_cast<int>(std::floor(s));
        ax.lo[static_cast<std::size_t>(o)] = lo;
        ax.hi[static_cast<std::size_t>(o)] = std::min(lo + 1, in - 1);
        ax.frac[static_cast<std::size_t>(o)] = s - lo;
    }
    return ax;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

ValueId Tape::input(Tensor value) {
    nodes_.push_back(Node{std::move(value), Tensor{}, nullptr, "input"});
    return size() - 1;
}

ValueId Tape::emplace(Tensor value, PullFn pull, const char* op) {
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(pull), op});
    return size() - 1;
}

const Tensor& Tape::grad(ValueId id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.data.empty())
        throw UsageError(std::string("no gradient recorded for node of op '") + n.op + "'");
    return n.grad;
}

bool Tape::has_grad(ValueId id) const { return !nodes_[static_cast<std::size_t>(id)].grad.data.empty(); }

Tensor& Tape::grad_buf(ValueId id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.data.empty()) n.grad = Tensor(n.value.shape, 0.0);
    return n.grad;
}

void Tape::backward(ValueId loss, double seed) {
    if (consumed_) throw UsageError("tape already consumed by a previous backward pass");
    if (val(loss).numel() != 1)
        throw UsageError("backward requires a scalar loss, got " + val(loss).shape_str());
    consumed_ = true;
    grad_buf(loss).data[0] += seed;
    for (ValueId id = loss; id >= 0; --id) {
        Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.data.empty() || !n.pull) continue;
        n.pull(*this, n.grad, id);
    }
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

ValueId matmul(Tape& t, ValueId a, ValueId b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    require_2d(A, "matmul");
    require_2d(B, "matmul");
    if (A.dim(1) != B.dim(0))
        throw ShapeError("matmul: inner dimensions disagree: " + A.shape_str() + " vs " + B.shape_str());
    const int m = A.dim(0), k = A.dim(1), n = B.dim(1);
    Tensor out({m, n});
    kern::mm_nn(A.data.data(), B.data.data(), out.data.data(), m, k, n);
    return t.emplace(std::move(out),
                     [a, b, m, k, n](Tape& tp, const Tensor& up, ValueId) {
                         kern::mm_nt(up.data.data(), tp.val(b).data.data(),
                                     tp.grad_buf(a).data.data(), m, n, k);
                         kern::mm_tn(tp.val(a).data.data(), up.data.data(),
                                     tp.grad_buf(b).data.data(), k, m, n);
                     },
                     "matmul");
}

ValueId matmul_nt(Tape& t, ValueId a, ValueId b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    require_2d(A, "matmul_nt");
    require_2d(B, "matmul_nt");
    if (A.dim(1) != B.dim(1))
        throw ShapeError("matmul_nt: shared dimensions disagree: " + A.shape_str() + " vs " +
                         B.shape_str());
    const int m = A.dim(0), k = A.dim(1), n = B.dim(0);
    Tensor out({m, n});
    kern::mm_nt(A.data.data(), B.data.data(), out.data.data(), m, k, n);
    return t.emplace(std::move(out),
                     [a, b, m, k, n](Tape& tp, const Tensor& up, ValueId) {
                         // dA += up.B ; dB += up^T.A
                         kern::mm_nn(up.data.data(), tp.val(b).data.data(),
                                     tp.grad_buf(a).data.data(), m, n, k);
                         kern::mm_tn(up.data.data(), tp.val(a).data.data(),
                                     tp.grad_buf(b).data.data(), n, m, k);
                     },
                     "matmul_nt");
}

ValueId linear(Tape& t, ValueId x, ValueId w, ValueId b) {
    const Tensor& X = t.val(x);
    const Tensor& W = t.val(w);
    const Tensor& B = t.val(b);
    require_2d(X, "linear");
    require_2d(W, "linear");
    if (B.ndim() != 1)
        throw ShapeError("linear: bias must be 1-D, got " + B.shape_str());
    if (X.dim(1) != W.dim(0) || W.dim(1) != B.dim(0))
        throw ShapeError("linear: shapes disagree: x" + X.shape_str() + " w" + W.shape_str() +
                         " b" + B.shape_str());
    const int n = X.dim(0), ci = X.dim(1), co = W.dim(1);
    Tensor out({n, co});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < co; ++j) out.at(i, j) = B.at(j);
    kern::mm_nn(X.data.data(), W.data.data(), out.data.data(), n, ci, co);
    return t.emplace(std::move(out),
                     [x, w, b, n, ci, co](Tape& tp, const Tensor& up, ValueId) {
                         kern::mm_nt(up.data.data(), tp.val(w).data.data(),
                                     tp.grad_buf(x).data.data(), n, co, ci);
                         kern::mm_tn(tp.val(x).data.data(), up.data.data(),
                                     tp.grad_buf(w).data.data(), ci, n, co);
                         Tensor& db = tp.grad_buf(b);
                         for (int i = 0; i < n; ++i)
                             for (int j = 0; j < co; ++j) db.at(j) += up.at(i, j);
                     },
                     "linear");
}

ValueId softmax_rows(Tape& t, ValueId x) {
    const Tensor& X = t.val(x);
    require_2d(X, "softmax_rows");
    const int m = X.dim(0), n = X.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i) {
        double mx = X.at(i, 0);
        for (int j = 1; j < n; ++j) mx = std::max(mx, X.at(i, j));
        double z = 0.0;
        for (int j = 0; j < n; ++j) {
            const double e = std::exp(X.at(i, j) - mx);
            out.at(i, j) = e;
            z += e;
        }
        for (int j = 0; j < n; ++j) out.at(i, j) /= z;
    }
    return t.emplace(std::move(out),
                     [x, m, n](Tape& tp, const Tensor& up, ValueId self) {
                         const Tensor& y = tp.val(self);
                         Tensor& dx = tp.grad_buf(x);
                         for (int i = 0; i < m; ++i) {
                             double dot = 0.0;
                             for (int j = 0; j < n; ++j) dot += up.at(i, j) * y.at(i, j);
                             for (int j = 0; j < n; ++j)
                                 dx.at(i, j) += y.at(i, j) * (up.at(i, j) - dot);
                         }
                     },
                     "softmax_rows");
}

ValueId gelu(Tape& t, ValueId x) {
    const Tensor& X = t.val(x);
    Tensor out(X.shape);
    const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
    for (std::size_t i = 0; i < X.data.size(); ++i) {
        const double v = X.data[i];
        out.data[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
    }
    return t.emplace(std::move(out),
                     [x, inv_sqrt2](Tape& tp, const Tensor& up, ValueId) {
                         const Tensor& X2 = tp.val(x);
                         Tensor& dx = tp.grad_buf(x);
                         const double inv_sqrt2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
                         for (std::size_t i = 0; i < X2.data.size(); ++i) {
                             const double v = X2.data[i];
                             const double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
                             const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
                             dx.data[i] += up.data[i] * (cdf + v * pdf);
                         }
                     },
                     "gelu");
}

ValueId add(Tape& t, ValueId a, ValueId b) {
    const Tensor& A = t.val(a);
    const Tensor& B = t.val(b);
    if (!A.same_shape(B))
        throw ShapeError("add: shapes disagree: " + A.shape_str() + " vs " + B.shape_str());
    Tensor out(A.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = A.data[i] + B.data[i];
    return t.emplace(std::move(out),
                     [a, b](Tape& tp, const Tensor& up, ValueId) {
                         Tensor& da = tp.grad_buf(a);
                         Tensor& db = tp.grad_buf(b);
                         for (std::size_t i = 0; i < up.data.size(); ++i) {
                             da.data[i] += up.data[i];
                             db.data[i] += up.data[i];
                         }
                     },
                     "add");
}

ValueId scale(Tape& t, ValueId x, double c) {
    const Tensor& X = t.val(x);
    Tensor out(X.shape);
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = c * X.data[i];
    return t.emplace(std::move(out),
                     [x, c](Tape& tp, const Tensor& up, ValueId) {
                         Tensor& dx = tp.grad_buf(x);
                         for (std::size_t i = 0; i < up.data.size(); ++i) dx.data[i] += c * up.data[i];
                     },
                     "scale");
}

ValueId sum(Tape& t, ValueId x) {
    const Tensor& X = t.val(x);
    double acc = 0.0;
    for (double v : X.data) acc += v;
    return t.emplace(Tensor::scalar(acc),
                     [x](Tape& tp, const Tensor& up, ValueId) {
                         Tensor& dx = tp.grad_buf(x);
                         for (double& g : dx.data) g += up.data[0];
                     },
                     "sum");
}

ValueId weighted_sum(Tape& t, ValueId x, Tensor coeffs) {
    const Tensor& X = t.val(x);
    if (!X.same_shape(coeffs))
        throw ShapeError("weighted_sum: shapes disagree: " + X.shape_str() + " vs " +
                         coeffs.shape_str());
    double acc = 0.0;
    for (std::size_t i = 0; i < X.data.size(); ++i) acc += X.data[i] * coeffs.data[i];
    return t.emplace(Tensor::scalar(acc),
                     [x, c = std::move(coeffs)](Tape& tp, const Tensor& up, ValueId) {
                         Tensor& dx = tp.grad_buf(x);
                         for (std::size_t i = 0; i < dx.data.size(); ++i)
                             dx.data[i] += up.data[0] * c.data[i];
                     },
                     "weighted_sum");
}

ValueId affine(Tape& t, std::span<const ValueId> scalars, std::span<const double> coeffs,
               double bias) {
    if (scalars.size() != coeffs.size())
        throw UsageError("affine: got " + std::to_string(scalars.size()) + " scalars but " +
                         std::to_string(coeffs.size()) + " coefficients");
    double acc = bias;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        const Tensor& s = t.val(scalars[i]);
        if (s.numel() != 1)
            throw ShapeError("affine: operand " + std::to_string(i) + " is not scalar: " +
                             s.shape_str());
        acc += coeffs[i] * s.data[0];
    }
    std::vector<ValueId> ids(scalars.begin(), scalars.end());
    std::vector<double> cs(coeffs.begin(), coeffs.end());
    return t.emplace(Tensor::scalar(acc),
                     [ids, cs](Tape& tp, const Tensor& up, ValueId) {
                         for (std::size_t i = 0; i < ids.size(); ++i)
                             tp.grad_buf(ids[i]).data[0] += cs[i] * up.data[0];
                     },
                     "affine");
}

// ---------------------------------------------------------------------------
// Image-shaped ops
// ---------------------------------------------------------------------------

ValueId bilinear_resize(Tape& t, ValueId x, int out_h, int out_w) {
    const Tensor& X = t.val(x);
    require_3d(X, "bilinear_resize");
    if (out_h < 1 || out_w < 1)
        throw ShapeError("bilinear_resize: output size must be positive, got " +
                         std::to_string(out_h) + "x" + std::to_string(out_w));
    const int c = X.dim(0), h = X.dim(1), w = X.dim(2);
    const ResizeAxis ay = resize_axis(h, out_h);
    const ResizeAxis ax = resize_axis(w, out_w);
    Tensor out({c, out_h, out_w});
    // Separable lerp form: zero fractions copy exactly and constant fields
    // survive without rounding.
    for (int ch = 0; ch < c; ++ch)
        for (int oy = 0; oy < out_h; ++oy) {
            const int y0 = ay.lo[static_cast<std::size_t>(oy)], y1 = ay.hi[static_cast<std::size_t>(oy)];
            const double fy = ay.frac[static_cast<std::size_t>(oy)];
            for (int ox = 0; ox < out_w; ++ox) {
                const int x0 = ax.lo[static_cast<std::size_t>(ox)], x1 = ax.hi[static_cast<std::size_t>(ox)];
                const double fx = ax.frac[static_cast<std::size_t>(ox)];
                const double top = X.at(ch, y0, x0) + fx * (X.at(ch, y0, x1) - X.at(ch, y0, x0));
                const double bot = X.at(ch, y1, x0) + fx * (X.at(ch, y1, x1) - X.at(ch, y1, x0));
                out.at(ch, oy, ox) = top + fy * (bot - top);
            }
        }
    return t.emplace(std::move(out),
                     [x, c, out_h, out_w, ay, ax](Tape& tp, const Tensor& up, ValueId) {
                         Tensor& dx = tp.grad_buf(x);
                         for (int ch = 0; ch < c; ++ch)
                             for (int oy = 0; oy < out_h; ++oy) {
                                 const int y0 = ay.lo[static_cast<std::size_t>(oy)];
                                 const int y1 = ay.hi[static_cast<std::size_t>(oy)];
                                 const double fy = ay.frac[static_cast<std::size_t>(oy)];
                                 for (int ox = 0; ox < out_w; ++ox) {
                                     const int x0 = ax.lo[static_cast<std::size_t>(ox)];
                                     const int x1 = ax.hi[static_cast<std::size_t>(ox)];
                                     const double fx = ax.frac[static_cast<std::size_t>(ox)];
                                     const double g = up.at(ch, oy, ox);
                                     dx.at(ch, y0, x0) += (1.0 - fy) * (1.0 - fx) * g;
                                     dx.at(ch, y0, x1) += (1.0 - fy) * fx * g;
                                     dx.at(ch, y1, x0) += fy * (1.0 - fx) * g;
                                     dx.at(ch, y1, x1) += fy * fx * g;
                                 }
                             }
                     },
                     "bilinear_resize");
}

ValueId concat_channels(Tape& t, std::span<const ValueId> parts) {
    if (parts.empty()) throw UsageError("concat_channels: no parts");
    const Tensor& first = t.val(parts[0]);
    require_3d(first, "concat_channels");
    const int h = first.dim(1), w = first.dim(2);
    int total_c = 0;
    for (ValueId p : parts) {
        const Tensor& part = t.val(p);
        require_3d(part, "concat_channels");
        if (part.dim(1) != h || part.dim(2) != w)
            throw ShapeError("concat_channels: spatial mismatch: " + first.shape_str() + " vs " +
                             part.shape_str());
        total_c += part.dim(0);
    }
    Tensor out({total_c, h, w});
    std::size_t offset = 0;
    for (ValueId p : parts) {
        const Tensor& part = t.val(p);
        std::copy(part.data.begin(), part.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += part.data.size();
    }
    std::vector<ValueId> ids(parts.begin(), parts.end());
    return t.emplace(std::move(out),
                     [ids](Tape& tp, const Tensor& up, ValueId) {
                         std::size_t offset = 0;
                         for (ValueId p : ids) {
                             Tensor& dp = tp.grad_buf(p);
                             for (std::size_t i = 0; i < dp.data.size(); ++i)
                                 dp.data[i] += up.data[offset + i];
                             offset += dp.data.size();
                         }
                     },
                     "concat_channels");
}

ValueId chw_to_lc(Tape& t, ValueId x) {
    const Tensor& X = t.val(x);
    require_3d(X, "chw_to_lc");
    const int c = X.dim(0), h = X.dim(1), w = X.dim(2);
    const int l = h * w;
    Tensor out({l, c});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < l; ++i) out.at(i, ch) = X.data[static_cast<std::size_t>(ch) * l + i];
    return t.emplace(std::move(out),
                     [x, c, l](Tape& tp, const Tensor& up, ValueId) {
                         Tensor& dx = tp.grad_buf(x);
                         for (int ch = 0; ch < c; ++ch)
                             for (int i = 0; i < l; ++i)
                                 dx.data[static_cast<std::size_t>(ch) * l + i] += up.at(i, ch);
                     },
                     "chw_to_lc");
}

ValueId lc_to_chw(Tape& t, ValueId x, int h, int w) {
    const Tensor& X = t.val(x);
    require_2d(X, "lc_to_chw");
    if (X.dim(0) != h * w)
        throw ShapeError("lc_to_chw: " + X.shape_str() + " does not cover " + std::to_string(h) +
                         "x" + std::to_string(w) + " positions");
    const int l = h * w, c = X.dim(1);
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < l; ++i) out.data[static_cast<std::size_t>(ch) * l + i] = X.at(i, ch);
    return t.emplace(std::move(out),
                     [x, c, l](Tape& tp, const Tensor& up, ValueId) {
                         Tensor& dx = tp.grad_buf(x);
                         for (int ch = 0; ch < c; ++ch)
                             for (int i = 0; i < l; ++i)
                                 dx.at(i, ch) += up.data[static_cast<std::size_t>(ch) * l + i];
                     },
                     "lc_to_chw");
}

ValueId im2col(Tape& t, ValueId x, int window, int stride, int pad) {
    const Tensor& X = t.val(x);
    require_3d(X, "im2col");
    const int c = X.dim(0), h = X.dim(1), w = X.dim(2);
    if (h + 2 * pad < window || w + 2 * pad < window)
        throw ShapeError("im2col: window " + std::to_string(window) + " exceeds padded extent of " +
                         X.shape_str() + " with pad " + std::to_string(pad));
    if (stride < 1) throw ShapeError("im2col: stride must be >= 1");
    const int oh = (h + 2 * pad - window) / stride + 1;
    const int ow = (w + 2 * pad - window) / stride + 1;
    const int cols = c * window * window;
    Tensor out({oh * ow, cols});
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            const int row = oy * ow + ox;
            for (int ch = 0; ch < c; ++ch)
                for (int ky = 0; ky < window; ++ky) {
                    const int sy = oy * stride - pad + ky;
                    for (int kx = 0; kx < window; ++kx) {
                        const int sx = ox * stride - pad + kx;
                        const int col = (ch * window + ky) * window + kx;
                        out.at(row, col) = (sy >= 0 && sy < h && sx >= 0 && sx < w)
                                               ? X.at(ch, sy, sx)
                                               : 0.0;
                    }
                }
        }
    return t.emplace(std::move(out),
                     [x, c, h, w, window, stride, pad, oh, ow](Tape& tp, const Tensor& up, ValueId) {
                         Tensor& dx = tp.grad_buf(x);
                         for (int oy = 0; oy < oh; ++oy)
                             for (int ox = 0; ox < ow; ++ox) {
                                 const int row = oy * ow + ox;
                                 for (int ch = 0; ch < c; ++ch)
                                     for (int ky = 0; ky < window; ++ky) {
                                         const int sy = oy * stride - pad + ky;
                                         if (sy < 0 || sy >= h) continue;
                                         for (int kx = 0; kx < window; ++kx) {
                                             const int sx = ox * stride - pad + kx;
                                             if (sx < 0 || sx >= w) continue;
                                             const int col = (ch * window + ky) * window + kx;
                                             dx.at(ch, sy, sx) += up.at(row, col);
                                         }
                                     }
                             }
                     },
                     "im2col");
}

// ---------------------------------------------------------------------------
// Matrix helpers for attention heads
// ---------------------------------------------------------------------------

ValueId slice_cols(Tape& t, ValueId x, int col0, int ncols) {
    const Tensor& X = t.val(x);
    require_2d(X, "slice_cols");
    if (col0 < 0 || ncols < 1 || col0 + ncols > X.dim(1))
        throw ShapeError("slice_cols: columns [" + std::to_string(col0) + ", " +
                         std::to_string(col0 + ncols) + ") out of " + X.shape_str());
    const int m = X.dim(0);
    Tensor out({m, ncols});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < ncols; ++j) out.at(i, j) = X.at(i, col0 + j);
    return t.emplace(std::move(out),
                     [x, col0, ncols, m](Tape& tp, const Tensor& up, ValueId) {
                         Tensor& dx = tp.grad_buf(x);
                         for (int i = 0; i < m; ++i)
                             for (int j = 0; j < ncols; ++j) dx.at(i, col0 + j) += up.at(i, j);
                     },
                     "slice_cols");
}

ValueId concat_cols(Tape& t, std::span<const ValueId> parts) {
    if (parts.empty()) throw UsageError("concat_cols: no parts");
    const int m = t.val(parts[0]).dim(0);
    int total = 0;
    for (ValueId p : parts) {
        const Tensor& part = t.val(p);
        require_2d(part, "concat_cols");
        if (part.dim(0) != m)
            throw ShapeError("concat_cols: row mismatch: " + t.val(parts[0]).shape_str() + " vs " +
                             part.shape_str());
        total += part.dim(1);
    }
    Tensor out({m, total});
    int off = 0;
    for (ValueId p : parts) {
        const Tensor& part = t.val(p);
        const int n = part.dim(1);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out.at(i, off + j) = part.at(i, j);
        off += n;
    }
    std::vector<ValueId> ids(parts.begin(), parts.end());
    return t.emplace(std::move(out),
                     [ids, m](Tape& tp, const Tensor& up, ValueId) {
                         int off = 0;
                         for (ValueId p : ids) {
                             Tensor& dp = tp.grad_buf(p);
                             const int n = dp.dim(1);
                             for (int i = 0; i < m; ++i)
                                 for (int j = 0; j < n; ++j) dp.at(i, j) += up.at(i, off + j);
                             off += n;
                         }
                     },
                     "concat_cols");
}

ValueId diag(Tape& t, ValueId x) {
    const Tensor& X = t.val(x);
    require_2d(X, "diag");
    if (X.dim(0) != X.dim(1))
        throw ShapeError("diag: matrix must be square, got " + X.shape_str());
    const int l = X.dim(0);
    Tensor out({l});
    for (int i = 0; i < l; ++i) out.at(i) = X.at(i, i);
    return t.emplace(std::move(out),
                     [x, l](Tape& tp, const Tensor& up, ValueId) {
                         Tensor& dx = tp.grad_buf(x);
                         for (int i = 0; i < l; ++i) dx.at(i, i) += up.at(i);
                     },
                     "diag");
}

ValueId reshape(Tape& t, ValueId x, std::vector<int> shape) {
    const Tensor& X = t.val(x);
    Tensor out(shape, X.data);
    return t.emplace(std::move(out),
                     [x](Tape& tp, const Tensor& up, ValueId) {
                         Tensor& dx = tp.grad_buf(x);
                         for (std::size_t i = 0; i < up.data.size(); ++i) dx.data[i] += up.data[i];
                     },
                     "reshape");
}

ValueId clamp01(Tape& t, ValueId x) {
    const Tensor& X = t.val(x);
    Tensor out(X.shape);
    for (std::size_t i = 0; i < X.data.size(); ++i) out.data[i] = std::clamp(X.data[i], 0.0, 1.0);
    return t.emplace(std::move(out),
                     [x](Tape& tp, const Tensor& up, ValueId) {
                         const Tensor& X2 = tp.val(x);
                         Tensor& dx = tp.grad_buf(x);
                         for (std::size_t i = 0; i < up.data.size(); ++i)
                             if (X2.data[i] > 0.0 && X2.data[i] < 1.0) dx.data[i] += up.data[i];
                     },
                     "clamp01");
}

}  // namespace navseg
