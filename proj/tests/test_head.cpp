#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "navseg/backbone.hpp"
#include "navseg/errors.hpp"
#include "navseg/head.hpp"
#include "navseg/model.hpp"

using namespace navseg;

namespace {

struct HeadFixture {
    BackboneParams backbone = BackboneParams::init(3);
    HeadConfig cfg;
    HeadParams head;

    explicit HeadFixture(int reduction, int head_width = 8, int groups = 6) {
        cfg.groups = groups;
        cfg.reduction = reduction;
        cfg.head_width = head_width;
        cfg.fused_channels = 32;
        cfg.train_mode = true;
        head = HeadParams::init(cfg, kBackboneChannelSum, 17);
    }
};

Tensor random_image(int h, int w, std::uint64_t seed) {
    auto rng = make_rng(seed);
    return uniform_tensor({3, h, w}, 0.0, 1.0, rng);
}

// Plain-loop reimplementation of the fusion head main path.
Tensor naive_fuse(const Tensor& fused_in, const HeadParams& p, const HeadConfig& cfg) {
    const int c_in = fused_in.dim(0), fh = fused_in.dim(1), fw = fused_in.dim(2);
    const int l = fh * fw, att = cfg.attention_channels(), dh = cfg.head_width;
    const double tau = cfg.scaled_scores ? std::sqrt(static_cast<double>(dh)) : 1.0;
    auto matvec = [](const std::vector<std::vector<double>>& x, const Tensor& w, const Tensor& b) {
        std::vector<std::vector<double>> y(x.size(),
                                           std::vector<double>(static_cast<std::size_t>(w.dim(1))));
        for (std::size_t i = 0; i < x.size(); ++i)
            for (int j = 0; j < w.dim(1); ++j) {
                double acc = b.at(j);
                for (int k = 0; k < w.dim(0); ++k) acc += x[i][static_cast<std::size_t>(k)] * w.at(k, j);
                y[i][static_cast<std::size_t>(j)] = acc;
            }
        return y;
    };
    std::vector<std::vector<double>> tokens(static_cast<std::size_t>(l),
                                            std::vector<double>(static_cast<std::size_t>(c_in)));
    for (int i = 0; i < l; ++i)
        for (int c = 0; c < c_in; ++c)
            tokens[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] =
                fused_in.data[static_cast<std::size_t>(c) * l + i];
    const auto a_in = matvec(tokens, p.in_w, p.in_b);
    const auto q = matvec(a_in, p.q_w, p.q_b);
    const auto k = matvec(a_in, p.k_w, p.k_b);
    const auto v = matvec(a_in, p.v_w, p.v_b);
    std::vector<std::vector<double>> merged(static_cast<std::size_t>(l),
                                            std::vector<double>(static_cast<std::size_t>(att)));
    for (int g = 0; g < cfg.groups; ++g) {
        const int c0 = g * dh;
        for (int i = 0; i < l; ++i) {
            std::vector<double> row(static_cast<std::size_t>(l));
            double mx = -1e300;
            for (int j = 0; j < l; ++j) {
                double dot = 0;
                for (int d = 0; d < dh; ++d)
                    dot += q[static_cast<std::size_t>(i)][static_cast<std::size_t>(c0 + d)] *
                           k[static_cast<std::size_t>(j)][static_cast<std::size_t>(c0 + d)];
                row[static_cast<std::size_t>(j)] = dot / tau;
                mx = std::max(mx, row[static_cast<std::size_t>(j)]);
            }
            double z = 0;
            for (double& s : row) {
                s = std::exp(s - mx);
                z += s;
            }
            for (double& s : row) s /= z;
            for (int d = 0; d < dh; ++d) {
                double acc = 0;
                for (int j = 0; j < l; ++j)
                    acc += row[static_cast<std::size_t>(j)] *
                           v[static_cast<std::size_t>(j)][static_cast<std::size_t>(c0 + d)];
                merged[static_cast<std::size_t>(i)][static_cast<std::size_t>(c0 + d)] = acc;
            }
        }
    }
    for (int i = 0; i < l; ++i)
        for (int c = 0; c < att; ++c)
            merged[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] +=
                a_in[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    const auto out = matvec(merged, p.out_w, p.out_b);
    Tensor result({cfg.fused_channels, fh, fw});
    for (int c = 0; c < cfg.fused_channels; ++c)
        for (int i = 0; i < l; ++i)
            result.data[static_cast<std::size_t>(c) * l + i] =
                out[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    return result;
}

}  // namespace

TEST_CASE("spatial_align shapes and native-scale pass-through") {
    const HeadFixture fx(8);
    Tape t;
    const auto feats =
        backbone_forward(t, t.input(random_image(64, 64, 5)), bind(t, fx.backbone), fx.backbone);
    const ValueId fused = spatial_align(t, feats, 8, 64, 64);
    REQUIRE(t.val(fused).shape == std::vector<int>{512, 8, 8});
    // At reduction 8 the second scale is already 8x8: its slice must pass
    // through untouched.
    const Tensor& f2 = t.val(feats[1]);
    const Tensor& cat = t.val(fused);
    for (int c = 0; c < 64; ++c)
        for (int i = 0; i < 64; ++i)
            CHECK(cat.data[static_cast<std::size_t>(32 + c) * 64 + i] ==
                  f2.data[static_cast<std::size_t>(c) * 64 + i]);

    const ValueId small = spatial_align(t, feats, 32, 64, 64);
    CHECK(t.val(small).shape == std::vector<int>{512, 2, 2});

    Tape t2;
    std::array<ValueId, 4> fake{};
    for (int i = 0; i < 4; ++i)
        fake[static_cast<std::size_t>(i)] = t2.input(Tensor({4, 5, 5}, 0.0));
    CHECK_THROWS_AS(spatial_align(t2, fake, 16, 40, 40), ConfigError);
}

TEST_CASE("single-token attention is the identity distribution") {
    const HeadFixture fx(32);
    Tape t;
    const Tensor image = random_image(32, 32, 6);
    const auto feats = backbone_forward(t, t.input(image), bind(t, fx.backbone), fx.backbone);
    const ValueId fused = spatial_align(t, feats, 32, 32, 32);
    const FuseResult out = mhsa_fuse(t, fused, bind(t, fx.head), fx.cfg, 32, 32);
    REQUIRE(out.scores.size() == 6);
    for (const ValueId s : out.scores) {
        REQUIRE(t.val(s).shape == std::vector<int>{1, 1});
        CHECK(t.val(s).data[0] == 1.0);
    }
    for (const ValueId b : out.diag_maps)
        for (double v : t.val(b).data) CHECK(v == 1.0);
}

TEST_CASE("attention rows are stochastic") {
    const HeadFixture fx(8);
    Tape t;
    const auto feats =
        backbone_forward(t, t.input(random_image(64, 64, 8)), bind(t, fx.backbone), fx.backbone);
    const FuseResult out =
        mhsa_fuse(t, spatial_align(t, feats, 8, 64, 64), bind(t, fx.head), fx.cfg, 64, 64);
    for (const ValueId sid : out.scores) {
        const Tensor& s = t.val(sid);
        for (int i = 0; i < s.dim(0); ++i) {
            double acc = 0;
            for (int j = 0; j < s.dim(1); ++j) {
                CHECK(s.at(i, j) >= 0.0);
                CHECK(s.at(i, j) <= 1.0);
                acc += s.at(i, j);
            }
            CHECK(std::abs(acc - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("two-token head matches the scalar attention oracle") {
    // d_h = 1, tau = 1: everything reduces to scalar exponentials.
    Tape t;
    const Tensor q({2, 1}, {0.3, -0.7});
    const Tensor k({2, 1}, {1.1, 0.4});
    const Tensor v({2, 1}, {2.0, -1.0});
    const ValueId scores = softmax_rows(t, matmul_nt(t, t.input(q), t.input(k)));
    const ValueId head_out = matmul(t, scores, t.input(v));
    for (int i = 0; i < 2; ++i) {
        const double e1 = std::exp(q.at(i, 0) * k.at(0, 0));
        const double e2 = std::exp(q.at(i, 0) * k.at(1, 0));
        const double s1 = e1 / (e1 + e2), s2 = e2 / (e1 + e2);
        CHECK(t.val(scores).at(i, 0) == doctest::Approx(s1).epsilon(1e-14));
        CHECK(t.val(scores).at(i, 1) == doctest::Approx(s2).epsilon(1e-14));
        CHECK(t.val(head_out).at(i, 0) ==
              doctest::Approx(s1 * v.at(0, 0) + s2 * v.at(1, 0)).epsilon(1e-14));
    }
}

TEST_CASE("fusion head agrees with a naive reimplementation") {
    const HeadFixture fx(16, /*head_width=*/4);
    auto rng = make_rng(21);
    const Tensor fused_in = uniform_tensor({512, 4, 4}, -1.0, 1.0, rng);
    Tape t;
    const FuseResult out = mhsa_fuse(t, t.input(fused_in), bind(t, fx.head), fx.cfg, 64, 64);
    const Tensor reference = naive_fuse(fused_in, fx.head, fx.cfg);
    CHECK(max_abs_diff(t.val(out.fused), reference) < 1e-10);
}

TEST_CASE("diag_to_map constants and bounds") {
    {
        // Uniform attention over a 2x2 bottleneck: every diagonal entry 1/4.
        Tape t;
        const ValueId s = softmax_rows(t, t.input(Tensor({4, 4}, 0.0)));
        const Tensor& b = t.val(diag_to_map(t, s, 64, 64, 32));
        REQUIRE(b.shape == std::vector<int>{64, 64});
        for (double v : b.data) CHECK(v == 0.25);
    }
    {
        auto rng = make_rng(31);
        Tape t;
        const ValueId s = softmax_rows(t, t.input(uniform_tensor({16, 16}, -3, 3, rng)));
        const Tensor& b = t.val(diag_to_map(t, s, 32, 32, 8));
        for (double v : b.data) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    {
        Tape t;
        const ValueId s = t.input(Tensor({5, 5}, 0.2));
        CHECK_THROWS_AS(diag_to_map(t, s, 32, 32, 8), ShapeError);
    }
}

TEST_CASE("predict emits per-pixel distributions") {
    HeadFixture fx(8);
    auto rng = make_rng(41);
    const Tensor fused = uniform_tensor({32, 4, 4}, -1, 1, rng);
    Tape t;
    const Tensor& p = t.val(predict(t, t.input(fused), bind(t, fx.head), fx.cfg, 32, 32));
    REQUIRE(p.shape == std::vector<int>{6, 32, 32});
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            double acc = 0;
            for (int g = 0; g < 6; ++g) acc += p.at(g, y, x);
            CHECK(std::abs(acc - 1.0) <= 1e-9);
        }

    // Zeroed classifier: exactly uniform.
    HeadFixture zero(8);
    zero.head.cls2_w = Tensor({32, 6}, 0.0);
    zero.head.cls2_b = Tensor({6}, 0.0);
    Tape t2;
    const Tensor& u = t2.val(predict(t2, t2.input(fused), bind(t2, zero.head), zero.cfg, 32, 32));
    for (double v : u.data) CHECK(v == doctest::Approx(1.0 / 6).epsilon(1e-14));
}

TEST_CASE("argmax is invariant to a shared logit offset") {
    HeadFixture fx(8);
    auto rng = make_rng(43);
    const Tensor fused = uniform_tensor({32, 4, 4}, -1, 1, rng);
    Tape t;
    const LabelMap a =
        argmax_channels(t.val(predict(t, t.input(fused), bind(t, fx.head), fx.cfg, 32, 32)));
    HeadFixture shifted(8);
    for (double& v : shifted.head.cls2_b.data) v += 3.25;
    Tape t2;
    const LabelMap b = argmax_channels(
        t2.val(predict(t2, t2.input(fused), bind(t2, shifted.head), shifted.cfg, 32, 32)));
    CHECK(a.data == b.data);
}

TEST_CASE("train mode does not perturb the main path") {
    ModelConfig mc;
    mc.head.head_width = 8;
    mc.head.fused_channels = 32;
    mc.seed = 9;
    const Model m = Model::init(mc);
    const Tensor image = random_image(64, 64, 10);

    Tape ta;
    const ModelOutputs with_branch = model_forward(ta, ta.input(image), bind(ta, m), m, true);
    Tape tb;
    const ModelOutputs without = model_forward(tb, tb.input(image), bind(tb, m), m, false);
    CHECK(ta.val(with_branch.probs).data == tb.val(without.probs).data);
    CHECK(without.diag_maps.empty());
    REQUIRE(with_branch.diag_maps.size() == 6);
}

TEST_CASE("permuting group order permutes outputs and diagonal maps") {
    const int dh = 4, groups = 6;
    HeadFixture fx(16, dh);
    auto rng = make_rng(51);
    const Tensor fused_in = uniform_tensor({512, 4, 4}, -1.0, 1.0, rng);
    const std::array<int, 6> perm{3, 0, 5, 1, 4, 2};  // new g reads old perm[g]

    HeadParams permuted = fx.head;
    for (int g = 0; g < groups; ++g)
        for (int j = 0; j < dh; ++j) {
            const int dst = g * dh + j, src = perm[static_cast<std::size_t>(g)] * dh + j;
            for (int r = 0; r < 512; ++r) permuted.in_w.at(r, dst) = fx.head.in_w.at(r, src);
            permuted.in_b.at(dst) = fx.head.in_b.at(src);
            for (int c = 0; c < fx.cfg.fused_channels; ++c)
                permuted.out_w.at(dst, c) = fx.head.out_w.at(src, c);
            permuted.q_b.at(dst) = fx.head.q_b.at(src);
            permuted.k_b.at(dst) = fx.head.k_b.at(src);
            permuted.v_b.at(dst) = fx.head.v_b.at(src);
        }
    for (int gr = 0; gr < groups; ++gr)
        for (int i = 0; i < dh; ++i)
            for (int gc = 0; gc < groups; ++gc)
                for (int j = 0; j < dh; ++j) {
                    const int dr = gr * dh + i, dc = gc * dh + j;
                    const int sr = perm[static_cast<std::size_t>(gr)] * dh + i;
                    const int sc = perm[static_cast<std::size_t>(gc)] * dh + j;
                    permuted.q_w.at(dr, dc) = fx.head.q_w.at(sr, sc);
                    permuted.k_w.at(dr, dc) = fx.head.k_w.at(sr, sc);
                    permuted.v_w.at(dr, dc) = fx.head.v_w.at(sr, sc);
                }

    Tape ta;
    const BoundHead ba = bind(ta, fx.head);
    const FuseResult fa = mhsa_fuse(ta, ta.input(fused_in), ba, fx.cfg, 64, 64);
    const ValueId pa = predict(ta, fa.fused, ba, fx.cfg, 64, 64);

    Tape tb;
    HeadParams cls_permuted = permuted;
    for (int g = 0; g < groups; ++g) {
        for (int c = 0; c < fx.cfg.fused_channels; ++c)
            cls_permuted.cls2_w.at(c, g) = fx.head.cls2_w.at(c, perm[static_cast<std::size_t>(g)]);
        cls_permuted.cls2_b.at(g) = fx.head.cls2_b.at(perm[static_cast<std::size_t>(g)]);
    }
    const BoundHead bb = bind(tb, cls_permuted);
    const FuseResult fb = mhsa_fuse(tb, tb.input(fused_in), bb, fx.cfg, 64, 64);
    const ValueId pb = predict(tb, fb.fused, bb, fx.cfg, 64, 64);

    // Fused features are invariant; output channels and diagonal maps follow
    // the permutation.
    CHECK(max_abs_diff(ta.val(fa.fused), tb.val(fb.fused)) < 1e-12);
    for (int g = 0; g < groups; ++g)
        CHECK(max_abs_diff(ta.val(fa.diag_maps[static_cast<std::size_t>(perm[static_cast<std::size_t>(g)])]),
                           tb.val(fb.diag_maps[static_cast<std::size_t>(g)])) < 1e-12);
    const Tensor& prob_a = ta.val(pa);
    const Tensor& prob_b = tb.val(pb);
    const int hw = 64 * 64;
    for (int g = 0; g < groups; ++g)
        for (int i = 0; i < hw; ++i)
            CHECK(prob_b.data[static_cast<std::size_t>(g) * hw + i] ==
                  doctest::Approx(
                      prob_a.data[static_cast<std::size_t>(perm[static_cast<std::size_t>(g)]) * hw + i])
                      .epsilon(1e-10));
}

TEST_CASE("head_flops ratio, monotonicity and the plug-in value") {
    HeadConfig cfg;
    cfg.groups = 6;
    cfg.head_width = 64;
    FlopCount by_r[3];
    int i = 0;
    for (int r : {8, 16, 32}) {
        cfg.reduction = r;
        by_r[i++] = head_flops(cfg, 64, 64);
    }
    CHECK(by_r[0].attention == 16ULL * by_r[1].attention);
    CHECK(by_r[1].attention == 16ULL * by_r[2].attention);
    CHECK(by_r[0].total() > by_r[1].total());
    CHECK(by_r[1].total() > by_r[2].total());
    // 2 * G * L^2 * d_h with L = (64/8)^2 = 64.
    CHECK(by_r[0].attention == 2ULL * 6 * 64 * 64 * 64);
}
