#include "navseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "navseg/errors.hpp"
#include "navseg/grouping.hpp"
#include "navseg/metrics.hpp"
#include "navseg/synth.hpp"

namespace navseg {

void TrainConfig::validate() const {
    if (base_lr <= 0.0) throw ConfigError("train: base_lr must be > 0");
    if (poly_power <= 0.0) throw ConfigError("train: poly_power must be > 0");
    if (max_iters < 0) throw ConfigError("train: max_iters must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0,1)");
    if (dataset_size < 1) throw ConfigError("train: dataset_size must be >= 1");
    if (crop_h > image_h || crop_w > image_w)
        throw ConfigError("train: crop exceeds image size");
    if (crop_h % 32 != 0 || crop_w % 32 != 0)
        throw ConfigError("train: crop sides must be divisible by 32");
    if (dynamic.enabled) {
        if (dynamic.momentum < 0.0 || dynamic.momentum > 1.0)
            throw ConfigError("train: dynamic weighting momentum outside [0,1]");
        if (dynamic.interval_epochs < 1)
            throw ConfigError("train: dynamic weighting interval must be >= 1 epochs");
    }
    head.validate();
    loss.validate(head.groups);
}

TrainConfig parse_train_config(const nlohmann::json& j) {
    TrainConfig c;
    c.base_lr = j.value("base_lr", c.base_lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.poly_power = j.value("poly_power", c.poly_power);
    c.momentum = j.value("momentum", c.momentum);
    c.max_iters = j.value("max_iters", c.max_iters);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("crop")) {
        c.crop_h = j["crop"][0].get<int>();
        c.crop_w = j["crop"][1].get<int>();
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("image_size")) {
        c.image_h = j["image_size"][0].get<int>();
        c.image_w = j["image_size"][1].get<int>();
        if (!j.contains("crop")) {
            c.crop_h = c.image_h;
            c.crop_w = c.image_w;
        }
    }
    c.dataset_size = j.value("dataset_size", c.dataset_size);
    c.hflip = j.value("hflip", c.hflip);
    if (j.contains("loss")) {
        const auto& l = j["loss"];
        c.loss.lambda_ga = l.value("lambda_ga", c.loss.lambda_ga);
        c.loss.lambda_aux = l.value("lambda_aux", c.loss.lambda_aux);
        c.loss.class_weights = l.value("class_weights", std::vector<double>{});
        c.full_bce = l.value("full_bce", c.full_bce);
    }
    if (j.contains("dynamic_weighting")) {
        const auto& d = j["dynamic_weighting"];
        c.dynamic.enabled = d.value("enabled", false);
        c.dynamic.momentum = d.value("momentum", c.dynamic.momentum);
        c.dynamic.interval_epochs = d.value("interval_epochs", c.dynamic.interval_epochs);
        c.dynamic.init_weights = d.value("init_weights", std::vector<double>{});
    }
    if (j.contains("head")) {
        const auto& h = j["head"];
        c.head.groups = h.value("groups", c.head.groups);
        c.head.reduction = h.value("reduction", c.head.reduction);
        c.head.head_width = h.value("head_width", c.head.head_width);
        c.head.fused_channels = h.value("fused_channels", c.head.fused_channels);
        c.head.scaled_scores = h.value("scaled_scores", c.head.scaled_scores);
    }
    c.aux_hidden = j.value("aux_hidden", c.aux_hidden);
    c.validate();
    return c;
}

nlohmann::json train_config_json(const TrainConfig& c) {
    return nlohmann::json{
        {"base_lr", c.base_lr},
        {"weight_decay", c.weight_decay},
        {"poly_power", c.poly_power},
        {"momentum", c.momentum},
        {"max_iters", c.max_iters},
        {"batch_size", c.batch_size},
        {"crop", {c.crop_h, c.crop_w}},
        {"seed", c.seed},
        {"image_size", {c.image_h, c.image_w}},
        {"dataset_size", c.dataset_size},
        {"hflip", c.hflip},
        {"loss",
         {{"lambda_ga", c.loss.lambda_ga},
          {"lambda_aux", c.loss.lambda_aux},
          {"class_weights", c.loss.class_weights},
          {"full_bce", c.full_bce}}},
        {"dynamic_weighting",
         {{"enabled", c.dynamic.enabled},
          {"momentum", c.dynamic.momentum},
          {"interval_epochs", c.dynamic.interval_epochs},
          {"init_weights", c.dynamic.init_weights}}},
        {"head",
         {{"groups", c.head.groups},
          {"reduction", c.head.reduction},
          {"head_width", c.head.head_width},
          {"fused_channels", c.head.fused_channels},
          {"scaled_scores", c.head.scaled_scores}}},
        {"aux_hidden", c.aux_hidden}};
}

double poly_lr(int iter, int max_iters, double base_lr, double power) {
    if (iter < 0 || iter > max_iters)
        throw UsageError("poly_lr: iteration " + std::to_string(iter) + " outside [0," +
                         std::to_string(max_iters) + "]");
    return base_lr * std::pow(1.0 - static_cast<double>(iter) / static_cast<double>(max_iters), power);
}

void sgd_step(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum,
              double weight_decay) {
    if (!param.same_shape(grad) || !param.same_shape(velocity))
        throw ShapeError("sgd_step: parameter " + param.shape_str() + ", gradient " +
                         grad.shape_str() + ", velocity " + velocity.shape_str());
    for (std::size_t i = 0; i < param.data.size(); ++i) {
        velocity.data[i] = momentum * velocity.data[i] + grad.data[i] + weight_decay * param.data[i];
        param.data[i] -= lr * velocity.data[i];
    }
}

namespace {

SynthSample augment(const SynthSample& in, int crop_h, int crop_w, bool hflip,
                    std::mt19937_64& rng) {
    const int h = in.labels.rows, w = in.labels.cols;
    int oy = 0, ox = 0;
    if (crop_h < h) oy = std::uniform_int_distribution<int>(0, h - crop_h)(rng);
    if (crop_w < w) ox = std::uniform_int_distribution<int>(0, w - crop_w)(rng);
    const bool flip = hflip && std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    if (oy == 0 && ox == 0 && crop_h == h && crop_w == w && !flip) return in;

    SynthSample out;
    out.image = Tensor({3, crop_h, crop_w});
    out.labels = LabelMap(crop_h, crop_w);
    for (int y = 0; y < crop_h; ++y)
        for (int x = 0; x < crop_w; ++x) {
            const int sx = flip ? ox + crop_w - 1 - x : ox + x;
            out.labels.at(y, x) = in.labels.at(oy + y, sx);
            for (int c = 0; c < 3; ++c) out.image.at(c, y, x) = in.image.at(c, oy + y, sx);
        }
    return out;
}

}  // namespace

TrainResult train_toy(const TrainConfig& cfg) {
    cfg.validate();
    const int groups = cfg.head.groups;
    const std::vector<SynthSample> dataset =
        make_synth_dataset(cfg.seed, cfg.dataset_size, cfg.image_h, cfg.image_w, groups);

    ModelConfig mc;
    mc.head = cfg.head;
    mc.aux_hidden = cfg.aux_hidden;
    mc.seed = cfg.seed;
    TrainResult result{.history = {}, .model = Model::init(mc)};
    if (cfg.max_iters == 0) return result;

    auto named = result.model.named_tensors();
    std::vector<Tensor> velocity;
    velocity.reserve(named.size());
    for (auto& [name, tensor] : named) velocity.emplace_back(tensor->shape, 0.0);

    std::vector<double> class_weights = cfg.loss.class_weights;
    if (class_weights.empty()) class_weights.assign(static_cast<std::size_t>(groups), 1.0);
    std::vector<double> dyn_init = cfg.dynamic.init_weights;
    if (dyn_init.empty()) dyn_init.assign(static_cast<std::size_t>(groups), 1.0);
    if (cfg.dynamic.enabled) class_weights = dyn_init;

    auto aug_rng = make_rng(cfg.seed ^ 0x517cc1b727220a95ULL);
    const int iters_per_epoch = (cfg.dataset_size + cfg.batch_size - 1) / cfg.batch_size;
    ConfusionMatrix epoch_cm(groups);
    ConfusionMatrix window_cm(groups);  // dynamic weighting window
    int epochs_done = 0;

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        const double lr = poly_lr(iter, cfg.max_iters, cfg.base_lr, cfg.poly_power);
        std::vector<Tensor> grads;
        grads.reserve(named.size());
        for (auto& [name, tensor] : named) grads.emplace_back(tensor->shape, 0.0);

        TrainRecord rec;
        rec.iter = iter;
        rec.lr = lr;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const std::size_t idx =
                (static_cast<std::size_t>(iter) * cfg.batch_size + b) % dataset.size();
            const SynthSample sample =
                augment(dataset[idx], cfg.crop_h, cfg.crop_w, cfg.hflip, aug_rng);

            Tape t;
            const ValueId img = t.input(sample.image);
            const BoundModel bm = bind(t, result.model);
            const ModelOutputs out = model_forward(t, img, bm, result.model, /*train_mode=*/true);

            const std::vector<LabelMap> masks = binary_masks(sample.labels, groups);
            const ValueId ce = ce_loss(t, out.probs, sample.labels, class_weights);
            std::vector<ValueId> ga;
            ga.reserve(static_cast<std::size_t>(groups));
            for (int g = 0; g < groups; ++g)
                ga.push_back(ga_loss(t, out.diag_maps[static_cast<std::size_t>(g)],
                                     masks[static_cast<std::size_t>(g)], cfg.full_bce));
            const ValueId aux =
                aux_loss(t, out.features[1], bm.aux, sample.labels, class_weights);
            LossWeights lw = cfg.loss;
            const ValueId total = total_loss(t, ce, ga, aux, lw);

            const double value = t.val(total).data[0];
            if (!std::isfinite(value))
                throw DataError("training diverged at iteration " + std::to_string(iter) +
                                ": total loss is not finite");
            rec.total += value / cfg.batch_size;
            rec.ce += t.val(ce).data[0] / cfg.batch_size;
            for (ValueId g : ga) rec.ga += t.val(g).data[0] / cfg.batch_size;
            rec.aux += t.val(aux).data[0] / cfg.batch_size;

            const LabelMap pred = argmax_channels(t.val(out.probs));
            epoch_cm.accumulate(pred, sample.labels);
            if (cfg.dynamic.enabled) window_cm.accumulate(pred, sample.labels);

            t.backward(total, 1.0 / cfg.batch_size);
            for (std::size_t p = 0; p < named.size(); ++p)
                if (t.has_grad(bm.all[p])) {
                    const Tensor& g = t.grad(bm.all[p]);
                    Tensor& acc = grads[p];
                    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += g.data[i];
                }
        }

        for (std::size_t p = 0; p < named.size(); ++p)
            sgd_step(*named[p].second, grads[p], velocity[p], lr, cfg.momentum, cfg.weight_decay);

        rec.train_miou = epoch_cm.miou();
        result.history.push_back(rec);

        if ((iter + 1) % iters_per_epoch == 0) {
            ++epochs_done;
            epoch_cm = ConfusionMatrix(groups);
            if (cfg.dynamic.enabled && epochs_done % cfg.dynamic.interval_epochs == 0) {
                std::vector<double> error(static_cast<std::size_t>(groups), 0.0);
                for (int g = 0; g < groups; ++g) {
                    const auto gt = window_cm.gt_count(g);
                    if (gt > 0)
                        error[static_cast<std::size_t>(g)] =
                            1.0 - static_cast<double>(window_cm.at(g, g)) / static_cast<double>(gt);
                }
                class_weights =
                    dynamic_weight_update(class_weights, dyn_init, error, cfg.dynamic.momentum);
                window_cm = ConfusionMatrix(groups);
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

double grad_rel_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
    return std::abs(analytic - numeric) / denom;
}

std::vector<std::string> GradCheckReport::offenders(double threshold) const {
    std::vector<std::string> out;
    for (const GradCheckEntry& e : entries)
        if (e.max_rel_err >= threshold) out.push_back(e.name);
    return out;
}

void GradCheckReport::absorb(const GradCheckReport& other) {
    entries.insert(entries.end(), other.entries.begin(), other.entries.end());
    max_rel_err = std::max(max_rel_err, other.max_rel_err);
}

namespace {

std::vector<std::size_t> sample_coords(std::size_t numel, int max_coords, std::mt19937_64& rng) {
    std::vector<std::size_t> idx(numel);
    std::iota(idx.begin(), idx.end(), 0);
    if (static_cast<std::size_t>(max_coords) >= numel) return idx;
    for (int i = 0; i < max_coords; ++i) {
        const std::size_t j =
            i + std::uniform_int_distribution<std::size_t>(0, numel - 1 - i)(rng);
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(max_coords));
    return idx;
}

}  // namespace

GradCheckEntry fd_check(const std::string& name, std::vector<Tensor> inputs,
                        const LossBuilder& builder, double eps, int max_coords,
                        std::mt19937_64& rng) {
    auto eval = [&](const std::vector<Tensor>& vals) {
        Tape t;
        std::vector<ValueId> ids;
        ids.reserve(vals.size());
        for (const Tensor& v : vals) ids.push_back(t.input(v));
        return std::pair<Tape, std::vector<ValueId>>{std::move(t), std::move(ids)};
    };

    // Analytic gradients from one recorded pass.
    auto [tape, ids] = eval(inputs);
    const ValueId loss = builder(tape, ids);
    tape.backward(loss);
    std::vector<Tensor> analytic;
    analytic.reserve(inputs.size());
    for (ValueId id : ids)
        analytic.push_back(tape.has_grad(id) ? tape.grad(id) : Tensor(tape.val(id).shape, 0.0));

    GradCheckEntry entry{name, 0.0, 0};
    for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
        for (std::size_t ci : sample_coords(inputs[ti].numel(), max_coords, rng)) {
            const double saved = inputs[ti].data[ci];
            inputs[ti].data[ci] = saved + eps;
            auto [tp, ip] = eval(inputs);
            const double fplus = tp.val(builder(tp, ip)).data[0];
            inputs[ti].data[ci] = saved - eps;
            auto [tm, im] = eval(inputs);
            const double fminus = tm.val(builder(tm, im)).data[0];
            inputs[ti].data[ci] = saved;
            const double numeric = (fplus - fminus) / (2.0 * eps);
            entry.max_rel_err =
                std::max(entry.max_rel_err, grad_rel_error(analytic[ti].data[ci], numeric));
            ++entry.checked;
        }
    }
    return entry;
}

GradCheckReport gradcheck_ops(std::uint64_t seed, double eps) {
    auto rng = make_rng(seed);
    auto rnd = [&rng](std::vector<int> shape) {
        return uniform_tensor(std::move(shape), -1.0, 1.0, rng);
    };

    GradCheckReport report;
    auto run = [&](const std::string& name, std::vector<Tensor> inputs, const LossBuilder& b) {
        GradCheckEntry e = fd_check(name, std::move(inputs), b, eps, 96, rng);
        report.max_rel_err = std::max(report.max_rel_err, e.max_rel_err);
        report.entries.push_back(std::move(e));
    };

    {
        Tensor a = rnd({4, 6}), b = rnd({6, 5});
        Tensor c = rnd({4, 5});
        run("op.matmul", {a, b}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, matmul(t, in[0], in[1]), c);
        });
    }
    {
        Tensor a = rnd({5, 3}), b = rnd({4, 3});
        Tensor c = rnd({5, 4});
        run("op.matmul_nt", {a, b}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, matmul_nt(t, in[0], in[1]), c);
        });
    }
    {
        Tensor x = rnd({5, 4}), w = rnd({4, 3}), b = rnd({3});
        Tensor c = rnd({5, 3});
        run("op.linear", {x, w, b}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, linear(t, in[0], in[1], in[2]), c);
        });
    }
    {
        Tensor x = rnd({6, 7});
        Tensor c = rnd({6, 7});
        run("op.softmax_rows", {x}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, softmax_rows(t, in[0]), c);
        });
    }
    {
        Tensor x = rnd({3, 8});
        Tensor c = rnd({3, 8});
        run("op.gelu", {x}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, gelu(t, in[0]), c);
        });
    }
    {
        Tensor x = rnd({2, 5, 7});
        Tensor c = rnd({2, 8, 6});
        run("op.bilinear_resize.up", {x}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, bilinear_resize(t, in[0], 8, 6), c);
        });
    }
    {
        Tensor x = rnd({2, 6, 8});
        Tensor c = rnd({2, 3, 4});
        run("op.bilinear_resize.down", {x}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, bilinear_resize(t, in[0], 3, 4), c);
        });
    }
    {
        Tensor a = rnd({2, 4, 5}), b = rnd({3, 4, 5}), cpart = rnd({1, 4, 5});
        Tensor c = rnd({6, 4, 5});
        run("op.concat_channels", {a, b, cpart}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, concat_channels(t, in), c);
        });
    }
    {
        Tensor x = rnd({3, 4, 5});
        Tensor c = rnd({20, 3});
        run("op.chw_to_lc", {x}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, chw_to_lc(t, in[0]), c);
        });
    }
    {
        Tensor x = rnd({20, 3});
        Tensor c = rnd({3, 4, 5});
        run("op.lc_to_chw", {x}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, lc_to_chw(t, in[0], 4, 5), c);
        });
    }
    {
        Tensor x = rnd({2, 6, 7});
        Tensor c = rnd({12, 2 * 3 * 3});
        run("op.im2col", {x}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, im2col(t, in[0], 3, 2, 1), c);
        });
    }
    {
        Tensor x = rnd({1, 6, 6});
        Tensor c = rnd({9, 4});
        run("op.im2col.nopad", {x}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, im2col(t, in[0], 2, 2, 0), c);
        });
    }
    {
        Tensor x = rnd({6, 8});
        Tensor c = rnd({6, 3});
        run("op.slice_cols", {x}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, slice_cols(t, in[0], 2, 3), c);
        });
    }
    {
        Tensor a = rnd({5, 2}), b = rnd({5, 3});
        Tensor c = rnd({5, 5});
        run("op.concat_cols", {a, b}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, concat_cols(t, in), c);
        });
    }
    {
        Tensor x = rnd({6, 6});
        Tensor c = rnd({6});
        run("op.diag", {x}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, diag(t, in[0]), c);
        });
    }
    {
        Tensor a = rnd({4, 5}), b = rnd({4, 5});
        Tensor c = rnd({4, 5});
        run("op.add_scale", {a, b}, [c](Tape& t, const std::vector<ValueId>& in) {
            return weighted_sum(t, scale(t, add(t, in[0], in[1]), 0.7), c);
        });
    }
    {
        Tensor x = rnd({3, 4});
        run("op.sum", {x}, [](Tape& t, const std::vector<ValueId>& in) { return sum(t, in[0]); });
    }
    {
        Tensor a = rnd({2, 2}), b = rnd({2, 2}), c = rnd({2, 2});
        run("op.affine", {a, b, c}, [](Tape& t, const std::vector<ValueId>& in) {
            const std::array<ValueId, 3> terms{sum(t, in[0]), sum(t, in[1]), sum(t, in[2])};
            const std::array<double, 3> coeffs{1.0, 0.5, -0.25};
            return affine(t, terms, coeffs, 0.125);
        });
    }
    {
        Tensor x = rnd({2, 5, 5});
        Tensor c = rnd({2, 5, 5});
        run("op.reshape_clamp", {x}, [c](Tape& t, const std::vector<ValueId>& in) {
            const ValueId soft = lc_to_chw(t, softmax_rows(t, chw_to_lc(t, in[0])), 5, 5);
            return weighted_sum(t, reshape(t, clamp01(t, soft), {2, 5, 5}), c);
        });
    }
    {
        // Cross-entropy through a per-pixel softmax.
        Tensor x = rnd({3, 4, 4});
        LabelMap labels(4, 4);
        std::uniform_int_distribution<int> lab(0, 2);
        for (auto& v : labels.data) v = static_cast<std::uint8_t>(lab(rng));
        labels.at(0, 0) = kIgnoreLabel;
        std::vector<double> weights{1.0, 0.5, 2.0};
        run("op.ce_loss", {x}, [labels, weights](Tape& t, const std::vector<ValueId>& in) {
            const ValueId probs = lc_to_chw(t, softmax_rows(t, chw_to_lc(t, in[0])), 4, 4);
            return ce_loss(t, probs, labels, weights);
        });
    }
    {
        // Attention-guidance loss through a softmaxed diagonal.
        Tensor x = rnd({6, 6});
        LabelMap mask(2, 3);
        std::uniform_int_distribution<int> bit(0, 1);
        for (auto& v : mask.data) v = static_cast<std::uint8_t>(bit(rng));
        mask.at(0, 0) = 1;  // keep the mask non-empty
        for (bool full : {false, true}) {
            run(full ? "op.ga_loss.full" : "op.ga_loss", {x},
                [mask, full](Tape& t, const std::vector<ValueId>& in) {
                    const ValueId s = softmax_rows(t, in[0]);
                    const ValueId d = reshape(t, diag(t, s), {2, 3});
                    return ga_loss(t, d, mask, full);
                });
        }
    }
    return report;
}

GradCheckReport gradcheck_model(const GradCheckOptions& opt) {
    ModelConfig mc;
    mc.head = opt.head;
    mc.aux_hidden = opt.aux_hidden;
    mc.seed = opt.seed;
    Model model = Model::init(mc);
    const int groups = mc.head.groups;

    const std::vector<SynthSample> data =
        make_synth_dataset(opt.seed + 1, 1, opt.h, opt.w, groups);
    const SynthSample& sample = data[0];
    const std::vector<LabelMap> masks = binary_masks(sample.labels, groups);
    LossWeights lw;
    lw.lambda_ga = opt.lambda_ga;
    lw.lambda_aux = opt.lambda_aux;

    struct Pass {
        Tape tape;
        ValueId loss;
        std::vector<ValueId> params;
        ValueId image;
    };
    auto forward = [&](const Tensor& image) {
        Pass p;
        p.image = p.tape.input(image);
        const BoundModel bm = bind(p.tape, model);
        p.params = bm.all;
        const ModelOutputs out = model_forward(p.tape, p.image, bm, model, /*train_mode=*/true);
        const ValueId ce = ce_loss(p.tape, out.probs, sample.labels, {});
        std::vector<ValueId> ga;
        for (int g = 0; g < groups; ++g)
            ga.push_back(ga_loss(p.tape, out.diag_maps[static_cast<std::size_t>(g)],
                                 masks[static_cast<std::size_t>(g)], false));
        const ValueId aux = aux_loss(p.tape, out.features[1], bm.aux, sample.labels, {});
        p.loss = total_loss(p.tape, ce, ga, aux, lw);
        return p;
    };
    auto eval = [&](const Tensor& image) {
        Pass p = forward(image);
        return p.tape.val(p.loss).data[0];
    };

    Pass base = forward(sample.image);
    base.tape.backward(base.loss);

    auto named = model.named_tensors();
    std::vector<Tensor> analytic;
    analytic.reserve(named.size());
    for (std::size_t i = 0; i < named.size(); ++i)
        analytic.push_back(base.tape.has_grad(base.params[i])
                               ? base.tape.grad(base.params[i])
                               : Tensor(named[i].second->shape, 0.0));
    const Tensor image_grad = base.tape.has_grad(base.image)
                                  ? base.tape.grad(base.image)
                                  : Tensor(sample.image.shape, 0.0);

    GradCheckReport report;
    auto rng = make_rng(opt.seed + 2);
    auto check_tensor = [&](const std::string& name, Tensor& storage, const Tensor& grad) {
        GradCheckEntry entry{name, 0.0, 0};
        for (std::size_t ci : sample_coords(storage.numel(), opt.coords_per_tensor, rng)) {
            const double saved = storage.data[ci];
            storage.data[ci] = saved + opt.eps;
            const double fplus = eval(sample.image);
            storage.data[ci] = saved - opt.eps;
            const double fminus = eval(sample.image);
            storage.data[ci] = saved;
            const double numeric = (fplus - fminus) / (2.0 * opt.eps);
            entry.max_rel_err = std::max(entry.max_rel_err, grad_rel_error(grad.data[ci], numeric));
            ++entry.checked;
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
    };

    for (std::size_t i = 0; i < named.size(); ++i)
        check_tensor(named[i].first, *named[i].second, analytic[i]);

    // The input image is a differentiable leaf too.
    Tensor image = sample.image;
    GradCheckEntry entry{"input.image", 0.0, 0};
    for (std::size_t ci : sample_coords(image.numel(), opt.coords_per_tensor, rng)) {
        const double saved = image.data[ci];
        image.data[ci] = saved + opt.eps;
        const double fplus = eval(image);
        image.data[ci] = saved - opt.eps;
        const double fminus = eval(image);
        image.data[ci] = saved;
        const double numeric = (fplus - fminus) / (2.0 * opt.eps);
        entry.max_rel_err = std::max(entry.max_rel_err, grad_rel_error(image_grad.data[ci], numeric));
        ++entry.checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
    return report;
}

}  // namespace navseg
