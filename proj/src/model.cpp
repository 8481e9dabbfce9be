#include "navseg/model.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "navseg/errors.hpp"
#include "navseg/gtsr.hpp"

namespace navseg {

Model Model::init(const ModelConfig& cfg) {
    cfg.head.validate();
    Model m;
    m.cfg = cfg;
    m.backbone = BackboneParams::init(cfg.seed);
    m.head = HeadParams::init(cfg.head, kBackboneChannelSum, cfg.seed + 1);
    m.aux = AuxParams::init(m.backbone.stages[1].out_channels, cfg.aux_hidden, cfg.head.groups,
                            cfg.seed + 2);
    return m;
}

namespace {

template <typename ModelT, typename TensorPtr>
std::vector<std::pair<std::string, TensorPtr>> enumerate(ModelT& m) {
    std::vector<std::pair<std::string, TensorPtr>> out;
    for (int i = 0; i < 4; ++i) {
        const std::string stage = "backbone.stage" + std::to_string(i + 1);
        out.emplace_back(stage + ".weight", &m.backbone.weight[static_cast<std::size_t>(i)]);
        out.emplace_back(stage + ".bias", &m.backbone.bias[static_cast<std::size_t>(i)]);
    }
    out.emplace_back("head.in.weight", &m.head.in_w);
    out.emplace_back("head.in.bias", &m.head.in_b);
    out.emplace_back("head.query.weight", &m.head.q_w);
    out.emplace_back("head.query.bias", &m.head.q_b);
    out.emplace_back("head.key.weight", &m.head.k_w);
    out.emplace_back("head.key.bias", &m.head.k_b);
    out.emplace_back("head.value.weight", &m.head.v_w);
    out.emplace_back("head.value.bias", &m.head.v_b);
    out.emplace_back("head.out.weight", &m.head.out_w);
    out.emplace_back("head.out.bias", &m.head.out_b);
    out.emplace_back("head.cls1.weight", &m.head.cls1_w);
    out.emplace_back("head.cls1.bias", &m.head.cls1_b);
    out.emplace_back("head.cls2.weight", &m.head.cls2_w);
    out.emplace_back("head.cls2.bias", &m.head.cls2_b);
    out.emplace_back("aux.fc1.weight", &m.aux.w1);
    out.emplace_back("aux.fc1.bias", &m.aux.b1);
    out.emplace_back("aux.fc2.weight", &m.aux.w2);
    out.emplace_back("aux.fc2.bias", &m.aux.b2);
    return out;
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> Model::named_tensors() {
    return enumerate<Model, Tensor*>(*this);
}

std::vector<std::pair<std::string, const Tensor*>> Model::named_tensors() const {
    return enumerate<const Model, const Tensor*>(*this);
}

BoundModel bind(Tape& t, const Model& m) {
    BoundModel bm;
    // Binding order must match named_tensors(); both walk backbone, head, aux.
    bm.backbone = bind(t, m.backbone);
    bm.head = bind(t, m.head);
    bm.aux = bind(t, m.aux);
    for (int i = 0; i < 4; ++i) {
        bm.all.push_back(bm.backbone.weight[static_cast<std::size_t>(i)]);
        bm.all.push_back(bm.backbone.bias[static_cast<std::size_t>(i)]);
    }
    for (ValueId id : {bm.head.in_w, bm.head.in_b, bm.head.q_w, bm.head.q_b, bm.head.k_w,
                       bm.head.k_b, bm.head.v_w, bm.head.v_b, bm.head.out_w, bm.head.out_b,
                       bm.head.cls1_w, bm.head.cls1_b, bm.head.cls2_w, bm.head.cls2_b})
        bm.all.push_back(id);
    for (ValueId id : {bm.aux.w1, bm.aux.b1, bm.aux.w2, bm.aux.b2}) bm.all.push_back(id);
    return bm;
}

ModelOutputs model_forward(Tape& t, ValueId image, const BoundModel& bm, const Model& m,
                           bool train_mode) {
    const Tensor& img = t.val(image);
    const int h = img.dim(1), w = img.dim(2);
    HeadConfig cfg = m.cfg.head;
    cfg.train_mode = train_mode;

    ModelOutputs out;
    out.features = backbone_forward(t, image, bm.backbone, m.backbone);
    const ValueId aligned = spatial_align(t, out.features, cfg.reduction, h, w);
    FuseResult fused = mhsa_fuse(t, aligned, bm.head, cfg, h, w);
    out.probs = predict(t, fused.fused, bm.head, cfg, h, w);
    out.diag_maps = std::move(fused.diag_maps);
    return out;
}

LabelMap argmax_channels(const Tensor& probs) {
    if (probs.ndim() != 3) throw ShapeError("argmax_channels: expected [GxHxW], got " + probs.shape_str());
    const int g = probs.dim(0), h = probs.dim(1), w = probs.dim(2);
    LabelMap out(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            int best = 0;
            double best_v = probs.at(0, y, x);
            for (int c = 1; c < g; ++c)
                if (probs.at(c, y, x) > best_v) {
                    best_v = probs.at(c, y, x);
                    best = c;
                }
            out.at(y, x) = static_cast<std::uint8_t>(best);
        }
    return out;
}

LabelMap infer_labels(const Model& m, const Tensor& image, Tensor* probs_out) {
    Tape t;
    const ValueId img = t.input(image);
    const BoundModel bm = bind(t, m);
    const ModelOutputs out = model_forward(t, img, bm, m, /*train_mode=*/false);
    const Tensor& probs = t.val(out.probs);
    if (probs_out) *probs_out = probs;
    return argmax_channels(probs);
}

void save_checkpoint(const std::string& dir, const Model& m) {
    std::filesystem::create_directories(dir);
    nlohmann::json tensors = nlohmann::json::object();
    for (const auto& [name, tensor] : m.named_tensors()) {
        write_gtsr(dir + "/" + name + ".gtsr", *tensor);
        tensors[name] = tensor->shape;
    }
    nlohmann::json stages = nlohmann::json::array();
    for (const PatchStage& s : m.backbone.stages)
        stages.push_back({{"window", s.window},
                          {"stride", s.stride},
                          {"pad", s.pad},
                          {"in_channels", s.in_channels},
                          {"out_channels", s.out_channels}});
    const nlohmann::json manifest{
        {"format", "navseg-checkpoint-1"},
        {"seed", m.cfg.seed},
        {"head",
         {{"groups", m.cfg.head.groups},
          {"reduction", m.cfg.head.reduction},
          {"head_width", m.cfg.head.head_width},
          {"fused_channels", m.cfg.head.fused_channels},
          {"scaled_scores", m.cfg.head.scaled_scores}}},
        {"aux_hidden", m.cfg.aux_hidden},
        {"backbone", {{"stages", stages}}},
        {"tensors", tensors}};
    const std::string tmp = dir + "/manifest.json.tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw IoError("cannot write " + tmp);
        os << manifest.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, dir + "/manifest.json");
}

Model load_checkpoint(const std::string& dir) {
    std::ifstream is(dir + "/manifest.json");
    if (!is) throw IoError("cannot open " + dir + "/manifest.json");
    nlohmann::json manifest;
    try {
        is >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(dir + "/manifest.json: invalid JSON: " + e.what());
    }
    if (manifest.value("format", "") != "navseg-checkpoint-1")
        throw ConfigError(dir + ": unknown checkpoint format");

    ModelConfig cfg;
    const auto& head = manifest.at("head");
    cfg.head.groups = head.at("groups").get<int>();
    cfg.head.reduction = head.at("reduction").get<int>();
    cfg.head.head_width = head.at("head_width").get<int>();
    cfg.head.fused_channels = head.at("fused_channels").get<int>();
    cfg.head.scaled_scores = head.value("scaled_scores", true);
    cfg.aux_hidden = manifest.value("aux_hidden", 64);
    cfg.seed = manifest.value("seed", 1);

    Model m = Model::init(cfg);
    for (auto& [name, tensor] : m.named_tensors()) {
        Tensor loaded = read_gtsr(dir + "/" + name + ".gtsr");
        if (!loaded.same_shape(*tensor))
            throw DataError(dir + "/" + name + ".gtsr: shape " + loaded.shape_str() +
                            " does not match model " + tensor->shape_str());
        *tensor = std::move(loaded);
    }
    return m;
}

}  // namespace navseg
