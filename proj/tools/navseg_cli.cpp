// Command-line surface tying the library into runnable workflows.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "navseg/costmap.hpp"
#include "navseg/errors.hpp"
#include "navseg/grouping.hpp"
#include "navseg/gtsr.hpp"
#include "navseg/metrics.hpp"
#include "navseg/model.hpp"
#include "navseg/netpbm.hpp"
#include "navseg/planner.hpp"
#include "navseg/synth.hpp"
#include "navseg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace navseg;

namespace {

json load_json(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    return j;
}

void write_text(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw IoError("cannot write " + tmp);
        os << text;
    }
    fs::rename(tmp, path);
}

std::pair<int, int> parse_rc(const std::string& s, const char* what) {
    const auto comma = s.find(',');
    if (comma == std::string::npos)
        throw UsageError(std::string(what) + " must be 'row,col', got '" + s + "'");
    try {
        return {std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
    } catch (...) {
        throw UsageError(std::string(what) + " must be 'row,col', got '" + s + "'");
    }
}

// Matched *.pgm basenames across two directories.
std::vector<std::string> paired_pgm_names(const std::string& pred_dir, const std::string& gt_dir) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(pred_dir))
        if (entry.path().extension() == ".pgm") names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw DataError("no .pgm files in " + pred_dir);
    for (const std::string& n : names)
        if (!fs::exists(fs::path(gt_dir) / n)) throw DataError("missing ground truth for " + n);
    return names;
}

Homography load_homography(const std::string& path) {
    const json j = load_json(path);
    if (j.contains("matrix")) {
        const auto v = j["matrix"].get<std::vector<double>>();
        if (v.size() != 9) throw ConfigError(path + ": 'matrix' must hold 9 row-major floats");
        std::array<double, 9> m{};
        std::copy(v.begin(), v.end(), m.begin());
        return Homography::from_matrix(m);
    }
    if (j.contains("pairs")) {
        const auto& pairs = j["pairs"];
        if (!pairs.is_array() || pairs.size() != 4)
            throw ConfigError(path + ": 'pairs' must hold 4 correspondences");
        std::array<PointPair, 4> pp{};
        for (std::size_t i = 0; i < 4; ++i) {
            pp[i].pixel = {pairs[i].at("pixel")[0].get<double>(), pairs[i].at("pixel")[1].get<double>()};
            pp[i].ground = {pairs[i].at("ground")[0].get<double>(),
                            pairs[i].at("ground")[1].get<double>()};
        }
        return homography_from_points(pp);
    }
    throw ConfigError(path + ": expected 'matrix' or 'pairs'");
}

int cmd_gradcheck(std::uint64_t seed, double eps, bool verbose) {
    GradCheckReport report = gradcheck_ops(seed, eps);
    GradCheckOptions opt;
    opt.seed = seed;
    opt.eps = eps;
    report.absorb(gradcheck_model(opt));
    const double threshold = 1e-4;
    if (verbose)
        for (const auto& e : report.entries)
            std::cout << e.name << ": max rel err " << e.max_rel_err << " over " << e.checked
                      << " coords\n";
    std::cout << "gradcheck: max relative error " << report.max_rel_err << " ("
              << report.entries.size() << " tensors)\n";
    if (!report.pass(threshold)) {
        std::cout << "gradcheck FAILED at threshold " << threshold << "; offenders:";
        for (const std::string& name : report.offenders(threshold)) std::cout << ' ' << name;
        std::cout << '\n';
        return 1;
    }
    std::cout << "gradcheck PASSED\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    const TrainConfig cfg = parse_train_config(load_json(config_path));
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult result = train_toy(cfg);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    fs::create_directories(out_dir);
    std::string hist;
    for (const TrainRecord& r : result.history) {
        const json line{{"iter", r.iter},     {"lr", r.lr},   {"total", r.total}, {"ce", r.ce},
                        {"ga", r.ga},         {"aux", r.aux}, {"train_miou", r.train_miou}};
        hist += line.dump() + "\n";
    }
    write_text(out_dir + "/history.jsonl", hist);
    write_text(out_dir + "/config.json", train_config_json(cfg).dump(2) + "\n");
    save_checkpoint(out_dir + "/ckpt", result.model);
    if (!result.history.empty())
        std::cout << "trained " << result.history.size() << " iterations in " << secs
                  << " s: total " << result.history.front().total << " -> "
                  << result.history.back().total << ", train mIoU "
                  << result.history.back().train_miou << '\n';
    else
        std::cout << "trained 0 iterations (initial checkpoint written)\n";
    return 0;
}

int cmd_infer(const std::string& ckpt, const std::string& image_path, const std::string& out_path,
              const std::string& probs_path) {
    const Model model = load_checkpoint(ckpt);
    const Tensor image = read_ppm(image_path);
    Tensor probs;
    const LabelMap pred = infer_labels(model, image, &probs);
    write_pgm(out_path, pred);
    if (!probs_path.empty()) write_gtsr(probs_path, probs);
    return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir, const std::string& groups_path,
             const std::string& out_json) {
    const GroupMap gm = load_group_map(groups_path);
    ConfusionMatrix cm(gm.group_count());
    for (const std::string& name : paired_pgm_names(pred_dir, gt_dir)) {
        const LabelMap pred = read_pgm(pred_dir + "/" + name);
        const LabelMap gt = read_pgm(gt_dir + "/" + name);
        cm.accumulate(pred, gt);
    }
    std::vector<std::string> names;
    for (const GroupInfo& g : gm.groups) names.push_back(g.name);
    std::cout << metrics_table(cm, names);
    const json report = metrics_json(cm, names);
    if (!out_json.empty())
        write_text(out_json, report.dump(2) + "\n");
    else
        std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_regroup(const std::string& in_path, const std::string& groups_path,
                const std::string& out_path) {
    const GroupMap gm = load_group_map(groups_path);
    write_pgm(out_path, remap(read_pgm(in_path), gm));
    return 0;
}

int cmd_groupeffect(const std::string& pred_dir, const std::string& gt_dir,
                    const std::string& groups_path) {
    const GroupMap gm = load_group_map(groups_path);
    const int groups = gm.group_count();
    std::vector<long long> total(static_cast<std::size_t>(groups), 0);
    std::vector<double> fine_hits(static_cast<std::size_t>(groups), 0.0);
    std::vector<double> grouped_hits(static_cast<std::size_t>(groups), 0.0);
    for (const std::string& name : paired_pgm_names(pred_dir, gt_dir)) {
        const LabelMap pred = read_pgm(pred_dir + "/" + name);
        const LabelMap gt = read_pgm(gt_dir + "/" + name);
        for (const GroupEffect& e : grouping_effect(pred, gt, gm)) {
            const int g = gm.group_of(e.name);
            total[static_cast<std::size_t>(g)] += e.gt_pixels;
            fine_hits[static_cast<std::size_t>(g)] += e.fine_accuracy * e.gt_pixels;
            grouped_hits[static_cast<std::size_t>(g)] += e.grouped_accuracy * e.gt_pixels;
        }
    }
    json rows = json::array();
    for (int g = 0; g < groups; ++g) {
        const double n = static_cast<double>(total[static_cast<std::size_t>(g)]);
        const double fine = n > 0 ? fine_hits[static_cast<std::size_t>(g)] / n : 0.0;
        const double grouped = n > 0 ? grouped_hits[static_cast<std::size_t>(g)] / n : 0.0;
        rows.push_back({{"group", gm.groups[static_cast<std::size_t>(g)].name},
                        {"gt_pixels", total[static_cast<std::size_t>(g)]},
                        {"fine_accuracy", fine},
                        {"grouped_accuracy", grouped},
                        {"delta", grouped - fine}});
    }
    std::cout << json{{"groups", rows}}.dump(2) << '\n';
    return 0;
}

int cmd_costmap(const std::string& pred_path, const std::string& hom_path,
                const std::string& elev_path, const std::string& costs_path,
                const std::string& out_dir) {
    const LabelMap pred = read_pgm(pred_path);
    const Homography hom = load_homography(hom_path);
    const Tensor elev = read_gtsr(elev_path);
    if (elev.ndim() != 2) throw DataError(elev_path + ": elevation grid must be 2-D");

    const json cj = load_json(costs_path);
    GridSpec spec;
    spec.rows = elev.dim(0);
    spec.cols = elev.dim(1);
    spec.cell_size = cj.value("cell_size", 1.0);
    if (cj.contains("origin")) {
        spec.origin_x = cj["origin"][0].get<double>();
        spec.origin_y = cj["origin"][1].get<double>();
    }
    if (cj.contains("grid")) {
        spec.rows = cj["grid"][0].get<int>();
        spec.cols = cj["grid"][1].get<int>();
        if (spec.rows != elev.dim(0) || spec.cols != elev.dim(1))
            throw DataError("costmap: elevation grid " + elev.shape_str() +
                            " does not match configured grid size");
    }
    int groups = 6;
    if (cj.contains("groups")) groups = cj["groups"].get<int>();
    const CostTable table =
        cj.contains("costs") ? CostTable::parse(cj["costs"], groups) : CostTable::defaults();
    std::vector<int> ranks = cj.value("cost_ranks", std::vector<int>{});
    if (ranks.empty()) {
        ranks.resize(table.group_cost.size());
        for (std::size_t i = 0; i < ranks.size(); ++i) ranks[i] = static_cast<int>(i);
    }

    const LabelMap ground = project_labels(pred, hom, spec);
    CostGrid seg{spec, seg_costmap(ground, table), elev.data};

    // Elevation enters the sum as weight * height above the grid minimum, so
    // elevation costs stay non-negative.
    const double elev_weight = cj.value("elevation_weight", 1.0);
    double min_elev = elev.data.empty() ? 0.0 : *std::min_element(elev.data.begin(), elev.data.end());
    CostGrid elev_costs{spec, {}, elev.data};
    elev_costs.cost.resize(elev.data.size());
    for (std::size_t i = 0; i < elev.data.size(); ++i)
        elev_costs.cost[i] = elev_weight * (elev.data[i] - min_elev);

    const CostGrid total = fuse(seg, elev_costs);
    save_cost_grid(out_dir, total, ground, ranks);
    std::cout << "wrote cost grid " << spec.rows << "x" << spec.cols << " to " << out_dir << '\n';
    return 0;
}

int cmd_plan(const std::string& grid_dir, const std::string& start_s, const std::string& goal_s,
             const std::string& out_csv) {
    const LoadedGrid lg = load_cost_grid(grid_dir);
    const auto [sr, sc] = parse_rc(start_s, "--start");
    const auto [gr, gc] = parse_rc(goal_s, "--goal");
    const PlanResult result = plan(lg.grid, {sr, sc}, {gr, gc});
    if (!result.found) {
        std::cout << "NO_PATH\n";
        return 2;
    }
    std::string csv = "row,col\n";
    for (const Cell& c : result.path)
        csv += std::to_string(c.row) + "," + std::to_string(c.col) + "\n";
    write_text(out_csv, csv);

    const double roughness = trajectory_roughness(result.path, lg.grid);
    double selection = 0.0;
    if (!lg.cost_ranks.empty())
        selection = trajectory_selection(result.path, lg.ground_labels, lg.cost_ranks);
    const json report{{"cells", result.path.size()},
                      {"cost", result.cost},
                      {"roughness_m", roughness},
                      {"selection_pct", selection}};
    std::cout << report.dump(2) << '\n';
    return 0;
}

int cmd_flops(const std::string& config_path, const std::string& hw) {
    HeadConfig cfg;
    if (!config_path.empty()) {
        const json j = load_json(config_path);
        cfg.groups = j.value("groups", cfg.groups);
        cfg.head_width = j.value("head_width", cfg.head_width);
        cfg.fused_channels = j.value("fused_channels", cfg.fused_channels);
    }
    const auto [h, w] = parse_rc(hw, "--hw");
    json rows = json::array();
    for (int r : {8, 16, 32}) {
        cfg.reduction = r;
        const FlopCount fc = head_flops(cfg, h, w);
        rows.push_back({{"reduction", r},
                        {"projections", fc.projections},
                        {"attention", fc.attention},
                        {"classifier", fc.classifier},
                        {"total", fc.total()}});
    }
    std::cout << json{{"h", h}, {"w", w}, {"groups", cfg.groups}, {"head_width", cfg.head_width},
                      {"rows", rows}}
                     .dump(2)
              << '\n';
    return 0;
}

int cmd_synth(std::uint64_t seed, int n, const std::string& hw, int groups,
              const std::string& out_dir) {
    const auto [h, w] = parse_rc(hw, "--hw");
    save_synth_dataset(out_dir, make_synth_dataset(seed, n, h, w, groups), seed);
    std::cout << "wrote " << n << " samples to " << out_dir << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"terrain navigability segmentation and costmap planning"};
    app.require_subcommand(1);

    std::uint64_t seed = 7;
    double eps = 1e-5;
    bool verbose = false;
    auto* sc_gradcheck = app.add_subcommand("gradcheck", "check gradients against finite differences");
    sc_gradcheck->add_option("--seed", seed);
    sc_gradcheck->add_option("--eps", eps);
    sc_gradcheck->add_flag("--verbose", verbose);

    std::string config_path, out_path;
    auto* sc_train = app.add_subcommand("train", "toy training run on synthetic data");
    sc_train->add_option("--config", config_path)->required();
    sc_train->add_option("--out", out_path)->required();

    std::string ckpt, image_path, probs_path;
    auto* sc_infer = app.add_subcommand("infer", "segment one image with a checkpoint");
    sc_infer->add_option("--ckpt", ckpt)->required();
    sc_infer->add_option("--image", image_path)->required();
    sc_infer->add_option("--out", out_path)->required();
    sc_infer->add_option("--probs", probs_path);

    std::string pred_dir, gt_dir, groups_path, out_json;
    auto* sc_eval = app.add_subcommand("eval", "segmentation metrics over directories");
    sc_eval->add_option("--pred", pred_dir)->required();
    sc_eval->add_option("--gt", gt_dir)->required();
    sc_eval->add_option("--groups", groups_path)->required();
    sc_eval->add_option("--out", out_json);

    std::string in_path;
    auto* sc_regroup = app.add_subcommand("regroup", "remap fine labels into groups");
    sc_regroup->add_option("--in", in_path)->required();
    sc_regroup->add_option("--groups", groups_path)->required();
    sc_regroup->add_option("--out", out_path)->required();

    auto* sc_geffect = app.add_subcommand("groupeffect", "accuracy before and after grouping");
    sc_geffect->add_option("--pred", pred_dir)->required();
    sc_geffect->add_option("--gt", gt_dir)->required();
    sc_geffect->add_option("--groups", groups_path)->required();

    std::string hom_path, elev_path, costs_path;
    auto* sc_costmap = app.add_subcommand("costmap", "project labels into a fused cost grid");
    sc_costmap->add_option("--pred", in_path)->required();
    sc_costmap->add_option("--hom", hom_path)->required();
    sc_costmap->add_option("--elev", elev_path)->required();
    sc_costmap->add_option("--costs", costs_path)->required();
    sc_costmap->add_option("--out", out_path)->required();

    std::string grid_dir, start_s, goal_s;
    auto* sc_plan = app.add_subcommand("plan", "least-cost path on a saved grid");
    sc_plan->add_option("--grid", grid_dir)->required();
    sc_plan->add_option("--start", start_s)->required();
    sc_plan->add_option("--goal", goal_s)->required();
    sc_plan->add_option("--out", out_path)->required();

    std::string hw = "64,64";
    auto* sc_flops = app.add_subcommand("flops", "head multiply-add counts per reduction");
    sc_flops->add_option("--config", config_path);
    sc_flops->add_option("--hw", hw);

    int n = 16, groups = 6;
    auto* sc_synth = app.add_subcommand("synth", "write a synthetic dataset");
    sc_synth->add_option("--seed", seed);
    sc_synth->add_option("--n", n);
    sc_synth->add_option("--hw", hw);
    sc_synth->add_option("--groups", groups);
    sc_synth->add_option("--out", out_path)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sc_gradcheck->parsed()) return cmd_gradcheck(seed, eps, verbose);
        if (sc_train->parsed()) return cmd_train(config_path, out_path);
        if (sc_infer->parsed()) return cmd_infer(ckpt, image_path, out_path, probs_path);
        if (sc_eval->parsed()) return cmd_eval(pred_dir, gt_dir, groups_path, out_json);
        if (sc_regroup->parsed()) return cmd_regroup(in_path, groups_path, out_path);
        if (sc_geffect->parsed()) return cmd_groupeffect(pred_dir, gt_dir, groups_path);
        if (sc_costmap->parsed())
            return cmd_costmap(in_path, hom_path, elev_path, costs_path, out_path);
        if (sc_plan->parsed()) return cmd_plan(grid_dir, start_s, goal_s, out_path);
        if (sc_flops->parsed()) return cmd_flops(config_path, hw);
        if (sc_synth->parsed()) return cmd_synth(seed, n, hw, groups, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
