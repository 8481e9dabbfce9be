#include "navseg/costmap.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "navseg/errors.hpp"
#include "navseg/gtsr.hpp"
#include "navseg/netpbm.hpp"
#include "navseg/tensor.hpp"

namespace navseg {

bool GridSpec::same(const GridSpec& o) const {
    return rows == o.rows && cols == o.cols && cell_size == o.cell_size && origin_x == o.origin_x &&
           origin_y == o.origin_y;
}

Point2 GridSpec::cell_center(int row, int col) const {
    return {origin_x + (col + 0.5) * cell_size, origin_y + (row + 0.5) * cell_size};
}

CostTable CostTable::defaults() {
    CostTable t;
    t.group_cost = {0.0, 2.0, 5.0, kObstacleCost, kObstacleCost, 8.0};
    t.unknown_cost = 8.0;
    return t;
}

CostTable CostTable::parse(const nlohmann::json& j, int groups) {
    CostTable t;
    t.group_cost.assign(static_cast<std::size_t>(groups), -1.0);
    if (!j.is_object()) throw ConfigError("cost table must be a JSON object");
    auto to_cost = [](const nlohmann::json& v) -> double {
        if (v.is_string()) {
            if (v.get<std::string>() == "obstacle") return kObstacleCost;
            throw ConfigError("cost table: unknown cost literal '" + v.get<std::string>() + "'");
        }
        const double c = v.get<double>();
        if (c < 0.0) throw ConfigError("cost table: costs must be >= 0");
        return c;
    };
    for (const auto& [key, value] : j.items()) {
        if (key == "unknown") {
            t.unknown_cost = to_cost(value);
            continue;
        }
        int gid = -1;
        try {
            gid = std::stoi(key);
        } catch (...) {
            throw ConfigError("cost table: key '" + key + "' is neither a group id nor 'unknown'");
        }
        if (gid < 0 || gid >= groups)
            throw ConfigError("cost table: group id " + key + " outside [0," +
                              std::to_string(groups) + ")");
        t.group_cost[static_cast<std::size_t>(gid)] = to_cost(value);
    }
    for (int g = 0; g < groups; ++g)
        if (t.group_cost[static_cast<std::size_t>(g)] < 0.0)
            throw ConfigError("cost table: missing cost for group " + std::to_string(g));
    return t;
}

LabelMap project_labels(const LabelMap& labels, const Homography& pixel_to_ground,
                        const GridSpec& grid) {
    if (grid.rows < 1 || grid.cols < 1) throw ConfigError("project_labels: empty grid");
    const Homography ground_to_pixel = pixel_to_ground.inverse();
    LabelMap out(grid.rows, grid.cols, kUnknownLabel);
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            const Point2 px = ground_to_pixel.apply(grid.cell_center(r, c));
            // Pixel (row i, col j) spans [j, j+1) x [i, i+1); nearest sample
            // is therefore the integer floor.
            const int ix = static_cast<int>(std::floor(px.x));
            const int iy = static_cast<int>(std::floor(px.y));
            if (ix < 0 || ix >= labels.cols || iy < 0 || iy >= labels.rows) continue;
            out.at(r, c) = labels.at(iy, ix);
        }
    return out;
}

std::vector<double> seg_costmap(const LabelMap& ground_labels, const CostTable& table) {
    const int groups = static_cast<int>(table.group_cost.size());
    std::vector<double> costs(ground_labels.size());
    for (std::size_t i = 0; i < ground_labels.size(); ++i) {
        const std::uint8_t g = ground_labels.data[i];
        if (g == kUnknownLabel) {
            costs[i] = table.unknown_cost;
        } else {
            if (g >= groups)
                throw ConfigError("seg_costmap: label " + std::to_string(g) +
                                  " has no entry in the cost table");
            costs[i] = table.group_cost[g];
        }
    }
    return costs;
}

CostGrid fuse(const CostGrid& seg, const CostGrid& elevation_costs) {
    if (!seg.spec.same(elevation_costs.spec))
        throw DataError("fuse: grid specs disagree (" + std::to_string(seg.spec.rows) + "x" +
                        std::to_string(seg.spec.cols) + " vs " +
                        std::to_string(elevation_costs.spec.rows) + "x" +
                        std::to_string(elevation_costs.spec.cols) + ")");
    CostGrid out;
    out.spec = seg.spec;
    out.elevation = elevation_costs.elevation.empty() ? seg.elevation : elevation_costs.elevation;
    out.cost.resize(seg.cost.size());
    for (std::size_t i = 0; i < seg.cost.size(); ++i)
        out.cost[i] = seg.cost[i] + elevation_costs.cost[i];
    return out;
}

void save_cost_grid(const std::string& dir, const CostGrid& grid, const LabelMap& ground_labels,
                    const std::vector<int>& cost_ranks) {
    std::filesystem::create_directories(dir);
    Tensor costs({grid.spec.rows, grid.spec.cols}, grid.cost);
    write_gtsr(dir + "/costs.gtsr", costs);
    Tensor elev({grid.spec.rows, grid.spec.cols},
                grid.elevation.empty() ? std::vector<double>(grid.cost.size(), 0.0) : grid.elevation);
    write_gtsr(dir + "/elevation.gtsr", elev);
    write_pgm(dir + "/labels.pgm", ground_labels);
    const nlohmann::json spec{{"rows", grid.spec.rows},
                              {"cols", grid.spec.cols},
                              {"cell_size", grid.spec.cell_size},
                              {"origin", {grid.spec.origin_x, grid.spec.origin_y}},
                              {"sentinel", "inf"},
                              {"cost_ranks", cost_ranks}};
    const std::string tmp = dir + "/spec.json.tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw IoError("cannot write " + tmp);
        os << spec.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, dir + "/spec.json");
}

LoadedGrid load_cost_grid(const std::string& dir) {
    std::ifstream is(dir + "/spec.json");
    if (!is) throw IoError("cannot open " + dir + "/spec.json");
    nlohmann::json spec;
    try {
        is >> spec;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(dir + "/spec.json: invalid JSON: " + e.what());
    }
    LoadedGrid lg;
    lg.grid.spec.rows = spec.at("rows").get<int>();
    lg.grid.spec.cols = spec.at("cols").get<int>();
    lg.grid.spec.cell_size = spec.at("cell_size").get<double>();
    lg.grid.spec.origin_x = spec.at("origin")[0].get<double>();
    lg.grid.spec.origin_y = spec.at("origin")[1].get<double>();
    lg.cost_ranks = spec.value("cost_ranks", std::vector<int>{});

    const Tensor costs = read_gtsr(dir + "/costs.gtsr");
    const Tensor elev = read_gtsr(dir + "/elevation.gtsr");
    if (costs.ndim() != 2 || costs.dim(0) != lg.grid.spec.rows || costs.dim(1) != lg.grid.spec.cols)
        throw DataError(dir + "/costs.gtsr: shape " + costs.shape_str() + " does not match spec");
    if (!elev.same_shape(costs))
        throw DataError(dir + "/elevation.gtsr: shape " + elev.shape_str() + " does not match costs");
    lg.grid.cost = costs.data;
    lg.grid.elevation = elev.data;
    lg.ground_labels = read_pgm(dir + "/labels.pgm");
    if (lg.ground_labels.rows != lg.grid.spec.rows || lg.ground_labels.cols != lg.grid.spec.cols)
        throw DataError(dir + "/labels.pgm: shape does not match spec");
    return lg;
}

}  // namespace navseg
