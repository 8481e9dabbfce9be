#pragma once

#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "navseg/homography.hpp"
#include "navseg/labelmap.hpp"

namespace navseg {

// Cells whose cost equals this sentinel are impassable.
inline constexpr double kObstacleCost = std::numeric_limits<double>::infinity();

// Projected label value for grid cells that fall outside the source image.
inline constexpr std::uint8_t kUnknownLabel = kIgnoreLabel;

struct GridSpec {
    int rows = 0;
    int cols = 0;
    double cell_size = 1.0;  // meters per cell
    double origin_x = 0.0;   // ground coords of the (row 0, col 0) cell corner
    double origin_y = 0.0;

    bool same(const GridSpec& o) const;
    Point2 cell_center(int row, int col) const;
};

// Robot-centric cost grid with its companion elevation grid (meters).
struct CostGrid {
    GridSpec spec;
    std::vector<double> cost;
    std::vector<double> elevation;

    double cost_at(int row, int col) const { return cost[static_cast<std::size_t>(row) * spec.cols + col]; }
    double elev_at(int row, int col) const {
        return elevation[static_cast<std::size_t>(row) * spec.cols + col];
    }
};

// Per-group traversal costs; forbidden and obstacle groups carry the
// sentinel. Cells outside the camera view get unknown_cost.
struct CostTable {
    std::vector<double> group_cost;
    double unknown_cost = 8.0;

    static CostTable defaults();  // smooth, rough, bumpy, forbidden, obstacle, background
    static CostTable parse(const nlohmann::json& j, int groups);
};

// Inverse-maps every cell center through the pixel-to-ground homography and
// samples the nearest label; cells that land outside the image become
// unknown.
LabelMap project_labels(const LabelMap& labels, const Homography& pixel_to_ground,
                        const GridSpec& grid);

std::vector<double> seg_costmap(const LabelMap& ground_labels, const CostTable& table);

// Elementwise sum of two cost fields on the same grid; the sentinel absorbs.
CostGrid fuse(const CostGrid& seg, const CostGrid& elevation_costs);

void save_cost_grid(const std::string& dir, const CostGrid& grid, const LabelMap& ground_labels,
                    const std::vector<int>& cost_ranks);

struct LoadedGrid {
    CostGrid grid;
    LabelMap ground_labels;
    std::vector<int> cost_ranks;
};

LoadedGrid load_cost_grid(const std::string& dir);

}  // namespace navseg
