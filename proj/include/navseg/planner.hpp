#pragma once

#include <vector>

#include "navseg/costmap.hpp"

namespace navseg {

struct Cell {
    int row = 0;
    int col = 0;
    bool operator==(const Cell&) const = default;
};

struct PlanResult {
    bool found = false;
    std::vector<Cell> path;  // start..goal inclusive when found
    double cost = 0.0;
};

// Uniform-cost search over the 8-connected grid. A step of length s between
// cells u and v costs s * (cost[u] + cost[v]) / 2 + s, with s in {1, sqrt 2}
// cell units; sentinel cells are impassable. Ties break on lower path cost
// first, then row-major cell order, so results are deterministic.
PlanResult plan(const CostGrid& grid, Cell start, Cell goal);

// Sum of absolute elevation differences along consecutive path cells.
double trajectory_roughness(const std::vector<Cell>& path, const CostGrid& grid);

// Percentage of the path's geometric length spent on the most navigable
// group present in the grid (lowest cost_rank). A segment counts when both
// endpoint cells carry that group; a single-cell path is 100 or 0.
double trajectory_selection(const std::vector<Cell>& path, const LabelMap& ground_labels,
                            const std::vector<int>& cost_ranks);

// Percentage of frames containing at least pixel_threshold pixels predicted
// as the forbidden group where the ground truth disagrees.
double forbidden_fp_rate(const std::vector<LabelMap>& pred_frames,
                         const std::vector<LabelMap>& gt_frames, int forbidden_group,
                         int pixel_threshold = 1);

}  // namespace navseg
