#include "navseg/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <tuple>

#include "navseg/errors.hpp"

namespace navseg {

namespace {

constexpr int kDr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
constexpr int kDc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};

double step_length(int dir) { return (kDr[dir] != 0 && kDc[dir] != 0) ? std::numbers::sqrt2 : 1.0; }

void check_endpoint(const CostGrid& grid, Cell c, const char* what) {
    if (c.row < 0 || c.row >= grid.spec.rows || c.col < 0 || c.col >= grid.spec.cols)
        throw UsageError(std::string("plan: ") + what + " cell (" + std::to_string(c.row) + "," +
                         std::to_string(c.col) + ") outside " + std::to_string(grid.spec.rows) +
                         "x" + std::to_string(grid.spec.cols) + " grid");
    if (grid.cost_at(c.row, c.col) == kObstacleCost)
        throw UsageError(std::string("plan: ") + what + " cell (" + std::to_string(c.row) + "," +
                         std::to_string(c.col) + ") is impassable");
}

}  // namespace

PlanResult plan(const CostGrid& grid, Cell start, Cell goal) {
    check_endpoint(grid, start, "start");
    check_endpoint(grid, goal, "goal");
    const int rows = grid.spec.rows, cols = grid.spec.cols;
    const int n = rows * cols;
    const int s = start.row * cols + start.col;
    const int g = goal.row * cols + goal.col;

    std::vector<double> dist(static_cast<std::size_t>(n), kObstacleCost);
    std::vector<int> parent(static_cast<std::size_t>(n), -1);
    std::vector<char> done(static_cast<std::size_t>(n), 0);
    using Entry = std::pair<double, int>;  // (cost, row-major cell); lower cell breaks ties
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    dist[static_cast<std::size_t>(s)] = 0.0;
    open.emplace(0.0, s);

    while (!open.empty()) {
        const auto [d, u] = open.top();
        open.pop();
        if (done[static_cast<std::size_t>(u)]) continue;
        done[static_cast<std::size_t>(u)] = 1;
        if (u == g) break;
        const int ur = u / cols, uc = u % cols;
        const double ucost = grid.cost_at(ur, uc);
        for (int dir = 0; dir < 8; ++dir) {
            const int vr = ur + kDr[dir], vc = uc + kDc[dir];
            if (vr < 0 || vr >= rows || vc < 0 || vc >= cols) continue;
            const double vcost = grid.cost_at(vr, vc);
            if (vcost == kObstacleCost) continue;
            const int v = vr * cols + vc;
            const double len = step_length(dir);
            const double nd = d + len * 0.5 * (ucost + vcost) + len;
            if (nd < dist[static_cast<std::size_t>(v)]) {
                dist[static_cast<std::size_t>(v)] = nd;
                parent[static_cast<std::size_t>(v)] = u;
                open.emplace(nd, v);
            }
        }
    }

    PlanResult result;
    if (!done[static_cast<std::size_t>(g)]) return result;
    result.found = true;
    result.cost = dist[static_cast<std::size_t>(g)];
    for (int v = g; v != -1; v = parent[static_cast<std::size_t>(v)])
        result.path.push_back({v / cols, v % cols});
    std::reverse(result.path.begin(), result.path.end());
    return result;
}

double trajectory_roughness(const std::vector<Cell>& path, const CostGrid& grid) {
    double acc = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const Cell& a = path[i - 1];
        const Cell& b = path[i];
        acc += std::abs(grid.elev_at(b.row, b.col) - grid.elev_at(a.row, a.col));
    }
    return acc;
}

double trajectory_selection(const std::vector<Cell>& path, const LabelMap& ground_labels,
                            const std::vector<int>& cost_ranks) {
    if (path.empty()) throw UsageError("trajectory_selection: empty path");
    // Most navigable group actually present in the grid.
    int best_group = -1;
    for (std::uint8_t v : ground_labels.data) {
        if (v == kUnknownLabel) continue;
        if (v >= cost_ranks.size())
            throw DataError("trajectory_selection: label " + std::to_string(v) +
                            " has no cost rank");
        if (best_group < 0 || cost_ranks[v] < cost_ranks[static_cast<std::size_t>(best_group)])
            best_group = v;
    }
    if (best_group < 0) return 0.0;

    auto on_best = [&](const Cell& c) {
        return ground_labels.at(c.row, c.col) == static_cast<std::uint8_t>(best_group);
    };
    if (path.size() == 1) return on_best(path[0]) ? 100.0 : 0.0;

    double total = 0.0, best = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const Cell& a = path[i - 1];
        const Cell& b = path[i];
        const double len = std::hypot(b.row - a.row, b.col - a.col);
        total += len;
        if (on_best(a) && on_best(b)) best += len;
    }
    return total > 0.0 ? 100.0 * best / total : 0.0;
}

double forbidden_fp_rate(const std::vector<LabelMap>& pred_frames,
                         const std::vector<LabelMap>& gt_frames, int forbidden_group,
                         int pixel_threshold) {
    if (pred_frames.size() != gt_frames.size())
        throw DataError("forbidden_fp_rate: " + std::to_string(pred_frames.size()) +
                        " predictions vs " + std::to_string(gt_frames.size()) + " ground truths");
    if (pred_frames.empty()) return 0.0;
    int flagged = 0;
    for (std::size_t f = 0; f < pred_frames.size(); ++f) {
        const LabelMap& pred = pred_frames[f];
        const LabelMap& gt = gt_frames[f];
        if (!pred.same_shape(gt))
            throw DataError("forbidden_fp_rate: frame " + std::to_string(f) + " shapes disagree");
        long long fp = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            if (gt.data[i] == kIgnoreLabel) continue;
            if (pred.data[i] == forbidden_group && gt.data[i] != forbidden_group) ++fp;
        }
        if (fp >= pixel_threshold) ++flagged;
    }
    return 100.0 * static_cast<double>(flagged) / static_cast<double>(pred_frames.size());
}

}  // namespace navseg
