// Independent reference implementations used only to check the library. Kept
// deliberately naive: plain loops, no shared code with the implementations
// they verify.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "navseg/costmap.hpp"
#include "navseg/labelmap.hpp"
#include "navseg/planner.hpp"
#include "navseg/tensor.hpp"

namespace oracle {

// Half-pixel-centers bilinear sample, one scalar at a time.
inline double resize_at(const navseg::Tensor& x, int ch, int oy, int ox, int oh, int ow) {
    const int h = x.dim(1), w = x.dim(2);
    auto tap = [](double s, int n, int& lo, int& hi, double& f) {
        s = std::clamp(s, 0.0, static_cast<double>(n - 1));
        lo = static_cast<int>(std::floor(s));
        hi = std::min(lo + 1, n - 1);
        f = s - lo;
    };
    int y0, y1, x0, x1;
    double fy, fx;
    tap((oy + 0.5) * h / static_cast<double>(oh) - 0.5, h, y0, y1, fy);
    tap((ox + 0.5) * w / static_cast<double>(ow) - 0.5, w, x0, x1, fx);
    const double v00 = x.at(ch, y0, x0), v01 = x.at(ch, y0, x1);
    const double v10 = x.at(ch, y1, x0), v11 = x.at(ch, y1, x1);
    return (1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11);
}

struct MetricSet {
    std::vector<double> iou;
    double miou = 0, macc = 0, aacc = 0;
};

// Per-pixel set counting straight from the label maps.
inline MetricSet metrics(const std::vector<navseg::LabelMap>& preds,
                         const std::vector<navseg::LabelMap>& gts, int classes) {
    std::vector<unsigned long long> tp(classes, 0), gt_n(classes, 0), pred_n(classes, 0);
    unsigned long long correct = 0, total = 0;
    for (std::size_t f = 0; f < preds.size(); ++f)
        for (std::size_t i = 0; i < gts[f].size(); ++i) {
            const auto g = gts[f].data[i], p = preds[f].data[i];
            if (g == navseg::kIgnoreLabel || p == navseg::kIgnoreLabel) continue;
            ++gt_n[g];
            ++pred_n[p];
            ++total;
            if (g == p) {
                ++tp[g];
                ++correct;
            }
        }
    MetricSet m;
    m.iou.resize(classes);
    double iou_sum = 0, acc_sum = 0;
    int iou_cnt = 0, acc_cnt = 0;
    for (int c = 0; c < classes; ++c) {
        const unsigned long long uni = gt_n[c] + pred_n[c] - tp[c];
        if (uni == 0) {
            m.iou[c] = std::numeric_limits<double>::quiet_NaN();
        } else {
            m.iou[c] = static_cast<double>(tp[c]) / static_cast<double>(uni);
            iou_sum += m.iou[c];
            ++iou_cnt;
        }
        if (gt_n[c] > 0) {
            acc_sum += static_cast<double>(tp[c]) / static_cast<double>(gt_n[c]);
            ++acc_cnt;
        }
    }
    m.miou = iou_cnt ? iou_sum / iou_cnt : 0.0;
    m.macc = acc_cnt ? acc_sum / acc_cnt : 0.0;
    m.aacc = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
    return m;
}

// Exhaustive depth-first path enumeration with cost dominance pruning;
// exact for non-negative cell costs.
inline double best_path_cost(const navseg::CostGrid& grid, navseg::Cell start, navseg::Cell goal) {
    const int rows = grid.spec.rows, cols = grid.spec.cols;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> best(static_cast<std::size_t>(rows) * cols, inf);
    double best_goal = inf;
    const int dr[8] = {-1, -1, -1, 0, 0, 1, 1, 1};
    const int dc[8] = {-1, 0, 1, -1, 1, -1, 0, 1};
    std::function<void(int, int, double)> walk = [&](int r, int c, double cost) {
        if (cost >= best_goal) return;
        double& b = best[static_cast<std::size_t>(r) * cols + c];
        if (cost >= b) return;
        b = cost;
        if (r == goal.row && c == goal.col) {
            best_goal = cost;
            return;
        }
        for (int d = 0; d < 8; ++d) {
            const int nr = r + dr[d], nc = c + dc[d];
            if (nr < 0 || nr >= rows || nc < 0 || nc >= cols) continue;
            const double cc = grid.cost_at(nr, nc);
            if (cc == navseg::kObstacleCost) continue;
            const double len = (dr[d] != 0 && dc[d] != 0) ? std::sqrt(2.0) : 1.0;
            walk(nr, nc, cost + len * 0.5 * (grid.cost_at(r, c) + cc) + len);
        }
    };
    if (grid.cost_at(start.row, start.col) != navseg::kObstacleCost) walk(start.row, start.col, 0.0);
    return best_goal;
}

}  // namespace oracle
