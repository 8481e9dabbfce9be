#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "navseg/costmap.hpp"
#include "navseg/errors.hpp"
#include "navseg/homography.hpp"
#include "navseg/planner.hpp"
#include "oracles.hpp"

using namespace navseg;

namespace {

std::array<PointPair, 4> square_pairs(const Homography& truth) {
    std::array<PointPair, 4> pp{};
    const Point2 pts[4] = {{0, 0}, {10, 0}, {10, 10}, {0, 10}};
    for (int i = 0; i < 4; ++i) {
        pp[static_cast<std::size_t>(i)].pixel = pts[i];
        pp[static_cast<std::size_t>(i)].ground = truth.apply(pts[i]);
    }
    return pp;
}

CostGrid make_grid(int rows, int cols, std::vector<double> costs,
                   std::vector<double> elev = {}) {
    CostGrid g;
    g.spec.rows = rows;
    g.spec.cols = cols;
    g.cost = std::move(costs);
    g.elevation = elev.empty() ? std::vector<double>(g.cost.size(), 0.0) : std::move(elev);
    return g;
}

}  // namespace

TEST_CASE("homography from identity and scale correspondences") {
    {
        const Homography h = homography_from_points(square_pairs(Homography::identity()));
        for (int i = 0; i < 9; ++i)
            CHECK(h.m[static_cast<std::size_t>(i)] ==
                  doctest::Approx(Homography::identity().m[static_cast<std::size_t>(i)])
                      .epsilon(1e-12));
    }
    {
        Homography scale2;
        scale2.m = {2, 0, 0, 0, 2, 0, 0, 0, 1};
        const Homography h = homography_from_points(square_pairs(scale2));
        CHECK(h.m[0] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(h.m[4] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(h.m[8] == 1.0);
        CHECK(std::abs(h.m[1]) < 1e-12);
        CHECK(std::abs(h.m[6]) < 1e-12);
    }
}

TEST_CASE("estimated homographies map sources onto targets within 1e-9") {
    auto rng = std::mt19937_64(7);
    std::uniform_real_distribution<double> jitter(-0.3, 0.3);
    std::uniform_real_distribution<double> coef(-0.5, 0.5);
    for (int trial = 0; trial < 100; ++trial) {
        Homography truth;
        truth.m = {1 + coef(rng), coef(rng) * 0.2, coef(rng) * 5,
                   coef(rng) * 0.2, 1 + coef(rng), coef(rng) * 5,
                   coef(rng) * 0.005, coef(rng) * 0.005, 1};
        if (std::abs(truth.determinant()) < 0.1) continue;
        std::array<PointPair, 4> pp{};
        const Point2 base[4] = {{0, 0}, {12, 0}, {11, 9}, {1, 10}};
        for (int i = 0; i < 4; ++i) {
            pp[static_cast<std::size_t>(i)].pixel = {base[i].x + jitter(rng), base[i].y + jitter(rng)};
            pp[static_cast<std::size_t>(i)].ground = truth.apply(pp[static_cast<std::size_t>(i)].pixel);
        }
        const Homography est = homography_from_points(pp);
        for (const PointPair& pair : pp) {
            const Point2 mapped = est.apply(pair.pixel);
            CHECK(std::abs(mapped.x - pair.ground.x) < 1e-9);
            CHECK(std::abs(mapped.y - pair.ground.y) < 1e-9);
        }
        // Forward then inverse returns the source.
        const Homography inv = est.inverse();
        for (const PointPair& pair : pp) {
            const Point2 back = inv.apply(est.apply(pair.pixel));
            CHECK(std::abs(back.x - pair.pixel.x) < 1e-9);
            CHECK(std::abs(back.y - pair.pixel.y) < 1e-9);
        }
    }
}

TEST_CASE("collinear pixel points are rejected") {
    std::array<PointPair, 4> pp{};
    pp[0].pixel = {0, 0};
    pp[1].pixel = {1, 1};
    pp[2].pixel = {2, 2};  // collinear with the first two
    pp[3].pixel = {0, 5};
    for (auto& p : pp) p.ground = p.pixel;
    CHECK_THROWS_AS(homography_from_points(pp), DataError);
}

TEST_CASE("project_labels under the identity homography reproduces the map") {
    LabelMap labels(4, 5);
    for (std::size_t i = 0; i < labels.size(); ++i) labels.data[i] = static_cast<std::uint8_t>(i % 6);
    GridSpec grid{4, 5, 1.0, 0.0, 0.0};
    const LabelMap projected = project_labels(labels, Homography::identity(), grid);
    CHECK(projected.data == labels.data);
}

TEST_CASE("projection marks cells outside the camera view unknown") {
    LabelMap labels(4, 4, 0);  // all smooth
    GridSpec grid{6, 6, 1.0, -1.0, -1.0};
    const LabelMap projected = project_labels(labels, Homography::identity(), grid);
    int unknown = 0, smooth = 0;
    for (auto v : projected.data) (v == kUnknownLabel ? unknown : smooth) += 1;
    CHECK(smooth == 16);
    CHECK(unknown == 20);
}

TEST_CASE("translation homography shifts labels by whole cells") {
    LabelMap labels(6, 6);
    for (std::size_t i = 0; i < labels.size(); ++i) labels.data[i] = static_cast<std::uint8_t>(i % 5);
    Homography shift;  // ground = pixel + (2, 3)
    shift.m = {1, 0, 2, 0, 1, 3, 0, 0, 1};
    GridSpec grid{6, 6, 1.0, 0.0, 0.0};
    const LabelMap projected = project_labels(labels, shift, grid);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) {
            const int sr = r - 3, sc = c - 2;
            if (sr >= 0 && sr < 6 && sc >= 0 && sc < 6)
                CHECK(projected.at(r, c) == labels.at(sr, sc));
            else
                CHECK(projected.at(r, c) == kUnknownLabel);
        }
}

TEST_CASE("nearest-neighbor sampling stays within half a pixel") {
    LabelMap labels(8, 8, 0);
    Homography h;
    h.m = {0.5, 0.03, 1.0, -0.02, 0.45, 2.0, 0.001, 0.0, 1};
    GridSpec grid{5, 5, 0.4, 0.7, 1.1};
    const Homography inv = h.inverse();
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            const Point2 px = inv.apply(grid.cell_center(r, c));
            if (px.x < 0 || px.x >= 8 || px.y < 0 || px.y >= 8) continue;
            const double chosen_x = std::floor(px.x) + 0.5;
            const double chosen_y = std::floor(px.y) + 0.5;
            CHECK(std::abs(chosen_x - px.x) <= 0.5 + 1e-12);
            CHECK(std::abs(chosen_y - px.y) <= 0.5 + 1e-12);
        }
}

TEST_CASE("seg_costmap looks costs up pointwise") {
    CostTable table = CostTable::defaults();
    {
        LabelMap ground(3, 3, 0);
        for (double c : seg_costmap(ground, table)) CHECK(c == 0.0);
    }
    {
        LabelMap ground(3, 3);
        ground.data = {0, 1, 2, 3, 4, 5, kUnknownLabel, 1, 0};
        const auto costs = seg_costmap(ground, table);
        const double expect[9] = {0, 2, 5, kObstacleCost, kObstacleCost, 8, 8, 2, 0};
        for (int i = 0; i < 9; ++i) CHECK(costs[static_cast<std::size_t>(i)] == expect[i]);
    }
    {
        // Swapping two groups' costs permutes the output identically.
        CostTable swapped = table;
        std::swap(swapped.group_cost[0], swapped.group_cost[1]);
        LabelMap ground(2, 2);
        ground.data = {0, 1, 1, 0};
        const auto a = seg_costmap(ground, table);
        const auto b = seg_costmap(ground, swapped);
        CHECK(a[0] == b[1]);
        CHECK(a[1] == b[0]);
    }
    {
        nlohmann::json bad = {{"0", 1.0}};  // missing groups 1..5
        CHECK_THROWS_AS(CostTable::parse(bad, 6), ConfigError);
    }
}

TEST_CASE("fuse adds elementwise, commutes, absorbs the sentinel") {
    auto rng = std::mt19937_64(9);
    std::uniform_real_distribution<double> u(0, 5);
    CostGrid a = make_grid(3, 4, std::vector<double>(12));
    CostGrid b = make_grid(3, 4, std::vector<double>(12));
    for (auto& v : a.cost) v = u(rng);
    for (auto& v : b.cost) v = u(rng);
    a.cost[5] = kObstacleCost;
    const CostGrid ab = fuse(a, b);
    const CostGrid ba = fuse(b, a);
    for (std::size_t i = 0; i < ab.cost.size(); ++i) {
        CHECK(ab.cost[i] == ba.cost[i]);
        CHECK(ab.cost[i] == a.cost[i] + b.cost[i]);
    }
    CHECK(ab.cost[5] == kObstacleCost);

    const CostGrid zero = make_grid(3, 4, std::vector<double>(12, 0.0));
    const CostGrid same = fuse(a, zero);
    for (std::size_t i = 0; i < same.cost.size(); ++i) CHECK(same.cost[i] == a.cost[i]);

    CostGrid wrong = make_grid(4, 3, std::vector<double>(12, 0.0));
    CHECK_THROWS_AS(fuse(a, wrong), DataError);
}

TEST_CASE("plan on a free grid walks the Chebyshev-optimal line") {
    const CostGrid g = make_grid(5, 5, std::vector<double>(25, 0.0));
    const PlanResult r = plan(g, {0, 0}, {4, 4});
    REQUIRE(r.found);
    CHECK(r.path.size() == 5);  // pure diagonal
    CHECK(r.cost == doctest::Approx(4 * std::sqrt(2.0)).epsilon(1e-12));

    const PlanResult straight = plan(g, {2, 0}, {2, 4});
    CHECK(straight.cost == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("a full wall yields an explicit no-path result") {
    std::vector<double> costs(25, 0.0);
    for (int c = 0; c < 5; ++c) costs[static_cast<std::size_t>(2 * 5 + c)] = kObstacleCost;
    const CostGrid g = make_grid(5, 5, std::move(costs));
    const PlanResult r = plan(g, {0, 0}, {4, 4});
    CHECK_FALSE(r.found);
    CHECK(r.path.empty());
}

TEST_CASE("plan endpoint preconditions") {
    const CostGrid g = make_grid(3, 3, {0, 0, 0, 0, kObstacleCost, 0, 0, 0, 0});
    CHECK_THROWS_AS(plan(g, {1, 1}, {0, 0}), UsageError);
    CHECK_THROWS_AS(plan(g, {0, 0}, {5, 5}), UsageError);
}

TEST_CASE("a cheap corridor beats the direct route") {
    // Expensive interior except a zero-cost top row corridor.
    std::vector<double> costs(25, 9.0);
    for (int c = 0; c < 5; ++c) costs[static_cast<std::size_t>(c)] = 0.0;
    costs[static_cast<std::size_t>(1 * 5 + 0)] = 0.0;
    costs[static_cast<std::size_t>(1 * 5 + 4)] = 0.0;
    costs[static_cast<std::size_t>(2 * 5 + 0)] = 0.0;
    costs[static_cast<std::size_t>(2 * 5 + 4)] = 0.0;
    const CostGrid g = make_grid(5, 5, std::move(costs));
    const PlanResult r = plan(g, {2, 0}, {2, 4});
    REQUIRE(r.found);
    CHECK(r.cost == doctest::Approx(oracle::best_path_cost(g, {2, 0}, {2, 4})).epsilon(1e-12));
    // The corridor is strictly cheaper than the straight 4-step route at cost
    // 4*(9+9)/2-ish; make sure the planner actually took a longer path.
    CHECK(r.path.size() > 5);
}

TEST_CASE("planner is optimal on seeded small grids and avoids forbidden cells") {
    auto rng = std::mt19937_64(11);
    std::uniform_int_distribution<int> dim(2, 6), cost(0, 5), coin(0, 9);
    int compared = 0;
    for (int trial = 0; trial < 120; ++trial) {
        const int rows = dim(rng), cols = dim(rng);
        std::vector<double> costs(static_cast<std::size_t>(rows) * cols);
        for (auto& v : costs) v = (coin(rng) < 2) ? kObstacleCost : static_cast<double>(cost(rng));
        CostGrid g = make_grid(rows, cols, std::move(costs));
        std::uniform_int_distribution<int> rr(0, rows - 1), cc(0, cols - 1);
        const Cell start{rr(rng), cc(rng)}, goal{rr(rng), cc(rng)};
        if (g.cost_at(start.row, start.col) == kObstacleCost ||
            g.cost_at(goal.row, goal.col) == kObstacleCost)
            continue;
        const PlanResult r = plan(g, start, goal);
        const double best = oracle::best_path_cost(g, start, goal);
        if (!r.found) {
            CHECK(best == kObstacleCost);
            continue;
        }
        ++compared;
        CHECK(r.cost == doctest::Approx(best).epsilon(1e-9));
        for (const Cell& c : r.path) CHECK(g.cost_at(c.row, c.col) != kObstacleCost);
    }
    CHECK(compared > 50);
}

TEST_CASE("raising one cell's cost never lowers the optimal cost") {
    auto rng = std::mt19937_64(13);
    std::uniform_int_distribution<int> cost(0, 4), pick(0, 24);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<double> costs(25);
        for (auto& v : costs) v = cost(rng);
        CostGrid g = make_grid(5, 5, costs);
        const PlanResult before = plan(g, {0, 0}, {4, 4});
        const int idx = pick(rng);
        g.cost[static_cast<std::size_t>(idx)] += 3.0;
        const PlanResult after = plan(g, {0, 0}, {4, 4});
        CHECK(after.cost >= before.cost - 1e-12);
    }
}

TEST_CASE("trajectory roughness telescopes on a monotone ramp") {
    std::vector<double> elev(25);
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 5; ++c) elev[static_cast<std::size_t>(r * 5 + c)] = 0.3 * r;
    const CostGrid g = make_grid(5, 5, std::vector<double>(25, 0.0), elev);

    CHECK(trajectory_roughness({{0, 0}, {0, 1}, {0, 2}}, g) == 0.0);  // flat row
    const std::vector<Cell> zigzag{{0, 0}, {1, 1}, {2, 0}, {3, 1}, {4, 2}};
    CHECK(trajectory_roughness(zigzag, g) == doctest::Approx(4 * 0.3).epsilon(1e-12));

    // Sinusoidal elevation vs direct summation.
    CostGrid s = g;
    for (int i = 0; i < 25; ++i) s.elevation[static_cast<std::size_t>(i)] = std::sin(0.7 * i);
    const std::vector<Cell> path{{0, 0}, {1, 1}, {1, 2}, {2, 3}, {3, 3}, {4, 4}};
    double expect = 0;
    for (std::size_t i = 1; i < path.size(); ++i)
        expect += std::abs(s.elev_at(path[i].row, path[i].col) -
                           s.elev_at(path[i - 1].row, path[i - 1].col));
    CHECK(trajectory_roughness(path, s) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("trajectory selection percentage") {
    const std::vector<int> ranks{0, 1, 2, 3, 4, 5};
    LabelMap ground(3, 3, 1);  // rough everywhere...
    ground.at(0, 0) = 0;       // ...except one smooth cell
    ground.at(0, 1) = 0;
    // Path fully on smooth.
    CHECK(trajectory_selection({{0, 0}, {0, 1}}, ground, ranks) == 100.0);
    // Path fully off it.
    CHECK(trajectory_selection({{2, 0}, {2, 1}, {2, 2}}, ground, ranks) == 0.0);
    // Mixed path: one smooth segment of length 1, two rough-ish segments.
    const std::vector<Cell> mixed{{0, 0}, {0, 1}, {1, 2}, {2, 2}};
    const double expect = 100.0 * 1.0 / (1.0 + std::sqrt(2.0) + 1.0);
    CHECK(trajectory_selection(mixed, ground, ranks) == doctest::Approx(expect).epsilon(1e-12));
    // Single-cell path.
    CHECK(trajectory_selection({{0, 0}}, ground, ranks) == 100.0);
    CHECK(trajectory_selection({{2, 2}}, ground, ranks) == 0.0);
}

TEST_CASE("forbidden false-positive rate over frames") {
    const int forbidden = 3;
    LabelMap clean(4, 4, 1);
    LabelMap spurious = clean;
    spurious.at(0, 0) = forbidden;
    {
        const std::vector<LabelMap> pred(5, clean), gt(5, clean);
        CHECK(forbidden_fp_rate(pred, gt, forbidden) == 0.0);
    }
    {
        const std::vector<LabelMap> pred(5, spurious), gt(5, clean);
        CHECK(forbidden_fp_rate(pred, gt, forbidden) == 100.0);
    }
    {
        std::vector<LabelMap> pred(10, clean), gt(10, clean);
        for (int k = 0; k < 3; ++k) pred[static_cast<std::size_t>(k)] = spurious;
        CHECK(forbidden_fp_rate(pred, gt, forbidden) == 30.0);
        // Frames where ground truth itself is forbidden do not count.
        std::vector<LabelMap> gt_forb(10, clean);
        gt_forb[0] = spurious;
        CHECK(forbidden_fp_rate(pred, gt_forb, forbidden) == 20.0);
    }
    {
        const std::vector<LabelMap> pred(2, clean), gt(3, clean);
        CHECK_THROWS_AS(forbidden_fp_rate(pred, gt, forbidden), DataError);
    }
}
