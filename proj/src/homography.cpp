#include "navseg/homography.hpp"

#include <cmath>
#include <string>

#include "navseg/errors.hpp"

namespace navseg {

namespace {

// Gaussian elimination with partial pivoting on an n x n system.
void solve_linear(std::array<std::array<double, 9>, 8>& aug, std::array<double, 8>& out) {
    constexpr int n = 8;
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(aug[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)]) >
                std::abs(aug[static_cast<std::size_t>(pivot)][static_cast<std::size_t>(col)]))
                pivot = r;
        if (std::abs(aug[static_cast<std::size_t>(pivot)][static_cast<std::size_t>(col)]) < 1e-12)
            throw DataError("homography: degenerate correspondences, singular system");
        std::swap(aug[static_cast<std::size_t>(col)], aug[static_cast<std::size_t>(pivot)]);
        const double inv = 1.0 / aug[static_cast<std::size_t>(col)][static_cast<std::size_t>(col)];
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = aug[static_cast<std::size_t>(r)][static_cast<std::size_t>(col)] * inv;
            if (f == 0.0) continue;
            for (int c = col; c <= n; ++c)
                aug[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] -=
                    f * aug[static_cast<std::size_t>(col)][static_cast<std::size_t>(c)];
        }
    }
    for (int i = 0; i < n; ++i)
        out[static_cast<std::size_t>(i)] = aug[static_cast<std::size_t>(i)][8] /
                                           aug[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
}

double cross(Point2 a, Point2 b, Point2 c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

}  // namespace

Homography Homography::from_matrix(const std::array<double, 9>& values) {
    if (values[8] == 0.0) throw DataError("homography: bottom-right entry must be nonzero");
    Homography h;
    for (std::size_t i = 0; i < 9; ++i) h.m[i] = values[i] / values[8];
    if (std::abs(h.determinant()) < 1e-15) throw DataError("homography: singular matrix");
    return h;
}

Point2 Homography::apply(Point2 p) const {
    const double w = m[6] * p.x + m[7] * p.y + m[8];
    if (std::abs(w) < 1e-15)
        throw DataError("homography: point (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                        ") maps to infinity");
    return {(m[0] * p.x + m[1] * p.y + m[2]) / w, (m[3] * p.x + m[4] * p.y + m[5]) / w};
}

double Homography::determinant() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

Homography Homography::inverse() const {
    const double det = determinant();
    if (std::abs(det) < 1e-15) throw DataError("homography: singular, cannot invert");
    const double inv = 1.0 / det;
    std::array<double, 9> a{};
    a[0] = (m[4] * m[8] - m[5] * m[7]) * inv;
    a[1] = (m[2] * m[7] - m[1] * m[8]) * inv;
    a[2] = (m[1] * m[5] - m[2] * m[4]) * inv;
    a[3] = (m[5] * m[6] - m[3] * m[8]) * inv;
    a[4] = (m[0] * m[8] - m[2] * m[6]) * inv;
    a[5] = (m[2] * m[3] - m[0] * m[5]) * inv;
    a[6] = (m[3] * m[7] - m[4] * m[6]) * inv;
    a[7] = (m[1] * m[6] - m[0] * m[7]) * inv;
    a[8] = (m[0] * m[4] - m[1] * m[3]) * inv;
    return from_matrix(a);
}

Homography homography_from_points(const std::array<PointPair, 4>& pairs) {
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b)
            for (int c = b + 1; c < 4; ++c)
                if (std::abs(cross(pairs[static_cast<std::size_t>(a)].pixel,
                                   pairs[static_cast<std::size_t>(b)].pixel,
                                   pairs[static_cast<std::size_t>(c)].pixel)) < 1e-9)
                    throw DataError("homography: pixel points " + std::to_string(a) + "," +
                                    std::to_string(b) + "," + std::to_string(c) + " are collinear");

    // Two rows per correspondence in the unknowns (m0..m7), with m8 = 1:
    //   x*m0 + y*m1 + m2 - u*x*m6 - u*y*m7 = u
    //   x*m3 + y*m4 + m5 - v*x*m6 - v*y*m7 = v
    std::array<std::array<double, 9>, 8> aug{};
    for (int i = 0; i < 4; ++i) {
        const Point2 s = pairs[static_cast<std::size_t>(i)].pixel;
        const Point2 d = pairs[static_cast<std::size_t>(i)].ground;
        auto& r0 = aug[static_cast<std::size_t>(2 * i)];
        auto& r1 = aug[static_cast<std::size_t>(2 * i + 1)];
        r0 = {s.x, s.y, 1.0, 0.0, 0.0, 0.0, -d.x * s.x, -d.x * s.y, d.x};
        r1 = {0.0, 0.0, 0.0, s.x, s.y, 1.0, -d.y * s.x, -d.y * s.y, d.y};
    }
    std::array<double, 8> sol{};
    solve_linear(aug, sol);
    std::array<double, 9> mat{sol[0], sol[1], sol[2], sol[3], sol[4], sol[5], sol[6], sol[7], 1.0};
    return Homography::from_matrix(mat);
}

}  // namespace navseg
