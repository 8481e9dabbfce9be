#pragma once

#include <array>

namespace navseg {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct PointPair {
    Point2 pixel;   // image coordinates
    Point2 ground;  // ground-plane meters
};

// Plane projective transform, row-major 3x3, normalized so m[8] == 1.
struct Homography {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return Homography{}; }
    static Homography from_matrix(const std::array<double, 9>& values);

    Point2 apply(Point2 p) const;
    Homography inverse() const;
    double determinant() const;
};

// Direct linear transform from exactly four correspondences. No three pixel
// points may be collinear.
Homography homography_from_points(const std::array<PointPair, 4>& pairs);

}  // namespace navseg
