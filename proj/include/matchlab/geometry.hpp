#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "matchlab/error.hpp"

namespace matchlab {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double squared_distance(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Axis-aligned rectangle [x0,x1] x [y0,y1].
struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool contains(const Point& p) const {
    return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
  }
};

inline Rect intersect(const Rect& a, const Rect& b) {
  Rect r;
  r.x0 = std::max(a.x0, b.x0);
  r.y0 = std::max(a.y0, b.y0);
  r.x1 = std::min(a.x1, b.x1);
  r.y1 = std::min(a.y1, b.y1);
  if (r.empty()) return Rect{0, 0, 0, 0};
  return r;
}

inline const Rect unit_square{0.0, 0.0, 1.0, 1.0};

// A sample {x_i} in the unit square; the empirical measure of the cloud.
struct PointCloud {
  std::vector<Point> points;

  std::size_t size() const { return points.size(); }
  const Point& operator[](std::size_t i) const { return points[i]; }
};

// Coordinates are required to live in the unit square; anything more than
// 1e-12 outside is rejected.
inline void validate_cloud(const PointCloud& cloud) {
  constexpr double tol = 1e-12;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point& p = cloud[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < -tol || p.x > 1.0 + tol ||
        p.y < -tol || p.y > 1.0 + tol) {
      fail(errc::out_of_domain,
           "point " + std::to_string(i) + " = (" + std::to_string(p.x) + ", " +
               std::to_string(p.y) + ") is outside the unit square");
    }
  }
}

} // namespace matchlab
