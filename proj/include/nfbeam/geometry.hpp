// SPDX-License-Identifier: Apache-2.0
//
// Small 3D geometry toolkit: vectors, axis-aligned boxes, segment/box
// intersection and the spherical coordinate convention used throughout.
//
// Convention (frozen): a focal point (theta, phi, r) maps to Cartesian
//   x = r * cos(phi) * cos(theta)
//   y = r * cos(phi) * sin(theta)
//   z = r * sin(phi)
// theta is azimuth (positive toward +y), phi is elevation (positive toward
// +z), r is the distance from the array centroid.

#pragma once

#include <cmath>
#include <stdexcept>

namespace nfbeam {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3& operator+=(const Vec3& o) {
        x += o.x;
        y += o.y;
        z += o.z;
        return *this;
    }

    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    double norm_sq() const { return x * x + y * y + z * z; }

    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

// Axis-aligned box, used for buildings.
struct Aabb {
    Vec3 lo;
    Vec3 hi;

    bool valid() const { return lo.x < hi.x && lo.y < hi.y && lo.z < hi.z; }

    bool contains(const Vec3& p) const {
        return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z &&
               p.z <= hi.z;
    }

    bool contains_strict(const Vec3& p) const {
        return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y && p.z > lo.z && p.z < hi.z;
    }

    bool overlaps(const Aabb& o) const {
        return lo.x < o.hi.x && hi.x > o.lo.x && lo.y < o.hi.y && hi.y > o.lo.y &&
               lo.z < o.hi.z && hi.z > o.lo.z;
    }

    Vec3 center() const { return {(lo.x + hi.x) / 2, (lo.y + hi.y) / 2, (lo.z + hi.z) / 2}; }
};

// True when the open segment a->b passes through the interior of the box.
// Touching a face or an edge tangentially does not count as blocked.
inline bool segment_intersects_box(const Vec3& a, const Vec3& b, const Aabb& box) {
    const double eps = 1e-12;
    double t0 = 0.0, t1 = 1.0;
    const double d[3] = {b.x - a.x, b.y - a.y, b.z - a.z};
    const double o[3] = {a.x, a.y, a.z};
    const double lo[3] = {box.lo.x, box.lo.y, box.lo.z};
    const double hi[3] = {box.hi.x, box.hi.y, box.hi.z};
    for (int i = 0; i < 3; ++i) {
        if (std::abs(d[i]) < eps) {
            if (o[i] <= lo[i] || o[i] >= hi[i]) return false;
        } else {
            double inv = 1.0 / d[i];
            double ta = (lo[i] - o[i]) * inv;
            double tb = (hi[i] - o[i]) * inv;
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 >= t1) return false;
        }
    }
    // Require a positive-length interval strictly inside the segment.
    return t1 > t0 + eps && t1 > eps && t0 < 1.0 - eps;
}

// Spherical focal-point coordinates; see the convention at the top.
struct FocalPoint {
    double theta = 0.0;  // azimuth, radians
    double phi = 0.0;    // elevation, radians
    double r = 0.0;      // distance, meters
};

inline Vec3 focal_to_cart(const FocalPoint& fp) {
    const double cp = std::cos(fp.phi);
    return {fp.r * cp * std::cos(fp.theta), fp.r * cp * std::sin(fp.theta),
            fp.r * std::sin(fp.phi)};
}

inline FocalPoint cart_to_focal(const Vec3& p) {
    const double r = p.norm();
    if (r <= 0.0) throw std::domain_error("cart_to_focal: zero-length vector");
    return {std::atan2(p.y, p.x), std::asin(p.z / r), r};
}

inline constexpr double deg_to_rad(double d) { return d * 3.14159265358979323846 / 180.0; }
inline constexpr double rad_to_deg(double r) { return r * 180.0 / 3.14159265358979323846; }

}  // namespace nfbeam
