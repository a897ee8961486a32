#pragma once

#include <cmath>

namespace dwiplan {

// In-plane point or direction, world millimetres.
struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline Vec2 operator*(Vec2 v, double s) { return {s * v.x, s * v.y}; }

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
// z-component of the 3d cross product; signed area factor.
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

inline Vec2 normalized(Vec2 v) {
    double n = norm(v);
    return n > 0.0 ? Vec2{v.x / n, v.y / n} : Vec2{0.0, 0.0};
}

inline Vec2 unit_from_deg(double angle_deg) {
    double rad = angle_deg * (3.14159265358979323846 / 180.0);
    return {std::cos(rad), std::sin(rad)};
}

// Smallest separation between two directions on the circle, degrees in [0, 180].
inline double angular_separation_deg(double a_deg, double b_deg) {
    double d = std::fmod(std::fabs(a_deg - b_deg), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

} // namespace dwiplan
