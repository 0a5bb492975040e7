#pragma once

#include <cmath>

namespace tvx {

// Points and tangent vectors on the unit torus T^2 = (R/Z)^2.  Positions are
// stored as plain R^2 values; all metric quantities go through wrap_sym so the
// choice of representative never matters.
struct vec2 {
    double x = 0.0, y = 0.0;

    vec2 operator+(vec2 o) const { return {x + o.x, y + o.y}; }
    vec2 operator-(vec2 o) const { return {x - o.x, y - o.y}; }
    vec2 operator-() const { return {-x, -y}; }
    vec2 operator*(double s) const { return {x * s, y * s}; }
    vec2& operator+=(vec2 o) { x += o.x; y += o.y; return *this; }
    vec2& operator-=(vec2 o) { x -= o.x; y -= o.y; return *this; }
};

inline vec2 operator*(double s, vec2 v) { return v * s; }
inline double dot(vec2 a, vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm2(vec2 a) { return dot(a, a); }
inline double norm(vec2 a) { return std::sqrt(norm2(a)); }

// Rotation by the symplectic matrix J = [[0,1],[-1,0]]:  J v = (v_y, -v_x).
inline vec2 jrot(vec2 v) { return {v.y, -v.x}; }

// Representative in [-1/2, 1/2)^2 (exact in floating point: floor is exact).
inline double wrap_sym(double t) { return t - std::floor(t + 0.5); }
inline vec2 wrap_sym(vec2 p) { return {wrap_sym(p.x), wrap_sym(p.y)}; }

// Representative in [0, 1)^2.
inline double wrap_unit(double t) { return t - std::floor(t); }
inline vec2 wrap_unit(vec2 p) { return {wrap_unit(p.x), wrap_unit(p.y)}; }

// Geodesic distance on the torus.
inline double wrap_dist(vec2 a, vec2 b) { return norm(wrap_sym(a - b)); }

}  // namespace tvx
