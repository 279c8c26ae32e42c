#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <numbers>

namespace lorentz {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Plain 2D vector used for positions and directions.
struct Vec2 {
    double x{0.0};
    double y{0.0};

    constexpr Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    friend constexpr Vec2 operator*(double s, Vec2 v) { return {v.x * s, v.y * s}; }
    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }

    constexpr bool operator==(const Vec2&) const = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
/// z-component of the 3D cross product; positive when b is counter-clockwise from a.
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
constexpr double norm2(Vec2 a) { return dot(a, a); }
inline Vec2 normalized(Vec2 a) {
    const double n = norm(a);
    return {a.x / n, a.y / n};
}
inline Vec2 unit_from_angle(double theta) { return {std::cos(theta), std::sin(theta)}; }
/// Counter-clockwise rotation by theta.
inline Vec2 rotate(Vec2 a, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * a.x - s * a.y, s * a.x + c * a.y};
}
/// Angle in (-pi, pi] that rotates a onto b.
inline double signed_angle(Vec2 a, Vec2 b) { return std::atan2(cross(a, b), dot(a, b)); }

/// Lattice cell label in Z^2.
struct Cell {
    std::int64_t x{0};
    std::int64_t y{0};

    constexpr Cell operator+(Cell o) const { return {x + o.x, y + o.y}; }
    constexpr Cell operator-(Cell o) const { return {x - o.x, y - o.y}; }
    constexpr Cell operator-() const { return {-x, -y}; }
    constexpr Cell& operator+=(Cell o) { x += o.x; y += o.y; return *this; }
    constexpr auto operator<=>(const Cell&) const = default;

    constexpr Vec2 as_vec() const { return {static_cast<double>(x), static_cast<double>(y)}; }
};

/// Floor division for possibly negative numerators.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    const std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

}  // namespace lorentz
