#pragma once

// Test-only reference implementations. Nothing here shares code with the
// library's collision search or return-time detection, except `shadow`, which
// restarts each flight from the library's post-collision state.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "lorentz/flow.hpp"
#include "lorentz/geometry.hpp"

namespace naive {

using lorentz::Cell;
using lorentz::ScattererConfig;
using lorentz::Vec2;

struct Hit {
    double t{0.0};
    Vec2 center;
    double radius{0.0};
    int disk{-1};
    Cell cell;
};

// Entry root of every disk translate in a (2 reach + 1)^2 block of cells
// around q; roots below `skip` are ignored, so a ray leaving a disk does not
// re-hit it.
inline std::optional<Hit> collision(Vec2 q, Vec2 v, const ScattererConfig& config, int reach = 3,
                                    double skip = 1e-10) {
    std::optional<Hit> best;
    const auto cx = static_cast<std::int64_t>(std::floor(q.x));
    const auto cy = static_cast<std::int64_t>(std::floor(q.y));
    for (std::int64_t i = cx - reach; i <= cx + reach; ++i) {
        for (std::int64_t j = cy - reach; j <= cy + reach; ++j) {
            for (std::size_t d = 0; d < config.size(); ++d) {
                const auto& disk = config.disk(d);
                const Vec2 c{static_cast<double>(i) + disk.center.x, static_cast<double>(j) + disk.center.y};
                const Vec2 w = q - c;
                const double b = w.x * v.x + w.y * v.y;
                const double cc = w.x * w.x + w.y * w.y - disk.radius * disk.radius;
                const double disc = b * b - cc;
                if (disc < 0.0) continue;
                const double t = -b - std::sqrt(disc);
                if (t <= skip) continue;
                if (!best || t < best->t) best = Hit{t, c, disk.radius, static_cast<int>(d), Cell{i, j}};
            }
        }
    }
    return best;
}

inline Vec2 mirror(Vec2 v, Vec2 n) {
    const double k = 2.0 * (v.x * n.x + v.y * n.y);
    return {v.x - k * n.x, v.y - k * n.y};
}

// A trajectory as a list of ballistic segments starting at times t0.
struct Segment {
    double t0{0.0};
    Vec2 q;
    Vec2 v;
};

class Trajectory {
public:
    Trajectory(Vec2 q, Vec2 v, double horizon, const ScattererConfig& config) {
        double t = 0.0;
        segs_.push_back({0.0, q, v});
        while (t <= horizon) {
            const auto h = collision(q, v, config);
            if (!h) break;
            q = q + h->t * v;
            const Vec2 n = (q - h->center) * (1.0 / h->radius);
            v = mirror(v, n);
            const double len = std::sqrt(v.x * v.x + v.y * v.y);
            v = v * (1.0 / len);
            t += h->t;
            segs_.push_back({t, q, v});
        }
    }

    // Long orbits separate from any independent re-computation after a few
    // time units, so each flight starts from the library's post-collision
    // state and only its length and end point come from the naive scan.
    // `worst` receives the largest flight-time discrepancy.
    static Trajectory shadow(Vec2 q, Vec2 v, double horizon, const ScattererConfig& config, double& worst) {
        Trajectory out;
        worst = 0.0;
        lorentz::TrackState s = lorentz::TrackState::from_phase({q, v}, config);
        double t = 0.0;
        out.segs_.push_back({0.0, q, v});
        while (t <= horizon) {
            const Vec2 start = s.plane_position();
            const Vec2 dir = s.vel;
            const auto h = collision(start, dir, config);
            if (!h) break;
            const auto step = lorentz::advance_to_collision(s, config);
            worst = std::max(worst, std::abs(step.time - h->t));
            t += h->t;
            out.segs_.push_back({t, s.plane_position(), s.vel});
        }
        return out;
    }

    // State at time t with the outgoing-velocity convention at collisions.
    [[nodiscard]] Segment at(double t) const {
        auto it = std::upper_bound(segs_.begin(), segs_.end(), t,
                                   [](double x, const Segment& s) { return x < s.t0; });
        const Segment& s = *(it - 1);
        return {t, s.q + (t - s.t0) * s.v, s.v};
    }
    [[nodiscard]] const std::vector<Segment>& segments() const { return segs_; }

private:
    Trajectory() = default;
    std::vector<Segment> segs_;
};

enum class Metric { Phase, Position, PositionModulo };

inline double angle(Vec2 a, Vec2 b) {
    const double c = std::clamp(a.x * b.x + a.y * b.y, -1.0, 1.0);
    return std::acos(c);
}

inline double wrapped(double d) { return d - std::round(d); }

inline double distance(const Segment& s, const Segment& s0, Metric metric) {
    if (metric == Metric::PositionModulo) {
        const double dx = wrapped(s.q.x - s0.q.x);
        const double dy = wrapped(s.q.y - s0.q.y);
        return std::sqrt(dx * dx + dy * dy);
    }
    const Vec2 d = s.q - s0.q;
    const double pos = std::sqrt(d.x * d.x + d.y * d.y);
    return metric == Metric::Phase ? std::max(pos, angle(s.v, s0.v)) : pos;
}

// inf{t > eps : d(x_t, x_0) < eps} by scanning a grid of step dt from t = eps
// and bisecting the first bracket. Returns nullopt if nothing is found up to cap.
inline std::optional<double> dense_return(const Trajectory& traj, double eps, double cap, Metric metric,
                                          double dt = 1e-4) {
    const Segment s0 = traj.at(0.0);
    // on a free flight the distance at t = eps is eps itself up to round-off
    auto inside = [&](double t) { return distance(traj.at(t), s0, metric) < eps - 1e-12; };
    if (inside(eps)) return eps;
    double prev = eps;
    const auto steps = static_cast<std::uint64_t>(std::ceil((cap - eps) / dt));
    for (std::uint64_t k = 1; k <= steps; ++k) {
        const double t = std::min(cap, eps + static_cast<double>(k) * dt);
        if (inside(t)) {
            double lo = prev, hi = t;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                (inside(mid) ? hi : lo) = mid;
            }
            return hi;
        }
        prev = t;
    }
    return std::nullopt;
}

}  // namespace naive
